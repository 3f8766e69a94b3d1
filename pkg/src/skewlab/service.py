"""HTTP facade over the experiment drivers.

Every subcommand is a POST endpoint taking the same two-block request
(system + run parameters, all optional, defaulting to the calibrated example
system) and returning a typed report.  The server holds no state and no
cache: a request fully determines its report, seeds included, so replays and
horizontal scaling are trivial.  Experiments run synchronously on the worker
-- the heavyweight ones take minutes at default sizes, so size the client
timeout accordingly (the bundled CLI disables its own).
"""
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__, experiments
from .config import ExperimentConfig, ConfigError, default_config

_DS = default_config()["system"]
_DR = default_config()["run"]


class SystemParams(BaseModel):
    """The skew product under study: integer matrix, driving function f as
    'k1,k2,cos,sin' terms joined by ';', lattice source, bump shape."""
    model_config = ConfigDict(extra="forbid")
    a: int = _DS["a"]
    b: int = _DS["b"]
    c: int = _DS["c"]
    d: int = _DS["d"]
    f_terms: str = _DS["f_terms"]
    group_file: str = _DS["group_file"]
    ball_radius: float = _DS["ball_radius"]
    plane_width: float = _DS["plane_width"]
    angle_width: float = _DS["angle_width"]
    amplitude: float = _DS["amplitude"]
    mean_offset: float = _DS["mean_offset"]


class RunParams(BaseModel):
    """Sampling sizes, grids (comma-separated), seeds and pinned oracles;
    every field is consumed by at least one experiment and ignored by the
    rest, so one request shape serves all endpoints."""
    model_config = ConfigDict(extra="forbid")
    seed: int = _DR["seed"]
    samples: int = _DR["samples"]
    k_grid: str = _DR["k_grid"]
    n_grid: str = _DR["n_grid"]
    n: int = _DR["n"]
    char_n: int = _DR["char_n"]
    beta: float = _DR["beta"]
    epsilon: float = _DR["epsilon"]
    b_max: float = _DR["b_max"]
    step: float = _DR["step"]
    exponent: float = _DR["exponent"]
    green_kubo_kmax: int = _DR["green_kubo_kmax"]
    homoclinic_K: int = _DR["homoclinic_K"]
    fiber_reps: int = _DR["fiber_reps"]
    sigma2_fiber: float = _DR["sigma2_fiber"]
    sigma2_base: float = _DR["sigma2_base"]
    ks_dt: float = _DR["ks_dt"]
    ks_dx: float = _DR["ks_dx"]
    tail_n_grid: str = _DR["tail_n_grid"]
    tail_aux_grid: str = _DR["tail_aux_grid"]
    tail_aux_samples: int = _DR["tail_aux_samples"]
    bootstrap: int = _DR["bootstrap"]
    multicov_T_grid: str = _DR["multicov_T_grid"]
    multicov_delta: float = _DR["multicov_delta"]
    multicov_samples: int = _DR["multicov_samples"]
    resid_rows: int = _DR["resid_rows"]
    resid_n_grid: str = _DR["resid_n_grid"]
    resid_threshold: float = _DR["resid_threshold"]
    threads: int = _DR["threads"]


class ExperimentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    system: SystemParams = Field(default_factory=SystemParams)
    run: RunParams = Field(default_factory=RunParams)


class FitBlock(BaseModel):
    exponent: float
    log_constant: float
    constant: float
    stderr: float
    range: list[float]


class ConstantsReport(BaseModel):
    experiment: str
    seed: int
    samples: int
    sigma2_base: float
    sigma2_base_stderr: float
    sigma2_fiber: float
    sigma2_fiber_err: float
    autocorr_b_max: float
    autocorr_step: float
    homoclinic_sum: float
    homoclinic_tail: float
    homoclinic_K: int
    correlation_constant: float
    correlation_constant_pinned: float
    variance_constant: float
    variance_constant_pinned: float
    elapsed_s: float


class CorrelationsReport(BaseModel):
    experiment: str
    seed: int
    samples: int
    fiber_reps: int
    lags: list[int]
    values: list[float]
    stderrs: list[float]
    predicted: list[float]
    fit: FitBlock | None
    fit_error: str
    elapsed_s: float


class VarianceReport(BaseModel):
    experiment: str
    seed: int
    samples: int
    n_grid: list[int]
    variances: list[float]
    stderrs: list[float]
    fit: FitBlock | None
    fit_error: str
    target_constant: float
    constant_ratios: list[float]
    elapsed_s: float


class MomentBlock(BaseModel):
    mean: float
    std: float
    kurtosis: float


class DistributionReport(BaseModel):
    experiment: str
    seed: int
    samples: int
    n: int
    char_n: int
    exponent: float
    ks: dict[str, float]
    max_pairwise_ks: float
    char_distance: float
    char_t_range: list[float]
    char_t_points: int
    moments: dict[str, MomentBlock]
    laws: dict[str, list[float]]
    elapsed_s: float


class TailBlock(BaseModel):
    beta: float
    n_grid: list[int]
    probabilities: list[float]
    stderrs: list[float]
    non_increasing: bool
    aux_n_grid: list[int]
    aux_samples: int
    aux_probabilities: list[float]
    aux_stderrs: list[float]
    sqrt_n_slope: float
    sqrt_n_slope_bse: float
    sqrt_n_intercept: float
    bootstrap: int


class MulticovFit(BaseModel):
    rate: float
    rate_stderr: float
    log_at_zero: float
    points_used: int


class MulticovBlock(BaseModel):
    delta: float
    T_grid: list[float]
    covariances: list[float]
    stderrs: list[float]
    samples: int
    fit: MulticovFit | None
    fit_error: str


class OccupationTable(BaseModel):
    n: int
    epsilon: float
    interval_scale: int
    samples: int
    seed: int
    mean_I: float
    mean_I_err: float
    second_I: float
    second_I_err: float
    third_I: float
    third_I_err: float
    cross_IJ_scaled: float
    cross_IJ_scaled_err: float
    cross_JK_scaled: float
    cross_JK_scaled_err: float


class OccupationBlock(BaseModel):
    epsilon: float
    n_grid: list[int]
    tables: list[OccupationTable]
    fits: dict[str, FitBlock | None]
    fit_errors: dict[str, str]


class LemmasReport(BaseModel):
    experiment: str
    seed: int
    samples: int
    tail: TailBlock
    multicov: MulticovBlock
    occupation: OccupationBlock
    elapsed_s: float


class DecompositionReport(BaseModel):
    experiment: str
    seed: int
    rows: int
    threshold: float
    exponent: float
    n_grid: list[int]
    exceedance: list[float]
    stderrs: list[float]
    residual_rms: list[float]
    residual_max: list[float]
    non_increasing: bool
    elapsed_s: float


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str


class SelftestReport(BaseModel):
    experiment: str
    seed: int
    checks: list[CheckResult]
    passed: int
    failed: int
    all_passed: bool
    elapsed_s: float


class HealthReport(BaseModel):
    status: str
    version: str


app = FastAPI(
    title="skewlab",
    version=__version__,
    description="Skew-product simulation laboratory: polynomial mixing, "
                "n^{3/2} variance growth, and the local-time limit law of a "
                "toral automorphism driving a hyperbolic-surface geodesic "
                "flow.")


def _run(fn, req: ExperimentRequest):
    try:
        cfg = ExperimentConfig.from_dict({"system": req.system.model_dump(),
                                          "run": req.run.model_dump()})
        return fn(cfg)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.get("/health", response_model=HealthReport)
def health():
    return {"status": "ok", "version": __version__}


@app.get("/defaults")
def defaults_doc():
    """The full default config, ready to edit and POST back."""
    return ExperimentConfig().to_dict()


@app.post("/experiments/constants", response_model=ConstantsReport)
def constants(req: ExperimentRequest):
    return _run(experiments.constants_report, req)


@app.post("/experiments/correlations", response_model=CorrelationsReport)
def correlations(req: ExperimentRequest):
    return _run(experiments.correlations_report, req)


@app.post("/experiments/variance-scan", response_model=VarianceReport)
def variance_scan(req: ExperimentRequest):
    return _run(experiments.variance_report, req)


@app.post("/experiments/distribution", response_model=DistributionReport)
def distribution(req: ExperimentRequest):
    return _run(experiments.distribution_report, req)


@app.post("/experiments/lemmas", response_model=LemmasReport)
def lemmas(req: ExperimentRequest):
    return _run(experiments.lemmas_report, req)


@app.post("/experiments/decomposition", response_model=DecompositionReport)
def decomposition(req: ExperimentRequest):
    return _run(experiments.decomposition_report, req)


@app.post("/experiments/selftest", response_model=SelftestReport)
def selftest(req: ExperimentRequest):
    return _run(experiments.selftest_report, req)
