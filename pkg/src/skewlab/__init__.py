"""Simulation and verification laboratory for a quasi-hyperbolic skew
product: a hyperbolic toral automorphism drives the geodesic flow on a
compact genus-2 hyperbolic surface, T(x, y) = (Ax, g_{f(x)} y).

Core layers (importable directly from the package): the base torus map and
its observables, the fiber surface with its flow/reduction/observable kit,
the coupled skew product, scenery-ensemble evaluation, the reference laws
(random walk in random scenery and the Brownian local-time limit), and the
estimators.  The HTTP service lives in skewlab.service, the CLI in
skewlab.cli; both wrap the drivers in skewlab.experiments.
"""

__version__ = "0.1.0"

from .rng import stream
from .torus import (ToralAutomorphism, CAT_MAP, TrigObservable, F_SIN,
                    apply_automorphism, apply_inverse, sample_torus,
                    ergodic_sum, green_kubo_sigma2, HomoclinicPair,
                    homoclinic_points, homoclinic_orbit_point,
                    homoclinic_sum)
from .geodesic import (FuchsianGroup, octagon_group, save_group, load_group,
                       ReducedFrame, flow, flow_reduced, reduce_bulk,
                       reduce_frame, reconstruct, BumpObservable,
                       evaluate_observable, sample_haar, haar_frames,
                       haar_acceptance_rate, fiber_autocorrelation,
                       autocorrelation_curve, sigma2_capital,
                       calibrate_mean_offset)
from .skew import (SkewState, SkewSystem, default_system, default_bump,
                   CompositeObservable, step, iterate, birkhoff_sum,
                   sample_sums_multi, sample_normalized_sums)
from .scenery import (OccupationProfile, occupation_counts, SceneryEnsemble,
                      decomposition_residual)
from .laws import (EmpiricalLaw, save_law, load_law, SceneryConfig,
                   rwrs_sample, rwrs_values, rwrs_law, LocalTimeProfile,
                   local_time, ks_limit_sample, ks_limit_values,
                   ks_limit_law, char_fn_distance)
from .stats import (CorrelationSeries, ExponentFit, correlation_series,
                    fit_power_law, variance_scan, ks_distance,
                    tail_probability, multi_correlation, occupation_moments,
                    series_to_csv, series_to_json)
from .config import ExperimentConfig, ConfigError, default_config
from . import defaults

__all__ = [
    "__version__", "stream",
    "ToralAutomorphism", "CAT_MAP", "TrigObservable", "F_SIN",
    "apply_automorphism", "apply_inverse", "sample_torus", "ergodic_sum",
    "green_kubo_sigma2", "HomoclinicPair", "homoclinic_points",
    "homoclinic_orbit_point", "homoclinic_sum",
    "FuchsianGroup", "octagon_group", "save_group", "load_group",
    "ReducedFrame", "flow", "flow_reduced", "reduce_bulk", "reduce_frame",
    "reconstruct", "BumpObservable", "evaluate_observable", "sample_haar",
    "haar_frames", "haar_acceptance_rate", "fiber_autocorrelation",
    "autocorrelation_curve", "sigma2_capital", "calibrate_mean_offset",
    "SkewState", "SkewSystem", "default_system", "default_bump",
    "CompositeObservable", "step", "iterate", "birkhoff_sum",
    "sample_sums_multi", "sample_normalized_sums",
    "OccupationProfile", "occupation_counts", "SceneryEnsemble",
    "decomposition_residual",
    "EmpiricalLaw", "save_law", "load_law", "SceneryConfig", "rwrs_sample",
    "rwrs_values", "rwrs_law", "LocalTimeProfile", "local_time",
    "ks_limit_sample", "ks_limit_values", "ks_limit_law", "char_fn_distance",
    "CorrelationSeries", "ExponentFit", "correlation_series",
    "fit_power_law", "variance_scan", "ks_distance", "tail_probability",
    "multi_correlation", "occupation_moments", "series_to_csv",
    "series_to_json",
    "ExperimentConfig", "ConfigError", "default_config", "defaults",
]
