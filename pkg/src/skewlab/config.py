"""Experiment configuration: versioned INI files with three blocks (system,
run, output), every field defaulting to the concrete example system
A = [[2,1],[1,1]], f = sin(2 pi x1), calibrated bump fiber observable."""
import configparser
from dataclasses import dataclass, field

from . import defaults as D

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised with a section/field diagnostic; the CLI maps it to exit 2."""


def default_config():
    return {
        "system": {
            "a": 2, "b": 1, "c": 1, "d": 1,
            # trig terms of f as freq1,freq2,cos,sin tuples separated by ';'
            "f_terms": "1,0,0.0,1.0",
            "group_file": "",                   # empty = built-in octagon lattice
            "ball_radius": 4.5,
            "plane_width": D.BUMP_PLANE_WIDTH,
            "angle_width": D.BUMP_ANGLE_WIDTH,
            "amplitude": D.BUMP_AMPLITUDE,
            "mean_offset": D.BUMP_MEAN_OFFSET,
        },
        "run": {
            "seed": 1,
            "samples": 10000,
            "k_grid": "16,24,32,48,64,96,128,192,256",
            "n_grid": "1024,2048,4096,8192,16384",
            "n": 16384,
            "char_n": 4096,
            "beta": 0.25,
            "epsilon": 0.25,
            "b_max": D.SIGMA2_B_MAX,
            "step": D.SIGMA2_STEP,
            "exponent": 0.75,
            "green_kubo_kmax": 8,
            "homoclinic_K": 40,
            "fiber_reps": 4,
            "sigma2_fiber": D.SIGMA2_FIBER,     # pinned oracle for constant ratios
            "sigma2_base": D.SIGMA2_BASE,
            "ks_dt": D.KS_DT,
            "ks_dx": D.KS_DX,
            "tail_n_grid": "256,1024,4096",
            "tail_aux_grid": "8,16,32,64",
            "tail_aux_samples": 200000,
            "bootstrap": 200,
            "multicov_T_grid": "4,8,12",
            "multicov_delta": 0.25,
            "multicov_samples": 500000,
            "resid_rows": 500,
            "resid_n_grid": "1024,4096,16384",
            "resid_threshold": 0.1,
            "threads": 0,                       # 0 = leave BLAS pools alone
        },
        "output": {
            "format": "csv",
            "path": "",
        },
    }


_INT_FIELDS = {"a", "b", "c", "d", "seed", "samples", "n", "char_n",
               "green_kubo_kmax", "homoclinic_K", "fiber_reps", "bootstrap",
               "tail_aux_samples", "multicov_samples", "resid_rows", "threads"}
_FLOAT_FIELDS = {"ball_radius", "plane_width", "angle_width", "amplitude",
                 "mean_offset", "beta", "epsilon", "b_max", "step", "exponent",
                 "sigma2_fiber", "sigma2_base", "ks_dt", "ks_dx",
                 "multicov_delta", "resid_threshold"}


def _coerce(section, key, value):
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: cannot parse {value!r}")


def parse_grid(text, kind=int):
    try:
        grid = [kind(tok) for tok in str(text).replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}")
    if not grid:
        raise ConfigError(f"empty grid {text!r}")
    return grid


def parse_f_terms(text):
    terms = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 4:
            raise ConfigError(f"[system] f_terms: expected 4 fields per term, got {chunk!r}")
        try:
            terms.append(((int(parts[0]), int(parts[1])), float(parts[2]), float(parts[3])))
        except ValueError:
            raise ConfigError(f"[system] f_terms: cannot parse {chunk!r}")
    return terms


@dataclass
class ExperimentConfig:
    system: dict = field(default_factory=lambda: dict(default_config()["system"]))
    run: dict = field(default_factory=lambda: dict(default_config()["run"]))
    output: dict = field(default_factory=lambda: dict(default_config()["output"]))

    @classmethod
    def from_file(cls, path):
        cp = configparser.ConfigParser()
        cp.optionxform = str        # keys are case-sensitive (homoclinic_K)
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
        if cp.has_section("meta"):
            ver = cp.get("meta", "schema_version", fallback="1")
            if int(ver) != CONFIG_SCHEMA_VERSION:
                raise ConfigError(f"[meta] schema_version {ver} unsupported")
        cfg = cls()
        known = default_config()
        for section in cp.sections():
            if section not in ("meta", "system", "run", "output"):
                raise ConfigError(f"unknown section [{section}]")
        for section in ("system", "run", "output"):
            if not cp.has_section(section):
                continue
            for key, value in cp.items(section):
                if key not in known[section]:
                    raise ConfigError(f"[{section}] unknown field {key!r}")
                getattr(cfg, section)[key] = _coerce(section, key, value)
        return cfg

    @classmethod
    def from_dict(cls, doc):
        cfg = cls()
        known = default_config()
        for section in doc:
            if section not in ("schema_version", "system", "run", "output"):
                raise ConfigError(f"unknown section [{section}]")
        for section in ("system", "run", "output"):
            for key, value in (doc.get(section) or {}).items():
                if key not in known[section]:
                    raise ConfigError(f"[{section}] unknown field {key!r}")
                getattr(cfg, section)[key] = _coerce(section, key, value)
        return cfg

    def override(self, section, key, value):
        if value is None:
            return
        if key not in default_config()[section]:
            raise ConfigError(f"[{section}] unknown field {key!r}")
        getattr(self, section)[key] = _coerce(section, key, value)

    def to_dict(self):
        return {"schema_version": CONFIG_SCHEMA_VERSION,
                "system": dict(self.system), "run": dict(self.run),
                "output": dict(self.output)}

    def write(self, path_or_fp):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["meta"] = {"schema_version": str(CONFIG_SCHEMA_VERSION)}
        for section in ("system", "run", "output"):
            cp[section] = {k: str(v) for k, v in getattr(self, section).items()}
        if hasattr(path_or_fp, "write"):
            cp.write(path_or_fp)
        else:
            with open(path_or_fp, "w") as fh:
                cp.write(fh)
