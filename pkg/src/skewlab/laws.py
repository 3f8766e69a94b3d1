"""Reference probability laws: random walk in random scenery, Brownian local
time, and the Kesten-Spitzer limit sampler ∫L₁(x)dW₊ + ∫L₁(−x)dW₋, plus the
EmpiricalLaw container, its serialization, and characteristic-function
distance.  Laws are compared to the dynamical system's, never coupled to it.
"""
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .defaults import KS_DT, KS_DX, SIGMA2_BASE, SIGMA2_FIBER
from .rng import stream

LAW_SCHEMA_VERSION = 1
# values above this go to a raw float64 sidecar instead of inline JSON
RAW_THRESHOLD = 65536


@dataclass(frozen=True)
class EmpiricalLaw:
    """A sampled law: values of (normalized) sums, with the n, the
    normalization exponent, and the seed that produced them."""
    values: np.ndarray
    n: int
    exponent: float
    seed: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise ValueError("empirical law must be non-empty")
        if not np.all(np.isfinite(v)):
            raise ValueError("empirical law has non-finite values")
        object.__setattr__(self, "values", v)


def save_law(law, path, raw=None):
    """JSON {n, exponent, seed, values} or, for large sets, a JSON sidecar
    plus raw little-endian float64 columns in <path>.f64.  Returns the list
    of files written (the sidecar, if any, comes second)."""
    if raw is None:
        raw = law.values.size > RAW_THRESHOLD
    doc = {"schema_version": LAW_SCHEMA_VERSION, "n": int(law.n),
           "exponent": float(law.exponent), "seed": int(law.seed)}
    written = [path]
    if raw:
        data_file = os.path.basename(path) + ".f64"
        law.values.astype("<f8").tofile(path + ".f64")
        doc["count"] = int(law.values.size)
        doc["dtype"] = "<f8"
        doc["data_file"] = data_file
        written.append(path + ".f64")
    else:
        doc["values"] = [float(v) for v in law.values]
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return written


def load_law(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version", 1) != LAW_SCHEMA_VERSION:
        raise ValueError("unsupported law schema_version")
    if "values" in doc:
        vals = np.asarray(doc["values"], dtype=float)
    else:
        raw_path = os.path.join(os.path.dirname(path) or ".", doc["data_file"])
        vals = np.fromfile(raw_path, dtype=doc["dtype"])
        if vals.size != doc["count"]:
            raise ValueError("law sidecar count mismatch")
    return EmpiricalLaw(vals, doc["n"], doc["exponent"], doc["seed"])


@dataclass(frozen=True)
class SceneryConfig:
    """Lazy symmetric walk on Z plus i.i.d. Gaussian scenery.

    The walk takes steps in {-1,0,1} with P(+-1) = walk_variance/2, so the
    per-step variance is walk_variance exactly; defaults match the dynamical
    system (sigma^2(f) for the walk, Sigma^2(phi) for the scenery).
    """
    walk_variance: float = SIGMA2_BASE
    scenery_variance: float = SIGMA2_FIBER
    walk_support: tuple = (-1, 0, 1)

    def __post_init__(self):
        if not 0.0 < self.walk_variance <= 1.0:
            raise ValueError("walk_variance must lie in (0, 1]")
        if self.scenery_variance < 0.0:
            raise ValueError("scenery_variance must be >= 0")
        if tuple(self.walk_support) == (-1, 1):
            if self.walk_variance != 1.0:
                raise ValueError("support (-1,1) forces walk_variance = 1")
        elif tuple(self.walk_support) != (-1, 0, 1):
            raise ValueError("only the lazy +-1 step family is implemented")


def _row_bincount_reduce(idx, xi_std, rng, weights=None):
    """Shared flat-bincount kernel: per-row occupation counts of integer index
    paths (one bincount with per-row offsets), an independent N(0, xi_std)
    scenery value per occupied-range site, and per-row totals of count*xi.

    Unvisited sites inside a row's range also draw a scenery value; they
    multiply a zero count, so the output law is unchanged.
    """
    b = idx.shape[0]
    lo = idx.min(axis=1)
    width = idx.max(axis=1) - lo + 1
    off = np.zeros(b, dtype=np.int64)
    np.cumsum(width[:-1], out=off[1:])
    flat = (idx - lo[:, None] + off[:, None]).ravel()
    counts = np.bincount(flat, minlength=int(off[-1] + width[-1]))
    if weights is not None:
        counts = counts * weights
    xi = rng.normal(0.0, xi_std, size=counts.size)
    tot = counts * xi
    ends = np.add.accumulate(width)
    return np.add.reduceat(tot, np.r_[0, ends[:-1]])


def rwrs_values(cfg, n, samples, rng, block=2000):
    """samples draws of n^{-3/4} sum_{k<n} xi_{S_k}; positions are int32 and
    steps int8 so 10^4 x 2^14 blocks stay inside memory."""
    n = int(n)
    if n < 1:
        raise ValueError("n >= 1")
    v = cfg.walk_variance
    out = np.empty(samples)
    done = 0
    while done < samples:
        b = min(block, samples - done)
        u = rng.uniform(size=(b, n - 1))
        steps = np.zeros((b, n - 1), dtype=np.int8)
        steps[u < v / 2] = 1
        steps[u > 1 - v / 2] = -1
        del u
        pos = np.zeros((b, n), dtype=np.int32)
        np.cumsum(steps, axis=1, dtype=np.int32, out=pos[:, 1:])
        del steps
        out[done:done + b] = _row_bincount_reduce(
            pos, np.sqrt(cfg.scenery_variance), rng) / n ** 0.75
        done += b
    return out


def rwrs_sample(cfg, n, seed):
    """One draw of the normalized random walk in random scenery."""
    return float(rwrs_values(cfg, n, 1, stream(seed))[0])


def rwrs_law(cfg, n, samples, seed):
    return EmpiricalLaw(rwrs_values(cfg, n, int(samples), stream(seed)),
                        int(n), 0.75, int(seed))


@dataclass(frozen=True)
class LocalTimeProfile:
    """Occupation density of a time-1 path on a uniform grid of spacing dx;
    cell i covers [(lo+i) dx, (lo+i+1) dx)."""
    lo: int
    dx: float
    values: np.ndarray

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("local time is non-negative")
        mass = self.dx * self.values.sum()
        if abs(mass - 1.0) > 1e-6:
            raise ValueError(f"dx * sum(L) = {mass}, expected 1")

    @property
    def grid(self):
        return (self.lo + np.arange(len(self.values)) + 0.5) * self.dx


def local_time(path, dx):
    """Histogram occupation density of a path sampled at uniform times over
    [0,1].  A constant path is legal (all mass in one bin); otherwise dx must
    not exceed the path's range."""
    path = np.asarray(path, dtype=float)
    if path.ndim != 1 or path.size < 2:
        raise ValueError("path needs >= 2 points")
    if dx <= 0:
        raise ValueError("dx > 0")
    rng_ = path.max() - path.min()
    if rng_ > 0 and dx > rng_:
        raise ValueError(f"dx = {dx} exceeds path range {rng_}")
    dt = 1.0 / path.size
    idx = np.floor(path / dx).astype(np.int64)
    lo = int(idx.min())
    counts = np.bincount(idx - lo)
    return LocalTimeProfile(lo, float(dx), counts * (dt / dx))


def ks_limit_values(sigma, Sigma2, dx, dt, samples, rng):
    """samples draws of the limit: Brownian W with variance sigma^2 per unit
    time on [0,1] in steps dt, local time by occupation histogram at spacing
    dx, then sum_cells L1(cell) * N(0, Sigma2 dx) with one independent
    scenery increment per cell.  W+- per-unit-length variance is Sigma2
    itself (c_w = 1): then Var = Sigma2 * E[int L1^2 dx]
    = (8/3) Sigma2 / (sqrt(2 pi) sigma), the variance-growth constant."""
    if sigma <= 0:
        raise ValueError("sigma > 0")
    if Sigma2 < 0:
        raise ValueError("Sigma2 >= 0")
    nst = int(round(1.0 / dt))
    out = np.empty(samples)
    block = max(1, int(5e6) // nst)
    done = 0
    while done < samples:
        b = min(block, samples - done)
        incr = rng.normal(0.0, sigma * np.sqrt(dt), size=(b, nst))
        W = np.cumsum(incr, axis=1)
        del incr
        idx = np.floor(W / dx).astype(np.int32)
        del W
        # occupation time dt per sample point; L1 = occupation / dx
        out[done:done + b] = _row_bincount_reduce(
            idx, np.sqrt(Sigma2 * dx), rng, weights=dt / dx)
        done += b
    return out


def ks_limit_sample(sigma, Sigma2, dx=KS_DX, dt=KS_DT, seed=0):
    """One draw of the Kesten-Spitzer limit; deterministic per seed."""
    return float(ks_limit_values(sigma, Sigma2, dx, dt, 1, stream(seed))[0])


def ks_limit_law(sigma, Sigma2, dx=KS_DX, dt=KS_DT, samples=10000, seed=0):
    vals = ks_limit_values(sigma, Sigma2, dx, dt, int(samples), stream(seed))
    return EmpiricalLaw(vals, int(round(1.0 / dt)), 0.0, int(seed))


def char_fn_distance(lawA, lawB, t_grid):
    """max over t_grid of |empirical char fn A - empirical char fn B|."""
    a = np.asarray(getattr(lawA, "values", lawA), dtype=float)
    b = np.asarray(getattr(lawB, "values", lawB), dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("laws must be non-empty")
    t = np.asarray(t_grid, dtype=float)
    ca = np.exp(1j * t[:, None] * a[None, :]).mean(axis=1)
    cb = np.exp(1j * t[:, None] * b[None, :]).mean(axis=1)
    return float(np.abs(ca - cb).max())
