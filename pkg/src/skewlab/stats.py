"""Estimators and scaling-law verdicts: correlation series along the skew
product, power-law fits with a significance filter, variance scans, KS and
tail statistics, multi-time flow correlations, and occupation moments."""
import csv
import json
from dataclasses import dataclass

import numpy as np

from .geodesic import flow_inplace, flow_reduced, haar_frames, reduce_bulk
from .laws import EmpiricalLaw
from .rng import stream
from .scenery import SceneryEnsemble
from .skew import _split_observable, sample_sums_multi

SERIES_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CorrelationSeries:
    """Monte Carlo values (with stderrs) indexed by strictly increasing lags;
    also reused as the container for variance scans (lags = n)."""
    lags: tuple
    values: np.ndarray
    stderrs: np.ndarray
    samples: int
    seed: int

    def __post_init__(self):
        lags = tuple(int(k) for k in self.lags)
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "stderrs", np.asarray(self.stderrs, dtype=float))
        if any(b <= a for a, b in zip(lags, lags[1:])):
            raise ValueError("lags must be strictly increasing")
        if self.samples > 1 and np.any(self.stderrs <= 0):
            raise ValueError("stderrs must be positive for samples > 1")


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    log_constant: float
    fit_stderr: float
    fit_range: tuple

    @property
    def constant(self):
        return float(np.exp(self.log_constant))


def correlation_series(system, phi, k_list, samples, seed, fiber_reps=4):
    """<phi o T^k, phi> for each requested lag, one incremental pass.

    samples counts independent base orbits; each is paired with fiber_reps
    Haar fiber starts (the fiber integral is the dominant noise source, so
    averaging it per orbit is the cheap variance reduction).  stderr comes
    from the spread of per-orbit means.  Draw discipline: base points from
    stream(seed) repeated fiber_reps times, fibers from stream(seed, 1).

    Orbits run through the ensemble in fixed-size chunks: rows are fully
    independent, so chunking changes no floats, only the peak footprint of
    the per-row anchor windows (10^5 x reps rows in one block would not fit).
    """
    k_list = sorted(int(k) for k in k_list)
    if k_list[0] < 0:
        raise ValueError("lags must be >= 0")
    if samples < 2:
        raise ValueError("samples >= 2")
    bump, base_term = _split_observable(phi)
    if base_term is not None:
        raise ValueError("correlation_series supports fiber-only observables")
    B, R = int(samples), int(fiber_reps)
    X_all = stream(seed).random((B, 2))
    fib_all = haar_frames(system.G, B * R, stream(seed, 1))
    kmax = k_list[-1]
    kset = set(k_list)
    block = 25_000
    per_orbit = {k: [] for k in k_list}
    for lo in range(0, B, block):
        hi = min(lo + block, B)
        X = np.repeat(X_all[lo:hi], R, axis=0)
        ens = SceneryEnsemble(system, X, fib_all[lo * R:hi * R],
                              half_window=64)
        v0 = bump(ens.fiber_frames())
        for k in range(kmax + 1):
            if k in kset:
                w = v0 * (v0 if k == 0 else bump(ens.fiber_frames()))
                per_orbit[k].append(w.reshape(hi - lo, R).mean(axis=1))
            if k < kmax:
                ens.advance(record_counts=False)
    values, stderrs = [], []
    for k in k_list:
        po = per_orbit[k][0] if len(per_orbit[k]) == 1 else np.concatenate(per_orbit[k])
        values.append(po.mean())
        stderrs.append(po.std(ddof=1) / np.sqrt(B))
    return CorrelationSeries(tuple(k_list), values, stderrs, B, int(seed))


def fit_power_law(series, fit_range=None, min_points=3):
    """OLS of log|value| on log k over fit_range, using only points with
    |value| > 3 stderr (correlations at large k drown in Monte Carlo noise
    unless filtered); errors if fewer than min_points survive."""
    if isinstance(series, CorrelationSeries):
        lags, vals, errs = np.array(series.lags, dtype=float), series.values, series.stderrs
    else:
        lags, vals, errs = (np.asarray(a, dtype=float) for a in series)
    if fit_range is None:
        fit_range = (lags[lags > 0].min() if (lags > 0).any() else 1.0, lags.max())
    kmin, kmax = fit_range
    use = (lags >= kmin) & (lags <= kmax) & (lags > 0) & (np.abs(vals) > 3.0 * errs)
    if use.sum() < min_points:
        raise ValueError(
            f"only {int(use.sum())} lags pass the significance filter in "
            f"[{kmin}, {kmax}]; need {min_points}")
    lx = np.log(lags[use])
    ly = np.log(np.abs(vals[use]))
    slope, icept = np.polyfit(lx, ly, 1)
    resid = ly - (icept + slope * lx)
    m = use.sum()
    sxx = ((lx - lx.mean()) ** 2).sum()
    se = np.sqrt(resid @ resid / max(m - 2, 1) / sxx) if m > 2 else 0.0
    return ExponentFit(float(slope), float(icept), float(se),
                       (float(kmin), float(kmax)))


def variance_scan(system, phi, n_list, samples, seed):
    """Sample variance of un-normalized Birkhoff sums at each n, with its
    power-law fit.  Degenerate observables (all-zero sums) make the fit fail,
    as the significance filter prescribes."""
    n_list = sorted(int(n) for n in n_list)
    sums = sample_sums_multi(system, phi, n_list, samples, seed, exponent=0.0)
    vals, errs = [], []
    for n in n_list:
        v = sums[n]
        var = v.var(ddof=1)
        m4 = np.mean((v - v.mean()) ** 4)
        errs.append(np.sqrt(max(m4 - var ** 2, 0.0) / len(v)))
        vals.append(var)
    if max(vals) == 0.0:
        raise ValueError("all variances are zero; no usable points to fit")
    series = CorrelationSeries(tuple(n_list), vals, errs, int(samples), int(seed))
    return series, fit_power_law(series)


def ks_distance(lawA, lawB):
    """Two-sample Kolmogorov-Smirnov sup distance of empirical CDFs."""
    a = np.sort(np.asarray(getattr(lawA, "values", lawA), dtype=float))
    b = np.sort(np.asarray(getattr(lawB, "values", lawB), dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("laws must be non-empty")
    allv = np.concatenate([a, b])
    ca = np.searchsorted(a, allv, side="right") / a.size
    cb = np.searchsorted(b, allv, side="right") / b.size
    return float(np.abs(ca - cb).max())


def tail_probability(system, n, beta, samples, seed):
    """Empirical P(S_n f > n^{1-beta}) over uniform starts."""
    if not 0.0 < beta < 0.5:
        raise ValueError("beta in (0, 1/2)")
    n, m = int(n), int(samples)
    X = stream(seed).random((m, 2))
    A = system.M.matrix
    s = np.zeros(m)
    for _ in range(n):
        s += system.f(X)
        X = (X @ A.T) % 1.0
    hit = s > n ** (1.0 - beta)
    p = hit.mean()
    return float(p), float(np.sqrt(p * (1.0 - p) / m))


def multi_correlation(G, phi_list, t_list, s_list, T, samples, seed,
                      block=500_000):
    """Cov( prod_i Phi_i(y g_{t_i}),  prod_j Phi_j(y g_{s_j + T}) ) along one
    Haar-started flow trajectory; phi_list pairs first with t_list, then with
    s_list.  stderr from the covariance influence function."""
    t_list, s_list = list(t_list), list(s_list)
    if len(phi_list) != len(t_list) + len(s_list):
        raise ValueError("phi_list must have len(t_list) + len(s_list) entries")
    if any(t > 0 for t in t_list) or any(s < 0 for s in s_list):
        raise ValueError("need t_list <= 0 <= s_list")
    if sorted(t_list) != t_list or sorted(s_list) != s_list:
        raise ValueError("t_list and s_list must be sorted")
    if T <= 0:
        raise ValueError("T > 0")
    times = t_list + [s + T for s in s_list]
    m = len(t_list)
    rng = stream(seed)
    P1s, P2s = [], []
    done = 0
    while done < samples:
        b = min(int(block), int(samples) - done)
        M = haar_frames(G, b, rng)
        P1 = np.ones(b)
        P2 = np.ones(b)
        cur = 0.0
        for i, tau in enumerate(times):
            dt = tau - cur
            if dt:
                if abs(dt) > 5.0:
                    flow_reduced(G, M, dt)
                else:
                    flow_inplace(M, dt)
                    reduce_bulk(G, M)
                cur = tau
            vals = phi_list[i](M)
            if i < m:
                P1 *= vals
            else:
                P2 *= vals
        P1s.append(P1)
        P2s.append(P2)
        done += b
    P1 = np.concatenate(P1s)
    P2 = np.concatenate(P2s)
    m1, m2 = P1.mean(), P2.mean()
    cov = (P1 * P2).mean() - m1 * m2
    infl = (P1 - m1) * (P2 - m2)
    se = infl.std(ddof=1) / np.sqrt(len(infl))
    return float(cov), float(se)


def occupation_moments(system, n, epsilon, samples, seed):
    """Moments of N(n, I) for I = [0,1) and of randomly placed sub-intervals
    J, K of length 1/[n^eps]: the local-time moment scalings behind the
    occupation bounds.  Returns a report dict with stderrs."""
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon in (0, 1/2)")
    n, m = int(n), int(samples)
    if n < 16:
        raise ValueError("n >= 16")
    scale = int(n ** epsilon)
    w = 1.0 / scale
    rng = stream(seed)
    X = rng.random((m, 2))
    aJ = rng.uniform(0.0, 1.0 - w, m)
    aK = rng.uniform(0.0, 1.0 - w, m)
    A = system.M.matrix
    s = np.zeros(m)
    NI = np.zeros(m)
    NJ = np.zeros(m)
    NK = np.zeros(m)
    for _ in range(n):
        NI += (s >= 0.0) & (s < 1.0)
        NJ += (s >= aJ) & (s < aJ + w)
        NK += (s >= aK) & (s < aK + w)
        s += system.f(X)
        X = (X @ A.T) % 1.0

    def mom(v):
        return float(v.mean()), float(v.std(ddof=1) / np.sqrt(m))

    report = {"n": n, "epsilon": float(epsilon), "interval_scale": scale,
              "samples": m, "seed": int(seed)}
    report["mean_I"], report["mean_I_err"] = mom(NI)
    report["second_I"], report["second_I_err"] = mom(NI ** 2)
    report["third_I"], report["third_I_err"] = mom(NI ** 3)
    c1, e1 = mom(NI * NJ)
    report["cross_IJ_scaled"], report["cross_IJ_scaled_err"] = scale * c1, scale * e1
    c2, e2 = mom(NJ * NK)
    report["cross_JK_scaled"], report["cross_JK_scaled_err"] = scale ** 2 * c2, scale ** 2 * e2
    return report


# --- serialization: CSV for the series, JSON with the fit block ---

def series_to_csv(series, path, index_name="k"):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([index_name, "value", "stderr"])
        for k, v, e in zip(series.lags, series.values, series.stderrs):
            wr.writerow([k, repr(float(v)), repr(float(e))])


def series_to_json(series, path, fit=None, index_name="k"):
    doc = {"schema_version": SERIES_SCHEMA_VERSION, "index": index_name,
           "lags": list(series.lags), "values": [float(v) for v in series.values],
           "stderrs": [float(e) for e in series.stderrs],
           "samples": int(series.samples), "seed": int(series.seed)}
    if fit is not None:
        doc["fit"] = {"exponent": fit.exponent, "log_constant": fit.log_constant,
                      "constant": fit.constant, "stderr": fit.fit_stderr,
                      "range": list(fit.fit_range)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
