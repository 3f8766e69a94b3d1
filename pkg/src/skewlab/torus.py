"""Hyperbolic automorphisms of the 2-torus, trigonometric observables, ergodic
sums, the Green-Kubo variance, and the homoclinic non-degeneracy diagnostic.

Conventions: torus points are arrays (..., 2) with both coordinates reduced to
[0,1) after every operation.  Observables are finite trigonometric polynomials
with no constant term, so they are exactly mean-zero and carry an explicit
Lipschitz constant.
"""
from dataclasses import dataclass, field

import numpy as np

from .rng import stream


@dataclass(frozen=True)
class ToralAutomorphism:
    """Integer 2x2 matrix acting on T^2, with its eigen-structure.

    Restricted to det = +1, trace > 2 (orientation-preserving, expanding
    eigenvalue lambda > 1).  b != 0 is automatic: b = 0 with det 1 forces
    trace +-2, which the hyperbolicity requirement excludes.
    """
    a: int
    b: int
    c: int
    d: int
    lam: float = field(init=False)
    unstable_slope: float = field(init=False)
    stable_slope: float = field(init=False)

    def __post_init__(self):
        a, b, c, d = self.a, self.b, self.c, self.d
        if a * d - b * c != 1:
            raise ValueError("determinant must be +1")
        tr = a + d
        if tr <= 2:
            raise ValueError("need trace > 2 (hyperbolic, orientation-preserving)")
        disc = np.sqrt(tr * tr - 4.0)
        lam = (tr + disc) / 2.0
        object.__setattr__(self, "lam", lam)
        # eigenvector (1, u): a + b u = lam
        object.__setattr__(self, "unstable_slope", (lam - a) / b)
        object.__setattr__(self, "stable_slope", (1.0 / lam - a) / b)
        for slope, ev in ((self.unstable_slope, lam), (self.stable_slope, 1.0 / lam)):
            v = np.array([1.0, slope])
            if np.abs(self.matrix @ v - ev * v).max() > 1e-12 * max(1.0, ev):
                raise AssertionError("eigen residual exceeds 1e-12")

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    @property
    def inverse_matrix(self):
        return np.array([[self.d, -self.b], [-self.c, self.a]], dtype=float)


CAT_MAP = ToralAutomorphism(2, 1, 1, 1)


def apply_automorphism(M, p):
    """A p mod 1, vectorized over leading axes of p (..., 2)."""
    p = np.asarray(p, dtype=float)
    return (p @ M.matrix.T) % 1.0


def apply_inverse(M, p):
    p = np.asarray(p, dtype=float)
    return (p @ M.inverse_matrix.T) % 1.0


class TrigObservable:
    """Finite trigonometric polynomial sum_j cj*cos(2pi kj.x) + sj*sin(2pi kj.x).

    No zero-frequency term is accepted, so instances are exactly mean-zero.
    """

    def __init__(self, terms):
        self.terms = []
        for freq, ccoef, scoef in terms:
            k1, k2 = int(freq[0]), int(freq[1])
            if k1 == 0 and k2 == 0:
                raise ValueError("zero frequency breaks mean-zero invariant")
            self.terms.append(((k1, k2), float(ccoef), float(scoef)))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1])
        for (k1, k2), cc, sc in self.terms:
            phase = 2.0 * np.pi * (k1 * p[..., 0] + k2 * p[..., 1])
            if cc:
                out += cc * np.cos(phase)
            if sc:
                out += sc * np.sin(phase)
        return out

    def lipschitz(self):
        # each term cj cos + sj sin = Rj cos(2pi k.x - phase); |grad| <= 2pi|k| Rj
        lip = 0.0
        for (k1, k2), cc, sc in self.terms:
            lip += 2.0 * np.pi * np.hypot(k1, k2) * np.hypot(cc, sc)
        return lip


F_SIN = TrigObservable([((1, 0), 0.0, 1.0)])     # sin(2 pi x1)


def sample_torus(m, rng):
    return rng.random((int(m), 2))


def ergodic_sum(M, f, p, n):
    """S_n f(p) = sum_{k=0}^{n-1} f(A^k p); S_0 = 0 exactly."""
    p = np.asarray(p, dtype=float)
    acc = np.zeros(p.shape[:-1])
    for _ in range(int(n)):
        acc += f(p)
        p = apply_automorphism(M, p)
    return acc if acc.ndim else float(acc)


def green_kubo_sigma2(M, f, k_max, samples, seed):
    """Monte Carlo for int f^2 + 2 sum_{k=1..k_max} <f, f o A^k>.

    Per-sample statistic f(x)*(f(x) + 2 sum_k f(A^k x)) over uniform x, so the
    stderr is honest about cross-term cancellation noise.
    """
    if not isinstance(f, TrigObservable):
        raise TypeError("observable must be a mean-zero TrigObservable")
    if k_max < 1:
        raise ValueError("k_max >= 1")
    rng = stream(seed)
    x = sample_torus(samples, rng)
    f0 = f(x)
    tail = np.zeros(samples)
    p = x
    for _ in range(int(k_max)):
        p = apply_automorphism(M, p)
        tail += f(p)
    w = f0 * (f0 + 2.0 * tail)
    se = w.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0
    return float(w.mean()), float(se)


@dataclass(frozen=True)
class HomoclinicPair:
    """The two distinguished homoclinic points of the origin, kept as exact
    line/offset data so orbits can be evaluated without hyperbolic error
    amplification (see orbit_point)."""
    x0_tilde: np.ndarray     # stable line through (1,0)  /\ unstable line through (1,1)
    xm1_tilde: np.ndarray    # stable line through (1,-1) /\ same unstable line
    stable_anchor_0: np.ndarray
    stable_anchor_m1: np.ndarray
    unstable_anchor: np.ndarray
    ts: tuple                # stable-direction coefficients (x = P + ts*(1,s))
    tu: tuple                # unstable-direction coefficients (x = Q + tu*(1,u))


def _line_intersection(p, s, q, u):
    # p + ts (1,s) = q + tu (1,u)
    Amat = np.array([[1.0, -1.0], [s, -u]])
    ts, tu = np.linalg.solve(Amat, np.asarray(q, dtype=float) - np.asarray(p, dtype=float))
    return ts, tu


def homoclinic_points(M):
    s, u = M.stable_slope, M.unstable_slope
    if abs(s - u) < 1e-12:
        raise ValueError("stable and unstable slopes coincide")
    P0, Pm1, Q = np.array([1.0, 0.0]), np.array([1.0, -1.0]), np.array([1.0, 1.0])
    ts0, tu0 = _line_intersection(P0, s, Q, u)
    tsm, tum = _line_intersection(Pm1, s, Q, u)
    x0 = P0 + ts0 * np.array([1.0, s])
    xm1 = Pm1 + tsm * np.array([1.0, s])
    return HomoclinicPair(x0, xm1, P0, Pm1, Q, (ts0, tsm), (tu0, tum))


def homoclinic_orbit_point(M, pair, which, k):
    """A^k x-tilde mod 1 without iterating A.

    The anchors are integer points, so A^k x = A^k(anchor) + A^k(x - anchor)
    = lambda^{+-k} (x - anchor) mod 1 with x - anchor exactly on the
    contracted eigenline.  Direct iteration would amplify float rounding by
    lambda^k; this form is uniformly accurate in k.
    """
    s, u = M.stable_slope, M.unstable_slope
    i = 0 if which == 0 else 1
    if k >= 0:
        t = pair.ts[i] * (1.0 / M.lam) ** k
        return (t * np.array([1.0, s])) % 1.0
    t = pair.tu[i] * M.lam ** k
    return (t * np.array([1.0, u])) % 1.0


def homoclinic_sum(M, f, K):
    """sum_{k=-K}^{K} [f(A^k x0) - f(A^k xm1)] with a geometric tail bound.

    tail_bound = Lip(f) * C * lam^{-K} / (1 - 1/lam) with C summing the
    stable/unstable offset norms of both points; a true bound on everything
    beyond +-K since torus distance <= planar distance on the eigenline.
    """
    if K < 1:
        raise ValueError("K >= 1")
    pair = homoclinic_points(M)
    val = 0.0
    for k in range(-int(K), int(K) + 1):
        val += f(homoclinic_orbit_point(M, pair, 0, k))
        val -= f(homoclinic_orbit_point(M, pair, -1, k))
    s, u = M.stable_slope, M.unstable_slope
    c_stable = (abs(pair.ts[0]) + abs(pair.ts[1])) * np.hypot(1.0, s)
    c_unstable = (abs(pair.tu[0]) + abs(pair.tu[1])) * np.hypot(1.0, u)
    C = c_stable + c_unstable
    tail = f.lipschitz() * C * M.lam ** (-int(K)) / (1.0 - 1.0 / M.lam)
    return float(val), float(tail)
