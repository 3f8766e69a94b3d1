"""Genus-2 octagon lattice in SL(2,R): frames, the diagonal geodesic flow,
Dirichlet fundamental-domain reduction, quotient bump observables, Haar
sampling, the fiber autocorrelation, and the flow-integrated variance Sigma^2.

Upper-half-plane model; a frame m acts on the basepoint i by Mobius action.
The quotient is Gamma\\G with Gamma acting by left multiplication (the mirror
of the usual G/Gamma via g -> g^{-1}; identical statistics, and Dirichlet
reduction is the numerically robust side).  Bulk kernels take stacked (N,2,2)
float arrays; single-frame wrappers provide the typed interface.
"""
import configparser
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .rng import stream

SQRT2 = np.sqrt(2.0)
HALF_L = np.arccosh(1.0 + SQRT2)            # half the side-pairing translation length
R_D = np.arccosh(3.0 + 2.0 * SQRT2)         # circumradius of the Dirichlet octagon at i
# side pairings of the regular octagon: opposite sides are identified, so the
# inverse of generator k is generator k+4 (mod 8)
INV_IDX = (np.arange(8) + 4) % 8
# one defining relation of the surface group (genus 2): aba'b'cdc'd' in the
# side-pairing numbering below
RELATION_WORD = (0, 5, 2, 7, 4, 1, 6, 3)

GROUP_SCHEMA_VERSION = 1


def rot(alpha):
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def _octagon_generators():
    L = 2.0 * HALF_L
    T = np.diag([np.exp(L / 2.0), np.exp(-L / 2.0)])
    gens = []
    for k in range(8):
        K = rot(-k * np.pi / 8.0)
        gens.append(K @ T @ K.T)
    return np.array(gens)


def mobius_i(m):
    """Mobius action of m on the basepoint i; returns (x, y)."""
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    den = c * c + d * d
    return (a * c + b * d) / den, 1.0 / den


def dist_h(x1, y1, x2, y2):
    return np.arccosh(1.0 + ((x1 - x2) ** 2 + (y1 - y2) ** 2) / (2.0 * y1 * y2))


def _canon_sign(m):
    """Projective representative: first significantly-nonzero entry positive."""
    flat = m.reshape(len(m), 4)
    sign = np.zeros(len(flat))
    for j in range(4):
        und = sign == 0.0
        col = flat[:, j]
        big = np.abs(col) > 1e-8
        sign[und & big] = np.sign(col[und & big])
    return m * sign[:, None, None]


def _bfs_ball(gens, r_keep, r_prune=None):
    """All group elements with d(gamma i, i) <= r_keep, by breadth-first search
    with operator-norm pruning (||gamma||_F^2 = 2 cosh d(gamma i, i)).

    The prune radius exceeds r_keep by a full product step so no short element
    is lost behind a long intermediate word.
    """
    if r_prune is None:
        r_prune = r_keep + 2 * R_D + 0.6
    cosh_keep, cosh_prune = np.cosh(r_keep), np.cosh(r_prune)
    seen = {}

    def key(m):
        return tuple(np.round(m.reshape(4), 6))

    eye = np.eye(2)
    seen[key(eye)] = eye
    frontier = np.array([eye])
    while len(frontier):
        prods = np.matmul(gens[:, None], frontier[None]).reshape(-1, 2, 2)
        norms2 = (prods ** 2).sum(axis=(1, 2))
        prods = _canon_sign(prods[norms2 <= 2.0 * cosh_prune])
        new = []
        for m in prods:
            k = key(m)
            if k not in seen:
                seen[k] = m
                new.append(m)
        frontier = np.array(new) if new else np.empty((0, 2, 2))
    allm = np.array(list(seen.values()))
    return allm[(allm ** 2).sum(axis=(1, 2)) <= 2.0 * cosh_keep]


class FuchsianGroup:
    """The octagon surface group with its precomputed ball cache and the
    constants of the Dirichlet domain test.  Immutable after construction."""

    def __init__(self, generators, ball_radius=4.5, ball=None):
        self.generators = np.asarray(generators, dtype=float)
        if self.generators.shape != (8, 2, 2):
            raise ValueError("expected 8 side-pairing generators")
        det = np.linalg.det(self.generators)
        if np.abs(det - 1.0).max() > 1e-10:
            raise ValueError("generators must have det 1")
        self.inv_idx = INV_IDX
        if np.abs(np.matmul(self.generators, self.generators[INV_IDX])
                  - np.eye(2)).max() > 1e-10:
            raise ValueError("generator k+4 is not the inverse of generator k")
        rel = np.eye(2)
        for w in RELATION_WORD:
            rel = self.generators[w] @ rel
        if min(np.abs(rel - np.eye(2)).max(), np.abs(rel + np.eye(2)).max()) > 1e-8:
            raise ValueError("defining relation does not close")
        self.domain_radius = R_D
        self.ball_radius = float(ball_radius)
        self.ball = _bfs_ball(self.generators, self.ball_radius) if ball is None else ball
        # neighbor centers gamma.i and the cross-multiplied Dirichlet test:
        # z in F  iff  C1[k]*(x^2+y^2) + C2[k]*x + C3[k] <= 0 for all k
        self.nx, self.ny = mobius_i(self.generators)
        self.c1 = self.ny - 1.0
        self.c2 = 2.0 * self.nx
        self.c3 = self.ny - self.nx ** 2 - self.ny ** 2
        self.generators.setflags(write=False)
        self.ball.setflags(write=False)


@lru_cache(maxsize=4)
def octagon_group(ball_radius=4.5):
    return FuchsianGroup(_octagon_generators(), ball_radius=ball_radius)


def save_group(G, path):
    cp = configparser.ConfigParser()
    cp["meta"] = {"schema_version": str(GROUP_SCHEMA_VERSION)}
    cp["lattice"] = {
        "domain_radius": repr(float(G.domain_radius)),
        "ball_radius": repr(float(G.ball_radius)),
        "ball_size": str(len(G.ball)),
    }
    for k in range(8):
        a, b = G.generators[k, 0]
        c, d = G.generators[k, 1]
        # repr of a Python float is shortest-round-trip exact; numpy scalars
        # would stringify as np.float64(...) and break load_group
        cp[f"generator{k}"] = {"a": repr(float(a)), "b": repr(float(b)),
                               "c": repr(float(c)), "d": repr(float(d))}
    with open(path, "w") as fh:
        cp.write(fh)


def load_group(path):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValueError(f"cannot read group file {path}")
    ver = int(cp["meta"]["schema_version"])
    if ver != GROUP_SCHEMA_VERSION:
        raise ValueError(f"group schema_version {ver} unsupported")
    gens = np.array([[[float(cp[f"generator{k}"]["a"]), float(cp[f"generator{k}"]["b"])],
                      [float(cp[f"generator{k}"]["c"]), float(cp[f"generator{k}"]["d"])]]
                     for k in range(8)])
    G = FuchsianGroup(gens, ball_radius=float(cp["lattice"]["ball_radius"]))
    if len(G.ball) != int(cp["lattice"]["ball_size"]):
        raise ValueError("ball cache size disagrees with the pinned lattice file")
    return G


# --- frames and the flow ---

def renormalize(m):
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return m / np.sqrt(det)[..., None, None]


def flow(m, t):
    """Right multiplication by diag(e^{t/2}, e^{-t/2}): scales the columns.

    Single calls are capped at |t| <= 100 so matrix entries stay well inside
    float range; longer flows must be chunked with interleaved reduction
    (flow_reduced).
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("flow time must be finite")
    if np.abs(t).max() > 100.0:
        raise ValueError("|t| > 100 in a single flow call; use flow_reduced")
    out = np.array(m, dtype=float, copy=True)
    e = np.exp(0.5 * t)
    if t.ndim:
        out[..., 0] *= e[:, None]
        out[..., 1] /= e[:, None]
    else:
        out[..., 0] *= e
        out[..., 1] /= e
    return out


def flow_inplace(m, t):
    """Unchecked in-place column scaling for hot loops (|t| small by design)."""
    e = np.exp(0.5 * t)
    if np.ndim(t):
        m[:, :, 0] *= e[:, None]
        m[:, :, 1] /= e[:, None]
    else:
        m[:, :, 0] *= e
        m[:, :, 1] /= e
    return m


def position(m):
    c, d = m[..., 1, 0], m[..., 1, 1]
    den = c * c + d * d
    x = (m[..., 0, 0] * c + m[..., 0, 1] * d) / den
    return x, 1.0 / den


def reduce_bulk(G, m, renorm=True):
    """Greedy Dirichlet reduction of a stack (N,2,2), in place.

    While the projected point violates a bisector inequality, left-multiply by
    the inverse of the generator whose center is nearest (d(g_j z, i) =
    d(z, p_{j+4}), so that move strictly decreases distance to center).
    """
    x, y = position(m)
    e = x * x + y * y
    viol = (np.outer(e, G.c1) + np.outer(x, G.c2) + G.c3) > 1e-14   # (N,8)
    todo = np.nonzero(viol.any(axis=1))[0]
    it = 0
    while todo.size:
        it += 1
        if it > 10000:
            raise RuntimeError(
                f"reduction stuck after 10000 sweeps ({todo.size} frames left); "
                "group data is corrupted")
        xs, ys = x[todo], y[todo]
        dk = ((xs[:, None] - G.nx) ** 2 + (ys[:, None] - G.ny) ** 2) / (ys[:, None] * G.ny)
        j = G.inv_idx[dk.argmin(axis=1)]
        sub = np.matmul(G.generators[j], m[todo])
        m[todo] = sub
        x[todo], y[todo] = position(sub)
        e[todo] = x[todo] ** 2 + y[todo] ** 2
        viol_sub = (np.outer(e[todo], G.c1) + np.outer(x[todo], G.c2) + G.c3) > 1e-14
        todo = todo[viol_sub.any(axis=1)]
    if renorm:
        det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        m *= (1.0 / np.sqrt(det))[:, None, None]
    return m


@dataclass(frozen=True)
class ReducedFrame:
    """A frame whose projected point lies in the closed Dirichlet domain, with
    the word of generator indices that was applied to get it there."""
    frame: np.ndarray
    word: tuple


def reduce_frame(G, m):
    """Single-frame reduction recording the word of applied generators."""
    m = renormalize(np.array(m, dtype=float))
    word = []
    for it in range(10001):
        x, y = position(m)
        e = x * x + y * y
        if not ((G.c1 * e + G.c2 * x + G.c3) > 1e-14).any():
            out = renormalize(m)
            out.setflags(write=False)
            return ReducedFrame(out, tuple(word))
        dk = ((x - G.nx) ** 2 + (y - G.ny) ** 2) / (y * G.ny)
        j = int(G.inv_idx[dk.argmin()])
        m = G.generators[j] @ m
        word.append(j)
    raise RuntimeError("reduction stuck after 10000 steps; group data is corrupted")


def reconstruct(G, rf):
    """Undo a recorded reduction word: returns the pre-reduction frame."""
    m = np.array(rf.frame, dtype=float)
    for j in reversed(rf.word):
        m = G.generators[G.inv_idx[j]] @ m
    return m


def flow_reduced(G, m, t, max_step=5.0):
    """Flow a stack by scalar time t of any size, reducing every <= max_step
    of flow so entries never blow up.  Correct by the group law and coset
    invariance of the quotient."""
    t = float(t)
    n = max(1, int(np.ceil(abs(t) / max_step)))
    dt = t / n
    for _ in range(n):
        flow_inplace(m, dt)
        reduce_bulk(G, m)
    return m


# --- quotient observables ---

def smooth_bump(r):
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ri * ri))
    return out


class BumpObservable:
    """phi(y) = sum_{gamma in cut} h(gamma y) - mean_offset, where h is a
    smooth compactly-supported window in (hyperbolic distance from center,
    frame angle).  The cut is the finite set of ball elements whose translate
    of the support can meet the fundamental domain, so on reduced frames the
    finite sum equals the full Poincare series exactly.
    """

    def __init__(self, G, plane_width, angle_width, amplitude=1.0,
                 mean_offset=0.0, center=None):
        if plane_width <= 0 or angle_width <= 0:
            raise ValueError("widths must be positive")
        self.group = G
        self.wp, self.wa = float(plane_width), float(angle_width)
        self.amp = float(amplitude)
        self.mean_offset = float(mean_offset)
        self.center = None if center is None else renormalize(np.array(center, dtype=float))
        px, py = mobius_i(G.ball)
        if self.center is None:
            cx, cy, d_c = 0.0, 1.0, 0.0
        else:
            cx, cy = mobius_i(self.center)
            d_c = float(dist_h(cx, cy, 0.0, 1.0))
        if G.ball_radius < R_D + self.wp + d_c:
            raise ValueError(
                f"ball cache radius {G.ball_radius} cannot cover bump support "
                f"(needs >= {R_D + self.wp + d_c:.3f}); rebuild the group with "
                "a larger ball_radius")
        cut = G.ball[dist_h(px, py, cx, cy) <= R_D + self.wp + 1e-9]
        if self.center is not None:
            cinv = np.array([[self.center[1, 1], -self.center[0, 1]],
                             [-self.center[1, 0], self.center[0, 0]]])
            cut = np.matmul(cinv, cut)
        self.ball = np.ascontiguousarray(cut)
        # ||gamma m||_F^2 = tr(Q S) with Q = gamma^T gamma, S = m m^T
        Q = np.matmul(np.swapaxes(self.ball, 1, 2), self.ball)
        self.q11, self.q12, self.q22 = Q[:, 0, 0], 2.0 * Q[:, 0, 1], Q[:, 1, 1]
        self.two_cosh_wp = 2.0 * np.cosh(self.wp)

    def __call__(self, m):
        a, b, c, d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
        s11, s12, s22 = a * a + b * b, a * c + b * d, c * c + d * d
        n2 = (np.outer(self.q11, s11) + np.outer(self.q12, s12)
              + np.outer(self.q22, s22))                 # 2 cosh d(gamma y . i, i)
        out = np.zeros(m.shape[0])
        bi, ni = np.nonzero(n2 < self.two_cosh_wp)
        if bi.size:
            sub = np.matmul(self.ball[bi], m[ni])
            dpos = np.arccosh(np.maximum(0.5 * n2[bi, ni], 1.0))
            theta = 0.5 * np.pi - 2.0 * np.arctan2(sub[:, 1, 0], sub[:, 1, 1])
            dth = (theta - 0.5 * np.pi + np.pi) % (2 * np.pi) - np.pi
            vals = self.amp * smooth_bump(dpos / self.wp) * smooth_bump(dth / self.wa)
            np.add.at(out, ni, vals)
        return out - self.mean_offset

    def analytic_mean(self):
        """Haar mean of the raw (offset-free) sum: the windows factorize in
        polar coordinates, so two 1-d quadratures suffice.  Serves as the
        oracle for the Monte Carlo calibration of mean_offset."""
        pos, _ = quad(lambda r: np.exp(1 - 1 / (1 - (r / self.wp) ** 2)) * 2 * np.pi * np.sinh(r),
                      0, self.wp * (1 - 1e-12))
        ang, _ = quad(lambda u: np.exp(1 - 1 / (1 - (u / self.wa) ** 2)),
                      -self.wa * (1 - 1e-12), self.wa * (1 - 1e-12))
        return self.amp * (pos / (4 * np.pi)) * (ang / (2 * np.pi))


def evaluate_observable(phi, G, y):
    """phi at a ReducedFrame (the typed single-point interface)."""
    if phi.group is not G:
        raise ValueError("observable was built against a different group")
    if not isinstance(y, ReducedFrame):
        raise TypeError("evaluate_observable wants a ReducedFrame; call reduce_frame first")
    return float(phi(y.frame[None])[0])


# --- Haar sampling on the quotient ---

_sinhR, _coshR = np.sinh(R_D), np.cosh(R_D)
XLO, XHI = -_sinhR, _sinhR
YLO, YHI = _coshR - _sinhR, _coshR + _sinhR
BOX_AREA = (XHI - XLO) * (1.0 / YLO - 1.0 / YHI)
OCTAGON_AREA = 4.0 * np.pi          # Gauss-Bonnet, genus 2


def in_domain(G, x, y):
    di = (x ** 2 + (y - 1.0) ** 2) / (2.0 * y)
    ok = np.ones(np.shape(x), dtype=bool)
    for k in range(8):
        dk = ((x - G.nx[k]) ** 2 + (y - G.ny[k]) ** 2) / (2.0 * y * G.ny[k])
        ok &= di <= dk + 1e-15
    return ok


def frame_from(x, y, alpha):
    """T_z K(alpha) with T_z = [[sqrt y, x/sqrt y],[0, 1/sqrt y]]."""
    n = len(x)
    sq = np.sqrt(y)
    ca, sa = np.cos(alpha), np.sin(alpha)
    M = np.empty((n, 2, 2))
    M[:, 0, 0] = sq * ca + (x / sq) * sa
    M[:, 0, 1] = -sq * sa + (x / sq) * ca
    M[:, 1, 0] = sa / sq
    M[:, 1, 1] = ca / sq
    return M


def haar_frames(G, n, rng):
    """n Haar frames on the quotient: position by rejection from dx dy / y^2
    on the bounding box of the domain (y drawn by inverse CDF of the 1/y^2
    marginal), angle uniform on [0, pi)."""
    n = int(n)
    xs = np.empty(n)
    ys = np.empty(n)
    got, proposed = 0, 0
    while got < n:
        m = int((n - got) / 0.09) + 64
        proposed += m
        if proposed > max(10 ** 6, 1000 * n):
            raise RuntimeError("Haar rejection loop exceeded proposal cap")
        x = rng.uniform(XLO, XHI, m)
        u = rng.uniform(0, 1, m)
        y = 1.0 / (1.0 / YLO - u * (1.0 / YLO - 1.0 / YHI))
        keep = in_domain(G, x, y)
        k = min(int(keep.sum()), n - got)
        xs[got:got + k] = x[keep][:k]
        ys[got:got + k] = y[keep][:k]
        got += k
    alpha = rng.uniform(0, np.pi, n)
    return frame_from(xs, ys, alpha)


def sample_haar(G, seed):
    """One Haar-distributed ReducedFrame; deterministic in seed."""
    m = haar_frames(G, 1, stream(seed))[0]
    m.setflags(write=False)
    return ReducedFrame(m, ())


def haar_acceptance_rate(G, samples, seed):
    """Empirical acceptance rate of the rejection sampler; its analytic value
    is area(octagon)/area(box) = 4 pi / BOX_AREA."""
    rng = stream(seed)
    x = rng.uniform(XLO, XHI, int(samples))
    u = rng.uniform(0, 1, int(samples))
    y = 1.0 / (1.0 / YLO - u * (1.0 / YLO - 1.0 / YHI))
    acc = in_domain(G, x, y)
    rate = acc.mean()
    se = acc.std(ddof=1) / np.sqrt(samples)
    return float(rate), float(se)


# --- autocorrelation and Sigma^2 ---

def fiber_autocorrelation(phi, G, b, samples, seed):
    """rho_phi(b) = E[phi(y g_b) phi(y)] over Haar y, with chunked flow."""
    rng = stream(seed)
    M = haar_frames(G, samples, rng)
    v0 = phi(M)
    if b != 0.0:
        flow_reduced(G, M, float(b))
    w = v0 * phi(M)
    se = w.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0
    return float(w.mean()), float(se)


def autocorrelation_curve(phi, G, b_max, step, samples, seed):
    """rho_phi on the two-sided grid b = -b_max..b_max in increments of step,
    one incremental flow pass per direction from a shared start ensemble.

    Returns (b_grid, rho, rho_se, per_sample_trapezoid) where the last is the
    per-sample two-sided trapezoid integral, kept so Sigma^2 gets an honest
    standard error."""
    nst = int(round(b_max / step))
    if abs(nst * step - b_max) > 1e-9:
        raise ValueError("b_max must be an integer multiple of step")
    rng = stream(seed)
    M0 = haar_frames(G, samples, rng)
    v0 = phi(M0)
    rho_f = np.empty(nst + 1)
    rho_b = np.empty(nst + 1)
    se_f = np.empty(nst + 1)
    se_b = np.empty(nst + 1)
    acc = np.zeros(samples)
    for direction, rho, se in ((1.0, rho_f, se_f), (-1.0, rho_b, se_b)):
        M = M0.copy()
        for j in range(nst + 1):
            if j:
                flow_inplace(M, direction * step)
                reduce_bulk(G, M)
            w = v0 * phi(M)
            rho[j] = w.mean()
            se[j] = w.std(ddof=1) / np.sqrt(samples)
            trap = step if 0 < j < nst else 0.5 * step
            acc += trap * w
    b = np.concatenate([-np.arange(nst, 0, -1)[::1] * step, np.arange(nst + 1) * step])
    rho = np.concatenate([rho_b[1:][::-1], rho_f])
    se = np.concatenate([se_b[1:][::-1], se_f])
    return b, rho, se, acc


def _tail_bound(b, rho, se, b_max):
    """Integrated-tail bound from an exponential fit to |rho| on the outer
    window, restricted to significant points so noise is never mistaken for
    signal.  Falls back to the flow's e^{-b/2} mixing envelope when the fit
    is unusable."""
    sel = (b >= max(2.0, b_max - 12.0)) & (np.abs(rho) > 3.0 * se)
    rate, level = -0.5, np.abs(rho[b >= b_max - 1e-9]).max(initial=0.0)
    if sel.sum() >= 3:
        bb, lr = b[sel], np.log(np.abs(rho[sel]))
        slope, icept = np.polyfit(bb, lr, 1)
        if slope < -0.05:
            rate = slope
            level = np.exp(icept + slope * b_max)
    if level == 0.0:
        return 0.0
    return 2.0 * level / abs(rate)


def sigma2_capital(phi, G, b_max=30.0, step=0.25, samples=100_000, seed=0):
    """Trapezoid quadrature of rho_phi over [-b_max, b_max].

    Returns (Sigma2, err) with err = Monte Carlo stderr + integrated tail
    bound beyond b_max (from the fitted exponential decay of |rho|).  Warns
    when the tail exceeds 1% of the integral.
    """
    if b_max <= 0 or step <= 0:
        raise ValueError("b_max and step must be positive")
    b, rho, se, acc = autocorrelation_curve(phi, G, b_max, step, samples, seed)
    est = float(acc.mean())
    stat = float(acc.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    tail = _tail_bound(b, rho, se, b_max)
    if np.abs(rho).max() < 1e-30:
        tail = 0.0
    if tail > 0.01 * abs(est) and abs(est) > 0:
        warnings.warn(f"Sigma^2 tail bound {tail:.3g} exceeds 1% of the "
                      f"integral {est:.3g}; increase b_max", RuntimeWarning)
    return est, stat + tail


def calibrate_mean_offset(G, plane_width, angle_width, amplitude,
                          samples=1_000_000, seed=0):
    """Monte Carlo mean of the raw bump over Haar; the stored mean_offset of a
    calibrated observable comes from one such pass with a fixed seed, and the
    analytic_mean quadrature is its oracle."""
    raw = BumpObservable(G, plane_width, angle_width, amplitude, mean_offset=0.0)
    rng = stream(seed)
    vals = np.empty(0)
    chunks = []
    for lo in range(0, int(samples), 250_000):
        m = haar_frames(G, min(250_000, samples - lo), rng)
        chunks.append(raw(m))
    vals = np.concatenate(chunks)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))
