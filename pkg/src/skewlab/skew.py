"""The skew product T(x,y) = (Ax, y g_{f(x)}) on torus x quotient, its
iterates via the cocycle T^n(x,y) = (A^n x, y g_{S_n f}), and Birkhoff sums
of fiber observables."""
from dataclasses import dataclass

import numpy as np

from .defaults import (BUMP_AMPLITUDE, BUMP_ANGLE_WIDTH, BUMP_MEAN_OFFSET,
                       BUMP_PLANE_WIDTH)
from .geodesic import (BumpObservable, FuchsianGroup, ReducedFrame, flow,
                       flow_inplace, flow_reduced, haar_frames, octagon_group,
                       reduce_bulk, reduce_frame)
from .laws import EmpiricalLaw
from .rng import stream
from .scenery import SceneryEnsemble
from .torus import (CAT_MAP, F_SIN, ToralAutomorphism, TrigObservable,
                    apply_automorphism)


@dataclass(frozen=True)
class SkewState:
    base: np.ndarray
    fiber: ReducedFrame

    def __post_init__(self):
        b = np.asarray(self.base, dtype=float) % 1.0
        b[b >= 1.0] = 0.0      # -1e-18 % 1.0 rounds to exactly 1.0
        object.__setattr__(self, "base", b)


@dataclass(frozen=True)
class SkewSystem:
    M: ToralAutomorphism
    f: TrigObservable
    G: FuchsianGroup

    def __post_init__(self):
        if not isinstance(self.M, ToralAutomorphism):
            raise TypeError("M must be a ToralAutomorphism")
        if not isinstance(self.f, TrigObservable):
            raise TypeError("f must be a (mean-zero) TrigObservable")
        if not isinstance(self.G, FuchsianGroup):
            raise TypeError("G must be a FuchsianGroup")


def default_system():
    return SkewSystem(CAT_MAP, F_SIN, octagon_group())


def default_bump(G):
    """The calibrated default observable (offset frozen by the 10^6-sample
    Monte Carlo pass recorded in defaults)."""
    return BumpObservable(G, BUMP_PLANE_WIDTH, BUMP_ANGLE_WIDTH,
                          BUMP_AMPLITUDE, mean_offset=BUMP_MEAN_OFFSET)


class CompositeObservable:
    """phi(x,y) = bump(y) + base_term(x): a fiber bump plus an optional
    additive base-only term (the Sigma^2 = 0 degenerate direction).  Either
    part may be None."""

    def __init__(self, bump=None, base_term=None):
        if bump is None and base_term is None:
            raise ValueError("need at least one of bump, base_term")
        if base_term is not None and not isinstance(base_term, TrigObservable):
            raise TypeError("base_term must be a TrigObservable")
        self.bump = bump
        self.base_term = base_term


def _split_observable(phi):
    if isinstance(phi, CompositeObservable):
        return phi.bump, phi.base_term
    return phi, None


def step(system, state):
    """One application of T; f is evaluated at the pre-image base point."""
    t = float(system.f(state.base.reshape(1, 2))[0])
    new_base = apply_automorphism(system.M, state.base)
    m = flow(state.fiber.frame[None].copy(), t)[0]
    return SkewState(new_base, reduce_frame(system.G, m))


def iterate(system, state, n):
    """T^n via the cocycle: one base pass accumulating S_n f, then a single
    chunked flow of the fiber.  Agrees with n repeated steps."""
    n = int(n)
    if n < 0:
        raise ValueError("n >= 0")
    if n == 0:
        return state
    x = state.base.reshape(1, 2)
    s = 0.0
    for _ in range(n):
        s += float(system.f(x)[0])
        x = apply_automorphism(system.M, x)
    m = state.fiber.frame[None].copy()
    flow_reduced(system.G, m, s)
    return SkewState(x[0], reduce_frame(system.G, m[0]))


def birkhoff_sum(system, phi, state, n):
    """sum_{k=0}^{n-1} phi(T^k state) with one base pass and incremental
    fiber flowing (O(n), matches the naive O(n^2) recomputation)."""
    n = int(n)
    if n < 0:
        raise ValueError("n >= 0")
    bump, base_term = _split_observable(phi)
    x = state.base.reshape(1, 2)
    m = state.fiber.frame[None].copy()
    acc = 0.0
    for _ in range(n):
        if bump is not None:
            acc += float(bump(m)[0])
        if base_term is not None:
            acc += float(base_term(x)[0])
        t = float(system.f(x)[0])
        flow_inplace(m, t)
        reduce_bulk(system.G, m)
        x = apply_automorphism(system.M, x)
    return acc


def sample_sums_multi(system, phi, n_list, samples, seed, exponent=0.75,
                      half_window=512):
    """Birkhoff-sum samples at each checkpoint n in n_list, one dynamical
    pass over product-measure starts (base uniform, fiber Haar); each sample
    set divided by n^exponent.  Returns {n: values array}.

    Fiber orbits go through the anchored scenery ensemble so that level
    revisits reuse identical floats (see scenery module).
    """
    targets = sorted({int(n) for n in n_list})
    if targets[0] < 0:
        raise ValueError("n >= 0")
    bump, base_term = _split_observable(phi)
    rng = stream(seed)
    X = rng.random((int(samples), 2))
    acc = np.zeros(int(samples))
    out = {0: np.zeros(int(samples))} if targets[0] == 0 else {}
    tset = set(targets)
    if bump is not None:
        fibers = haar_frames(system.G, int(samples), stream(seed, 1))
        ens = SceneryEnsemble(system, X, fibers, half_window=half_window)
        for k in range(targets[-1]):
            acc += bump(ens.fiber_frames())
            if base_term is not None:
                acc += base_term(ens.X)
            ens.advance()
            if (k + 1) in tset:
                out[k + 1] = acc / (k + 1) ** exponent if exponent else acc.copy()
    else:
        A = system.M.matrix
        for k in range(targets[-1]):
            acc += base_term(X)
            X = (X @ A.T) % 1.0
            if (k + 1) in tset:
                out[k + 1] = acc / (k + 1) ** exponent if exponent else acc.copy()
    return out


def sample_normalized_sums(system, phi, n, samples, seed, exponent=0.75):
    """The sampled law of birkhoff_sum / n^exponent over product-measure
    starts; deterministic per seed."""
    if not 0.0 < exponent <= 1.0:
        raise ValueError("exponent in (0, 1]")
    vals = sample_sums_multi(system, phi, [int(n)], samples, seed,
                             exponent=exponent)[int(n)]
    return EmpiricalLaw(vals, int(n), float(exponent), int(seed))
