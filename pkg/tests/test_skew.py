"""Skew product: cocycle identity, Birkhoff sums, and the multi-checkpoint
sampling pass that everything downstream rides on."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab import (CompositeObservable, SkewState, birkhoff_sum,
                     default_bump, default_system, evaluate_observable,
                     iterate, sample_haar, sample_normalized_sums,
                     sample_sums_multi, step)
from skewlab.rng import stream

from conftest import assert_frames_close

anyf = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


@given(anyf, anyf)
@settings(max_examples=50)
def test_skew_state_wraps_base(b1, b2):
    s = SkewState(np.array([b1, b2]), _FIBER)
    assert np.all((s.base >= 0.0) & (s.base < 1.0))


def _mk_state(seed=4):
    return SkewState(stream(seed).random(2), sample_haar(_SYS.G, seed=seed))


def test_step_advances_base_by_automorphism():
    st0 = _mk_state()
    st1 = step(_SYS, st0)
    expected = (_SYS.M.matrix @ st0.base) % 1.0
    assert np.max(np.abs(st1.base - expected)) < 1e-12


def test_iterate_matches_repeated_step():
    s = _mk_state()
    a = iterate(_SYS, s, 9)
    b = s
    for _ in range(9):
        b = step(_SYS, b)
    assert np.max(np.abs(a.base - b.base)) < 1e-12
    assert_frames_close(a.fiber.frame, b.fiber.frame, 1e-9)


def test_cocycle_identity_within_horizon():
    s = _mk_state(11)
    one = iterate(_SYS, s, 12)
    two = iterate(_SYS, iterate(_SYS, s, 7), 5)
    assert np.max(np.abs(one.base - two.base)) < 1e-12
    assert_frames_close(one.fiber.frame, two.fiber.frame, 1e-7)


def test_birkhoff_sum_matches_naive():
    phi = default_bump(_SYS.G)
    s = _mk_state(13)
    n = 64
    acc = 0.0
    cur = s
    for _ in range(n):
        acc += evaluate_observable(phi, _SYS.G, cur.fiber)
        cur = step(_SYS, cur)
    fast = birkhoff_sum(_SYS, phi, s, n)
    assert abs(fast - acc) < 1e-8 * max(1.0, abs(acc))


def test_sample_sums_base_only_matches_naive():
    f = _SYS.f
    phi = CompositeObservable(base_term=f)
    m, seed = 300, 21
    out = sample_sums_multi(_SYS, phi, [5, 17], m, seed, exponent=0.0)
    X = stream(seed).random((m, 2))
    A = _SYS.M.matrix
    acc = np.zeros(m)
    ref = {}
    for k in range(17):
        acc += f(X)
        X = (X @ A.T) % 1.0
        if k + 1 in (5, 17):
            ref[k + 1] = acc.copy()
    assert np.array_equal(out[5], ref[5])
    assert np.array_equal(out[17], ref[17])


def test_sample_sums_checkpoints_do_not_perturb():
    phi = default_bump(_SYS.G)
    a = sample_sums_multi(_SYS, phi, [16], 50, 3, exponent=0.0)[16]
    b = sample_sums_multi(_SYS, phi, [4, 8, 16], 50, 3, exponent=0.0)[16]
    assert np.array_equal(a, b)


def test_sample_normalized_sums_fields_and_determinism():
    phi = default_bump(_SYS.G)
    law1 = sample_normalized_sums(_SYS, phi, 32, 80, 9)
    law2 = sample_normalized_sums(_SYS, phi, 32, 80, 9)
    assert law1.n == 32 and law1.exponent == 0.75 and law1.seed == 9
    assert np.array_equal(law1.values, law2.values)
    raw = sample_sums_multi(_SYS, phi, [32], 80, 9, exponent=0.0)[32]
    assert np.allclose(law1.values, raw / 32 ** 0.75, atol=1e-12)


def test_normalized_exponent_validation():
    phi = default_bump(_SYS.G)
    for bad in (0.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            sample_normalized_sums(_SYS, phi, 8, 10, 1, exponent=bad)


def test_composite_requires_some_part():
    with pytest.raises(ValueError):
        CompositeObservable()
    with pytest.raises(TypeError):
        CompositeObservable(base_term=lambda x: x)


_SYS = default_system()
_FIBER = sample_haar(_SYS.G, seed=1)
