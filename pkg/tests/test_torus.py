"""Base dynamics: cat map algebra, trig observables, Green-Kubo variance,
and the homoclinic pairing sum with its frozen oracle."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab import (CAT_MAP, F_SIN, ToralAutomorphism, TrigObservable,
                     apply_automorphism, apply_inverse, ergodic_sum,
                     green_kubo_sigma2, homoclinic_orbit_point,
                     homoclinic_points, homoclinic_sum, sample_torus)
from skewlab.defaults import HOMOCLINIC_SUM
from skewlab.rng import stream

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True)


def test_cat_map_is_hyperbolic_and_unimodular():
    A = CAT_MAP.matrix
    assert abs(np.linalg.det(A) - 1.0) < 1e-12
    assert abs(np.trace(A)) > 2
    lam = max(abs(np.linalg.eigvals(A)))
    assert abs(lam - (3.0 + np.sqrt(5.0)) / 2.0) < 1e-12


def test_non_unimodular_matrix_rejected():
    with pytest.raises(ValueError):
        ToralAutomorphism(2, 0, 0, 2)


@given(unit, unit)
@settings(max_examples=60)
def test_apply_inverse_roundtrip(x1, x2):
    p = np.array([x1, x2])
    q = apply_inverse(CAT_MAP, apply_automorphism(CAT_MAP, p))
    # compare on the torus: distance to p mod 1
    d = np.abs(q - p)
    d = np.minimum(d, 1.0 - d)
    assert np.max(d) < 1e-9


def test_trig_observable_matches_formula():
    X = stream(3).random((200, 2))
    assert np.allclose(F_SIN(X), np.sin(2.0 * np.pi * X[:, 0]), atol=1e-12)
    g = TrigObservable([((1, 2), 0.5, 0.0), ((0, 1), 0.0, -1.0)])
    ref = 0.5 * np.cos(2 * np.pi * (X[:, 0] + 2 * X[:, 1])) - np.sin(2 * np.pi * X[:, 1])
    assert np.allclose(g(X), ref, atol=1e-12)


def test_zero_frequency_rejected():
    with pytest.raises(ValueError):
        TrigObservable([((0, 0), 1.0, 0.0)])


def test_lipschitz_bound_holds_empirically():
    g = TrigObservable([((1, 1), 0.3, 0.7), ((2, -1), 0.0, 0.4)])
    L = g.lipschitz()
    X = stream(5).random((500, 2))
    H = X + 1e-6
    assert np.all(np.abs(g(H) - g(X)) <= L * np.sqrt(2) * 1e-6 + 1e-12)


def test_ergodic_sum_matches_naive():
    p = np.array([0.1234, 0.777])
    n = 37
    s = 0.0
    q = p.copy()
    for _ in range(n):
        s += float(F_SIN(q[None])[0])
        q = apply_automorphism(CAT_MAP, q)
    assert abs(ergodic_sum(CAT_MAP, F_SIN, p, n) - s) < 1e-10


def test_green_kubo_matches_exact_half():
    # sigma^2(sin 2 pi x1) = 1/2 exactly (Fourier orthogonality along the orbit)
    val, se = green_kubo_sigma2(CAT_MAP, F_SIN, 8, 40_000, seed=11)
    assert abs(val - 0.5) < 4.0 * se
    assert se < 0.02


def test_homoclinic_sum_frozen_value():
    val, tail = homoclinic_sum(CAT_MAP, F_SIN, 40)
    assert abs(val - HOMOCLINIC_SUM) < 1e-12
    assert tail < 1e-14
    assert abs(val) > 10.0 * tail  # non-degeneracy margin


def test_homoclinic_sum_converged_in_K():
    v1, _ = homoclinic_sum(CAT_MAP, F_SIN, 40)
    v2, _ = homoclinic_sum(CAT_MAP, F_SIN, 55)
    assert abs(v1 - v2) < 1e-12


def test_homoclinic_orbits_converge_to_fixed_point():
    pair = homoclinic_points(CAT_MAP)
    lam = CAT_MAP.lam
    for which in (0, 1):
        for k in (8, 12, 20):
            p = homoclinic_orbit_point(CAT_MAP, pair, which, k)
            q = homoclinic_orbit_point(CAT_MAP, pair, which, -k)
            for z in (p, q):
                d = np.minimum(z % 1.0, 1.0 - z % 1.0)
                assert np.max(d) < 3.0 * lam ** (-k)


def test_sample_torus_shape_and_range():
    X = sample_torus(1000, stream(2))
    assert X.shape == (1000, 2)
    assert np.all((X >= 0.0) & (X < 1.0))
