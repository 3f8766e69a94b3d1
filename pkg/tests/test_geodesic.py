"""Fiber geometry: octagon group algebra, flow, domain reduction, Haar
sampling, and the Poincare-series bump observable."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab import (BumpObservable, evaluate_observable, flow, flow_reduced,
                     haar_acceptance_rate, haar_frames, load_group,
                     octagon_group, reconstruct, reduce_bulk, reduce_frame,
                     save_group)
from skewlab.geodesic import (BOX_AREA, INV_IDX, OCTAGON_AREA, RELATION_WORD,
                              dist_h, flow_inplace, frame_from, in_domain,
                              position, renormalize, smooth_bump)
from skewlab.defaults import (BUMP_AMPLITUDE, BUMP_ANGLE_WIDTH,
                              BUMP_MEAN_OFFSET, BUMP_MEAN_STDERR,
                              BUMP_PLANE_WIDTH)
from skewlab.rng import stream

from conftest import assert_frames_close

small_t = st.floats(min_value=-8.0, max_value=8.0)


def test_generators_are_unimodular(G):
    dets = np.linalg.det(G.generators)
    assert np.max(np.abs(dets - 1.0)) < 1e-12


def test_inverse_pairing(G):
    for i in range(8):
        prod = G.generators[i] @ G.generators[INV_IDX[i]]
        assert_frames_close(prod, np.eye(2), 1e-12)


def test_relation_word_closes(G):
    w = np.eye(2)
    for i in RELATION_WORD:
        w = w @ G.generators[i]
    assert min(np.max(np.abs(w - np.eye(2))),
               np.max(np.abs(w + np.eye(2)))) < 1e-12


def test_ball_size_frozen(G):
    assert len(G.ball) == 25  # radius 4.5 around the identity


def test_save_load_roundtrip(G, tmp_path):
    path = str(tmp_path / "group.ini")
    save_group(G, path)
    H = load_group(path)
    assert np.array_equal(H.generators, G.generators)  # bitwise
    assert np.array_equal(H.ball, G.ball)


@given(small_t, small_t)
@settings(max_examples=40, deadline=None)
def test_flow_group_law(s, t):
    M = frame_from(np.array([0.3]), np.array([1.7]), np.array([0.9]))
    one = flow(M.copy(), s + t)
    two = flow(flow(M.copy(), s), t)
    scale = max(1.0, float(np.max(np.abs(one))))
    assert float(np.max(np.abs(one - two))) < 1e-12 * scale


def test_flow_preserves_determinant(frames):
    F = frames.copy()
    flow_inplace(F, 13.0)
    assert np.max(np.abs(np.linalg.det(F) - 1.0)) < 1e-9


def test_reduce_idempotent(G, frames):
    R1 = reduce_bulk(G, frames.copy())
    R2 = reduce_bulk(G, R1.copy())
    assert_frames_close(R1, R2, 1e-12)


def test_reduce_lands_in_domain(G, frames):
    R = reduce_bulk(G, frames.copy())
    x, y = position(R)
    assert np.all(in_domain(G, x, y))


def test_reduce_coset_invariance(G, frames):
    R = reduce_bulk(G, frames.copy())
    for g in G.generators:
        S = reduce_bulk(G, np.einsum("ij,njk->nik", g, R.copy()))
        assert_frames_close(S, R, 1e-9)


def test_reduce_frame_word_reconstructs(G):
    m = flow(frame_from(np.array([0.1]), np.array([1.2]), np.array([0.4])), 18.0)[0]
    rf = reduce_frame(G, m)
    back = reconstruct(G, rf)
    assert float(np.max(np.abs(back - m))) < 1e-7 * max(1.0, float(np.max(np.abs(m))))


def test_position_of_identity():
    x, y = position(np.eye(2)[None])
    assert abs(x[0]) < 1e-15 and abs(y[0] - 1.0) < 1e-15


def test_in_domain_center_and_far(G):
    assert in_domain(G, np.array([0.0]), np.array([1.0]))[0]
    assert not in_domain(G, np.array([0.0]), np.array([50.0]))[0]


pt = st.floats(min_value=-2.0, max_value=2.0)
yy = st.floats(min_value=0.1, max_value=5.0)


@given(pt, yy, pt, yy, pt, yy)
@settings(max_examples=60, deadline=None)
def test_hyperbolic_distance_is_a_metric(x1, y1, x2, y2, x3, y3):
    d12 = dist_h(x1, y1, x2, y2)
    d21 = dist_h(x2, y2, x1, y1)
    assert d12 >= 0.0
    assert abs(d12 - d21) < 1e-9
    assert dist_h(x1, y1, x1, y1) < 1e-9
    d13 = dist_h(x1, y1, x3, y3)
    d23 = dist_h(x2, y2, x3, y3)
    assert d13 <= d12 + d23 + 1e-9


def test_haar_acceptance_matches_area_ratio(G):
    rate, se = haar_acceptance_rate(G, 30_000, seed=6)
    target = OCTAGON_AREA / BOX_AREA
    assert abs(rate - target) < 4.0 * se


def test_haar_frames_land_in_domain(G):
    F = haar_frames(G, 500, stream(8))
    x, y = position(F)
    assert np.all(in_domain(G, x, y))
    assert np.max(np.abs(np.linalg.det(F) - 1.0)) < 1e-9


@given(st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=60)
def test_smooth_bump_window(r):
    v = smooth_bump(np.array([r]))[0]
    assert 0.0 <= v <= 1.0
    if abs(r) >= 1.0:
        assert v == 0.0
    assert smooth_bump(np.zeros(1))[0] == pytest.approx(1.0)


def test_bump_is_group_invariant(G, bump, frames):
    R = reduce_bulk(G, frames.copy())
    base = bump(R)
    for g in G.generators[:4]:
        moved = reduce_bulk(G, np.einsum("ij,njk->nik", g, R.copy()))
        assert np.max(np.abs(bump(moved) - base)) < 1e-9


def test_evaluate_observable_typed_path(G, bump):
    from skewlab import sample_haar

    rf = sample_haar(G, seed=31)
    v = evaluate_observable(bump, G, rf)
    assert v == pytest.approx(float(bump(rf.frame[None])[0]))
    with pytest.raises(TypeError):
        evaluate_observable(bump, G, rf.frame)  # bare matrix: reduce first


def test_bump_rejects_bad_widths(G):
    with pytest.raises(ValueError):
        BumpObservable(G, -1.0, 1.0)
    with pytest.raises(ValueError):
        BumpObservable(G, 1.0, 0.0)


def test_analytic_mean_matches_monte_carlo_calibration(G):
    phi = BumpObservable(G, BUMP_PLANE_WIDTH, BUMP_ANGLE_WIDTH,
                         amplitude=BUMP_AMPLITUDE, mean_offset=0.0)
    assert abs(phi.analytic_mean() - BUMP_MEAN_OFFSET) < 3.0 * BUMP_MEAN_STDERR


def test_centered_bump_has_small_mean(G, bump):
    F = haar_frames(G, 40_000, stream(12))
    v = bump(F)
    se = v.std(ddof=1) / np.sqrt(len(v))
    assert abs(v.mean()) < 4.0 * se + 3.0 * BUMP_MEAN_STDERR


def test_flow_reduced_composes_within_horizon(G, frames):
    # elementwise path-independence is only meaningful inside the coherence
    # horizon e^t eps << 1; t = 12 is comfortably inside
    A = flow_reduced(G, frames.copy(), 12.0)
    B = flow_reduced(G, flow_reduced(G, frames.copy(), 7.0), 5.0)
    assert_frames_close(A, B, 1e-8)


def test_flow_reduced_deterministic(G, frames):
    A = flow_reduced(G, frames.copy(), 37.5)
    B = flow_reduced(G, frames.copy(), 37.5)
    assert np.array_equal(A, B)


def test_renormalize_restores_determinant():
    m = 1.0001 * frame_from(np.array([0.2]), np.array([0.9]), np.array([0.1]))[0]
    r = renormalize(m)
    assert abs(np.linalg.det(r) - 1.0) < 1e-12
