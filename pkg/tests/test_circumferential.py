import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coreg.circumferential import (
    AnchorPair,
    CircWeights,
    RotationCostMatrix,
    circular_bin_distance,
    circular_ncc,
    interpolate_rotations,
    rotation_cost_matrix,
    rotation_path,
    select_anchors,
    weighted_circular_ncc,
    wrap_degrees,
)
from coreg.dtw import CorrespondencePath
from coreg.errors import NoAnchors
from coreg.features import CircProfile, extract_circ_profile
from coreg.oracles import brute_force_rotation
from coreg.pullback import Pullback

from conftest import make_frame

INF = float("inf")


def identity_path(n):
    k = np.arange(n)
    return CorrespondencePath(tuple(zip(k, k)), k, k.astype(float))


def profile(rng, sb=None, calc=None):
    radius = rng.uniform(1.0, 2.0, 180)
    sb_arr = np.zeros(180) if sb is None else sb
    calc_arr = np.zeros(180) if calc is None else calc
    return CircProfile(radius - radius.mean(), sb_arr, calc_arr)


def test_side_branch_frame_is_anchor():
    ivus = Pullback("IVUS", [make_frame(0), make_frame(1, side_branch=(4, 9, 0.3)), make_frame(2)], 0.5)
    oct = Pullback("OCT", [make_frame(k) for k in range(3)], 0.4)
    anchors = select_anchors(identity_path(3), ivus, oct)
    assert [(a.ivus_frame, a.oct_frame, a.has_side_branch) for a in anchors] == [(1, 1, True)]


def test_calcium_20_of_180_bins_qualifies():
    ivus = Pullback("IVUS", [make_frame(0), make_frame(1, calcium=20)], 0.5)
    oct = Pullback("OCT", [make_frame(0), make_frame(1, calcium=20)], 0.4)
    (a,) = select_anchors(identity_path(2), ivus, oct)
    assert a.calcium_fraction == pytest.approx(20 / 180)
    assert not a.has_side_branch


def test_calcium_below_threshold_in_one_frame_disqualifies():
    ivus = Pullback("IVUS", [make_frame(0), make_frame(1, calcium=20)], 0.5)
    oct = Pullback("OCT", [make_frame(0), make_frame(1, calcium=5)], 0.4)
    with pytest.raises(NoAnchors):
        select_anchors(identity_path(2), ivus, oct)


def test_anchor_uses_rounded_mapping():
    ivus = Pullback("IVUS", [make_frame(0), make_frame(1, side_branch=(0, 3, 0.2))], 0.5)
    oct = Pullback("OCT", [make_frame(k) for k in range(4)], 0.4)
    path = CorrespondencePath(((0, 0), (1, 1)), np.array([0, 1]), np.array([0.0, 2.5]))
    (a,) = select_anchors(path, ivus, oct)
    assert a.oct_frame == 3


def test_ncc_self_is_one_at_zero(rng):
    x = rng.random(180)
    r = circular_ncc(x, x)
    assert r[0] == pytest.approx(1.0, abs=1e-12)
    assert int(np.argmax(r)) == 0


def test_ncc_recovers_roll(rng):
    x = rng.random(180)
    r = circular_ncc(x, np.roll(x, 45))
    assert int(np.argmax(r)) == 45
    assert r[45] == pytest.approx(1.0, abs=1e-12)


def test_ncc_constant_channel_gives_zeros(rng):
    assert np.array_equal(circular_ncc(np.full(180, 0.3), rng.random(180)), np.zeros(180))
    assert np.array_equal(circular_ncc(rng.random(180), np.zeros(180)), np.zeros(180))


def test_ncc_matches_direct_formula(rng):
    a, b = rng.random(12), rng.random(12)
    za, zb = (a - a.mean()) / a.std(), (b - b.mean()) / b.std()
    direct = [np.mean([za[i] * zb[(i + s) % 12] for i in range(12)]) for s in range(12)]
    assert np.allclose(circular_ncc(a, b), direct, rtol=0, atol=1e-14)


def test_weighted_ncc_bounded_and_weighted(rng):
    sb = np.zeros(180)
    sb[30:40] = 0.3
    a = profile(rng, sb=sb)
    b = CircProfile(np.roll(a.radius_centered, 10), np.roll(a.side_branch, 10), a.calcium)
    r = weighted_circular_ncc(a, b, CircWeights(1, 1, 0.1))
    assert np.all(np.abs(r) <= 1.0)
    assert int(np.argmax(r)) == 10
    # calcium is constant so it contributes 0 but still counts in the weight sum
    assert r[10] == pytest.approx(1.1 / 2.1, abs=1e-12)


def test_cost_matrix_shape_and_zeroed_rows(rng):
    sb = np.zeros(180)
    sb[0:10] = 0.2
    calc = np.zeros(180)
    calc[50:80] = 1
    p_sb, p_calc = profile(rng, sb=sb), profile(rng, calc=calc)
    anchors = [AnchorPair(0, 0, True, 0.0), AnchorPair(1, 1, False, 30 / 180)]
    profiles = [(p_sb, p_sb), (p_calc, p_calc)]
    R = rotation_cost_matrix(anchors, profiles, CircWeights())
    assert R.values.shape == (2, 180) and R.n_bins == 180
    assert R.zeroed_rows == frozenset()
    assert int(np.argmax(R.values[0])) == 0 and int(np.argmax(R.values[1])) == 0
    strict = rotation_cost_matrix(anchors, profiles, CircWeights(), strict=True)
    assert strict.zeroed_rows == frozenset({1})
    assert np.all(strict.values[1] == 0)


def test_identical_frames_peak_at_zero(rng):
    frame = make_frame(0, radius=rng.uniform(1, 2, 180).tolist(), side_branch=(20, 30, 0.3), calcium=40)
    p = extract_circ_profile(frame)
    R = rotation_cost_matrix([AnchorPair(0, 0, True, 40 / 180)], [(p, p)], CircWeights())
    assert int(np.argmax(R.values[0])) == 0
    assert R.values[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_circular_bin_distance():
    d = circular_bin_distance(12)
    assert d[0, 11] == 1 and d[0, 6] == 6 and d[3, 9] == 6 and d[2, 2] == 0
    assert np.array_equal(d, d.T)


def test_single_row_takes_argmax():
    R = np.zeros((1, 12))
    R[0, 7] = 0.9
    assert rotation_path(R, 0.5, 30.0, [0.0]).tolist() == [7]


def test_lambda_zero_is_rowwise_argmax(rng):
    R = rng.uniform(-1, 1, (6, 180))
    got = rotation_path(R, 0.0, INF, np.arange(6.0))
    assert got.tolist() == np.argmax(R, axis=1).tolist()


def test_penalty_pulls_weak_row_toward_neighbors():
    R = np.zeros((3, 12))
    R[0, 2] = R[2, 2] = 1.0
    R[1, 8] = 0.1
    R[1, 2] = 0.05
    assert rotation_path(R, 0.0, INF, [0, 1, 2]).tolist() == [2, 8, 2]
    assert rotation_path(R, 0.1, INF, [0, 1, 2]).tolist() == [2, 2, 2]


def test_hard_cap_limits_steps():
    R = np.zeros((2, 12))
    R[0, 0] = 1.0
    R[1, 6] = 1.0
    # 30 deg bins; 1 mm gap at 30 deg/mm allows one bin of movement
    got = rotation_path(R, 0.0, 30.0, [0.0, 1.0])
    assert circular_bin_distance(12)[got[0], got[1]] <= 1


def test_rotation_cost_matrix_object_accepted():
    R = RotationCostMatrix(np.eye(3, 12), frozenset())
    assert rotation_path(R, 0.0, INF, [0, 1, 2]).tolist() == [0, 1, 2]


def test_4x12_matches_brute_force(rng):
    for _ in range(20):
        R = rng.uniform(-1, 1, (4, 12))
        pos = np.cumsum(rng.uniform(0.5, 3.0, 4))
        lam = float(rng.uniform(0, 1))
        got = rotation_path(R, lam, 60.0, pos)
        assert got.tolist() == brute_force_rotation(R, lam, 60.0, pos).tolist()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 11))
def test_shift_equivariance(seed, shift):
    rng = np.random.default_rng(seed)
    R = rng.uniform(-1, 1, (4, 12))
    base = rotation_path(R, 0.2, INF, np.arange(4.0))
    shifted = rotation_path(np.roll(R, shift, axis=1), 0.2, INF, np.arange(4.0))
    # ties could pick differently; the objective must agree
    dist = circular_bin_distance(12)

    def score(M, t):
        return sum(M[a, t[a]] for a in range(4)) - 0.2 * sum(dist[t[a], t[a - 1]] ** 2 for a in range(1, 4))
    assert score(np.roll(R, shift, axis=1), shifted) == pytest.approx(score(R, base), abs=1e-12)
    if len(set(np.round(R.ravel(), 12))) == R.size:
        assert ((base + shift) % 12).tolist() == shifted.tolist()


def test_wrap_degrees():
    assert wrap_degrees([0, 180, -180, 190, 350, -10]).tolist() == [0, 180, 180, -170, -10, -10]


def test_interpolate_between_anchors():
    out = interpolate_rotations([0, 10], [0.0, 20.0], [0, 5, 10])
    assert out.tolist() == [0.0, 10.0, 20.0]


def test_interpolate_across_wrap():
    out = interpolate_rotations([0, 2], [350.0, 10.0], [0, 1, 2])
    assert np.allclose(out, [350.0, 0.0, 10.0])


def test_interpolate_flat_extrapolation_and_empty():
    out = interpolate_rotations([4, 6], [30.0, 50.0], [0, 5, 9])
    assert out.tolist() == [30.0, 40.0, 50.0]
    assert interpolate_rotations([], [], [0, 1, 2]).tolist() == [0.0, 0.0, 0.0]
