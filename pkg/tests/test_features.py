import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coreg.errors import DegenerateVessel, TooFewFrames
from coreg.features import (
    LongFeatureSequence,
    downsample,
    extract_circ_profile,
    extract_long_features,
    gaussian_smooth,
    smooth_channel,
)
from coreg.pullback import Modality, Pullback

from conftest import make_frame, make_pullback


def renormalized_gaussian_oracle(x, sigma):
    """Direct evaluation: out[i] = sum_t g(t) x[i+t] / sum_t g(t) over in-range t, |t| <= ceil(3 sigma)."""
    r = math.ceil(3 * sigma)
    out = []
    for i in range(len(x)):
        num = den = 0.0
        for t in range(-r, r + 1):
            if 0 <= i + t < len(x):
                g = math.exp(-t * t / (2 * sigma * sigma))
                num += g * x[i + t]
                den += g
        out.append(num / den)
    return out


def test_lumen_area_normalized_by_max():
    frames = [make_frame(k, area=a) for k, a in enumerate([2, 4, 8])]
    seq = extract_long_features(Pullback("IVUS", frames, 0.5))
    assert seq.vectors[:, 0].tolist() == [0.25, 0.5, 1.0]


def test_norm_position():
    seq = extract_long_features(make_pullback(3))
    assert seq.vectors[:, 3].tolist() == [0.0, 0.5, 1.0]


def test_calcium_degree():
    seq = extract_long_features(make_pullback(2, calcium=45))
    assert seq.vectors[:, 2].tolist() == [0.25, 0.25]


def test_side_branch_area_clamped_and_absent_is_zero():
    frames = [make_frame(0), make_frame(1, side_branch=(3, 9, 0.4)), make_frame(2, side_branch=(3, 9, 1.7))]
    seq = extract_long_features(Pullback("OCT", frames, 0.4))
    assert seq.vectors[:, 1].tolist() == [0.0, 0.4, 1.0]


def test_degenerate_vessel():
    p = make_pullback(3)
    bad = Pullback(p.modality, [make_frame(k, area=0.0) for k in range(3)], 0.5)
    with pytest.raises(DegenerateVessel):
        extract_long_features(bad)


def test_positions_do_not_matter():
    a = make_pullback(6, spacing=0.5)
    b = Pullback(a.modality, [make_frame(k, position=k ** 2 * 0.3) for k in range(6)], 0.5)
    assert np.array_equal(extract_long_features(a).vectors, extract_long_features(b).vectors)


def test_smooth_constant_channel_unchanged():
    x = np.array([0.5, 0.5, 0.5, 0.5])
    for sigma in (0.3, 1.0, 2.0, 7.5):
        assert np.allclose(smooth_channel(x, sigma), x, rtol=0, atol=1e-15)


def test_smooth_sigma_zero_is_identity():
    seq = extract_long_features(make_pullback(5))
    assert gaussian_smooth(seq, 0) is seq


def test_smooth_impulse_matches_hand_evaluation():
    x = [0, 0, 1, 0, 0]
    got = smooth_channel(np.array(x, dtype=float), 1.0)
    # g(t) = exp(-t^2/2): g0 = 1, g1 = 0.60653066, g2 = 0.13533528, g3 = 0.01110900
    g1, g2, g3 = math.exp(-0.5), math.exp(-2.0), math.exp(-4.5)
    expected = [g2 / (1 + g1 + g2 + g3),
                g1 / (1 + 2 * g1 + g2 + g3),
                1 / (1 + 2 * (g1 + g2)),
                g1 / (1 + 2 * g1 + g2 + g3),
                g2 / (1 + g1 + g2 + g3)]
    assert np.allclose(got, expected, rtol=0, atol=1e-15)
    assert np.allclose(got, renormalized_gaussian_oracle(x, 1.0), rtol=0, atol=1e-15)
    assert np.allclose(got, got[::-1], rtol=0, atol=1e-15)
    # Renormalizing near the ends keeps constants but does not conserve mass.
    assert sum(got) == pytest.approx(1.07114, abs=1e-5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0.1, 6.0))
def test_smooth_matches_oracle_and_keeps_range(x, sigma):
    got = smooth_channel(np.array(x), sigma)
    assert np.allclose(got, renormalized_gaussian_oracle(x, sigma), rtol=0, atol=1e-12)
    assert np.all(got >= min(x) - 1e-12) and np.all(got <= max(x) + 1e-12)


def test_downsample_ivus_keeps_ed_frames():
    p = make_pullback(51, ed={0, 25, 50}, spacing=0.02)
    ds = downsample(extract_long_features(p), p)
    assert ds.source_frame_indices.tolist() == [0, 25, 50]
    assert len(ds) == 3


@pytest.mark.parametrize("n, expected", [(10, [0, 2, 4, 6, 8]), (3, [0, 2]), (11, [0, 2, 4, 6, 8, 10])])
def test_downsample_oct_every_second(n, expected):
    p = make_pullback(n, modality="OCT", spacing=0.4)
    ds = downsample(extract_long_features(p), p)
    assert ds.source_frame_indices.tolist() == expected
    assert len(ds) == math.ceil(n / 2)


def test_downsample_too_few():
    p = make_pullback(2, modality="OCT")
    with pytest.raises(TooFewFrames):
        downsample(extract_long_features(p), p)


def test_downsample_modality_mismatch():
    p = make_pullback(4)
    seq = LongFeatureSequence(Modality.OCT, np.zeros((4, 4)), np.arange(4))
    with pytest.raises(ValueError):
        downsample(seq, p)


def test_circ_profile_circular_lumen():
    prof = extract_circ_profile(make_frame(0, radius=[2.0] * 180))
    assert np.all(prof.radius_centered == 0)
    assert np.all(prof.calcium == 0)
    assert np.all(prof.side_branch == 0)


def test_circ_profile_side_branch_painted():
    prof = extract_circ_profile(make_frame(0, side_branch=(10, 20, 0.3)))
    expected = np.zeros(180)
    expected[10:21] = 0.3
    assert np.array_equal(prof.side_branch, expected)


def test_circ_profile_side_branch_wraps():
    prof = extract_circ_profile(make_frame(0, side_branch=(175, 5, 0.2)))
    assert set(np.flatnonzero(prof.side_branch)) == set(range(175, 180)) | set(range(0, 6))


def test_circ_profile_centered_and_calcium_copied(rng):
    radius = rng.uniform(0.5, 3.0, 180)
    calcium = rng.integers(0, 2, 180)
    prof = extract_circ_profile(make_frame(0, radius=radius.tolist(), calcium=calcium.tolist()))
    assert abs(prof.radius_centered.mean()) < 1e-9
    assert np.allclose(prof.radius_centered, radius - radius.mean())
    assert np.array_equal(prof.calcium, calcium)
