"""Longitudinal feature sequences and circumferential profiles.

Longitudinal features are four channels per frame, all in [0, 1]:
normalized lumen area, normalized side-branch area, calcium degree and
normalized frame position. Circumferential profiles hold three 180-bin
channels (mean-centered lumen radius, side-branch area, calcium presence).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVessel, TooFewFrames
from .pullback import N_BINS, Modality, Pullback, RawFrame

CHANNELS = ("lumen_area_norm", "side_branch_area_norm", "calcium_degree", "norm_position")


@dataclass(frozen=True, eq=False)
class LongFeatureSequence:
    """Rows are per-frame feature vectors in ``CHANNELS`` order.

    ``source_frame_indices`` are list positions in the originating pullback.
    """

    modality: Modality
    vectors: np.ndarray
    source_frame_indices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float).reshape(-1, len(CHANNELS))
        s = np.asarray(self.source_frame_indices, dtype=int)
        if len(v) != len(s):
            raise ValueError("vectors and source_frame_indices differ in length")
        if len(s) > 1 and np.any(np.diff(s) <= 0):
            raise ValueError("source_frame_indices must be strictly increasing")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "source_frame_indices", s)

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True, eq=False)
class CircProfile:
    radius_centered: np.ndarray
    side_branch: np.ndarray
    calcium: np.ndarray

    def channels(self) -> np.ndarray:
        """Stack as a (3, 180) array: side branch, calcium, eccentricity."""
        return np.vstack([self.side_branch, self.calcium, self.radius_centered])


def extract_long_features(p: Pullback) -> LongFeatureSequence:
    areas = np.array([f.lumen_area_mm2 for f in p.frames], dtype=float)
    max_area = areas.max() if len(areas) else 0.0
    if not max_area > 0:
        raise DegenerateVessel(f"maximum lumen area is {max_area}")
    n = len(p.frames)
    sb = np.array([f.side_branch.area if f.side_branch is not None else 0.0 for f in p.frames])
    calc = np.array([sum(f.calcium_arc) for f in p.frames], dtype=float) / N_BINS
    pos = np.arange(n) / (n - 1) if n > 1 else np.zeros(1)
    vectors = np.column_stack([areas / max_area, np.clip(sb, 0.0, 1.0), calc, pos])
    return LongFeatureSequence(p.modality, vectors, np.arange(n))


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3 * sigma))
    t = np.arange(-radius, radius + 1, dtype=float)
    return np.exp(-0.5 * (t / sigma) ** 2)


def smooth_channel(x: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing truncated at 3 sigma, weights renormalized near the ends."""
    x = np.asarray(x, dtype=float)
    if sigma == 0 or len(x) == 0:
        return x.copy()
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    num = np.convolve(np.pad(x, r), k, mode="valid")
    den = np.convolve(np.pad(np.ones_like(x), r), k, mode="valid")
    return num / den


def gaussian_smooth(seq: LongFeatureSequence, sigma: float) -> LongFeatureSequence:
    if not math.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return seq
    out = np.column_stack([smooth_channel(seq.vectors[:, c], sigma)
                           for c in range(seq.vectors.shape[1])])
    # Convex weights keep values in range up to rounding.
    np.clip(out, 0.0, 1.0, out=out)
    return LongFeatureSequence(seq.modality, out, seq.source_frame_indices)


def downsample(seq: LongFeatureSequence, p: Pullback) -> LongFeatureSequence:
    """Keep the ED frames of an IVUS sequence, or every second frame of an OCT one."""
    if Modality.parse(seq.modality) is not p.modality:
        raise ValueError(f"sequence modality {seq.modality} does not match pullback {p.modality}")
    src = seq.source_frame_indices
    if p.modality is Modality.IVUS:
        keep = np.array([k for k, s in enumerate(src) if p.frames[s].is_ed], dtype=int)
    else:
        keep = np.arange(0, len(src), 2)
    if len(keep) < 2:
        raise TooFewFrames(f"{p.modality.value} sequence has {len(keep)} frames after downsampling")
    return LongFeatureSequence(seq.modality, seq.vectors[keep], src[keep])


def extract_circ_profile(f: RawFrame) -> CircProfile:
    r = np.asarray(f.lumen_radius_profile, dtype=float)
    sb = np.zeros(N_BINS)
    if f.side_branch is not None:
        sb[f.side_branch.bins()] = f.side_branch.area
    calc = np.asarray(f.calcium_arc, dtype=float)
    return CircProfile(r - r.mean(), sb, calc)
