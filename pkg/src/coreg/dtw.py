"""Feature-weighted dynamic time warping between IVUS and OCT sequences."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import LongFeatureSequence

# Backtrace preference when predecessors tie: diagonal, then up (i-1), then left (j-1).
DIAG, UP, LEFT = (-1, -1), (-1, 0), (0, -1)
STEP_PREFERENCE = (DIAG, UP, LEFT)


@dataclass(frozen=True)
class LongWeights:
    w_lumen: float = 0.3
    w_sb: float = 1.5
    w_calc: float = 0.1
    w_pos: float = 2.5

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"longitudinal weights must be finite and >= 0, got {tuple(w)}")
        if not np.any(w > 0):
            raise ValueError("at least one longitudinal weight must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_lumen, self.w_sb, self.w_calc, self.w_pos], dtype=float)


@dataclass(frozen=True, eq=False)
class CorrespondencePath:
    """DTW path on downsampled indices plus the per-ED-frame OCT mapping.

    ``full_mapping[k]`` is the fractional OCT frame (list position in the OCT
    pullback) matched to the IVUS frame at ``ivus_frames[k]``.
    """

    pairs: tuple
    ivus_frames: np.ndarray
    full_mapping: np.ndarray

    def oct_frame_for(self, k: int) -> int:
        return int(np.floor(self.full_mapping[k] + 0.5))


def distance_matrix(X, Y, w: LongWeights) -> np.ndarray:
    """``D[i, j] = sqrt(sum_k w_k (X[i, k] - Y[j, k])**2)``."""
    x = X.vectors if isinstance(X, LongFeatureSequence) else np.asarray(X, dtype=float)
    y = Y.vectors if isinstance(Y, LongFeatureSequence) else np.asarray(Y, dtype=float)
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,k->ij", diff * diff, w.as_array()))


def dtw_cost(D: np.ndarray) -> np.ndarray:
    """Cumulative cost matrix with fixed endpoints (0, 0) and (n-1, m-1)."""
    D = np.asarray(D, dtype=float)
    n, m = D.shape
    C = np.empty_like(D)
    C[0, 0] = D[0, 0]
    for j in range(1, m):
        C[0, j] = D[0, j] + C[0, j - 1]
    for i in range(1, n):
        C[i, 0] = D[i, 0] + C[i - 1, 0]
        prev = C[i - 1]
        row = C[i]
        d = D[i]
        for j in range(1, m):
            row[j] = d[j] + min(prev[j], row[j - 1], prev[j - 1])
    return C


def backtrace(C: np.ndarray, D: np.ndarray = None) -> list[tuple[int, int]]:
    """Trace the optimal path from (n-1, m-1) back to (0, 0).

    At each cell the predecessor with the smallest cumulative cost wins; ties
    go diagonal, then up, then left. Returned in forward order.
    """
    C = np.asarray(C, dtype=float)
    i, j = C.shape[0] - 1, C.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = None
            for di, dj in STEP_PREFERENCE:
                c = C[i + di, j + dj]
                if best is None or c < best[0]:
                    best = (c, di, dj)
            i, j = i + best[1], j + best[2]
        path.append((i, j))
    path.reverse()
    return path


def path_cost(D: np.ndarray, path: Sequence[tuple[int, int]]) -> float:
    """Sum of ``D`` along ``path`` accumulated in forward order."""
    total = 0.0
    for i, j in path:
        total += D[i, j]
    return total


def interpolate_path(pairs, x_src, y_src) -> np.ndarray:
    """Map a downsampled DTW path to one fractional OCT index per IVUS frame.

    Path indices are translated to source frame positions; an IVUS frame
    matched to several OCT frames takes their mean. IVUS frames absent from
    the path (none, for a complete DTW path) are filled by linear interpolation.
    """
    x_src = np.asarray(x_src, dtype=float)
    y_src = np.asarray(y_src, dtype=float)
    sums = np.zeros(len(x_src))
    counts = np.zeros(len(x_src))
    for i, j in pairs:
        sums[i] += y_src[j]
        counts[i] += 1
    seen = counts > 0
    means = sums[seen] / counts[seen]
    return np.interp(x_src, x_src[seen], means)


def align(X: LongFeatureSequence, Y: LongFeatureSequence, w: LongWeights):
    """Run DTW and return ``(CorrespondencePath, D, C)``."""
    D = distance_matrix(X, Y, w)
    C = dtw_cost(D)
    pairs = backtrace(C, D)
    mapping = interpolate_path(pairs, X.source_frame_indices, Y.source_frame_indices)
    return CorrespondencePath(tuple(pairs), X.source_frame_indices.copy(), mapping), D, C


def mapping_at(path: CorrespondencePath, ivus_frames) -> np.ndarray:
    """Piecewise-linear OCT index for arbitrary (e.g. non-ED) IVUS frame positions."""
    return np.interp(np.asarray(ivus_frames, dtype=float), path.ivus_frames, path.full_mapping)
