"""Exhaustive reference solvers used to check the dynamic programs.

Both enumerate every candidate explicitly and share no code with
:mod:`coreg.dtw` or :mod:`coreg.circumferential`.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import InstanceTooLarge

MAX_DTW_SIDE = 8
MAX_ROT_ROWS = 5
MAX_ROT_BINS = 12

# Move codes read backwards from the end of a path; lower code = preferred on ties.
_DIAG, _UP, _LEFT = 0, 1, 2


def _enumerate_paths(n: int, m: int) -> list[tuple]:
    out = []

    def walk(i, j, acc):
        acc.append((i, j))
        if i == n - 1 and j == m - 1:
            out.append(tuple(acc))
        else:
            if i + 1 < n:
                walk(i + 1, j, acc)
            if j + 1 < m:
                walk(i, j + 1, acc)
            if i + 1 < n and j + 1 < m:
                walk(i + 1, j + 1, acc)
        acc.pop()

    walk(0, 0, [])
    return out


def _backward_moves(path) -> tuple:
    codes = []
    for (i0, j0), (i1, j1) in zip(path[-2::-1], path[:0:-1]):
        di, dj = i1 - i0, j1 - j0
        codes.append(_DIAG if (di, dj) == (1, 1) else _UP if di == 1 else _LEFT)
    return tuple(codes)


@lru_cache(maxsize=None)
def _path_table(n: int, m: int):
    """All monotone paths of an n x m grid, most-preferred first, as padded flat indices."""
    paths = sorted(_enumerate_paths(n, m), key=_backward_moves)
    longest = n + m - 1
    pad = n * m  # points at an appended zero
    flat = np.full((len(paths), longest), pad, dtype=np.intp)
    for r, p in enumerate(paths):
        flat[r, :len(p)] = [i * m + j for i, j in p]
    return paths, flat


def brute_force_dtw(D):
    """Minimum-cost monotone path by enumerating all of them.

    Costs are accumulated front to back. Among equal minima the path whose
    moves, read from the end, prefer diagonal over up over left is returned.
    """
    D = np.asarray(D, dtype=float)
    n, m = D.shape
    if n > MAX_DTW_SIDE or m > MAX_DTW_SIDE:
        raise InstanceTooLarge(f"{n}x{m} exceeds {MAX_DTW_SIDE}x{MAX_DTW_SIDE}")
    costs, paths = brute_force_dtw_batch(D[None])
    return costs[0], paths[0]


def brute_force_dtw_batch(Ds):
    """Vectorized :func:`brute_force_dtw` over a stack of equally sized matrices."""
    Ds = np.asarray(Ds, dtype=float)
    k, n, m = Ds.shape
    if n > MAX_DTW_SIDE or m > MAX_DTW_SIDE:
        raise InstanceTooLarge(f"{n}x{m} exceeds {MAX_DTW_SIDE}x{MAX_DTW_SIDE}")
    paths, flat = _path_table(n, m)
    vals = np.concatenate([Ds.reshape(k, n * m), np.zeros((k, 1))], axis=1)
    total = np.zeros((k, len(paths)))
    for step in range(flat.shape[1]):
        total = total + vals[:, flat[:, step]]
    best = np.argmin(total, axis=1)  # first minimum = most preferred
    return total[np.arange(k), best], [list(paths[b]) for b in best]


def _cdist(a: int, b: int, n_bins: int) -> int:
    d = abs(a - b) % n_bins
    return min(d, n_bins - d)


def brute_force_rotation(R, lam: float, delta_max: float, positions):
    """Best rotation-bin tuple by scoring every feasible assignment.

    Objective and tie rules match :func:`coreg.circumferential.rotation_path`:
    accumulate ``v = R[a, t_a] + (v - lam * d**2)`` row by row, keep tuples
    reaching the maximum, then fix the last row at its lowest bin and walk back
    preferring the smallest circular step, then the lowest bin.
    """
    R = np.asarray(R, dtype=float)
    A, B = R.shape
    if A > MAX_ROT_ROWS or B > MAX_ROT_BINS:
        raise InstanceTooLarge(f"{A}x{B} exceeds {MAX_ROT_ROWS}x{MAX_ROT_BINS}")
    if A == 0:
        return np.zeros(0, dtype=int)
    bin_deg = 360.0 / B
    limits = []
    for a in range(1, A):
        gap = positions[a] - positions[a - 1]
        limits.append(math.inf if math.isinf(delta_max) else delta_max * gap + 1e-9)

    # Score every tuple at once: axis a of ``v`` is the bin chosen for row a.
    k = np.arange(B)
    raw = np.abs(k[:, None] - k[None, :]) % B
    step = np.minimum(raw, B - raw)
    v = R[0].copy()
    feasible = np.ones(B, dtype=bool)
    for a in range(1, A):
        lead = (1,) * (a - 1)
        d = step.reshape(lead + (B, B))
        v = R[a].reshape((1,) * a + (B,)) + (v[..., None] - lam * (d * d).astype(float))
        feasible = feasible[..., None] & (d * bin_deg <= limits[a - 1])
    v = np.where(feasible, v, -np.inf)
    best = [tuple(int(t) for t in row) for row in np.argwhere(v == v.max())]

    chosen = best
    last = min(c[-1] for c in chosen)
    chosen = [c for c in chosen if c[-1] == last]
    for a in range(A - 2, -1, -1):
        key = min((_cdist(c[a], c[a + 1], B), c[a]) for c in chosen)
        chosen = [c for c in chosen if (_cdist(c[a], c[a + 1], B), c[a]) == key]
    return np.array(chosen[0], dtype=int)
