"""Circumferential registration: anchor selection, rotation cost matrix and
the regularized dynamic program over anchor rotations.

Rotation convention: an OCT frame rotated by ``s`` bins is displaced
counterclockwise by ``s * 360 / n_bins`` degrees relative to its IVUS partner,
so an OCT channel equal to ``np.roll(ivus_channel, s)`` has rotation ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dtw import CorrespondencePath
from .errors import NoAnchors
from .features import CircProfile, extract_circ_profile
from .pullback import Pullback

ZERO_VARIANCE_STD = 1e-12
# Slack on the movement cap so caps that land exactly on a bin boundary stay feasible.
FEASIBILITY_SLACK_DEG = 1e-9


@dataclass(frozen=True)
class CircWeights:
    w_sb: float = 1.0
    w_calc: float = 1.0
    w_ecc: float = 0.1

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"circumferential weights must be finite and >= 0, got {tuple(w)}")
        if not np.any(w > 0):
            raise ValueError("at least one circumferential weight must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_sb, self.w_calc, self.w_ecc], dtype=float)


@dataclass(frozen=True)
class AnchorPair:
    ivus_frame: int
    oct_frame: int
    has_side_branch: bool
    calcium_fraction: float
    position_mm: float = 0.0


@dataclass(frozen=True, eq=False)
class RotationCostMatrix:
    values: np.ndarray
    zeroed_rows: frozenset

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class RotationResult:
    anchors: tuple
    anchor_rotations: np.ndarray
    per_frame_rotation: np.ndarray


def select_anchors(mapping: CorrespondencePath, ivus: Pullback, oct: Pullback,
                   calcium_threshold: float = 0.05) -> list[AnchorPair]:
    """Pick matched frame pairs that carry side-branch or calcium signal.

    Each IVUS ED frame is paired with the OCT frame nearest to its mapped
    fractional index. A pair qualifies if either frame shows a side branch,
    or both frames have calcium on at least ``calcium_threshold`` of the arc.
    """
    last_oct = len(oct.frames) - 1
    anchors = []
    for k, iv in enumerate(mapping.ivus_frames):
        iv = int(iv)
        oc = min(max(mapping.oct_frame_for(k), 0), last_oct)
        fi, fo = ivus.frames[iv], oct.frames[oc]
        sb = fi.has_side_branch or fo.has_side_branch
        calc = min(fi.calcium_fraction, fo.calcium_fraction)
        if sb or calc >= calcium_threshold:
            anchors.append(AnchorPair(iv, oc, sb, calc, fi.position_mm))
    if not anchors:
        raise NoAnchors("no matched frame pair contains a side branch or calcium")
    anchors.sort(key=lambda a: a.ivus_frame)
    return anchors


def _standardize(x: np.ndarray) -> Optional[np.ndarray]:
    sd = x.std()
    if sd < ZERO_VARIANCE_STD:
        return None
    return (x - x.mean()) / sd


def circular_ncc(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Normalized circular cross-correlation; entry ``s`` compares ``a`` with ``b`` shifted back by ``s``.

    Returns zeros when either signal has zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    za, zb = _standardize(a), _standardize(b)
    if za is None or zb is None:
        return np.zeros(n)
    idx = (np.arange(n)[None, :] + np.arange(n)[:, None]) % n
    return np.clip(zb[idx] @ za / n, -1.0, 1.0)


def weighted_circular_ncc(a: CircProfile, b: CircProfile, w: CircWeights) -> np.ndarray:
    """Weighted mean over channels of :func:`circular_ncc` of IVUS ``a`` against OCT ``b``."""
    wa = w.as_array()
    ca, cb = a.channels(), b.channels()
    total = np.zeros(ca.shape[1])
    for wf, x, y in zip(wa, ca, cb):
        if wf > 0:
            total += wf * circular_ncc(x, y)
    return np.clip(total / wa.sum(), -1.0, 1.0)


def anchor_has_signal(anchor: AnchorPair, calcium_threshold: float, strict: bool = False) -> bool:
    if anchor.has_side_branch:
        return True
    return not strict and anchor.calcium_fraction >= calcium_threshold


def rotation_cost_matrix(anchors: Sequence[AnchorPair], profiles: Sequence[tuple],
                         w: CircWeights, calcium_threshold: float = 0.05,
                         strict: bool = False) -> RotationCostMatrix:
    """One row of weighted NCC per anchor; rows without signal are zeroed.

    ``profiles[a]`` is the ``(ivus_profile, oct_profile)`` pair of anchor ``a``.
    With ``strict`` only side branches count as signal.
    """
    if len(anchors) != len(profiles):
        raise ValueError("anchors and profiles differ in length")
    rows, zeroed = [], set()
    for a, (anchor, (pi, po)) in enumerate(zip(anchors, profiles)):
        if anchor_has_signal(anchor, calcium_threshold, strict):
            rows.append(weighted_circular_ncc(pi, po, w))
        else:
            rows.append(np.zeros(len(pi.side_branch)))
            zeroed.add(a)
    return RotationCostMatrix(np.array(rows, dtype=float).reshape(len(anchors), -1), frozenset(zeroed))


def anchor_profiles(anchors: Sequence[AnchorPair], ivus: Pullback, oct: Pullback) -> list[tuple]:
    return [(extract_circ_profile(ivus.frames[a.ivus_frame]), extract_circ_profile(oct.frames[a.oct_frame]))
            for a in anchors]


def circular_bin_distance(n_bins: int) -> np.ndarray:
    k = np.arange(n_bins)
    d = np.abs(k[:, None] - k[None, :])
    return np.minimum(d, n_bins - d)


def _step_limit_deg(delta_max: float, gap_mm: float) -> float:
    if math.isinf(delta_max):
        return math.inf
    return delta_max * gap_mm + FEASIBILITY_SLACK_DEG


def rotation_path(R, lam: float, delta_max_deg_per_mm: float,
                  anchor_positions_mm: Sequence[float]) -> np.ndarray:
    """Rotation bin per anchor maximizing data term minus a smoothness penalty.

    Maximizes ``sum_a R[a, t_a] - lam * sum_a d(t_a, t_{a-1})**2`` where ``d``
    is the circular bin distance, subject to ``d * bin_deg <= delta_max * gap``
    for consecutive anchors ``gap`` mm apart. The last row takes the best
    (lowest-index on ties) bin; backtracking prefers, among equally good
    predecessors, the smaller angular change and then the lower bin.
    """
    values = R.values if isinstance(R, RotationCostMatrix) else np.asarray(R, dtype=float)
    n_rows, n_bins = values.shape
    pos = np.asarray(anchor_positions_mm, dtype=float)
    if len(pos) != n_rows:
        raise ValueError("need one position per anchor row")
    if n_rows == 0:
        return np.zeros(0, dtype=int)
    bin_deg = 360.0 / n_bins
    dist = circular_bin_distance(n_bins)
    penalty = lam * (dist * dist).astype(float)

    V = [values[0].copy()]
    masks = [None]
    for a in range(1, n_rows):
        feasible = dist * bin_deg <= _step_limit_deg(delta_max_deg_per_mm, pos[a] - pos[a - 1])
        # cand[t, u]: value of reaching bin t in row a from bin u in row a-1
        cand = np.where(feasible, V[a - 1][None, :] - penalty, -np.inf)
        V.append(values[a] + cand.max(axis=1))
        masks.append(feasible)

    theta = np.empty(n_rows, dtype=int)
    theta[-1] = int(np.argmax(V[-1]))
    for a in range(n_rows - 1, 0, -1):
        t = theta[a]
        cand = np.where(masks[a][t], V[a - 1] - penalty[t], -np.inf)
        ties = np.flatnonzero(cand == cand.max())
        theta[a - 1] = ties[np.lexsort((ties, dist[t, ties]))[0]]
    return theta


def wrap_degrees(x):
    """Map angle differences into (-180, 180]."""
    return -((-np.asarray(x, dtype=float) + 180.0) % 360.0 - 180.0)


def interpolate_rotations(anchor_frames, anchor_rotations_deg, ivus_frames) -> np.ndarray:
    """Per-frame rotation by linear interpolation of unwrapped anchor angles.

    Frames outside the anchor range take the nearest anchor's rotation; with
    no anchors every frame gets 0.
    """
    frames = np.asarray(ivus_frames, dtype=float)
    if len(anchor_frames) == 0:
        return np.zeros(len(frames))
    rot = np.asarray(anchor_rotations_deg, dtype=float) % 360.0
    unwrapped = rot[0] + np.concatenate([[0.0], np.cumsum(wrap_degrees(np.diff(rot)))])
    out = np.interp(frames, np.asarray(anchor_frames, dtype=float), unwrapped)
    return out % 360.0


def register_rotation(mapping: CorrespondencePath, ivus: Pullback, oct: Pullback, w: CircWeights,
                      lam: float, delta_max_deg_per_mm: float, calcium_threshold: float = 0.05,
                      strict_zeroing: bool = False):
    """Full circumferential stage; returns ``(RotationResult, RotationCostMatrix)``.

    Raises :class:`NoAnchors` when no pair qualifies.
    """
    anchors = select_anchors(mapping, ivus, oct, calcium_threshold)
    R = rotation_cost_matrix(anchors, anchor_profiles(anchors, ivus, oct), w,
                             calcium_threshold, strict_zeroing)
    bins = rotation_path(R, lam, delta_max_deg_per_mm, [a.position_mm for a in anchors])
    degrees = bins * (360.0 / R.n_bins)
    per_frame = interpolate_rotations([a.ivus_frame for a in anchors], degrees, mapping.ivus_frames)
    return RotationResult(tuple(anchors), degrees, per_frame), R
