"""End-to-end registration of one IVUS/OCT pullback pair."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .circumferential import RotationCostMatrix, register_rotation
from .config import EngineConfig
from .dtw import CorrespondencePath, align
from .errors import NoAnchors
from .features import downsample, extract_long_features, gaussian_smooth
from .pullback import Modality, Pullback, raise_for_violations, validate

log = logging.getLogger(__name__)


@dataclass(eq=False)
class RegistrationResult:
    path: CorrespondencePath
    per_frame_rotation: np.ndarray
    anchors: tuple
    anchor_rotations: np.ndarray
    config: EngineConfig
    warnings: list = field(default_factory=list)
    wall_clock_ms: float = 0.0
    D: Optional[np.ndarray] = None
    C: Optional[np.ndarray] = None
    R: Optional[RotationCostMatrix] = None

    @property
    def full_mapping(self) -> np.ndarray:
        return self.path.full_mapping

    def to_dict(self) -> dict:
        zeroed = self.R.zeroed_rows if self.R is not None else frozenset()
        return {
            "ivus_frames": [int(k) for k in self.path.ivus_frames],
            "full_mapping": [float(v) for v in self.path.full_mapping],
            "per_frame_rotation": [float(v) for v in self.per_frame_rotation],
            "anchors": [
                {
                    "ivus_frame": a.ivus_frame,
                    "oct_frame": a.oct_frame,
                    "has_side_branch": a.has_side_branch,
                    "calcium_fraction": a.calcium_fraction,
                    "rotation_deg": float(r),
                    "zeroed": k in zeroed,
                }
                for k, (a, r) in enumerate(zip(self.anchors, self.anchor_rotations))
            ],
            "path": [[int(i), int(j)] for i, j in self.path.pairs],
            "config": self.config.to_dict(),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        """Deterministic serialization; wall-clock time is deliberately excluded."""
        return json.dumps(self.to_dict(), indent=1) + "\n"


def register(ivus: Pullback, oct: Pullback, cfg: EngineConfig = EngineConfig(),
             strict: bool = False) -> RegistrationResult:
    """Longitudinal DTW followed by circumferential rotation search.

    Without anchors the rotation is 0 everywhere and a warning is recorded;
    with ``strict`` :class:`NoAnchors` propagates instead.
    """
    t0 = time.perf_counter()
    if ivus.modality is not Modality.IVUS or oct.modality is not Modality.OCT:
        raise ValueError("register expects an IVUS pullback and an OCT pullback")
    raise_for_violations(validate(ivus), "ivus")
    raise_for_violations(validate(oct), "oct")

    X = downsample(gaussian_smooth(extract_long_features(ivus), cfg.sigma), ivus)
    Y = downsample(gaussian_smooth(extract_long_features(oct), cfg.sigma), oct)
    path, D, C = align(X, Y, cfg.long)

    warnings = []
    try:
        rot, R = register_rotation(path, ivus, oct, cfg.circ, cfg.lam, cfg.delta_max_deg_per_mm,
                                   cfg.calcium_anchor_threshold, cfg.strict_sidebranch_zeroing)
        anchors, anchor_rot, per_frame = rot.anchors, rot.anchor_rotations, rot.per_frame_rotation
    except NoAnchors as e:
        if strict:
            raise
        log.warning("%s; using zero rotation", e)
        warnings.append(f"NoAnchors: {e}; rotation set to 0 for every frame")
        anchors, anchor_rot, per_frame, R = (), np.zeros(0), np.zeros(len(path.ivus_frames)), None

    elapsed = (time.perf_counter() - t0) * 1000.0
    return RegistrationResult(path, per_frame, tuple(anchors), anchor_rot, cfg, warnings, elapsed, D, C, R)


def load_result(path) -> dict:
    """Read a registration result or ground-truth JSON as ``{full_mapping, per_frame_rotation}``."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(d, dict):
        raise ValueError(f"{path}: expected a JSON object")
    if "true_mapping" in d:
        d = dict(d, full_mapping=d["true_mapping"], per_frame_rotation=d["true_rotation"])
    for key in ("full_mapping", "per_frame_rotation"):
        if key not in d:
            raise ValueError(f"{path}: missing {key!r}")
    return {"full_mapping": np.asarray(d["full_mapping"], dtype=float),
            "per_frame_rotation": np.asarray(d["per_frame_rotation"], dtype=float)}
