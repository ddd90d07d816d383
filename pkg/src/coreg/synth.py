"""Synthetic IVUS/OCT pullback pairs with analytic ground truth.

Anatomy lives on a common vessel axis ``z`` (mm, IVUS coordinates). The IVUS
pullback samples it directly; OCT frame ``j`` sits at OCT position
``j * oct_spacing_mm`` and images anatomy at ``z = warp(position)``, with its
circumferential channels rotated by ``rotation(z)`` degrees. Features are
rendered directly (areas, radius profiles, arcs), never as pixels.

Randomness: numpy's PCG64 bit generator (``numpy.random.default_rng``) seeded
with ``SeedSequence([seed, stream])``; stream 0 drives IVUS noise, stream 1
OCT noise and stream 2 :func:`random_config`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidConfig
from .pullback import BIN_DEG, N_BINS, Modality, Pullback, RawFrame, SideBranch

BIN_CENTERS_DEG = np.arange(N_BINS) * BIN_DEG


@dataclass
class SideBranchSpec:
    position_mm: float
    angle_deg: float
    extent_deg: float = 40.0
    area: float = 0.25
    length_mm: float = 2.0


@dataclass
class CalciumSpec:
    start_mm: float
    end_mm: float
    angle_start_deg: float
    angle_end_deg: float


@dataclass
class NoiseSpec:
    lumen_area_rel: float = 0.0
    radius_mm: float = 0.0
    side_branch_area: float = 0.0
    calcium_flip: float = 0.0


@dataclass
class SynthConfig:
    """Anatomy, acquisition geometry, warp, rotation field and noise of one vessel.

    ``lumen_area``, ``warp`` and ``rotation`` are control-point lists,
    interpolated piecewise-linearly. ``warp`` pairs are ``[oct_mm, ivus_mm]``
    and must run from ``[0, 0]`` to ``[oct_length, vessel_length_mm]``.
    ``rotation`` pairs are ``[z_mm, degrees]``.
    """

    vessel_length_mm: float = 50.0
    ivus_ed_spacing_mm: float = 0.5
    oct_spacing_mm: float = 0.4
    ivus_frames_per_ed: int = 1
    lumen_area: list = field(default_factory=lambda: [[0.0, 7.0]])
    eccentricity: float = 0.08
    eccentricity_axis: list = field(default_factory=lambda: [[0.0, 0.0]])
    side_branches: list = field(default_factory=list)
    calcium: list = field(default_factory=list)
    warp: Optional[list] = None
    rotation: list = field(default_factory=lambda: [[0.0, 0.0]])
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self):
        self.side_branches = [s if isinstance(s, SideBranchSpec) else SideBranchSpec(**s)
                              for s in self.side_branches]
        self.calcium = [c if isinstance(c, CalciumSpec) else CalciumSpec(**c) for c in self.calcium]
        if not isinstance(self.noise, NoiseSpec):
            self.noise = NoiseSpec(**self.noise)
        if self.warp is None:
            self.warp = [[0.0, 0.0], [self.vessel_length_mm, self.vessel_length_mm]]

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        try:
            cfg = cls(**d)
        except TypeError as e:
            raise InvalidConfig(str(e)) from None
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "SynthConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfig(f"{path}: {e}") from None
        if not isinstance(d, dict):
            raise InvalidConfig(f"{path}: expected a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self) -> None:
        for name in ("vessel_length_mm", "ivus_ed_spacing_mm", "oct_spacing_mm"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidConfig(f"{name} must be positive, got {v!r}")
        if not isinstance(self.ivus_frames_per_ed, int) or self.ivus_frames_per_ed < 1:
            raise InvalidConfig("ivus_frames_per_ed must be a positive integer")
        for name in ("lumen_area", "eccentricity_axis", "rotation", "warp"):
            pts = np.asarray(getattr(self, name), dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
                raise InvalidConfig(f"{name} must be a non-empty list of [x, y] pairs")
            if not np.all(np.isfinite(pts)):
                raise InvalidConfig(f"{name} has non-finite values")
            if len(pts) > 1 and np.any(np.diff(pts[:, 0]) <= 0):
                raise InvalidConfig(f"{name} control points must be strictly increasing")
        w = np.asarray(self.warp, dtype=float)
        if len(w) < 2 or np.any(np.diff(w[:, 1]) <= 0):
            raise InvalidConfig("warp control points must be strictly increasing in both coordinates")
        if w[0, 0] != 0 or w[0, 1] != 0 or not math.isclose(w[-1, 1], self.vessel_length_mm):
            raise InvalidConfig("warp must run from [0, 0] to [oct_length, vessel_length_mm]")
        if np.any(np.asarray(self.lumen_area, dtype=float)[:, 1] <= 0):
            raise InvalidConfig("lumen areas must be positive")
        if not 0 <= self.eccentricity < 1:
            raise InvalidConfig("eccentricity must be in [0, 1)")
        for s in self.side_branches:
            if not (s.extent_deg > 0 and 0 <= s.area <= 1 and s.length_mm > 0):
                raise InvalidConfig(f"bad side branch {s}")
        for c in self.calcium:
            if not c.end_mm >= c.start_mm:
                raise InvalidConfig(f"calcium deposit ends before it starts: {c}")
        n = self.noise
        if min(n.lumen_area_rel, n.radius_mm, n.side_branch_area, n.calcium_flip) < 0 or n.calcium_flip > 1:
            raise InvalidConfig(f"bad noise levels {n}")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    ivus_frames: np.ndarray
    true_mapping: np.ndarray
    true_rotation: np.ndarray

    def to_dict(self) -> dict:
        return {
            "ivus_frames": [int(k) for k in self.ivus_frames],
            "true_mapping": [float(v) for v in self.true_mapping],
            "true_rotation": [float(v) for v in self.true_rotation],
        }


def _interp(points, x):
    pts = np.asarray(points, dtype=float)
    return np.interp(x, pts[:, 0], pts[:, 1])


def _in_arc(angles, start, end):
    """Angles (deg) within the counterclockwise arc from ``start`` to ``end``."""
    span = (end - start) % 360.0
    return (np.asarray(angles) - start) % 360.0 <= span


class _Anatomy:
    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg

    def render(self, z: float, rot_deg: float):
        """Noise-free features at axial position ``z`` seen with rotation ``rot_deg``."""
        cfg = self.cfg
        area = float(_interp(cfg.lumen_area, z))
        r0 = math.sqrt(area / math.pi)
        # anatomical angle seen in each output bin
        phi = BIN_CENTERS_DEG - rot_deg
        axis = float(_interp(cfg.eccentricity_axis, z))
        radius = r0 * (1.0 + cfg.eccentricity * np.cos(np.radians(2.0 * (phi - axis))))

        branch, best = None, 0.0
        for s in cfg.side_branches:
            half = 0.5 * s.length_mm
            if abs(z - s.position_mm) >= half:
                continue
            strength = 1.0 - abs(z - s.position_mm) / half
            d = (phi - s.angle_deg + 180.0) % 360.0 - 180.0
            bump = np.clip(np.cos(np.pi * d / s.extent_deg), 0.0, None) * (np.abs(d) < 0.5 * s.extent_deg)
            radius = radius + 0.3 * r0 * strength * bump
            a = s.area * strength
            if a > best:
                lo = (s.angle_deg + rot_deg - 0.5 * s.extent_deg) / BIN_DEG
                hi = (s.angle_deg + rot_deg + 0.5 * s.extent_deg) / BIN_DEG
                branch, best = (int(math.floor(lo + 0.5)) % N_BINS, int(math.floor(hi + 0.5)) % N_BINS), a

        calcium = np.zeros(N_BINS, dtype=bool)
        for c in cfg.calcium:
            if c.start_mm <= z <= c.end_mm:
                calcium |= _in_arc(phi, c.angle_start_deg, c.angle_end_deg)
        return area, radius, branch, best, calcium


def _frame(idx, pos, is_ed, anatomy, z, rot, noise: NoiseSpec, rng) -> RawFrame:
    area, radius, branch, sb_area, calcium = anatomy.render(z, rot)
    # Draw every noise term unconditionally so the stream layout is fixed.
    e_area = rng.normal(0.0, 1.0)
    e_rad = rng.normal(0.0, 1.0, N_BINS)
    e_sb = rng.normal(0.0, 1.0)
    flips = rng.random(N_BINS) < noise.calcium_flip
    area = max(area * (1.0 + noise.lumen_area_rel * e_area), 1e-3)
    radius = np.maximum(radius + noise.radius_mm * e_rad, 1e-3)
    calcium = calcium ^ flips
    sb = None
    if branch is not None:
        sb = SideBranch(branch[0], branch[1], float(min(max(sb_area + noise.side_branch_area * e_sb, 0.0), 1.0)))
    return RawFrame(idx, pos, is_ed, float(area), radius.tolist(), calcium.tolist(), sb)


def _grid(length: float, spacing: float) -> np.ndarray:
    n = int(math.floor(length / spacing + 1e-9)) + 1
    return np.arange(n) * spacing


def generate_pair(cfg: SynthConfig):
    """Render ``(ivus, oct, ground_truth)`` for ``cfg``; a pure function of ``cfg``."""
    cfg.check()
    anatomy = _Anatomy(cfg)
    rng_ivus = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    rng_oct = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    ivus_spacing = cfg.ivus_ed_spacing_mm / cfg.ivus_frames_per_ed
    z_ivus = _grid(cfg.vessel_length_mm, ivus_spacing)
    ivus_frames = [
        _frame(k, float(z), k % cfg.ivus_frames_per_ed == 0, anatomy, float(z), 0.0, cfg.noise, rng_ivus)
        for k, z in enumerate(z_ivus)
    ]

    warp = np.asarray(cfg.warp, dtype=float)
    p_oct = _grid(warp[-1, 0], cfg.oct_spacing_mm)
    z_oct = np.interp(p_oct, warp[:, 0], warp[:, 1])
    rot_oct = _interp(cfg.rotation, z_oct)
    oct_frames = [
        _frame(j, float(p), False, anatomy, float(z), float(r), cfg.noise, rng_oct)
        for j, (p, z, r) in enumerate(zip(p_oct, z_oct, rot_oct))
    ]

    ed = np.array([k for k, f in enumerate(ivus_frames) if f.is_ed])
    z_ed = z_ivus[ed]
    true_mapping = np.interp(z_ed, warp[:, 1], warp[:, 0]) / cfg.oct_spacing_mm
    true_rotation = _interp(cfg.rotation, z_ed) % 360.0
    truth = GroundTruth(ed, true_mapping, true_rotation)
    return (Pullback(Modality.IVUS, ivus_frames, ivus_spacing),
            Pullback(Modality.OCT, oct_frames, cfg.oct_spacing_mm),
            truth)


def random_config(seed: int, vessel_length_mm: float = 50.0, max_warp_frames: float = 5.0,
                  max_rotation_deg: float = 40.0, noise: Optional[NoiseSpec] = None) -> SynthConfig:
    """A plausible random vessel: 3-6 side branches, 1-3 calcium deposits,
    a smooth warp within ``max_warp_frames`` OCT frames and a rotation field
    varying at most ``max_rotation_deg`` around a random base angle.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    L = vessel_length_mm
    oct_spacing = 0.4

    zs = np.linspace(0.0, L, 11)
    area = 7.0 + np.cumsum(rng.normal(0.0, 0.8, len(zs)))
    area = np.clip(area, 3.0, 12.0)

    n_sb = int(rng.integers(3, 7))
    grid = np.arange(3.0, max(L - 3.0, 3.5), 4.0)
    slots = np.sort(rng.choice(grid, size=min(n_sb, len(grid)), replace=False))
    branches = [
        SideBranchSpec(position_mm=float(p + rng.uniform(-1.0, 1.0)),
                       angle_deg=float(rng.uniform(0, 360)),
                       extent_deg=float(rng.uniform(25, 60)),
                       area=float(rng.uniform(0.1, 0.4)),
                       length_mm=float(rng.uniform(1.5, 3.0)))
        for p in slots
    ]
    n_ca = int(rng.integers(1, 4))
    deposits = []
    for _ in range(n_ca):
        start = float(rng.uniform(min(2.0, L / 4), max(L - 8.0, L / 2)))
        a0 = float(rng.uniform(0, 360))
        deposits.append(CalciumSpec(start, start + float(rng.uniform(2.0, 6.0)),
                                    a0, (a0 + float(rng.uniform(40, 150))) % 360.0))

    max_shift_mm = max_warp_frames * oct_spacing
    oct_knots = np.array([0.0, L / 4, L / 2, 3 * L / 4, L])
    shifts = np.concatenate([[0.0], rng.uniform(-max_shift_mm, max_shift_mm, 3), [0.0]])
    warp = np.column_stack([oct_knots, oct_knots + shifts]).tolist()

    base = float(rng.uniform(0, 360))
    rot_z = np.linspace(0.0, L, 5)
    rot = base + rng.uniform(-max_rotation_deg, max_rotation_deg, len(rot_z))
    rotation = np.column_stack([rot_z, rot]).tolist()

    if noise is None:
        noise = NoiseSpec(lumen_area_rel=0.03, radius_mm=0.03, side_branch_area=0.02, calcium_flip=0.01)
    return SynthConfig(
        vessel_length_mm=L,
        lumen_area=np.column_stack([zs, area]).tolist(),
        eccentricity=float(rng.uniform(0.03, 0.12)),
        eccentricity_axis=[[0.0, float(rng.uniform(0, 180))], [L, float(rng.uniform(0, 180))]],
        side_branches=branches,
        calcium=deposits,
        warp=warp,
        rotation=rotation,
        noise=noise,
        seed=seed,
    )


def ground_truth_json(truth: GroundTruth) -> str:
    return json.dumps(truth.to_dict(), indent=2) + "\n"
