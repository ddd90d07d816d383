"""Pullback domain types, NDJSON feature-file IO and structural validation.

A feature file holds one JSON object per line, one line per frame::

    {"frame_index": 0, "position_mm": 0.0, "is_ed": true,
     "lumen_area_mm2": 7.1, "lumen_radius_profile": [... 180 floats ...],
     "side_branch": {"bin_start": 170, "bin_end": 8, "area": 0.21},
     "calcium_arc": [... 180 values of 0/1 ...]}

``side_branch`` may be ``null``. Bin ``b`` covers the direction ``2*b`` degrees;
a side branch occupies bins ``bin_start..bin_end`` inclusive, wrapping through
bin 0 when ``bin_start > bin_end``. Its ``area`` is a fraction of the vessel's
maximum lumen area. Unknown keys are rejected.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .errors import (
    EmptyPullback,
    MalformedRecord,
    MissingEdFlags,
    NonMonotoneIndex,
    PullbackError,
    TooFewFrames,
)

N_BINS = 180
BIN_DEG = 360.0 / N_BINS

FRAME_KEYS = (
    "frame_index",
    "position_mm",
    "is_ed",
    "lumen_area_mm2",
    "lumen_radius_profile",
    "side_branch",
    "calcium_arc",
)
SIDE_BRANCH_KEYS = ("bin_start", "bin_end", "area")

# Nominal spacing used when a file's positions do not determine one.
NOMINAL_SPACING_MM = {"IVUS": 0.5, "OCT": 0.4}


class Modality(str, enum.Enum):
    IVUS = "IVUS"
    OCT = "OCT"

    @classmethod
    def parse(cls, value: Union[str, "Modality"]) -> "Modality":
        if isinstance(value, Modality):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown modality {value!r}; expected IVUS or OCT") from None


@dataclass(frozen=True)
class SideBranch:
    bin_start: int
    bin_end: int
    area: float

    def bins(self) -> list[int]:
        """Bins covered by the branch, walking forward from ``bin_start``."""
        span = (self.bin_end - self.bin_start) % N_BINS
        return [(self.bin_start + k) % N_BINS for k in range(span + 1)]


@dataclass(frozen=True)
class RawFrame:
    frame_index: int
    position_mm: float
    is_ed: bool
    lumen_area_mm2: float
    lumen_radius_profile: tuple
    calcium_arc: tuple
    side_branch: Optional[SideBranch] = None

    def __post_init__(self):
        # Coerce sequences so equality is by value and frames stay hashable.
        object.__setattr__(self, "lumen_radius_profile",
                           tuple(float(v) for v in self.lumen_radius_profile))
        object.__setattr__(self, "calcium_arc", tuple(bool(v) for v in self.calcium_arc))

    @property
    def has_side_branch(self) -> bool:
        return self.side_branch is not None and self.side_branch.area > 0

    @property
    def calcium_fraction(self) -> float:
        return sum(self.calcium_arc) / N_BINS


@dataclass(frozen=True)
class Pullback:
    modality: Modality
    frames: tuple
    frame_spacing_mm: float

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality.parse(self.modality))
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def ed_positions(self) -> list[int]:
        """List positions of the ED-flagged frames."""
        return [k for k, f in enumerate(self.frames) if f.is_ed]


@dataclass(frozen=True)
class Violation:
    kind: str
    frame_index: Optional[int]
    message: str

    def __str__(self) -> str:
        where = "pullback" if self.frame_index is None else f"frame {self.frame_index}"
        return f"{self.kind} at {where}: {self.message}"


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _frame_violations(f: RawFrame) -> list[Violation]:
    out = []
    idx = f.frame_index

    def bad(kind, msg):
        out.append(Violation(kind, idx, msg))

    if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
        bad("MalformedRecord", f"frame_index must be a non-negative integer, got {idx!r}")
    if not _finite(f.position_mm):
        bad("MalformedRecord", f"position_mm must be finite, got {f.position_mm!r}")
    if not _finite(f.lumen_area_mm2) or f.lumen_area_mm2 <= 0:
        bad("MalformedRecord", f"lumen_area_mm2 must be positive, got {f.lumen_area_mm2!r}")
    prof = f.lumen_radius_profile
    if len(prof) != N_BINS:
        bad("MalformedRecord", f"lumen_radius_profile has {len(prof)} entries, expected {N_BINS}")
    elif not all(math.isfinite(r) and r > 0 for r in prof):
        bad("MalformedRecord", "lumen_radius_profile entries must be finite and > 0")
    if len(f.calcium_arc) != N_BINS:
        bad("MalformedRecord", f"calcium_arc has {len(f.calcium_arc)} entries, expected {N_BINS}")
    sb = f.side_branch
    if sb is not None:
        for name in ("bin_start", "bin_end"):
            b = getattr(sb, name)
            if not isinstance(b, int) or isinstance(b, bool) or not 0 <= b < N_BINS:
                bad("MalformedRecord", f"side_branch.{name} must be in [0, {N_BINS - 1}], got {b!r}")
        if not _finite(sb.area) or sb.area < 0:
            bad("MalformedRecord", f"side_branch.area must be >= 0, got {sb.area!r}")
    return out


def validate(p: Pullback) -> list[Violation]:
    """Return every invariant violation of ``p``; an empty list means valid.

    Per-frame problems come first in frame order, then ordering problems,
    then pullback-level counts.
    """
    out: list[Violation] = []
    if len(p.frames) == 0:
        return [Violation("EmptyPullback", None, "pullback has no frames")]
    for f in p.frames:
        out.extend(_frame_violations(f))
    for prev, cur in zip(p.frames, p.frames[1:]):
        if not cur.frame_index > prev.frame_index:
            out.append(Violation("NonMonotoneIndex", cur.frame_index,
                                 f"frame_index {cur.frame_index} does not follow {prev.frame_index}"))
        if cur.position_mm < prev.position_mm:
            out.append(Violation("NonMonotonePosition", cur.frame_index,
                                 f"position_mm {cur.position_mm} < previous {prev.position_mm}"))
    if len(p.frames) < 2:
        out.append(Violation("TooFewFrames", None, "a pullback needs at least 2 frames"))
    if not (_finite(p.frame_spacing_mm) and p.frame_spacing_mm > 0):
        out.append(Violation("MalformedRecord", None,
                             f"frame_spacing_mm must be positive, got {p.frame_spacing_mm!r}"))
    if p.modality is Modality.IVUS:
        n_ed = sum(1 for f in p.frames if f.is_ed)
        if n_ed < 2:
            out.append(Violation("MissingEdFlags", None,
                                 f"IVUS pullback has {n_ed} ED frames, at least 2 required"))
    return out


_ERROR_FOR_KIND = {
    "EmptyPullback": EmptyPullback,
    "NonMonotoneIndex": NonMonotoneIndex,
    "NonMonotonePosition": NonMonotoneIndex,
    "MissingEdFlags": MissingEdFlags,
    "TooFewFrames": TooFewFrames,
}


def raise_for_violations(violations: list[Violation], source: str = "") -> None:
    if not violations:
        return
    first = violations[0]
    exc = _ERROR_FOR_KIND.get(first.kind, MalformedRecord)
    prefix = f"{source}: " if source else ""
    extra = f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""
    raise exc(f"{prefix}{first}{extra}")


# --- record decoding ---------------------------------------------------------

def _require(cond: bool, lineno: int, msg: str) -> None:
    if not cond:
        raise MalformedRecord(f"line {lineno}: {msg}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def frame_from_record(rec: dict, lineno: int = 0) -> RawFrame:
    _require(isinstance(rec, dict), lineno, "record is not a JSON object")
    unknown = sorted(set(rec) - set(FRAME_KEYS))
    _require(not unknown, lineno, f"unknown keys {unknown}")
    missing = [k for k in FRAME_KEYS if k not in rec]
    _require(not missing, lineno, f"missing keys {missing}")

    _require(_is_int(rec["frame_index"]), lineno, "frame_index must be an integer")
    _require(_is_num(rec["position_mm"]), lineno, "position_mm must be a number")
    _require(isinstance(rec["is_ed"], bool), lineno, "is_ed must be a boolean")
    _require(_is_num(rec["lumen_area_mm2"]), lineno, "lumen_area_mm2 must be a number")

    prof = rec["lumen_radius_profile"]
    _require(isinstance(prof, list) and all(_is_num(v) for v in prof), lineno,
             "lumen_radius_profile must be an array of numbers")
    _require(len(prof) == N_BINS, lineno,
             f"lumen_radius_profile has {len(prof)} entries, expected {N_BINS}")
    calc = rec["calcium_arc"]
    _require(isinstance(calc, list) and all(v in (0, 1) for v in calc), lineno,
             "calcium_arc must be an array of 0/1")
    _require(len(calc) == N_BINS, lineno, f"calcium_arc has {len(calc)} entries, expected {N_BINS}")

    sb = rec["side_branch"]
    branch = None
    if sb is not None:
        _require(isinstance(sb, dict), lineno, "side_branch must be an object or null")
        _require(set(sb) == set(SIDE_BRANCH_KEYS), lineno,
                 f"side_branch keys must be {list(SIDE_BRANCH_KEYS)}, got {sorted(sb)}")
        _require(_is_int(sb["bin_start"]) and _is_int(sb["bin_end"]), lineno,
                 "side_branch bins must be integers")
        _require(_is_num(sb["area"]), lineno, "side_branch.area must be a number")
        branch = SideBranch(sb["bin_start"], sb["bin_end"], float(sb["area"]))

    return RawFrame(
        frame_index=rec["frame_index"],
        position_mm=float(rec["position_mm"]),
        is_ed=rec["is_ed"],
        lumen_area_mm2=float(rec["lumen_area_mm2"]),
        lumen_radius_profile=prof,
        calcium_arc=calc,
        side_branch=branch,
    )


def frame_to_record(f: RawFrame) -> dict:
    sb = None
    if f.side_branch is not None:
        sb = {"bin_start": f.side_branch.bin_start, "bin_end": f.side_branch.bin_end,
              "area": f.side_branch.area}
    return {
        "frame_index": f.frame_index,
        "position_mm": f.position_mm,
        "is_ed": f.is_ed,
        "lumen_area_mm2": f.lumen_area_mm2,
        "lumen_radius_profile": list(f.lumen_radius_profile),
        "side_branch": sb,
        "calcium_arc": [int(c) for c in f.calcium_arc],
    }


def _infer_spacing(frames: list[RawFrame], modality: Modality) -> float:
    diffs = sorted(b.position_mm - a.position_mm for a, b in zip(frames, frames[1:])
                   if b.position_mm > a.position_mm)
    if not diffs:
        return NOMINAL_SPACING_MM[modality.value]
    mid = len(diffs) // 2
    return diffs[mid] if len(diffs) % 2 else 0.5 * (diffs[mid - 1] + diffs[mid])


def loads_pullback(text: str, modality, frame_spacing_mm: Optional[float] = None,
                   source: str = "") -> Pullback:
    modality = Modality.parse(modality)
    frames = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecord(f"{source + ': ' if source else ''}line {lineno}: invalid JSON ({e.msg})") from None
        try:
            frames.append(frame_from_record(rec, lineno))
        except MalformedRecord as e:
            raise MalformedRecord(f"{source}: {e}" if source else str(e)) from None
    if not frames:
        raise EmptyPullback(f"{source + ': ' if source else ''}no frame records")
    frames.sort(key=lambda f: f.frame_index)
    spacing = frame_spacing_mm if frame_spacing_mm is not None else _infer_spacing(frames, modality)
    p = Pullback(modality, frames, spacing)
    raise_for_violations(validate(p), source)
    return p


def parse_pullback(path: Union[str, Path], modality, frame_spacing_mm: Optional[float] = None) -> Pullback:
    """Read and validate an NDJSON pullback feature file.

    Records are reordered by ``frame_index``. When ``frame_spacing_mm`` is not
    given it is taken as the median positive gap between consecutive positions.
    """
    path = Path(path)
    return loads_pullback(path.read_text(encoding="utf-8"), modality, frame_spacing_mm, str(path))


def dumps_pullback(p: Pullback) -> str:
    lines = [json.dumps(frame_to_record(f), separators=(",", ":")) for f in p.frames]
    return "\n".join(lines) + "\n"


def write_pullback(p: Pullback, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_pullback(p), encoding="utf-8")


__all__ = [
    "BIN_DEG", "N_BINS", "Modality", "SideBranch", "RawFrame", "Pullback", "Violation",
    "validate", "parse_pullback", "loads_pullback", "dumps_pullback", "write_pullback",
    "frame_from_record", "frame_to_record", "raise_for_violations", "PullbackError",
]
