"""Agreement statistics between registration estimates.

Frame differences are in OCT frames, angle differences in degrees on the
circle. Results are reported as median (IQR) together with Lin's
concordance correlation coefficient, Spearman's r, the Williams Index with a
percentile-bootstrap 95% CI, and Wilcoxon signed-rank p values.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, LengthMismatch, TooFewSamples, ZeroVariance

EXACT_WILCOXON_MAX_N = 12


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    return a, b


def frame_differences(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return np.abs(a - b)


def angle_differences(a, b) -> np.ndarray:
    """Circular absolute difference in degrees, in [0, 180]."""
    a, b = _pair(a, b)
    d = np.abs(a - b) % 360.0
    return np.minimum(d, 360.0 - d)


def unwrap_to(reference, angles) -> np.ndarray:
    """Re-express ``angles`` as ``reference`` plus their signed circular offset."""
    reference, angles = _pair(reference, angles)
    return reference + ((angles - reference + 180.0) % 360.0 - 180.0)


def ccc(x, y) -> float:
    """Lin's concordance correlation coefficient with population moments.

    Two identical constant series count as perfectly concordant (1.0).
    """
    x, y = _pair(x, y)
    if x.size < 2:
        raise TooFewSamples("ccc needs at least 2 samples")
    mx, my = x.mean(), y.mean()
    vx, vy = ((x - mx) ** 2).mean(), ((y - my) ** 2).mean()
    cov = ((x - mx) * (y - my)).mean()
    den = vx + vy + (mx - my) ** 2
    if den == 0:
        return 1.0
    return float(2.0 * cov / den)


def pearson(x, y) -> float:
    x, y = _pair(x, y)
    xc, yc = x - x.mean(), y - y.mean()
    den = math.sqrt(float((xc * xc).sum() * (yc * yc).sum()))
    if den == 0:
        raise ZeroVariance("a series has zero variance")
    return float(np.clip((xc * yc).sum() / den, -1.0, 1.0))


def spearman(x, y) -> float:
    """Pearson correlation of midranks."""
    x, y = _pair(x, y)
    if x.size < 2:
        raise TooFewSamples("spearman needs at least 2 samples")
    return pearson(rankdata(x), rankdata(y))


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float  # sum of positive ranks
    n: int  # non-zero differences used
    method: str  # "exact", "normal" or "none"
    all_zero: bool = False


def _exact_two_sided(ranks2: np.ndarray, w2: int) -> float:
    """Exact p by enumerating all sign assignments; ranks are doubled to stay integral."""
    n = len(ranks2)
    signs = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    dist = signs @ ranks2
    total = int(ranks2.sum())
    # |2W - total| compares distances from the null mean without fractions
    extreme = np.abs(2 * dist - total) >= abs(2 * w2 - total)
    return float(min(1.0, extreme.mean()))


def _normal_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((counts ** 3 - counts).sum()) / 48.0
    if var <= 0:
        return 1.0
    z = max(abs(w_plus - mu) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, math.erfc(z / math.sqrt(2.0))))


def wilcoxon_signed_rank(d1, d2, method: str = "auto") -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on ``d1 - d2``.

    Zero differences are dropped and tied magnitudes get midranks. ``auto``
    enumerates exactly up to 12 non-zero differences and otherwise uses the
    normal approximation with tie and continuity corrections.
    """
    d1, d2 = _pair(d1, d2)
    if d1.size < 1:
        raise TooFewSamples("wilcoxon needs at least 1 pair")
    diff = d1 - d2
    diff = diff[diff != 0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(1.0, 0.0, 0, "none", all_zero=True)
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    if method == "auto":
        method = "exact" if n <= EXACT_WILCOXON_MAX_N else "normal"
    if method == "exact":
        if n > 20:
            raise ValueError(f"exact enumeration over 2**{n} sign patterns is not supported")
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        return WilcoxonResult(_exact_two_sided(ranks2, int(round(2 * w_plus))), w_plus, n, "exact")
    if method == "normal":
        return WilcoxonResult(_normal_two_sided(ranks, w_plus), w_plus, n, "normal")
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class WilliamsResult:
    wi: float
    ci_low: float
    ci_high: float
    zero_disagreement: bool = False


def _williams(d01: float, d02: float, d12: float) -> float:
    return 0.5 * (1.0 / d01 + 1.0 / d02) / (1.0 / d12)


def williams_index(d_model_a1, d_model_a2, d_a1_a2, resamples: int = 2000, seed: int = 0,
                   aggregate: str = "mean", groups: Optional[Sequence] = None) -> WilliamsResult:
    """Williams Index of a model against two analysts, with a bootstrap 95% CI.

    ``WI = (1/D01 + 1/D02) / 2 / (1/D12)`` where ``D01``, ``D02`` are the
    model's disagreements with each analyst and ``D12`` the analysts'
    disagreement with each other, each the mean (or median) of per-case
    differences. With ``groups`` the cases are first averaged per vessel and
    the bootstrap resamples vessels. A zero disagreement gives ``wi = inf``
    with ``zero_disagreement`` set and a NaN interval.
    """
    a, b = _pair(d_model_a1, d_model_a2)
    a, c = _pair(a, d_a1_a2)
    if groups is not None:
        g = np.asarray(groups)
        if g.shape != a.shape:
            raise LengthMismatch("groups must match the difference lists")
        keys = np.unique(g)
        a, b, c = (np.array([x[g == k].mean() for k in keys]) for x in (a, b, c))
    if a.size < 2:
        raise TooFewSamples("williams_index needs at least 2 cases")
    agg = {"mean": np.mean, "median": np.median}[aggregate]
    D = [float(agg(x)) for x in (a, b, c)]
    if min(D) <= 0:
        return WilliamsResult(math.inf, math.nan, math.nan, zero_disagreement=True)
    wi = _williams(*D)

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, a.size, size=(resamples, a.size))
    Da, Db, Dc = (agg(x[idx], axis=1) for x in (a, b, c))
    ok = (Da > 0) & (Db > 0) & (Dc > 0)
    if not ok.any():
        return WilliamsResult(wi, math.nan, math.nan)
    boot = 0.5 * (1.0 / Da[ok] + 1.0 / Db[ok]) * Dc[ok]
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return WilliamsResult(wi, float(lo), float(hi))


def summarize(diffs) -> tuple[float, float]:
    """Median and interquartile range (linear interpolation between order statistics)."""
    x = np.asarray(diffs, dtype=float)
    if x.size == 0:
        raise EmptyInput("cannot summarize an empty list")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return float(med), float(q3 - q1)


@dataclass(frozen=True)
class AgreementReport:
    frame_diff_median: float
    frame_diff_iqr: float
    angle_diff_median: float
    angle_diff_iqr: float
    frame_ccc: float
    frame_spearman_r: Optional[float]
    angle_ccc: float
    angle_spearman_r: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def _spearman_or_none(x, y):
    try:
        return spearman(x, y)
    except ZeroVariance:
        return None


def compare(a: dict, b: dict) -> AgreementReport:
    """Agreement between two estimates, each ``{full_mapping, per_frame_rotation}``."""
    fa, fb = _pair(a["full_mapping"], b["full_mapping"])
    ra, rb = _pair(a["per_frame_rotation"], b["per_frame_rotation"])
    fmed, fiqr = summarize(frame_differences(fa, fb))
    amed, aiqr = summarize(angle_differences(ra, rb))
    rb_u = unwrap_to(ra, rb)
    return AgreementReport(fmed, fiqr, amed, aiqr, ccc(fa, fb), _spearman_or_none(fa, fb),
                           ccc(ra, rb_u), _spearman_or_none(ra, rb_u))


def _finite_or_none(x: float):
    return None if (x is None or not math.isfinite(x)) else x


def three_way(model: dict, a1: dict, a2: dict, resamples: int = 2000, seed: int = 0) -> dict:
    """Agreement of a model with two analysts and of the analysts with each other."""
    out = {
        "model_vs_a1": compare(model, a1).to_dict(),
        "model_vs_a2": compare(model, a2).to_dict(),
        "a1_vs_a2": compare(a1, a2).to_dict(),
    }
    for kind, key, diff in (("frame", "full_mapping", frame_differences),
                            ("angle", "per_frame_rotation", angle_differences)):
        d01 = diff(model[key], a1[key])
        d02 = diff(model[key], a2[key])
        d12 = diff(a1[key], a2[key])
        wi = williams_index(d01, d02, d12, resamples=resamples, seed=seed)
        w1 = wilcoxon_signed_rank(d01, d12)
        w2 = wilcoxon_signed_rank(d02, d12)
        out[f"{kind}_williams"] = {
            "williams_index": _finite_or_none(wi.wi),
            "ci_low": _finite_or_none(wi.ci_low),
            "ci_high": _finite_or_none(wi.ci_high),
            "zero_disagreement": wi.zero_disagreement,
        }
        out[f"{kind}_wilcoxon"] = {
            "model_vs_a1_against_a1_vs_a2": {"p": w1.p_value, "method": w1.method, "all_zero": w1.all_zero},
            "model_vs_a2_against_a1_vs_a2": {"p": w2.p_value, "method": w2.method, "all_zero": w2.all_zero},
        }
    return out
