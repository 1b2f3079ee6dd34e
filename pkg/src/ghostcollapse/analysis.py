"""Counting-rate distributions, normalisation, widths and comparisons."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .quadrature import Grid1D, integrate


class Normalization(str, enum.Enum):
    RAW = "raw"
    PEAK1 = "peak1"
    AREA1 = "area1"


@dataclass(frozen=True)
class Distribution:
    grid: Grid1D
    values: np.ndarray
    normalization: Normalization = Normalization.RAW

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("distribution contains non-finite values")
        if np.any(values < 0):
            raise ValueError("counting rates must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "normalization", Normalization(self.normalization))

    @property
    def positions(self) -> np.ndarray:
        return self.grid.positions

    def area(self) -> float:
        return float(integrate(self.values, self.grid))

    def peak_position(self) -> float:
        return float(self.positions[int(np.argmax(self.values))])


class FWHMError(ValueError):
    pass


def normalize(dist: Distribution, mode: Normalization | str = Normalization.PEAK1) -> Distribution:
    mode = Normalization(mode)
    if mode is Normalization.RAW:
        return dist
    by_peak = mode is Normalization.PEAK1
    scale = float(dist.values.max()) if by_peak else dist.area()
    if not scale > 0:
        raise ValueError(f"cannot normalise: {'peak' if by_peak else 'area'} is not positive")
    return replace(dist, values=dist.values / scale, normalization=mode)


def _crossing(x0, x1, y0, y1, level):
    if y1 == y0:
        return 0.5 * (x0 + x1)
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def fwhm(dist: Distribution) -> float:
    """Width between the outermost half-maximum crossings, linearly interpolated.

    Raises FWHMError when the samples at or above half maximum do not form a
    single contiguous run, or when that run touches the grid boundary.
    """
    y = dist.values
    x = dist.positions
    peak = y.max()
    if not peak > 0:
        raise FWHMError("distribution has no positive maximum")
    half = 0.5 * peak
    above = np.flatnonzero(y >= half)
    lo, hi = above[0], above[-1]
    if hi - lo + 1 != above.size:
        gaps = np.flatnonzero(np.diff(above) > 1)
        raise FWHMError(
            f"{gaps.size + 1} separate regions reach half maximum "
            f"(first gap after x={x[above[gaps[0]]]:.4g} m)"
        )
    if lo == 0 or hi == y.size - 1:
        raise FWHMError("half-maximum region reaches the grid boundary")
    left = _crossing(x[lo - 1], x[lo], y[lo - 1], y[lo], half)
    right = _crossing(x[hi], x[hi + 1], y[hi], y[hi + 1], half)
    return float(right - left)


@dataclass(frozen=True)
class ComparisonReport:
    max_abs_diff: float
    rel_l2: float
    fwhm_a: float
    fwhm_b: float
    passed: bool
    tolerance: float
    notes: str = ""

    def to_text(self, prefix: str = "") -> str:
        """Flat ``key=value`` block, one pair per line."""
        fields = {
            "max_abs_diff": f"{self.max_abs_diff:.6e}",
            "rel_l2": f"{self.rel_l2:.6e}",
            "fwhm_a": f"{self.fwhm_a:.6e}",
            "fwhm_b": f"{self.fwhm_b:.6e}",
            "tolerance": f"{self.tolerance:.1e}",
            "pass": "true" if self.passed else "false",
            "notes": self.notes.replace("\n", " "),
        }
        return "".join(f"{prefix}{k}={v}\n" for k, v in fields.items())


def _safe_fwhm(dist: Distribution) -> tuple[float, str]:
    try:
        return fwhm(dist), ""
    except FWHMError as exc:
        return math.nan, str(exc)


def compare(a: Distribution, b: Distribution, tolerance: float, notes: str = "") -> ComparisonReport:
    """Compare two distributions on the same grid after unit-area normalisation.

    max_abs_diff is max|a - b| divided by the larger of the two peaks;
    rel_l2 is ||a - b|| / sqrt(||a|| ||b||) with the grid's quadrature norm.
    Both metrics are symmetric in (a, b) and invariant under positive scaling
    of either input.
    """
    if a.grid != b.grid:
        raise ValueError(f"grids differ: {a.grid} vs {b.grid}")
    na = normalize(a, Normalization.AREA1).values
    nb = normalize(b, Normalization.AREA1).values
    diff = na - nb
    max_abs = float(np.max(np.abs(diff)) / max(na.max(), nb.max()))
    l2 = lambda v: math.sqrt(max(float(integrate(v * v, a.grid)), 0.0))
    rel_l2 = l2(diff) / math.sqrt(l2(na) * l2(nb))
    fa, note_a = _safe_fwhm(a)
    fb, note_b = _safe_fwhm(b)
    extra = "; ".join(n for n in (notes, note_a and f"a: {note_a}", note_b and f"b: {note_b}") if n)
    return ComparisonReport(
        max_abs_diff=max_abs,
        rel_l2=rel_l2,
        fwhm_a=fa,
        fwhm_b=fb,
        passed=bool(max_abs < tolerance and rel_l2 < tolerance),
        tolerance=tolerance,
        notes=extra,
    )
