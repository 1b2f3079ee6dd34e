"""Uniform 1D grids and composite quadrature for chirped Gaussian integrands."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Sampling contract: the local phase of any integrand may advance by less than
# this much between neighbouring samples.
MAX_PHASE_PER_STEP = math.pi / 4
MIN_SMOOTH_COUNT = 65


@dataclass(frozen=True)
class Grid1D:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step!r}")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"grid count must be an integer >= 2, got {self.count!r}")
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def centered(cls, halfwidth: float, count: int, center: float = 0.0) -> "Grid1D":
        """``count`` samples spanning [center - halfwidth, center + halfwidth] inclusive."""
        return cls(center - halfwidth, 2.0 * halfwidth / (count - 1), count)

    @classmethod
    def cells(cls, lo: float, hi: float, count: int) -> "Grid1D":
        """Midpoints of ``count`` equal cells partitioning [lo, hi]."""
        step = (hi - lo) / count
        return cls(lo + 0.5 * step, step, count)

    @property
    def positions(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    @property
    def extent(self) -> float:
        return self.step * (self.count - 1)

    def weights(self) -> np.ndarray:
        return quadrature_weights(self.count, self.step)


@dataclass(frozen=True)
class ComplexField:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm2(self) -> float:
        """Quadrature value of the integral of |values|^2."""
        return float(self.grid.weights() @ self.intensity)


def quadrature_weights(count: int, step: float) -> np.ndarray:
    """Composite Simpson weights for odd ``count``; trapezoid for even ``count``."""
    if count < 2:
        raise ValueError("need at least two samples")
    w = np.ones(count)
    if count % 2 == 1 and count >= 3:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (step / 3.0)
    w[0] = w[-1] = 0.5
    return w * step


def integrate(values: np.ndarray, grid: Grid1D, axis: int = -1):
    """Integrate samples along ``axis`` over ``grid``."""
    values = np.asarray(values)
    if values.shape[axis] != grid.count:
        raise ValueError(f"axis {axis} has {values.shape[axis]} samples, grid has {grid.count}")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite samples in integrand")
    return np.tensordot(np.moveaxis(values, axis, -1), grid.weights(), axes=([-1], [0]))


def integrate_sampled(field: ComplexField) -> complex:
    return complex(integrate(field.values, field.grid))


def uniform_fourier_sum(coeffs: np.ndarray, grid: Grid1D, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_j coeffs[j] * exp(-i kappa_j x) for kappa_j on a uniform ``grid``.

    Horner recurrence in exp(-i step x): O(len(coeffs) * len(x)) multiply-adds
    with no per-term exponentials. Rounding error stays near
    len(coeffs) * eps * sum|coeffs| because every factor is unimodular.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != (grid.count,):
        raise ValueError("one coefficient per grid sample required")
    x = np.asarray(x, dtype=float)
    ratio = np.exp(-1j * grid.step * x)
    acc = np.full(x.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc *= ratio
        acc += c
    return acc * np.exp(-1j * grid.start * x)


def gaussian_chirp_integral(a, beta, k):
    """Closed form of the integral over the real line of
    exp(-x^2/(2 a^2)) * exp(i beta x^2) * exp(-i k x) dx.

    Equals sqrt(pi/gamma) * exp(-k^2 / (4 gamma)) with gamma = 1/(2 a^2) - i beta
    (principal root; Re gamma > 0). Broadcasts over its arguments.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("Gaussian radius a must be positive")
    gamma = 1.0 / (2.0 * a * a) - 1j * np.asarray(beta, dtype=float)
    k = np.asarray(k, dtype=float)
    out = np.sqrt(np.pi / gamma) * np.exp(-(k * k) / (4.0 * gamma))
    return out[()] if out.ndim == 0 else out


def count_for_phase_rate(extent: float, phase_rate: float, min_count: int = MIN_SMOOTH_COUNT) -> int:
    """Smallest odd sample count over ``extent`` keeping phase per step below pi/4."""
    count = min_count
    if phase_rate > 0:
        count = max(count, int(math.floor(extent * phase_rate / MAX_PHASE_PER_STEP)) + 2)
    return count + (1 - count % 2)


def recommend_grid(a: float, beta_max: float, k_max: float, halfwidth_sigmas: float = 8.0) -> Grid1D:
    """Grid resolving exp(-x^2/2a^2) exp(i beta x^2) exp(-i k x) for |beta| <= beta_max, |k| <= k_max.

    The fastest local phase rate on [-h, h] is 2 |beta| h + |k|, i.e.
    |beta| * extent + |k|.
    """
    if not a > 0:
        raise ValueError("Gaussian radius a must be positive")
    extent = 2.0 * halfwidth_sigmas * a
    rate = abs(beta_max) * extent + abs(k_max)
    return Grid1D.centered(0.5 * extent, count_for_phase_rate(extent, rate))
