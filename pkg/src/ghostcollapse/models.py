"""Signal counting-rate distributions under the three evolution models.

Heisenberg (no collapse): correlated counting rates built from |f|^2 or |g|^2
integrated over the idler detector.
Pure collapse: the idler measurement leaves one coherent signal amplitude, the
slit-integrated kernel.
Mixed collapse: an incoherent ensemble of point-spread basis states weighted by
the idler detection probability.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .analysis import ComparisonReport, Distribution, compare, fwhm
from .kernels import (
    IdlerDetector,
    KernelContext,
    PlaneSelector,
    SignalPlane,
    kernel_f,
    kernel_g,
    slit_grid,
)
from .quadrature import ComplexField, Grid1D, MAX_PHASE_PER_STEP

DEFAULT_IDLER_COUNT = 513
MIN_IDLER_COUNT = 129
FOCUS_ENERGY_CAPTURE = 0.999
FOCUS_START_LOBES = 6
FOCUS_SAMPLES_PER_LOBE = 16
GRID_HALFWIDTH_FWHMS = 3.0
BOUNDARY_LEAKAGE = 1e-8


class CaptureWarning(UserWarning):
    """The collector-focus integration range misses more energy than allowed."""


class SamplingWarning(UserWarning):
    """A sampled field violates the boundary or phase-resolution preconditions."""


# --- grids -------------------------------------------------------------------

def expected_fwhm(ctx: KernelContext, plane) -> float:
    """Rough width of the slit-detector Heisenberg distribution, for sizing grids."""
    plane = SignalPlane(plane)
    if plane is SignalPlane.GHOST:
        return max(ctx.slit_image_width(), ctx.psf_fwhm(plane))
    g = ctx.geometry
    return ctx.psf_fwhm(plane) + ctx.slit_image_width() * g.d3 / g.d2


def finest_feature(ctx: KernelContext, plane) -> float:
    plane = SignalPlane(plane)
    feature = ctx.psf_fwhm(plane)
    if plane is SignalPlane.DIFFRACTION:
        g = ctx.geometry
        # far-field lobe of the magnified slit image after d3 - d2
        feature = min(feature, g.lam * (g.d3 - g.d2) / ctx.slit_image_width())
    return feature


def default_signal_grid(ctx: KernelContext, plane, points: int | None = None,
                        halfwidth: float | None = None) -> Grid1D:
    """Centered grid of +-3 expected FWHM, >= 10 samples across the finest feature."""
    if halfwidth is None:
        halfwidth = GRID_HALFWIDTH_FWHMS * expected_fwhm(ctx, plane)
    if points is None:
        points = max(201, int(math.ceil(2 * halfwidth * 10 / finest_feature(ctx, plane))) + 1)
        points += 1 - points % 2
    return Grid1D.centered(halfwidth, points)


@dataclass(frozen=True)
class FocusPattern:
    """Collector-focus amplitudes g(xD1, x_m) on a capture range chosen by energy."""

    grid: Grid1D
    values: np.ndarray
    captured: float


def _slit_ccr(ctx: KernelContext, plane, signal_grid: Grid1D) -> np.ndarray:
    xm = signal_grid.positions
    slit = slit_grid(ctx, plane, float(np.max(np.abs(xm))))
    F = kernel_f(slit.positions[:, None], plane, xm[None, :], ctx)
    return slit.weights() @ (np.abs(F) ** 2)


def focus_pattern(ctx: KernelContext, plane, signal_grid: Grid1D,
                  energy: float = FOCUS_ENERGY_CAPTURE, max_halfwidth: float | None = None) -> FocusPattern:
    """Sample g over a collector-focus range capturing ``energy`` of the total.

    Starts at six single-slit lobes (6 lambda fc / w) and widens by half until the
    captured energy, checked against the Plancherel total lambda fc * integral |f|^2
    over the slit, reaches ``energy``.
    """
    g = ctx.geometry
    lobe = g.lam * g.fc / g.w
    if max_halfwidth is None:
        max_halfwidth = 200 * ctx.focus_pattern_halfwidth() + FOCUS_START_LOBES * lobe
    w_sig = signal_grid.weights()
    total = g.lam * g.fc * float(w_sig @ _slit_ccr(ctx, plane, signal_grid))
    halfwidth = FOCUS_START_LOBES * lobe
    while True:
        count = int(math.ceil(2 * halfwidth * FOCUS_SAMPLES_PER_LOBE / lobe)) + 1
        grid = Grid1D.centered(halfwidth, count + 1 - count % 2)
        G = kernel_g(grid.positions, plane, signal_grid.positions, ctx)
        captured = float(grid.weights() @ (np.abs(G) ** 2) @ w_sig) / total
        if captured >= energy or halfwidth >= max_halfwidth:
            break
        halfwidth = min(1.5 * halfwidth, max_halfwidth)
    if captured < energy:
        warnings.warn(
            f"collector-focus range +-{halfwidth:.3e} m captures {captured:.5f} < {energy} of the energy",
            CaptureWarning,
            stacklevel=2,
        )
    return FocusPattern(grid=grid, values=G, captured=captured)


# --- Heisenberg ----------------------------------------------------------------

def heisenberg_ccr(sel: PlaneSelector, signal_grid: Grid1D, ctx: KernelContext) -> Distribution:
    """Correlated counting rate with the idler detector integrated over its plane."""
    plane = sel.signal_plane
    if sel.idler_detector is IdlerDetector.SLIT:
        values = _slit_ccr(ctx, plane, signal_grid)
    else:
        pattern = focus_pattern(ctx, plane, signal_grid)
        values = pattern.grid.weights() @ (np.abs(pattern.values) ** 2)
    return Distribution(signal_grid, np.maximum(values, 0.0))


# --- pure collapse ----------------------------------------------------------

def pure_collapse_state(plane, signal_grid: Grid1D, ctx: KernelContext) -> ComplexField:
    """Slit-integrated amplitude: the signal state left by a slit-wide idler measurement."""
    xm = signal_grid.positions
    slit = slit_grid(ctx, plane, float(np.max(np.abs(xm))))
    F = kernel_f(slit.positions[:, None], plane, xm[None, :], ctx)
    return ComplexField(signal_grid, slit.weights() @ F)


def propagate_state(state: ComplexField, target_grid: Grid1D, ctx: KernelContext) -> ComplexField:
    """Fresnel-propagate a ghost-plane state to the diffraction plane.

    Uses the unimodular impulse response scaled by 1/sqrt(i lambda z), which makes
    the map norm-preserving; the scale is a constant and does not change shapes.
    """
    g = ctx.geometry
    z = g.d3 - g.d2
    x2 = state.grid.positions
    x3 = target_grid.positions
    psi = state.values
    intensity = np.abs(psi) ** 2
    peak = intensity.max()
    if peak > 0 and max(intensity[0], intensity[-1]) > BOUNDARY_LEAKAGE * peak:
        warnings.warn(
            f"state not contained by its grid: edge/peak = {max(intensity[0], intensity[-1]) / peak:.2e}",
            SamplingWarning,
            stacklevel=2,
        )
    significant = intensity > 1e-12 * peak
    own_steps = np.abs(np.angle(psi[1:] * np.conj(psi[:-1])))[significant[1:] & significant[:-1]]
    kernel_rate = 2 * math.pi * (np.max(np.abs(x3)) + np.max(np.abs(x2))) / (g.lam * z)
    per_step = kernel_rate * state.grid.step + (own_steps.max() if own_steps.size else 0.0)
    if per_step >= MAX_PHASE_PER_STEP:
        warnings.warn(
            f"propagation integrand advances {per_step:.2f} rad per source sample (> pi/4)",
            SamplingWarning,
            stacklevel=2,
        )
    source = state.grid.weights() * psi
    out = np.empty(x3.size, dtype=complex)
    chunk = max(1, (1 << 22) // x2.size)
    for i in range(0, x3.size, chunk):
        dx = x3[i:i + chunk, None] - x2[None, :]
        out[i:i + chunk] = np.exp(1j * math.pi * dx * dx / (g.lam * z)) @ source
    return ComplexField(target_grid, out / np.sqrt(1j * g.lam * z))


def pure_collapse_cr(plane, signal_grid: Grid1D, ctx: KernelContext) -> Distribution:
    return Distribution(signal_grid, pure_collapse_state(plane, signal_grid, ctx).intensity)


# --- mixed collapse ---------------------------------------------------------

@dataclass(frozen=True)
class CollapseEnsemble:
    """Diagonal density matrix of collapsed signal states.

    ``raw[n]`` is the unnormalised basis amplitude for an idler detection at
    ``idler_positions.positions[n]`` (cell midpoints, spacing ``idler_positions.step``),
    sampled on ``signal_grid``. ``K[n]`` normalises it on that grid; ``P[n]`` is the
    detection probability density, computed in the collapse (ghost image) plane
    on ``collapse_grid`` and scaled by ``K2`` so that sum(P) * step = 1.
    """

    idler: IdlerDetector
    plane: SignalPlane
    idler_positions: Grid1D
    signal_grid: Grid1D
    collapse_grid: Grid1D
    raw: np.ndarray
    K: np.ndarray
    P: np.ndarray
    K2: float

    def __len__(self) -> int:
        return self.idler_positions.count

    @property
    def basis_fields(self) -> list[ComplexField]:
        return [ComplexField(self.signal_grid, row) for row in self.raw]

    def basis(self, n: int) -> ComplexField:
        return ComplexField(self.signal_grid, self.K[n] * self.raw[n])

    def basis_norms(self) -> np.ndarray:
        return (np.abs(self.raw) ** 2 @ self.signal_grid.weights()) * self.K ** 2

    def total_probability(self) -> float:
        return float(self.P.sum() * self.idler_positions.step)


def idler_cells(ctx: KernelContext, idler, signal_grid: Grid1D, plane,
                count: int | None = None) -> Grid1D:
    """Midpoint grid of idler detection positions for the ensemble."""
    idler = IdlerDetector(idler)
    g = ctx.geometry
    if idler is IdlerDetector.SLIT:
        count = count or DEFAULT_IDLER_COUNT
        if count < MIN_IDLER_COUNT:
            raise ValueError(f"need >= {MIN_IDLER_COUNT} idler positions, got {count}")
        return Grid1D.cells(-g.w / 2, g.w / 2, count)
    pattern = focus_pattern(ctx, plane, signal_grid)
    lo, hi = pattern.grid.start, pattern.grid.stop
    if count is None:
        count = max(DEFAULT_IDLER_COUNT, pattern.grid.count)
    if count < MIN_IDLER_COUNT:
        raise ValueError(f"need >= {MIN_IDLER_COUNT} idler positions, got {count}")
    return Grid1D.cells(lo, hi, count)


def _basis_amplitudes(idler: IdlerDetector, positions, plane, grid: Grid1D, ctx: KernelContext) -> np.ndarray:
    xm = grid.positions
    if idler is IdlerDetector.SLIT:
        return kernel_f(np.asarray(positions)[:, None], plane, xm[None, :], ctx)
    return kernel_g(np.asarray(positions), plane, xm, ctx)


def build_ensemble(idler, plane, signal_grid: Grid1D, ctx: KernelContext, count: int | None = None,
                   collapse_grid: Grid1D | None = None) -> CollapseEnsemble:
    idler = IdlerDetector(idler)
    plane = SignalPlane(plane)
    cells = idler_cells(ctx, idler, signal_grid, plane, count)
    xi = cells.positions
    raw = _basis_amplitudes(idler, xi, plane, signal_grid, ctx)
    norms = np.abs(raw) ** 2 @ signal_grid.weights()
    if np.any(norms <= 0):
        bad = xi[np.flatnonzero(norms <= 0)[0]]
        raise ValueError(f"basis state for idler position {bad:.4e} m has zero norm")

    if collapse_grid is None:
        collapse_grid = signal_grid if plane is SignalPlane.GHOST else default_signal_grid(ctx, SignalPlane.GHOST)
    if plane is SignalPlane.GHOST and collapse_grid == signal_grid:
        p_raw = norms
    else:
        ghost = _basis_amplitudes(idler, xi, SignalPlane.GHOST, collapse_grid, ctx)
        p_raw = np.abs(ghost) ** 2 @ collapse_grid.weights()
    K2 = 1.0 / float(p_raw.sum() * cells.step)
    return CollapseEnsemble(
        idler=idler,
        plane=plane,
        idler_positions=cells,
        signal_grid=signal_grid,
        collapse_grid=collapse_grid,
        raw=raw,
        K=1.0 / np.sqrt(norms),
        P=p_raw * K2,
        K2=K2,
    )


def probability_at(ens: CollapseEnsemble, positions, ctx: KernelContext) -> np.ndarray:
    """Detection probability density at arbitrary idler positions, on the ensemble's scale."""
    amp = _basis_amplitudes(ens.idler, np.atleast_1d(positions), SignalPlane.GHOST, ens.collapse_grid, ctx)
    return (np.abs(amp) ** 2 @ ens.collapse_grid.weights()) * ens.K2


def basis_state(idler, plane, position: float, signal_grid: Grid1D, ctx: KernelContext) -> ComplexField:
    """Unit-norm basis state for a single idler detection at ``position``."""
    idler = IdlerDetector(idler)
    g = ctx.geometry
    if idler is IdlerDetector.SLIT and abs(position) > g.w / 2:
        raise ValueError(f"idler position {position:.4e} m lies outside the slit (|x| <= {g.w / 2:.4e})")
    amp = _basis_amplitudes(idler, [position], plane, signal_grid, ctx)[0]
    norm = float(np.abs(amp) ** 2 @ signal_grid.weights())
    if not norm > 0:
        raise ValueError(f"basis state for idler position {position:.4e} m has zero norm")
    return ComplexField(signal_grid, amp / math.sqrt(norm))


def mixed_collapse_cr(ens: CollapseEnsemble) -> Distribution:
    """Incoherent, probability-weighted sum of the normalised basis intensities."""
    weights = ens.P * ens.idler_positions.step * ens.K ** 2
    return Distribution(ens.signal_grid, np.maximum(weights @ (np.abs(ens.raw) ** 2), 0.0))


# --- comparisons ------------------------------------------------------------

def equivalence_check(ctx: KernelContext, sel: PlaneSelector, tolerance: float,
                      signal_grid: Grid1D | None = None) -> ComparisonReport:
    """Mixed-collapse vs Heisenberg distributions, area-normalised, on one grid."""
    if signal_grid is None:
        signal_grid = default_signal_grid(ctx, sel.signal_plane)
    heis = heisenberg_ccr(sel, signal_grid, ctx)
    ens = build_ensemble(sel.idler_detector, sel.signal_plane, signal_grid, ctx)
    mixed = mixed_collapse_cr(ens)
    return compare(mixed, heis, tolerance, notes=f"mixed vs heisenberg, {sel}")


@dataclass(frozen=True)
class ContrastReport:
    comparison: ComparisonReport
    fwhm_pure: float
    fwhm_heisenberg: float
    degenerate: bool

    @property
    def ratio(self) -> float:
        return self.fwhm_pure / self.fwhm_heisenberg

    @property
    def detected(self) -> bool:
        return (not self.degenerate) and self.ratio < 0.5


def pure_vs_heisenberg(ctx: KernelContext, plane, tolerance: float = 1e-3,
                       signal_grid: Grid1D | None = None) -> ContrastReport:
    """Pure-collapse vs Heisenberg (slit detector) in one signal plane.

    ``degenerate`` flags a slit narrower than the point-spread width, where the
    pure state and every mixed basis state coincide and no contrast can exist.
    """
    plane = SignalPlane(plane)
    if signal_grid is None:
        signal_grid = default_signal_grid(ctx, plane)
    pure = pure_collapse_cr(plane, signal_grid, ctx)
    heis = heisenberg_ccr(PlaneSelector(plane, IdlerDetector.SLIT), signal_grid, ctx)
    report = compare(pure, heis, tolerance, notes=f"pure vs heisenberg, slit/{plane.value}")
    degenerate = ctx.slit_image_width() < ctx.psf_fwhm(SignalPlane.GHOST)
    return ContrastReport(report, fwhm(pure), fwhm(heis), degenerate)
