"""Propagation kernels for the signal and idler arms.

All kernels are vectorised with numpy broadcasting and drop overall constant
factors (source efficiency, lens-plane measure); only shapes and relative
phases are meaningful.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import GhostGeometry, require_valid
from .quadrature import (
    Grid1D,
    count_for_phase_rate,
    gaussian_chirp_integral,
    recommend_grid,
    uniform_fourier_sum,
)

PUMP_HALFWIDTH_SIGMAS = 8.0
MIN_SLIT_COUNT = 129
SINC_ZEROS_KEPT = 6
SAMPLES_PER_SINC_LOBE = 16
_CHUNK_ELEMENTS = 1 << 22


class SignalPlane(str, enum.Enum):
    GHOST = "ghost"
    DIFFRACTION = "diffraction"


class IdlerDetector(str, enum.Enum):
    SLIT = "slit"
    FOCUS = "focus"


@dataclass(frozen=True)
class PlaneSelector:
    signal_plane: SignalPlane
    idler_detector: IdlerDetector

    def __post_init__(self):
        object.__setattr__(self, "signal_plane", SignalPlane(self.signal_plane))
        object.__setattr__(self, "idler_detector", IdlerDetector(self.idler_detector))

    def __str__(self) -> str:
        return f"{self.idler_detector.value}/{self.signal_plane.value}"


ALL_SELECTORS = tuple(
    PlaneSelector(plane, idler) for idler in IdlerDetector for plane in SignalPlane
)


@dataclass(frozen=True)
class KernelContext:
    """A validated geometry plus the derived constants every kernel needs."""

    geometry: GhostGeometry

    def __post_init__(self):
        require_valid(self.geometry)

    @property
    def lam(self) -> float:
        return self.geometry.lam

    @property
    def M(self) -> float:
        return self.geometry.magnification

    def plane_distance(self, plane: SignalPlane) -> float:
        return self.geometry.d2 if SignalPlane(plane) is SignalPlane.GHOST else self.geometry.d3

    def chirp(self, plane: SignalPlane) -> float:
        """Quadratic phase coefficient (1/m^2) of the pump-face integrand."""
        g = self.geometry
        if SignalPlane(plane) is SignalPlane.GHOST:
            return 0.0
        return math.pi * (g.d2 - g.d3) / (g.lam * g.d2 * g.d3)

    def spatial_frequency(self, x1i, plane: SignalPlane, x_m):
        """Conjugate variable 2 pi (M x1i + x_m d2/z_m) / (lambda d2) of the pump-face integral."""
        g = self.geometry
        scale = g.d2 / self.plane_distance(plane)
        return 2.0 * math.pi * (self.M * np.asarray(x1i) + np.asarray(x_m) * scale) / (g.lam * g.d2)

    def gamma(self, plane: SignalPlane) -> complex:
        return 1.0 / (2.0 * self.geometry.a_p ** 2) - 1j * self.chirp(plane)

    def psf_fwhm(self, plane: SignalPlane = SignalPlane.GHOST) -> float:
        """FWHM in x_m of |f(0, plane, x_m)|^2 from the closed-form Gaussian transform."""
        g = self.geometry
        re_inv = (1.0 / self.gamma(plane)).real
        k_half = math.sqrt(2.0 * math.log(2.0) / re_inv)
        return 2.0 * k_half * g.lam * self.plane_distance(plane) / (2.0 * math.pi)

    def slit_image_width(self) -> float:
        return self.M * self.geometry.w

    def focus_pattern_halfwidth(self) -> float:
        """1/e half-width in xD1 of the collector-focus detection probability.

        The idler field at the slit is coherent only over the point-spread width,
        so the focal-plane pattern is the pump aperture mapped through the lens
        pair, not a single-slit sinc.
        """
        g = self.geometry
        return self.M * g.fc * g.a_p / g.d2


def fresnel_kernel(x2, z2, x0, z0, lam):
    """Free-space impulse response exp(i pi (x2 - x0)^2 / (lambda (z2 - z0)))."""
    dz = np.asarray(z2, dtype=float) - np.asarray(z0, dtype=float)
    if np.any(dz == 0):
        raise ValueError("coincident source and observation planes")
    dx = np.asarray(x2, dtype=float) - np.asarray(x0, dtype=float)
    return np.exp(1j * math.pi * dx * dx / (lam * dz))


# --- lens-plane stationary-phase reductions -------------------------------

def imaging_lens_path_phase(xL, x1i, x0i, g: GhostGeometry):
    """Total phase of the crystal -> lens -> slit path as a function of lens coordinate xL."""
    lam = g.lam
    return (
        (math.pi * xL ** 2 / lam) * (1 / g.S0 + 1 / g.d1 - 1 / g.f)
        - (2 * math.pi * xL / lam) * (x1i / g.S0 + x0i / g.d1)
        + math.pi * x1i ** 2 / (lam * g.S0)
        + math.pi * x0i ** 2 / (lam * g.d1)
    )


def imaging_lens_stationary_point(x1i, x0i, g: GhostGeometry):
    return (g.d1 * (g.d1 + g.d2) / g.d2) * (np.asarray(x1i) / g.S0 + np.asarray(x0i) / g.d1)


def imaging_lens_phase(x1i, x0i, g: GhostGeometry):
    """exp(i phi) with phi the path phase at the stationary lens point (thin-lens condition assumed)."""
    lam, M = g.lam, g.magnification
    x1i = np.asarray(x1i, dtype=float)
    x0i = np.asarray(x0i, dtype=float)
    phi = (
        (math.pi * x1i ** 2 / (lam * g.S0)) * (g.d2 - M * g.d1) / g.d2
        - math.pi * x0i ** 2 / (lam * g.d2)
        - 2 * math.pi * M * x1i * x0i / (lam * g.d2)
    )
    return np.exp(1j * phi)


def collector_lens_path_phase(xc, x1i, xD1, fc, lam):
    return (math.pi / (lam * fc)) * (x1i ** 2 + xc ** 2 + xD1 ** 2 - 2 * xc * x1i - 2 * xc * xD1)


def collector_lens_stationary_point(x1i, xD1):
    return np.asarray(x1i) + np.asarray(xD1)


def collector_lens_phase(x1i, xD1, fc, lam):
    if not fc > 0:
        raise ValueError("collector focal length must be positive")
    return np.exp(-2j * math.pi * np.asarray(x1i) * np.asarray(xD1) / (lam * fc))


# --- detector kernels ------------------------------------------------------

def kernel_f(x1i, plane, x_m, ctx: KernelContext, method: str = "closed"):
    """Signal amplitude at x_m in ``plane`` given a point idler detection at x1i in the slit.

    ``method="closed"`` evaluates the pump-face integral in closed form;
    ``method="quadrature"`` integrates it directly on a grid that honours the
    pi/4 phase-per-step rule. Broadcasts x1i against x_m.
    """
    if not isinstance(ctx, KernelContext):
        raise TypeError("kernel_f needs a KernelContext (validated geometry)")
    plane = SignalPlane(plane)
    g = ctx.geometry
    z = ctx.plane_distance(plane)
    x1i, x_m = np.broadcast_arrays(np.asarray(x1i, dtype=float), np.asarray(x_m, dtype=float))
    k = ctx.spatial_frequency(x1i, plane, x_m)
    beta = ctx.chirp(plane)
    lead = np.exp(1j * math.pi * x_m ** 2 / (g.lam * z))
    if method == "closed":
        integral = gaussian_chirp_integral(g.a_p, beta, k)
    elif method == "quadrature":
        integral = _pump_face_quadrature(g.a_p, beta, k)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = lead * integral
    return out[()] if out.ndim == 0 else out


def _pump_face_quadrature(a: float, beta: float, k: np.ndarray) -> np.ndarray:
    flat = np.ravel(k)
    grid = recommend_grid(a, beta, float(np.max(np.abs(flat), initial=0.0)), PUMP_HALFWIDTH_SIGMAS)
    x = grid.positions
    base = grid.weights() * np.exp(-x * x / (2 * a * a) + 1j * beta * x * x)
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // grid.count)
    for i in range(0, flat.size, chunk):
        kk = flat[i:i + chunk]
        out[i:i + chunk] = np.exp(-1j * np.outer(kk, x)) @ base
    return out.reshape(np.shape(k))


def slit_grid(ctx: KernelContext, plane, xm_max: float, xd1_max: float = 0.0,
              min_count: int = MIN_SLIT_COUNT) -> Grid1D:
    """Simpson grid over [-w/2, w/2] for integrating f (times the collector phase) in x1i.

    Resolves the phase of f in x1i for |x_m| <= xm_max, the collector phase for
    |xD1| <= xd1_max, and the point-spread envelope with >= 8 samples per width.
    """
    plane = SignalPlane(plane)
    g = ctx.geometry
    gamma = ctx.gamma(plane)
    dk_dx1 = 2 * math.pi * ctx.M / (g.lam * g.d2)
    k_max = float(np.max(np.abs(ctx.spatial_frequency([-g.w / 2, g.w / 2], plane, xm_max))))
    # d/dk log C(k) = -k / (2 gamma); its imaginary part is the phase rate in k
    phase_rate = dk_dx1 * k_max * abs((1 / (2 * gamma)).imag)
    phase_rate += 2 * math.pi * abs(xd1_max) / (g.lam * g.fc)
    envelope = math.sqrt(2.0 / (1 / gamma).real) / dk_dx1
    count = count_for_phase_rate(g.w, phase_rate, min_count)
    count = max(count, int(math.ceil(8 * g.w / envelope)) + 1)
    count += 1 - count % 2
    return Grid1D.centered(g.w / 2, count)


def kernel_g(xD1, plane, x_m, ctx: KernelContext, slit: Grid1D | None = None):
    """Signal amplitude at x_m given a point idler detection at xD1 in the collector focal plane.

    Returns an array of shape (len(xD1), len(x_m)) (scalars squeezed).
    """
    plane = SignalPlane(plane)
    g = ctx.geometry
    scalar_d, scalar_m = np.ndim(xD1) == 0, np.ndim(x_m) == 0
    xD1 = np.atleast_1d(np.asarray(xD1, dtype=float))
    xm = np.atleast_1d(np.asarray(x_m, dtype=float))
    if slit is None:
        slit = slit_grid(ctx, plane, float(np.max(np.abs(xm))), float(np.max(np.abs(xD1))))
    x1 = slit.positions
    F = kernel_f(x1[:, None], plane, xm[None, :], ctx)
    E = collector_lens_phase(x1[None, :], xD1[:, None], g.fc, g.lam) * slit.weights()
    out = E @ F
    if scalar_m:
        out = out[:, 0]
    if scalar_d:
        out = out[0]
    return out


# --- phase-mismatched point-spread function ---------------------------------

def mismatch_kappa_grid(ctx: KernelContext, L: float, x0_max: float) -> Grid1D:
    """Idler transverse wavevector grid, cut at the sixth zero of sinc(kappa^2 L / 2 k_i)."""
    g = ctx.geometry
    k_i = 2 * math.pi * g.n_crystal / g.lam
    base = math.sqrt(2 * math.pi * k_i / L)
    kappa_max = base * math.sqrt(SINC_ZEROS_KEPT)
    narrowest_lobe = base * (math.sqrt(SINC_ZEROS_KEPT) - math.sqrt(SINC_ZEROS_KEPT - 1))
    alpha = g.lam * g.d2 / (4 * math.pi) + L / (2 * k_i)
    rate = 2 * kappa_max * alpha + x0_max
    count = count_for_phase_rate(2 * kappa_max, rate)
    count = max(count, int(math.ceil(SAMPLES_PER_SINC_LOBE * 2 * kappa_max / narrowest_lobe)) + 1)
    count += 1 - count % 2
    return Grid1D.centered(kappa_max, count)


def psf_with_mismatch(x2s, ctx: KernelContext, L: float | None = None):
    """Ghost-plane point-spread function (point idler at x1i = 0) including phase mismatch.

    For L > 0 this is a double quadrature over the pump face x0 and the idler
    transverse wavevector kappa, scaled by alpha/pi so that the L -> 0 limit is
    |f(0, ghost, x2s)|^2. L = 0 uses that closed form directly.
    """
    g = ctx.geometry
    L = g.L if L is None else L
    if not L >= 0:
        raise ValueError(f"crystal length must be >= 0, got {L!r}")
    x2s = np.asarray(x2s, dtype=float)
    if L == 0:
        return np.abs(kernel_f(0.0, SignalPlane.GHOST, x2s, ctx)) ** 2

    lam, d2, a = g.lam, g.d2, g.a_p
    k_i = 2 * math.pi * g.n_crystal / lam
    alpha = lam * d2 / (4 * math.pi)
    beta = math.pi / (lam * d2)
    k_out = 2 * math.pi * float(np.max(np.abs(x2s), initial=0.0)) / (lam * d2)

    x0_grid = recommend_grid(a, beta, k_out, PUMP_HALFWIDTH_SIGMAS)
    x0 = x0_grid.positions
    kappa_grid = mismatch_kappa_grid(ctx, L, float(np.max(np.abs(x0))))
    kappa = kappa_grid.positions
    sinc_arg = kappa ** 2 * L / (2 * k_i)
    spectrum = (
        np.sinc(sinc_arg / math.pi)
        * np.exp(1j * kappa ** 2 * (alpha + L / (2 * k_i)))
        * kappa_grid.weights()
    )

    # inner integral over kappa for every pump-face sample
    J = uniform_fourier_sum(spectrum, kappa_grid, x0)

    outer = x0_grid.weights() * np.exp(1j * beta * x0 ** 2 - x0 ** 2 / (2 * a * a)) * J
    flat = np.ravel(x2s)
    amp = np.empty(flat.shape, dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // x0.size)
    for i in range(0, flat.size, chunk):
        amp[i:i + chunk] = np.exp(-2j * beta * np.outer(flat[i:i + chunk], x0)) @ outer
    return (np.abs(amp) ** 2 * (alpha / math.pi)).reshape(x2s.shape)


__all__ = [
    "SignalPlane",
    "IdlerDetector",
    "PlaneSelector",
    "ALL_SELECTORS",
    "KernelContext",
    "fresnel_kernel",
    "imaging_lens_path_phase",
    "imaging_lens_stationary_point",
    "imaging_lens_phase",
    "collector_lens_path_phase",
    "collector_lens_stationary_point",
    "collector_lens_phase",
    "kernel_f",
    "slit_grid",
    "kernel_g",
    "mismatch_kappa_grid",
    "psf_with_mismatch",
]
