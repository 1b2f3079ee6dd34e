"""Named figure scenarios and the machinery that turns one into CSV files."""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import models
from .analysis import Distribution, FWHMError, Normalization, fwhm, normalize
from .geometry import GhostGeometry
from .kernels import IdlerDetector, KernelContext, PlaneSelector, SignalPlane, psf_with_mismatch
from .quadrature import Grid1D

MODELS = ("heisenberg", "pure", "mixed", "mixed_basis", "psf_mismatch", "probability")


class ScenarioError(ValueError):
    """Scenario parameters that cannot be evaluated (bad model, position out of range, ...)."""


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    sel: PlaneSelector
    basis_at: tuple[float, ...] = ()
    weighted: bool = False
    L: float | None = None
    description: str = ""

    def __post_init__(self):
        if self.model not in MODELS:
            raise ScenarioError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.model == "mixed_basis" and not self.basis_at:
            raise ScenarioError("mixed_basis needs at least one --basis-at position")
        if self.model == "psf_mismatch" and self.sel.signal_plane is not SignalPlane.GHOST:
            raise ScenarioError("psf_mismatch is defined in the ghost image plane only")


def _sel(idler: str, plane: str) -> PlaneSelector:
    return PlaneSelector(plane, idler)


_X42 = 42e-6
_XD = (0.0, 0.25e-3, 0.5e-3)
_XD_SYM = (0.0, 0.25e-3, -0.25e-3, 0.5e-3, -0.5e-3)

FIGURES: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("fig02", "heisenberg", _sel("slit", "ghost"), description="Heisenberg CCR, slit detector, ghost plane"),
        Scenario("fig03", "heisenberg", _sel("slit", "diffraction"), description="Heisenberg CCR, slit detector, diffraction plane"),
        Scenario("fig04", "pure", _sel("slit", "ghost"), description="pure collapse, ghost plane"),
        Scenario("fig05", "pure", _sel("slit", "diffraction"), description="pure collapse, diffraction plane"),
        Scenario("fig06", "mixed_basis", _sel("slit", "ghost"), (0.0,), description="single basis state x1i=0, ghost plane"),
        Scenario("fig07", "mixed_basis", _sel("slit", "diffraction"), (0.0,), description="single basis state x1i=0, diffraction plane"),
        Scenario("fig08", "mixed_basis", _sel("slit", "ghost"), (0.0, _X42, -_X42), description="basis states x1i=0, +-42 um, ghost plane"),
        Scenario("fig09", "mixed_basis", _sel("slit", "diffraction"), (0.0, _X42, -_X42), description="basis states x1i=0, +-42 um, diffraction plane"),
        Scenario("fig10", "probability", _sel("slit", "ghost"), description="idler detection probability across the slit"),
        Scenario("fig11", "mixed", _sel("slit", "ghost"), description="mixed collapse, slit detector, ghost plane"),
        Scenario("fig12", "mixed", _sel("slit", "diffraction"), description="mixed collapse, slit detector, diffraction plane"),
        Scenario("fig13", "heisenberg", _sel("focus", "ghost"), description="Heisenberg CCR, collector focus, ghost plane"),
        Scenario("fig14", "heisenberg", _sel("focus", "diffraction"), description="Heisenberg CCR, collector focus, diffraction plane"),
        Scenario("fig15", "mixed_basis", _sel("focus", "ghost"), (0.0,), description="single basis state xD1=0, ghost plane"),
        Scenario("fig16", "mixed_basis", _sel("focus", "diffraction"), (0.0,), description="single basis state xD1=0, diffraction plane"),
        Scenario("fig17", "mixed_basis", _sel("focus", "ghost"), _XD, description="basis states xD1=0, 0.25, 0.5 mm, ghost plane"),
        Scenario("fig18", "mixed_basis", _sel("focus", "diffraction"), _XD_SYM, description="basis states xD1=0, +-0.25, +-0.5 mm, diffraction plane"),
        Scenario("fig19", "probability", _sel("focus", "ghost"), description="idler detection probability in the collector focal plane"),
        Scenario("fig20", "mixed_basis", _sel("focus", "diffraction"), _XD_SYM, weighted=True, description="probability-weighted basis states of fig18"),
        Scenario("fig21", "mixed", _sel("focus", "diffraction"), description="mixed collapse, collector focus, diffraction plane"),
        Scenario("figA2", "psf_mismatch", _sel("slit", "ghost"), description="point-spread function with phase mismatch (crystal length L)"),
    )
}


@dataclass
class Curve:
    label: str
    dist: Distribution
    axis: str = "signal"


@dataclass
class RunResult:
    scenario: Scenario
    grid: Grid1D
    curves: list[Curve] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def signal_grid_for(ctx: KernelContext, scenario: Scenario, points: int | None, halfwidth: float | None) -> Grid1D:
    return models.default_signal_grid(ctx, scenario.sel.signal_plane, points, halfwidth)


def evaluate(scenario: Scenario, geometry: GhostGeometry, points: int | None = None,
             halfwidth: float | None = None) -> RunResult:
    """Compute the raw (unnormalised) curves of a scenario."""
    ctx = KernelContext(geometry)
    sel = scenario.sel
    plane, idler = sel.signal_plane, sel.idler_detector
    grid = signal_grid_for(ctx, scenario, points, halfwidth)
    result = RunResult(scenario, grid)
    model = scenario.model

    if model == "heisenberg":
        result.curves.append(Curve("heisenberg", models.heisenberg_ccr(sel, grid, ctx)))
    elif model == "pure":
        if idler is not IdlerDetector.SLIT:
            raise ScenarioError("pure collapse is defined for the slit-plane idler detector")
        result.curves.append(Curve("pure", models.pure_collapse_cr(plane, grid, ctx)))
    elif model == "mixed":
        ens = models.build_ensemble(idler, plane, grid, ctx)
        result.curves.append(Curve("mixed", models.mixed_collapse_cr(ens)))
    elif model == "probability":
        ens = models.build_ensemble(idler, SignalPlane.GHOST, models.default_signal_grid(ctx, SignalPlane.GHOST), ctx)
        result.grid = ens.idler_positions
        result.curves.append(Curve("probability", Distribution(ens.idler_positions, ens.P), axis=f"idler_{idler.value}"))
    elif model == "mixed_basis":
        weights = None
        if scenario.weighted:
            ens = models.build_ensemble(idler, SignalPlane.GHOST, models.default_signal_grid(ctx, SignalPlane.GHOST), ctx)
            lo = ens.idler_positions.start - ens.idler_positions.step / 2
            hi = ens.idler_positions.stop + ens.idler_positions.step / 2
            for x in scenario.basis_at:
                if not lo <= x <= hi:
                    raise ScenarioError(f"basis position {x:.4e} m outside the ensemble range [{lo:.4e}, {hi:.4e}]")
            weights = models.probability_at(ens, scenario.basis_at, ctx)
        for i, x in enumerate(scenario.basis_at):
            state = models.basis_state(idler, plane, x, grid, ctx)
            values = state.intensity * (weights[i] if weights is not None else 1.0)
            result.curves.append(Curve(f"basis_at={x:.6e}", Distribution(grid, values)))
    elif model == "psf_mismatch":
        L = geometry.L if scenario.L is None else scenario.L
        result.curves.append(Curve(f"psf_L={L:.6e}", Distribution(grid, psf_with_mismatch(grid.positions, ctx, L))))
    return result


def _format_float(x: float) -> str:
    return f"{x:.12e}"


def render_csv(curve: Curve, metadata: dict[str, str]) -> str:
    lines = [f"# {k}: {v}" for k, v in metadata.items()]
    lines.append(f"# curve: {curve.label}")
    lines.append(f"# axis: {curve.axis}")
    lines.append("x_m,value")
    for x, v in zip(curve.dist.positions, curve.dist.values):
        lines.append(f"{_format_float(x)},{_format_float(v)}")
    return "\n".join(lines) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def output_paths(out: Path, n: int) -> list[Path]:
    out = Path(out)
    if n == 1:
        return [out]
    return [out.with_name(f"{out.stem}_{i}{out.suffix or '.csv'}") for i in range(n)]


def summary_line(path: Path, dist: Distribution) -> str:
    try:
        width = fwhm(dist)
    except FWHMError:
        width = math.nan
    return f"{path}: peak_x_m={dist.peak_position():.6e} fwhm_m={width:.6e}"


def _scale(dist: Distribution, normalization: Normalization) -> float:
    if normalization is Normalization.PEAK1:
        return float(dist.values.max())
    if normalization is Normalization.AREA1:
        return dist.area()
    return 1.0


def write_result(result: RunResult, out: Path, normalization: Normalization, source: str) -> list[str]:
    scenario = result.scenario
    paths = output_paths(out, len(result.curves))
    lines = []
    # One scale for the whole curve family so relative weights survive.
    normalization = Normalization(normalization)
    scales = [_scale(c.dist, normalization) for c in result.curves]
    top = max(scales)
    for path, curve, scale in zip(paths, result.curves, scales):
        curve.dist = normalize(curve.dist, normalization)
        if scale != top:
            curve.dist = replace(curve.dist, values=curve.dist.values * (scale / top))
        g = curve.dist.grid
        metadata = {
            "geometry": source,
            "scenario": scenario.name,
            "model": scenario.model,
            "idler": scenario.sel.idler_detector.value,
            "plane": scenario.sel.signal_plane.value,
            "grid": f"start={_format_float(g.start)} step={_format_float(g.step)} count={g.count}",
            "normalization": curve.dist.normalization.value,
        }
        write_atomic(path, render_csv(curve, metadata))
        result.files.append(path)
        lines.append(summary_line(path, curve.dist))
    return lines


def plot_result(result: RunResult, path: Path, geometry: GhostGeometry) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in result.curves:
        ax.plot(curve.dist.positions * 1e3, curve.dist.values, label=curve.label)
    ghost = result.scenario.sel.signal_plane is SignalPlane.GHOST
    if ghost and result.curves and result.curves[0].axis == "signal":
        half = 0.5 * geometry.magnification * geometry.w * 1e3
        top = max(float(c.dist.values.max()) for c in result.curves)
        ax.plot([-half, -half, half, half], [0, top, top, 0], "g--", label="magnified slit image")
    ax.set_xlabel("position (mm)")
    ax.set_ylabel("counting rate (arb.)")
    ax.set_title(f"{result.scenario.name}: {result.scenario.description}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def named(name: str) -> Scenario:
    try:
        return FIGURES[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; see 'ghostcollapse scenarios'") from None


def custom(model: str, idler: str, plane: str, basis_at: tuple[float, ...] = (), weighted: bool = False,
           L: float | None = None) -> Scenario:
    return Scenario("custom", model, PlaneSelector(plane, idler), tuple(basis_at), weighted, L)


__all__ = [
    "MODELS",
    "FIGURES",
    "Scenario",
    "ScenarioError",
    "evaluate",
    "write_result",
    "plot_result",
    "named",
    "custom",
]
