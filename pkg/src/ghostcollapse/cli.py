"""Command-line entry point: run scenarios, batch the figure set, report model comparisons.

Exit codes: 0 success, 1 usage error (bad flags, invalid geometry or scenario,
unwritable output), 2 a physics check failed.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import models, scenarios
from .analysis import Normalization, compare
from .geometry import FILE_KEYS, PRESETS, GeometryError, GhostGeometry, load_geometry, preset, require_valid
from .kernels import ALL_SELECTORS, IdlerDetector, KernelContext, PlaneSelector, SignalPlane

EXIT_OK, EXIT_USAGE, EXIT_PHYSICS = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or key not in FILE_KEYS:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE with KEY in {', '.join(FILE_KEYS)}")
    try:
        return FILE_KEYS[key], float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{key}: not a number: {value!r}") from None


def _add_geometry_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="named geometry (default paper2015)")
    p.add_argument("--geometry", type=Path, metavar="FILE",
                   help="key = value geometry file; keys it omits come from --preset when given")
    p.add_argument("--set", dest="overrides", type=_override, action="append", default=[], metavar="KEY=VALUE",
                   help="override one geometry field (repeatable), e.g. --set w=1e-9")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-points", type=int, help="signal grid sample count (default: auto)")
    p.add_argument("--grid-halfwidth", type=float, help="signal grid half width in m (default: 3x expected FWHM)")
    p.add_argument("--normalize", choices=[n.value for n in Normalization], default="peak1")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ghostcollapse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="evaluate one scenario and write CSV")
    _add_geometry_flags(run)
    _add_grid_flags(run)
    run.add_argument("--scenario", help="named figure scenario (see 'scenarios'); other model flags then ignored")
    run.add_argument("--model", choices=scenarios.MODELS, default="heisenberg")
    run.add_argument("--idler", choices=[d.value for d in IdlerDetector], default="slit")
    run.add_argument("--plane", choices=[p.value for p in SignalPlane], default="ghost")
    run.add_argument("--L", type=float, dest="L", help="crystal length for psf_mismatch in m (default: geometry L)")
    run.add_argument("--basis-at", type=float, action="append", default=[], metavar="X",
                     help="idler position in m for mixed_basis (repeatable; one CSV per position)")
    run.add_argument("--weighted", action="store_true", help="scale basis states by the detection probability")
    run.add_argument("--out", type=Path, default=Path("out.csv"))
    run.add_argument("--plot", type=Path, metavar="FILE", help="also write a plot (svg/pdf/png by extension)")

    fig = sub.add_parser("figures", help="write every named scenario into a directory")
    _add_geometry_flags(fig)
    _add_grid_flags(fig)
    fig.add_argument("--out-dir", type=Path, default=Path("figures"))
    fig.add_argument("--only", action="append", default=[], metavar="NAME", help="restrict to these scenarios")
    fig.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    fig.add_argument("--plot", action="store_true", help="also write an svg per scenario")

    rep = sub.add_parser("report", help="mixed vs Heisenberg for all selectors, and the pure-collapse contrast")
    _add_geometry_flags(rep)
    rep.add_argument("--tolerance", type=float, default=1e-3)

    sub.add_parser("scenarios", help="list the named scenarios")
    return parser


def resolve_geometry(args) -> tuple[GhostGeometry, str]:
    try:
        base = preset(args.preset) if args.preset else None
        if args.geometry is not None:
            geometry = load_geometry(args.geometry, base=base)
            source = str(args.geometry)
        else:
            geometry = base or preset("paper2015")
            source = args.preset or "paper2015"
        if args.overrides:
            geometry = geometry.replace(**dict(args.overrides))
            source += " " + " ".join(f"{k}={v!r}" for k, v in args.overrides)
        return require_valid(geometry), source
    except (GeometryError, OSError, KeyError) as exc:
        raise UsageError(f"geometry: {exc}") from None


def _scenario_from_args(args) -> scenarios.Scenario:
    if args.scenario:
        return scenarios.named(args.scenario)
    return scenarios.custom(args.model, args.idler, args.plane, tuple(args.basis_at), args.weighted, args.L)


def _check_writable(path: Path) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")


def cmd_run(args) -> int:
    geometry, source = resolve_geometry(args)
    scenario = _scenario_from_args(args)
    _check_writable(args.out)
    result = scenarios.evaluate(scenario, geometry, args.grid_points, args.grid_halfwidth)
    for line in scenarios.write_result(result, args.out, Normalization(args.normalize), source):
        print(line)
    if args.plot:
        scenarios.plot_result(result, args.plot, geometry)
    return EXIT_OK


def _run_named(job):
    name, geometry, source, points, halfwidth, normalization, out_dir, plot = job
    result = scenarios.evaluate(scenarios.named(name), geometry, points, halfwidth)
    lines = scenarios.write_result(result, out_dir / f"{name}.csv", normalization, source)
    if plot:
        scenarios.plot_result(result, out_dir / f"{name}.svg", geometry)
    return lines


def cmd_figures(args) -> int:
    geometry, source = resolve_geometry(args)
    names = args.only or list(scenarios.FIGURES)
    for name in names:
        scenarios.named(name)
    if not args.out_dir.is_dir():
        raise UsageError(f"output directory does not exist: {args.out_dir}")
    jobs = [(n, geometry, source, args.grid_points, args.grid_halfwidth, Normalization(args.normalize),
             args.out_dir, args.plot) for n in names]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(_run_named, jobs))
    else:
        outputs = [_run_named(j) for j in jobs]
    for lines in outputs:
        for line in lines:
            print(line)
    return EXIT_OK


def report_equivalence(geometry: GhostGeometry, tolerance: float, out=None) -> int:
    """Print a flat key=value report; return EXIT_OK only if every mixed check
    passes and the pure-collapse contrast is detected."""
    out = out or sys.stdout
    ctx = KernelContext(geometry)
    all_pass = True
    for sel in ALL_SELECTORS:
        report = models.equivalence_check(ctx, sel, tolerance)
        all_pass &= report.passed
        out.write(report.to_text(prefix=f"mixed_vs_heisenberg.{sel}."))

    contrast = models.pure_vs_heisenberg(ctx, SignalPlane.DIFFRACTION, tolerance)
    status = "degenerate" if contrast.degenerate else ("detected" if contrast.detected else "absent")
    out.write(f"pure_contrast.diffraction.fwhm_pure={contrast.fwhm_pure:.6e}\n")
    out.write(f"pure_contrast.diffraction.fwhm_heisenberg={contrast.fwhm_heisenberg:.6e}\n")
    out.write(f"pure_contrast.diffraction.ratio={contrast.ratio:.6e}\n")
    out.write(f"pure_contrast.diffraction.status={status}\n")

    ghost = models.pure_vs_heisenberg(ctx, SignalPlane.GHOST, tolerance)
    out.write(f"pure_contrast.ghost.rel_l2={ghost.comparison.rel_l2:.6e}\n")

    # The collector-focus mixed result in the diffraction plane may be read
    # against either Heisenberg curve; report its distance to both.
    grid = models.default_signal_grid(ctx, SignalPlane.DIFFRACTION)
    ens = models.build_ensemble(IdlerDetector.FOCUS, SignalPlane.DIFFRACTION, grid, ctx)
    mixed_focus = models.mixed_collapse_cr(ens)
    for idler in IdlerDetector:
        heis = models.heisenberg_ccr(PlaneSelector(SignalPlane.DIFFRACTION, idler), grid, ctx)
        cmp = compare(mixed_focus, heis, tolerance)
        out.write(f"focus_mixed_vs_heisenberg_{idler.value}.diffraction.rel_l2={cmp.rel_l2:.6e}\n")

    ok = all_pass and status == "detected"
    out.write(f"result={'pass' if ok else 'fail'}\n")
    return EXIT_OK if ok else EXIT_PHYSICS


def cmd_report(args) -> int:
    geometry, _ = resolve_geometry(args)
    if not args.tolerance > 0:
        raise UsageError("--tolerance must be positive")
    return report_equivalence(geometry, args.tolerance)


def cmd_scenarios(args) -> int:
    for s in scenarios.FIGURES.values():
        extra = f" basis_at={','.join(f'{x:g}' for x in s.basis_at)}" if s.basis_at else ""
        extra += " weighted" if s.weighted else ""
        print(f"{s.name}  {s.model:<12} {str(s.sel):<18}{extra}  {s.description}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "figures": cmd_figures, "report": cmd_report, "scenarios": cmd_scenarios}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return COMMANDS[args.command](args)
    except (UsageError, scenarios.ScenarioError, ValueError, OSError) as exc:
        print(f"ghostcollapse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
