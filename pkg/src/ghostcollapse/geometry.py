"""Optical layout of the ghost-imaging setup.

Idler arm: crystal -> imaging lens (d1) -> slit (S0) -> collector lens (fc).
Signal arm: crystal -> ghost image plane (d2) -> diffraction plane (d3).
All lengths are SI meters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

IMAGING_TOLERANCE = 1e-9

# key in geometry files -> dataclass attribute
FILE_KEYS = {
    "S0": "S0",
    "d1": "d1",
    "d2": "d2",
    "d3": "d3",
    "f": "f",
    "fc": "fc",
    "w": "w",
    "a_p": "a_p",
    "lambda": "lam",
    "L": "L",
    "n_crystal": "n_crystal",
}


class GeometryError(ValueError):
    """Raised when a layout violates positivity, ordering or the imaging condition."""


@dataclass(frozen=True)
class GhostGeometry:
    S0: float
    d1: float
    d2: float
    d3: float
    f: float
    fc: float
    w: float
    a_p: float
    lam: float
    L: float = 3e-3
    n_crystal: float = 1.0

    def replace(self, **changes) -> "GhostGeometry":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        """Values keyed by their file names (``lambda`` rather than ``lam``)."""
        return {key: getattr(self, attr) for key, attr in FILE_KEYS.items()}

    @property
    def magnification(self) -> float:
        return magnification(self)


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    residual: float
    problems: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.passed


def imaging_residual(g: GhostGeometry) -> float:
    """Relative residual |1/S0 + 1/(d1+d2) - 1/f| * f of the thin-lens condition."""
    return abs(1.0 / g.S0 + 1.0 / (g.d1 + g.d2) - 1.0 / g.f) * g.f


def imaging_residual_exact(g: GhostGeometry) -> Fraction:
    """Same residual in rational arithmetic on the decimal values of the fields.

    ``Fraction(repr(x))`` recovers the shortest decimal that round-trips, so a
    preset typed as 1.5 / 2.851 / 0.149 / 1.0 is treated as exactly those numbers.
    """
    S0, d1, d2, f = (Fraction(repr(v)) for v in (g.S0, g.d1, g.d2, g.f))
    return abs(1 / S0 + 1 / (d1 + d2) - 1 / f) * f


def validate(g: GhostGeometry, tolerance: float = IMAGING_TOLERANCE) -> ValidationReport:
    problems = []
    for key, attr in FILE_KEYS.items():
        value = getattr(g, attr)
        if key == "L":
            if not value >= 0:
                problems.append(f"L must be >= 0, got {value!r}")
        elif not value > 0:
            problems.append(f"{key} must be > 0, got {value!r}")
    if not g.d3 > g.d2:
        problems.append(f"d3 must exceed d2 (d3={g.d3!r}, d2={g.d2!r})")
    try:
        residual = imaging_residual(g)
    except ZeroDivisionError:
        residual = float("nan")
    if not residual < tolerance:
        problems.append(f"imaging condition residual {residual:.3e} >= {tolerance:.0e}")
    return ValidationReport(passed=not problems, residual=residual, problems=tuple(problems))


def require_valid(g: GhostGeometry) -> GhostGeometry:
    report = validate(g)
    if not report:
        raise GeometryError("; ".join(report.problems))
    return g


def magnification(g: GhostGeometry) -> float:
    return (g.d1 + g.d2) / g.S0


def correlation_delay(g: GhostGeometry) -> float:
    """Delay t2 - t1 between idler detection and signal detection in the diffraction plane."""
    delay = (g.d3 - g.d2) / SPEED_OF_LIGHT
    if delay < 0:
        raise GeometryError(f"negative correlation delay {delay:.3e} s (d3 < d2)")
    return delay


def nondegenerate_plane_shift(g: GhostGeometry, lambda_ratio: float) -> float:
    """Longitudinal displacement of the ghost image plane, (1 - lambda_s0/lambda_s') * d2."""
    if not lambda_ratio > 0:
        raise ValueError(f"lambda_ratio must be positive, got {lambda_ratio!r}")
    return (1.0 - lambda_ratio) * g.d2


PAPER2015 = GhostGeometry(
    S0=1.5,
    d1=2.851,
    d2=0.149,
    d3=2.149,
    f=1.0,
    fc=0.05,
    w=160e-6,
    a_p=1.5e-3,
    lam=0.7022e-6,
)

PRESETS: dict[str, GhostGeometry] = {"paper2015": PAPER2015}


def preset(name: str) -> GhostGeometry:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def parse_geometry(text: str, base: GhostGeometry | None = None) -> GhostGeometry:
    """Parse ``key = value`` (or ``key: value``) lines; ``#`` starts a comment.

    Keys missing from the text are taken from ``base`` when given; otherwise every
    key except ``L`` and ``n_crystal`` is required.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        key, found, value = line.partition(sep)
        key = key.strip()
        if not found or key not in FILE_KEYS:
            raise GeometryError(f"line {lineno}: cannot parse {raw.strip()!r}")
        if FILE_KEYS[key] in values:
            raise GeometryError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[FILE_KEYS[key]] = float(value)
        except ValueError:
            raise GeometryError(f"line {lineno}: {key} is not a number: {value.strip()!r}") from None
    if base is not None:
        return base.replace(**values)
    missing = [k for k, attr in FILE_KEYS.items() if attr not in values and k not in ("L", "n_crystal")]
    if missing:
        raise GeometryError(f"missing keys: {', '.join(missing)}")
    return GhostGeometry(**values)


def load_geometry(path: str | Path, base: GhostGeometry | None = None) -> GhostGeometry:
    return parse_geometry(Path(path).read_text(), base=base)


def format_geometry(g: GhostGeometry) -> str:
    return "".join(f"{key} = {value!r}\n" for key, value in g.as_dict().items())

