"""Ghost-imaging counting rates under Heisenberg, pure-collapse and mixed-collapse models."""

from .analysis import ComparisonReport, Distribution, Normalization, compare, fwhm, normalize
from .geometry import GhostGeometry, PAPER2015, load_geometry, preset, validate
from .kernels import IdlerDetector, KernelContext, PlaneSelector, SignalPlane, kernel_f, kernel_g, psf_with_mismatch
from .models import (
    build_ensemble,
    equivalence_check,
    heisenberg_ccr,
    mixed_collapse_cr,
    pure_collapse_cr,
    pure_vs_heisenberg,
)

__version__ = "0.1.0"
