"""Compile finite solvable groups into diagonal complex SSMs and verify them."""

from .affine import AffineMap1D, Dynamics, DynamicsClass, classify, closed_form, compose
from .compiler import build_section_cocycle, compile_abelian, compile_group, compile_with_series
from .group_core import FiniteGroup, SubgroupMask, SubnormalSeries, construct_group, derived_series
from .ssm import DcdSsm, FinitePrecisionConfig, forward, load_model, save_model, scan_forward
from .verifier import TrackingReport, verify_exhaustive, verify_random

__version__ = "0.1.0"

__all__ = [
    "AffineMap1D", "Dynamics", "DynamicsClass", "classify", "closed_form", "compose",
    "build_section_cocycle", "compile_abelian", "compile_group", "compile_with_series",
    "FiniteGroup", "SubgroupMask", "SubnormalSeries", "construct_group", "derived_series",
    "DcdSsm", "FinitePrecisionConfig", "forward", "load_model", "save_model", "scan_forward",
    "TrackingReport", "verify_exhaustive", "verify_random",
]
