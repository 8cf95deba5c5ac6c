"""Sofic measure entropy by counting finite models.

A finite model is a labeling of ``{0..d-1}`` by atoms of a dynamically
generated partition that nearly intertwines a permutation model of the
group with the measure-preserving action. The package counts such
labelings exactly, estimates the count by Monte Carlo, or bounds it
analytically, and aggregates counts into entropy estimates.
"""

from .counting import BudgetExceeded, CountResult, bound_summary, count_exact, enumerate_homs, mc_membership
from .groups import GroupSpec
from .homspace import HomContext, HomLabeling, build_theta, is_member
from .kernels import BACKEND
from .measure import MeasureSystem, PartitionSpec
from .pipeline import EmptyResult, SweepConfig, ValidationError, estimate, ks_compare, parse_config
from .sofic import Permutation, SoficMap, build_cyclic, build_random_free, build_regular, defect_report

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BudgetExceeded",
    "CountResult",
    "EmptyResult",
    "GroupSpec",
    "HomContext",
    "HomLabeling",
    "MeasureSystem",
    "PartitionSpec",
    "Permutation",
    "SoficMap",
    "SweepConfig",
    "ValidationError",
    "bound_summary",
    "build_cyclic",
    "build_random_free",
    "build_regular",
    "build_theta",
    "count_exact",
    "defect_report",
    "enumerate_homs",
    "estimate",
    "is_member",
    "ks_compare",
    "mc_membership",
    "parse_config",
]
