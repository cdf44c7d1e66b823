"""Exact fair division of indivisible goods: EFL, EEFX and share computations."""

from .core import (
    Allocation,
    Instance,
    InvariantViolation,
    ResourceError,
    UsageError,
    format_items,
    format_value,
    is_non_degenerate,
    itemset,
    items_of,
    perturb,
    scale_to_integers,
    value,
)
from .divider import AuditFailure, DivideError, solve_efl_eefx
from .fairness import check_allocation, is_allocation_eefx, is_eefx_feasible
from .shares import mms, mxs, rmms, share_profile, theta

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "Instance",
    "InvariantViolation",
    "ResourceError",
    "UsageError",
    "AuditFailure",
    "DivideError",
    "format_items",
    "format_value",
    "is_non_degenerate",
    "itemset",
    "items_of",
    "perturb",
    "scale_to_integers",
    "value",
    "solve_efl_eefx",
    "check_allocation",
    "is_allocation_eefx",
    "is_eefx_feasible",
    "mms",
    "mxs",
    "rmms",
    "share_profile",
    "theta",
]
