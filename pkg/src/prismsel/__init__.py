"""Subset selection with parameterized submodular information measures."""

from ._core import USING_NATIVE
from .kernels import KernelSystem, apply_scaling, clip_nonnegative, compute_kernel, kernel_from_blocks
from .measures import GainReport, MeasureSpec, definitional_oracle, evaluate, make_state, preset
from .optimize import (
    BudgetConfig,
    Selection,
    exhaustive_search,
    lazy_greedy,
    naive_greedy,
    stochastic_greedy,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NATIVE",
    "KernelSystem",
    "apply_scaling",
    "clip_nonnegative",
    "compute_kernel",
    "kernel_from_blocks",
    "GainReport",
    "MeasureSpec",
    "definitional_oracle",
    "evaluate",
    "make_state",
    "preset",
    "BudgetConfig",
    "Selection",
    "exhaustive_search",
    "lazy_greedy",
    "naive_greedy",
    "stochastic_greedy",
    "__version__",
]
