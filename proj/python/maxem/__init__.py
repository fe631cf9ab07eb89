"""Segmented likelihood models fitted by max-EM.

The heavy lifting lives in the compiled ``_maxem`` extension; this package
re-exports it.
"""

from ._maxem import (
    DataError,
    LrTestResult,
    SegmentedFit,
    brute_force,
    fit,
    lr_test,
    map_breakpoints,
    max_em,
    posterior_weights,
    preset_names,
    select_k,
    simulate,
)

__all__ = [
    "DataError",
    "LrTestResult",
    "SegmentedFit",
    "brute_force",
    "fit",
    "lr_test",
    "map_breakpoints",
    "max_em",
    "posterior_weights",
    "preset_names",
    "select_k",
    "simulate",
]
