"""Shape-constrained serve-advantage curves and rally abilities."""

from ._core import (
    SplineSpec,
    aggregate_rally,
    apply_sum_to_zero,
    basis_all,
    dic,
    ess,
    fit,
    first_constrained_index,
    gamma_mean_var,
    is_nonincreasing_on,
    knot_averages,
    lpml,
    make_spec,
    quantile,
    reconstruct_coeffs,
    spline_derivative,
    spline_eval,
    split_rhat,
    waic,
)

__all__ = [
    "SplineSpec",
    "aggregate_rally",
    "apply_sum_to_zero",
    "basis_all",
    "dic",
    "ess",
    "fit",
    "first_constrained_index",
    "gamma_mean_var",
    "is_nonincreasing_on",
    "knot_averages",
    "lpml",
    "make_spec",
    "quantile",
    "reconstruct_coeffs",
    "spline_derivative",
    "spline_eval",
    "split_rhat",
    "waic",
]

__version__ = "0.1.0"
