"""Curve substrate: grids, B-spline bases, smoothing and registration."""

from .basis import BasisSystem, Curve, Grid, eval_bspline_basis, gram_matrix, integrate, l2_inner, second_derivative_penalty
from .registration import RegistrationResult, align_and_integrate, apply_shifts, find_peak, shift_series, shift_summary
from .smoothing import SmoothFit, SmoothedCollection, fit_penalized, interpolate_missing, select_lambda, smooth_collection

__all__ = [
    "BasisSystem",
    "Curve",
    "Grid",
    "eval_bspline_basis",
    "gram_matrix",
    "integrate",
    "l2_inner",
    "second_derivative_penalty",
    "RegistrationResult",
    "align_and_integrate",
    "apply_shifts",
    "find_peak",
    "shift_series",
    "shift_summary",
    "SmoothFit",
    "SmoothedCollection",
    "fit_penalized",
    "interpolate_missing",
    "select_lambda",
    "smooth_collection",
]
