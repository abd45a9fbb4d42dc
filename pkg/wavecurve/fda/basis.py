"""Grids, cubic B-spline bases, curves and L2 geometry.

Every other module evaluates curves on a shared daily :class:`Grid` and
integrates with the trapezoid rule on that grid. Basis Gram and roughness
matrices are integrated exactly, span by span, with Gauss-Legendre rules.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid
from scipy.interpolate import BSpline

from ..errors import DomainError, InputError, ShapeError

LOGGER = logging.getLogger(__name__)

_DOMAIN_TOL = 1e-9


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation points on [0, c]."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = _readonly(np.ravel(self.points))
        if pts.size < 4:
            raise InputError(f"A grid needs at least 4 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise InputError("Grid points must be finite")
        if pts[0] != 0.0:
            raise InputError(f"Grid must start at 0, starts at {pts[0]}")
        if np.any(np.diff(pts) <= 0):
            raise InputError("Grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def daily(cls, n_days: int) -> "Grid":
        """One point per day: 0, 1, ..., n_days - 1."""
        return cls(np.arange(n_days, dtype=float))

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def domain_length(self) -> float:
        return float(self.points[-1])

    def truncate(self, start: int) -> "Grid":
        """Sub-grid from index ``start`` to the end, re-based to begin at 0."""
        if start < 0 or start > self.size - 4:
            raise DomainError(f"Cannot truncate a {self.size}-point grid at index {start}")
        return Grid(self.points[start:] - self.points[start])

    def same_as(self, other: "Grid") -> bool:
        return self.size == other.size and bool(np.array_equal(self.points, other.points))


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """Clamped B-spline basis with ``n_knots`` equally spaced breakpoints on [0, c].

    ``n_knots`` counts both endpoints, so the basis has
    ``n_knots + degree - 1`` functions (23 for the default cubic, 21-knot basis).
    """

    domain_length: float
    n_knots: int = 21
    degree: int = 3
    knot_vector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.domain_length <= 0:
            raise InputError("Basis domain length must be positive")
        if self.n_knots < 2:
            raise InputError("A basis needs at least the two boundary knots")
        if self.degree < 0:
            raise InputError("Spline degree must be nonnegative")
        breaks = np.linspace(0.0, float(self.domain_length), int(self.n_knots))
        knots = np.concatenate(
            [np.repeat(0.0, self.degree), breaks, np.repeat(float(self.domain_length), self.degree)]
        )
        object.__setattr__(self, "knot_vector", _readonly(knots))

    @classmethod
    def for_grid(cls, grid: Grid, n_knots: int = 21, degree: int = 3) -> "BasisSystem":
        return cls(grid.domain_length, n_knots=n_knots, degree=degree)

    @property
    def interior_knots(self) -> int:
        return self.n_knots - 2

    @property
    def n_basis(self) -> int:
        return int(self.knot_vector.size - self.degree - 1)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knot_vector)

    @cached_property
    def _spline(self) -> BSpline:
        return BSpline(self.knot_vector, np.eye(self.n_basis), self.degree, extrapolate=True)

    def evaluate(self, points: Union[Sequence[float], np.ndarray], derivative: int = 0) -> np.ndarray:
        """Matrix of basis values (or derivatives), one row per point."""
        x = np.atleast_1d(np.asarray(points, dtype=float))
        lo, hi = 0.0, float(self.domain_length)
        outside = (x < lo - _DOMAIN_TOL) | (x > hi + _DOMAIN_TOL)
        if np.any(outside):
            bad = x[outside][0]
            raise DomainError(f"Point {bad} lies outside the knot span [{lo}, {hi}]")
        x = np.clip(x, lo, hi)
        if derivative > self.degree:
            return np.zeros((x.size, self.n_basis))
        spline = self._spline if derivative == 0 else self._spline.derivative(derivative)
        values = spline(x)
        return np.asarray(values, dtype=float).reshape(x.size, self.n_basis)

    @cached_property
    def pen2(self) -> np.ndarray:
        return second_derivative_penalty(self)

    @cached_property
    def gram(self) -> np.ndarray:
        return gram_matrix(self)

    def same_as(self, other: "BasisSystem") -> bool:
        return (
            self.degree == other.degree
            and self.n_knots == other.n_knots
            and float(self.domain_length) == float(other.domain_length)
        )


def eval_bspline_basis(basis: BasisSystem, grid: Grid) -> np.ndarray:
    """Basis matrix over a grid (T_grid x K); rows are nonnegative and sum to one."""
    return basis.evaluate(grid.points)


def _gauss_product(basis: BasisSystem, derivative: int) -> np.ndarray:
    """Exact integral of products of basis derivatives, summed span by span."""
    n_nodes = basis.degree + 1
    nodes, weights = leggauss(n_nodes)
    breaks = basis.breakpoints
    left, right = breaks[:-1], breaks[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    design = basis.evaluate(x, derivative=derivative)
    product = design.T @ (w[:, None] * design)
    return 0.5 * (product + product.T)


def second_derivative_penalty(basis: BasisSystem) -> np.ndarray:
    """Roughness matrix R[i, j] = integral of B_i'' B_j''."""
    if basis.degree < 2:
        raise InputError(f"Second-derivative penalty unsupported for degree {basis.degree}")
    return _gauss_product(basis, derivative=2)


def gram_matrix(basis: BasisSystem) -> np.ndarray:
    """Gram matrix G[i, j] = integral of B_i B_j, exact for the spline space."""
    return _gauss_product(basis, derivative=0)


@dataclass(frozen=True, eq=False)
class Curve:
    """A function expanded on a basis and evaluated on a grid.

    ``observed`` optionally keeps the grid samples the curve was fitted to.
    """

    basis: BasisSystem
    coefs: np.ndarray
    grid: Grid
    observed: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        coefs = _readonly(np.ravel(self.coefs))
        if coefs.size != self.basis.n_basis:
            raise ShapeError(f"Expected {self.basis.n_basis} coefficients, got {coefs.size}")
        if not np.all(np.isfinite(coefs)):
            raise InputError("Curve coefficients must be finite")
        if self.grid.domain_length > self.basis.domain_length + _DOMAIN_TOL:
            raise DomainError("Grid extends beyond the basis domain")
        object.__setattr__(self, "coefs", coefs)
        if self.observed is not None:
            observed = _readonly(np.ravel(self.observed))
            if observed.size != self.grid.size:
                raise ShapeError(f"Expected {self.grid.size} observed samples, got {observed.size}")
            object.__setattr__(self, "observed", observed)

    @property
    def samples(self) -> np.ndarray:
        """Observed samples when kept, otherwise the curve's grid values."""
        return self.observed if self.observed is not None else self.values

    @classmethod
    def from_values(cls, values: np.ndarray, basis: BasisSystem, grid: Grid) -> "Curve":
        """Unpenalized least-squares projection of grid values onto the basis."""
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.size,):
            raise ShapeError(f"Expected {grid.size} values, got shape {values.shape}")
        design = eval_bspline_basis(basis, grid)
        coefs, *_ = np.linalg.lstsq(design, values, rcond=None)
        return cls(basis, coefs, grid, observed=values)

    @cached_property
    def values(self) -> np.ndarray:
        return _readonly(eval_bspline_basis(self.basis, self.grid) @ self.coefs)

    def evaluate(self, points: Union[Sequence[float], np.ndarray], derivative: int = 0) -> np.ndarray:
        return self.basis.evaluate(points, derivative=derivative) @ self.coefs

    def l2_norm(self) -> float:
        return float(np.sqrt(max(self.coefs @ self.basis.gram @ self.coefs, 0.0)))


CurveLike = Union[Curve, np.ndarray, Sequence[float]]


def sample(obj: CurveLike, grid: Grid) -> np.ndarray:
    """Values of a curve or sampled series on ``grid``; the last axis must match."""
    if isinstance(obj, Curve):
        if not obj.grid.same_as(grid):
            raise ShapeError("Curve is evaluated on a different grid")
        return np.asarray(obj.values)
    values = np.asarray(obj, dtype=float)
    if values.ndim == 0 or values.shape[-1] != grid.size:
        raise ShapeError(f"Expected {grid.size} samples on the last axis, got shape {values.shape}")
    return values


def sample_many(curves: Sequence[CurveLike], grid: Grid) -> np.ndarray:
    """Stack a collection of curves (or a 2-D array) into an n x T matrix."""
    if isinstance(curves, np.ndarray) and curves.ndim == 2:
        return sample(curves, grid)
    rows = [sample(c, grid) for c in curves]
    if not rows:
        return np.empty((0, grid.size))
    return np.vstack(rows)


def l2_inner(f: CurveLike, g: CurveLike, grid: Grid) -> Union[float, np.ndarray]:
    """Trapezoid-rule approximation of the integral of f*g over the grid."""
    fv = sample(f, grid)
    gv = sample(g, grid)
    try:
        product = fv * gv
    except ValueError as exc:
        raise ShapeError(f"Cannot pair shapes {fv.shape} and {gv.shape}") from exc
    result = trapezoid(product, grid.points, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def integrate(values: np.ndarray, grid: Grid) -> Union[float, np.ndarray]:
    result = trapezoid(sample(values, grid), grid.points, axis=-1)
    return float(result) if np.ndim(result) == 0 else result
