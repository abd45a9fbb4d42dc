from __future__ import annotations

import numpy as np
import pytest

from wavecurve.errors import DomainError, InputError, ShapeError
from wavecurve.fda.basis import BasisSystem, Curve, Grid, eval_bspline_basis, integrate, l2_inner


def test_default_basis_has_23_functions(basis):
    assert basis.n_basis == 23
    assert basis.interior_knots == 19


def test_basis_rows_are_a_partition_of_unity(grid, basis):
    design = eval_bspline_basis(basis, grid)
    assert design.shape == (150, 23)
    assert np.all(design >= -1e-12)
    np.testing.assert_allclose(design.sum(axis=1), 1.0, atol=1e-12)


def test_cubic_polynomials_are_reproduced_exactly(grid, basis):
    t = grid.points
    values = 0.5 + 0.1 * t - 0.002 * t ** 2 + 1e-5 * t ** 3
    curve = Curve.from_values(values, basis, grid)
    np.testing.assert_allclose(curve.values, values, atol=1e-8)
    np.testing.assert_allclose(curve.evaluate([10.5]), np.interp(10.5, t, values), atol=1e-3)


def test_roughness_penalty_vanishes_on_straight_lines(grid, basis):
    curve = Curve.from_values(3.0 - 0.02 * grid.points, basis, grid)
    assert abs(curve.coefs @ basis.pen2 @ curve.coefs) < 1e-8
    bent = Curve.from_values((grid.points - 75.0) ** 2 / 1000.0, basis, grid)
    assert bent.coefs @ basis.pen2 @ bent.coefs > 0


def test_gram_gives_exact_l2_norms(grid, basis):
    one = Curve.from_values(np.ones(grid.size), basis, grid)
    assert one.l2_norm() == pytest.approx(np.sqrt(149.0), rel=1e-10)
    assert integrate(one.values, grid) == pytest.approx(149.0)
    assert l2_inner(one, 2.0 * np.ones(grid.size), grid) == pytest.approx(298.0)


def test_evaluation_outside_the_knot_span_is_rejected(basis):
    with pytest.raises(DomainError):
        basis.evaluate([-1.0])
    with pytest.raises(DomainError):
        basis.evaluate([149.5])


def test_grid_validation_and_truncation():
    with pytest.raises(InputError):
        Grid(np.array([1.0, 2.0, 3.0, 4.0]))
    with pytest.raises(InputError):
        Grid(np.array([0.0, 2.0, 1.0, 4.0]))
    grid = Grid.daily(150)
    lagged = grid.truncate(20)
    assert lagged.size == 130
    assert lagged.points[0] == 0.0 and lagged.domain_length == 129.0
    with pytest.raises(DomainError):
        grid.truncate(148)


def test_curve_checks_coefficient_count(grid, basis):
    with pytest.raises(ShapeError):
        Curve(basis, np.zeros(5), grid)
    with pytest.raises(ShapeError):
        Curve.from_values(np.zeros(10), basis, grid)


def test_basis_on_shorter_domain():
    basis = BasisSystem(domain_length=129.0, n_knots=11, degree=3)
    assert basis.n_basis == 13
    assert basis.same_as(BasisSystem(129.0, 11, 3))
    assert not basis.same_as(BasisSystem(149.0, 11, 3))


def test_cubic_basis_on_one_span_matches_the_recursion():
    bernstein = BasisSystem(1.0, n_knots=2, degree=3)
    assert bernstein.n_basis == 4
    np.testing.assert_allclose(bernstein.evaluate([0.5])[0], [0.125, 0.375, 0.375, 0.125], atol=1e-14)
    np.testing.assert_allclose(bernstein.evaluate([0.0])[0], [1.0, 0.0, 0.0, 0.0], atol=1e-14)
    two_spans = BasisSystem(1.0, n_knots=3, degree=3)
    np.testing.assert_allclose(two_spans.evaluate([0.0])[0], [1.0, 0.0, 0.0, 0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(two_spans.evaluate([1.0])[0], [0.0, 0.0, 0.0, 0.0, 1.0], atol=1e-14)


@pytest.mark.parametrize("derivative", [0, 2])
def test_product_integrals_match_a_fine_riemann_sum(basis, derivative):
    n = 200_000
    step = basis.domain_length / n
    mid = (np.arange(n) + 0.5) * step
    design = basis.evaluate(mid, derivative=derivative)
    riemann = design.T @ design * step
    exact = basis.pen2 if derivative == 2 else basis.gram
    np.testing.assert_allclose(exact, riemann, rtol=1e-6, atol=1e-9 * np.abs(riemann).max())
