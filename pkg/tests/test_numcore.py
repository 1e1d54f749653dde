import numpy as np
import pytest
from hypothesis import given, strategies as st

from varint.numcore import (
    ControlTimes, ConvergenceError, LagrangianSystem, QuadratureRule, SingularJacobianError,
    SolverConfig, basis_tables, cardinal_basis, cardinal_basis_deriv, fd_jacobian,
    lobatto_rule, newton_solve,
)

THREE = ControlTimes(np.array([0.0, 0.5, 1.0]))


def test_cardinal_examples():
    assert cardinal_basis(THREE, 1, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert cardinal_basis(THREE, 0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert cardinal_basis(THREE, 1, 0.25) == pytest.approx(0.75, abs=1e-15)


def test_cardinal_deriv_examples():
    lin = ControlTimes(np.array([0.0, 1.0]))
    for tau in (0.0, 0.3, 1.0):
        assert cardinal_basis_deriv(lin, 1, tau) == pytest.approx(1.0, abs=1e-14)
    assert cardinal_basis_deriv(THREE, 1, 0.5) == pytest.approx(0.0, abs=1e-14)


def test_index_out_of_range():
    with pytest.raises((ValueError, IndexError)):
        cardinal_basis(THREE, 3, 0.1)
    with pytest.raises((ValueError, IndexError)):
        cardinal_basis_deriv(THREE, -1, 0.1)


@pytest.mark.parametrize("nodes", [[0.0, 0.5, 0.4, 1.0], [0.1, 1.0], [0.0, 0.9], [0.0]])
def test_control_times_validation(nodes):
    with pytest.raises(ValueError):
        ControlTimes(np.array(nodes))


def test_lobatto_small_rules():
    r2 = lobatto_rule(2)
    np.testing.assert_allclose(r2.points, [0, 1], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [0.5, 0.5], atol=1e-15)
    r3 = lobatto_rule(3)
    np.testing.assert_allclose(r3.points, [0, 0.5, 1], atol=1e-15)
    np.testing.assert_allclose(r3.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-15)
    with pytest.raises(ValueError):
        lobatto_rule(1)


def test_lobatto_frozen_four_point():
    # nodes (1 -+ 1/sqrt5)/2, weights 1/12, 5/12
    r = lobatto_rule(4)
    a = 0.5 * (1 - 1 / np.sqrt(5))
    np.testing.assert_allclose(r.points, [0, a, 1 - a, 1], atol=1e-15)
    np.testing.assert_allclose(r.weights, [1 / 12, 5 / 12, 5 / 12, 1 / 12], atol=1e-15)


def test_quadrature_rule_validation():
    with pytest.raises(ValueError):
        QuadratureRule(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        QuadratureRule(np.array([0.5, 0.2]), np.array([0.5, 0.5]))


@given(st.integers(2, 12))
def test_lobatto_exactness(npoints):
    r = lobatto_rule(npoints)
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for m in range(2 * npoints - 2):
        assert r.integrate(lambda x: x ** m) == pytest.approx(1.0 / (m + 1), abs=1e-12)


@given(st.integers(1, 9), st.floats(0.0, 1.0))
def test_partition_of_unity(s, tau):
    t = ControlTimes.lobatto(s)
    vals = [cardinal_basis(t, nu, tau) for nu in range(s + 1)]
    ders = [cardinal_basis_deriv(t, nu, tau) for nu in range(s + 1)]
    assert sum(vals) == pytest.approx(1.0, abs=1e-12)
    assert sum(ders) == pytest.approx(0.0, abs=1e-9)


@given(st.integers(1, 9))
def test_cardinal_property(s):
    t = ControlTimes.equispaced(s)
    for nu in range(s + 1):
        for mu, d in enumerate(t.nodes):
            assert cardinal_basis(t, nu, d) == pytest.approx(float(nu == mu), abs=1e-13)


def test_basis_tables_consistent():
    taus = np.linspace(0, 1, 7)
    B, D = basis_tables(THREE, taus)
    for i, tau in enumerate(taus):
        for nu in range(3):
            assert B[i, nu] == pytest.approx(cardinal_basis(THREE, nu, tau), abs=1e-14)
            assert D[i, nu] == pytest.approx(cardinal_basis_deriv(THREE, nu, tau), abs=1e-13)


def test_newton_examples():
    x = newton_solve(lambda x: x, np.array([1.0]))
    assert abs(x[0]) <= 1e-11
    x = newton_solve(lambda x: x ** 2 - 4, np.array([3.0]))
    assert x[0] == pytest.approx(2.0, abs=1e-11)
    with pytest.raises(ValueError):
        newton_solve(lambda x: np.array([x[0], x[0]]), np.array([1.0]))


def test_newton_quadratic_convergence():
    errs = []
    newton_solve(lambda x: x ** 2 - 4, np.array([3.0]), SolverConfig(tol=1e-15),
                 jacobian=lambda x: np.array([[2 * x[0]]]),
                 callback=lambda x, rn: errs.append(abs(x[0] - 2)))
    errs = [e for e in errs if e > 1e-14]
    ratios = [errs[i + 1] / errs[i] ** 2 for i in range(len(errs) - 1)]
    assert len(ratios) >= 2
    assert max(ratios) < 1.0


def test_newton_failures_are_distinct():
    with pytest.raises(SingularJacobianError):
        newton_solve(lambda x: np.array([1.0 + 0 * x[0]]), np.array([1.0]),
                     jacobian=lambda x: np.zeros((1, 1)))
    with pytest.raises(ConvergenceError) as info:
        newton_solve(lambda x: x ** 2 + 1, np.array([0.5]), SolverConfig(max_iter=5))
    assert info.value.args


def test_fd_jacobian_linear(rng):
    A = rng.normal(size=(4, 3))
    J = fd_jacobian(lambda x: A @ x, rng.normal(size=3))
    np.testing.assert_allclose(J, A, atol=1e-8)


def test_fd_jacobian_square_and_richardson():
    f = lambda x: np.exp(x)
    x0 = np.array([1.0])
    assert fd_jacobian(lambda x: x ** 2, x0, 1e-4)[0, 0] == pytest.approx(2.0, abs=1e-7)
    e1 = abs(fd_jacobian(f, x0, 1e-2)[0, 0] - np.e)
    e2 = abs(fd_jacobian(f, x0, 5e-3)[0, 0] - np.e)
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)
    with pytest.raises(ValueError):
        fd_jacobian(f, x0, 0.0)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_fd_jacobian_polynomial_map(p):
    x = np.array(p)
    f = lambda z: np.array([z[0] ** 3 - z[1] * z[2], z[1] ** 2 + 2 * z[0], z[0] * z[1] * z[2]])
    exact = np.array([[3 * x[0] ** 2, -x[2], -x[1]],
                      [2.0, 2 * x[1], 0.0],
                      [x[1] * x[2], x[0] * x[2], x[0] * x[1]]])
    np.testing.assert_allclose(fd_jacobian(f, x, 1e-5), exact, atol=1e-6)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(damping=1.0)
