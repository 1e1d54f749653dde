import numpy as np
import pytest
from hypothesis import given, strategies as st

from varint import msfem
from varint.numcore import SolverError


def oscillatory_problem(nelem=8):
    return msfem.MsfemProblem.uniform(lambda y: 10.0 / (1.0 + 0.95 * np.sin(2 * np.pi * y)),
                                      lambda x: x ** 2, 0.025, nelem)


def unit_problem(nelem=4):
    return msfem.MsfemProblem.uniform(lambda y: np.ones_like(y), lambda x: np.ones_like(x), 0.1, nelem)


def test_problem_validation():
    with pytest.raises(ValueError):
        msfem.MsfemProblem(np.cos, np.cos, 0.1, np.array([0.0, 0.7, 0.5, 1.0]))
    with pytest.raises(ValueError):
        msfem.MsfemProblem(np.cos, np.cos, 0.0, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        msfem.msfem_solve(unit_problem(1))


def test_exact_boundary_values():
    p = oscillatory_problem()
    assert msfem.msfem_exact_u(p, 0.0) == 0.0
    assert abs(msfem.msfem_exact_u(p, 1.0)) < 1e-14


@given(st.floats(0, 1))
def test_exact_constant_coefficient(x):
    assert msfem.msfem_exact_u(unit_problem(), x) == pytest.approx((x * x - x) / 2, abs=1e-14)


def test_exact_matches_fine_finite_differences():
    p = oscillatory_problem()
    x, u = msfem.fd_reference(p, 100000)
    idx = np.arange(0, x.size, 2500)
    assert np.max(np.abs(msfem.msfem_exact_u(p, x[idx]) - u[idx])) < 1e-4


def test_constant_coefficient_nodal_values():
    p = unit_problem(5)
    np.testing.assert_allclose(msfem.msfem_solve(p), (p.nodes ** 2 - p.nodes) / 2, atol=1e-14)


def test_two_elements_by_hand():
    # a = 1, f = 1: the single interior row reads -(2/h) u1 = h f, so u1 = -1/8
    assert msfem.msfem_solve(unit_problem(2))[1] == pytest.approx(-0.125, abs=1e-15)


def test_nodal_exactness_oscillatory_coefficients():
    p = oscillatory_problem(8)
    assert np.max(np.abs(msfem.msfem_solve(p) - msfem.msfem_exact_u(p, p.nodes))) < 1e-6


@given(st.lists(st.floats(0.02, 0.98), min_size=1, max_size=6, unique=True))
def test_nodal_exactness_any_mesh(inner):
    nodes = np.concatenate([[0.0], np.sort(inner), [1.0]])
    if np.min(np.diff(nodes)) < 1e-3 or len(nodes) < 3:
        return
    p = msfem.MsfemProblem(oscillatory_problem().a, np.cos, 0.05, nodes)
    assert np.max(np.abs(msfem.msfem_solve(p) - msfem.msfem_exact_u(p, nodes))) < 1e-8


def test_singular_coefficient_reported():
    p = msfem.MsfemProblem.uniform(lambda y: np.where(y > 0, np.inf, 1.0), lambda x: x, 0.1, 4)
    with pytest.raises((SolverError, ValueError)):
        msfem.msfem_solve(p)
