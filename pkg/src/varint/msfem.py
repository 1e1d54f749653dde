"""Multiscale finite elements for (a(x/eps) u')' = f on [0, 1], u(0) = u(1) = 0.

The shape functions solve the homogeneous problem on each element, so the
rising half of phi_i is int_{x_{i-1}}^x ds/a divided by the element total.
All integrals use composite Gauss-Legendre panels no wider than eps/20.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from .numcore import SolverError

GAUSS_POINTS = 6


@dataclass(frozen=True)
class MsfemProblem:
    a: Callable  # coefficient as a function of the fast variable y = x / eps
    f: Callable
    eps: float
    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", x)
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("nodes must ascend from 0 to 1")

    @classmethod
    def uniform(cls, a, f, eps: float, nelem: int) -> "MsfemProblem":
        return cls(a, f, eps, np.linspace(0.0, 1.0, nelem + 1))

    def coef(self, x):
        return self.a(np.asarray(x, dtype=float) / self.eps)


def _gauss(n=GAUSS_POINTS):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


class _Panels:
    """Composite Gauss rule on [lo, hi] with running integrals of 1/a and F/a."""

    def __init__(self, prob: MsfemProblem, lo: float, hi: float):
        n = max(1, int(np.ceil((hi - lo) / (prob.eps / 20.0))))
        self.edges = np.linspace(lo, hi, n + 1)
        g, w = _gauss()
        width = np.diff(self.edges)
        self.x = (self.edges[:-1, None] + width[:, None] * g).ravel()
        self.w = (width[:, None] * w).ravel()
        a = prob.coef(self.x)
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise SolverError("coefficient a is not bounded away from zero")
        self.inv_a = 1.0 / a
        # running int_lo^x ds/a at every Gauss node: panel totals plus a sub-rule inside the panel
        tot = (width[:, None] * w * self.inv_a.reshape(n, -1)).sum(axis=1)
        start = np.concatenate([[0.0], np.cumsum(tot)])[:-1]
        inner = np.empty_like(self.x).reshape(n, -1)
        for k, gk in enumerate(g):
            sub = self.edges[:-1, None] + (width * gk)[:, None] * g
            inner[:, k] = (width * gk * (w * (1.0 / prob.coef(sub))).sum(axis=1))
        self.cum_inv_a = (start[:, None] + inner).ravel()
        self.total_inv_a = float(tot.sum())


def _running_F(prob: MsfemProblem, x: np.ndarray) -> np.ndarray:
    """F(x) = int_0^x f, by Gauss on [0, x] (f is smooth on the slow scale)."""
    g, w = np.polynomial.legendre.leggauss(16)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    xs = np.asarray(x, dtype=float)
    return xs * (prob.f(xs[..., None] * g) * w).sum(axis=-1)


def msfem_exact_u(prob: MsfemProblem, x) -> np.ndarray:
    """Closed-form solution of the one-dimensional problem."""
    xq = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((xq < 0) | (xq > 1)):
        raise ValueError("x must lie in [0, 1]")
    whole = _Panels(prob, 0.0, 1.0)
    FA = _running_F(prob, whole.x) * whole.inv_a
    ratio = np.dot(whole.w, FA) / whole.total_inv_a
    out = np.empty_like(xq)
    for j, xj in enumerate(xq):
        if xj == 0.0:
            out[j] = 0.0
            continue
        p = _Panels(prob, 0.0, xj)
        out[j] = np.dot(p.w, _running_F(prob, p.x) * p.inv_a) - ratio * p.total_inv_a
    return out if np.ndim(x) else out[0]


def msfem_solve(prob: MsfemProblem) -> np.ndarray:
    """Nodal values (including the two zero boundary values)."""
    x = prob.nodes
    N = len(x) - 1
    if N < 2:
        raise ValueError("need at least two elements")
    stiff = np.empty(N)
    load = np.zeros(N + 1)
    for e in range(N):
        p = _Panels(prob, x[e], x[e + 1])
        stiff[e] = 1.0 / p.total_inv_a
        rise = p.cum_inv_a / p.total_inv_a
        fx = prob.f(p.x)
        load[e + 1] += np.dot(p.w, fx * rise)
        load[e] += np.dot(p.w, fx * (1.0 - rise))
    # weak form: -sum_e k_e (jumps) = int f phi_i, interior rows only
    diag = stiff[:-1] + stiff[1:]
    ab = np.zeros((3, N - 1))
    ab[0, 1:] = -stiff[1:-1]
    ab[1] = diag
    ab[2, :-1] = -stiff[1:-1]
    try:
        inner = linalg.solve_banded((1, 1), ab, -load[1:-1])
    except linalg.LinAlgError as exc:
        raise SolverError("singular MsFEM system") from exc
    return np.concatenate([[0.0], inner, [0.0]])


def fd_reference(prob: MsfemProblem, n: int = 200000) -> tuple[np.ndarray, np.ndarray]:
    """Second-order conservative finite differences on a fine uniform grid."""
    x = np.linspace(0.0, 1.0, n + 1)
    dx = 1.0 / n
    am = prob.coef(0.5 * (x[:-1] + x[1:]))
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = am[1:-1]
    ab[1] = -(am[:-1] + am[1:])
    ab[2, :-1] = am[1:-1]
    u = linalg.solve_banded((1, 1), ab, prob.f(x[1:-1]) * dx**2)
    return x, np.concatenate([[0.0], u, [0.0]])
