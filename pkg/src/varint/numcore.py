"""Shared numerical substrate: cardinal bases, Gauss-Lobatto rules and a damped Newton solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class SolverError(RuntimeError):
    """Base class for nonlinear solver failures."""


class ConvergenceError(SolverError):
    def __init__(self, message: str, residual_norm: float, iterations: int):
        super().__init__(f"{message} (|r|_inf={residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobianError(SolverError):
    pass


def as_vector(x) -> np.ndarray:
    """Convert to a 1-d float array and reject non-finite entries."""
    v = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


@dataclass(frozen=True)
class ControlTimes:
    """Ascending control times on [0, 1] with d_0 = 0 and d_s = 1."""

    nodes: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.nodes, dtype=float).ravel()
        if d.size < 2:
            raise ValueError("need at least two control times")
        if d[0] != 0.0 or d[-1] != 1.0:
            raise ValueError("control times must start at 0 and end at 1")
        if np.any(np.diff(d) <= 0):
            raise ValueError("control times must be strictly increasing")
        d.setflags(write=False)
        object.__setattr__(self, "nodes", d)
        diff = d[:, None] - d[None, :]
        np.fill_diagonal(diff, 1.0)
        w = 1.0 / np.prod(diff, axis=1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def s(self) -> int:
        return self.nodes.size - 1

    @classmethod
    def equispaced(cls, s: int) -> "ControlTimes":
        return cls(np.linspace(0.0, 1.0, s + 1))

    @classmethod
    def lobatto(cls, s: int) -> "ControlTimes":
        return cls(lobatto_rule(s + 1).points)


def _check_index(times: ControlTimes, nu: int):
    if not 0 <= nu <= times.s:
        raise IndexError(f"cardinal index {nu} outside 0..{times.s}")


def cardinal_basis(times: ControlTimes, nu: int, tau: float) -> float:
    """Lagrange cardinal polynomial for node d_nu, evaluated by the barycentric formula."""
    _check_index(times, nu)
    d, w = times.nodes, times.weights
    diff = tau - d
    # within rounding distance of a node the barycentric ratio overflows; the
    # snapped value differs from the exact one by O(1e-15 * |l'|)
    hit = np.flatnonzero(np.abs(diff) <= 1e-15)
    if hit.size:
        return 1.0 if hit[0] == nu else 0.0
    terms = w / diff
    return float(terms[nu] / terms.sum())


def cardinal_basis_deriv(times: ControlTimes, nu: int, tau: float) -> float:
    """d/dtau of the cardinal polynomial for node d_nu."""
    _check_index(times, nu)
    d, w = times.nodes, times.weights
    others = np.delete(d, nu)
    # product-rule sum; no division, so it is safe at and near the nodes
    total = 0.0
    for m in range(others.size):
        total += np.prod(np.delete(tau - others, m))
    return float(w[nu] * total)


def basis_tables(times: ControlTimes, taus) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of every cardinal polynomial at each tau, shape (len(taus), s+1)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    n = times.s + 1
    vals = np.empty((taus.size, n))
    ders = np.empty((taus.size, n))
    for i, t in enumerate(taus):
        for nu in range(n):
            vals[i, nu] = cardinal_basis(times, nu, t)
            ders[i, nu] = cardinal_basis_deriv(times, nu, t)
    return vals, ders


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.points, dtype=float).ravel()
        b = np.asarray(self.weights, dtype=float).ravel()
        if c.size != b.size or c.size == 0:
            raise ValueError("points and weights must be non-empty and of equal length")
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("quadrature points must lie in [0, 1]")
        if np.any(np.diff(c) <= 0):
            raise ValueError("quadrature points must be distinct and ascending")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 on [0, 1]")
        c.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "points", c)
        object.__setattr__(self, "weights", b)

    def integrate(self, f, a: float = 0.0, b: float = 1.0):
        x = a + (b - a) * self.points
        return (b - a) * np.dot(self.weights, f(x))


def midpoint_rule() -> QuadratureRule:
    return QuadratureRule(np.array([0.5]), np.array([1.0]))


def lobatto_rule(npoints: int) -> QuadratureRule:
    """Gauss-Lobatto rule on [0, 1]; exact through degree 2*npoints - 3."""
    if npoints < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 points")
    n = npoints - 1
    # Newton on (1 - x^2) P_n'(x), started from Chebyshev-Gauss-Lobatto nodes
    x = np.cos(np.pi * np.arange(npoints) / n)
    P = np.zeros((npoints, npoints))
    for _ in range(100):
        x_old = x.copy()
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, npoints):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        x = x_old - (x * P[:, n] - P[:, n - 1]) / (npoints * P[:, n])
        if np.max(np.abs(x - x_old)) < 1e-14:
            break
    P[:, 0] = 1.0
    P[:, 1] = x
    for k in range(2, npoints):
        P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
    w = 2.0 / (n * npoints * P[:, n] ** 2)
    order = np.argsort(x)
    c = 0.5 * (x[order] + 1.0)
    c[0], c[-1] = 0.0, 1.0
    b = 0.5 * w[order]
    b = b / b.sum()
    return QuadratureRule(c, b)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-11
    max_iter: int = 50
    fd_step: float = 1e-6
    damping: float = 0.5
    max_halvings: int = 30
    least_squares: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


def fd_jacobian(residual: Callable, point, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian; column j uses step*(1 + |x_j|)."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.asarray(point, dtype=float).ravel()
    cols = []
    for j in range(x.size):
        hj = step * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        cols.append((np.asarray(residual(xp), dtype=float).ravel()
                     - np.asarray(residual(xm), dtype=float).ravel()) / (xp[j] - xm[j]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def newton_solve(residual: Callable, guess, cfg: SolverConfig = SolverConfig(),
                 jacobian: Optional[Callable] = None, callback: Optional[Callable] = None) -> np.ndarray:
    """Damped Newton iteration until ||residual||_inf <= cfg.tol.

    ``callback(x, rnorm)`` is invoked for every iterate including the initial guess.
    With ``cfg.least_squares`` the step is the minimum-norm least-squares solution,
    which leaves directions in the Jacobian null space untouched.
    """
    x = as_vector(guess).copy()  # callers often pass views of their work arrays

    def evaluate(z):
        r = np.asarray(residual(z), dtype=float).ravel()
        if r.size != x.size:
            raise ValueError(f"residual has dimension {r.size}, unknowns have {x.size}")
        return r

    r = evaluate(x)
    rnorm = np.max(np.abs(r)) if r.size else 0.0
    for it in range(cfg.max_iter + 1):
        if callback is not None:
            callback(x.copy(), rnorm)
        if not np.isfinite(rnorm):
            raise ConvergenceError("residual became non-finite", rnorm, it)
        if rnorm <= cfg.tol:
            return x
        if it == cfg.max_iter:
            break
        J = jacobian(x) if jacobian is not None else fd_jacobian(evaluate, x, cfg.fd_step)
        J = np.atleast_2d(np.asarray(J, dtype=float))
        if cfg.least_squares:
            dx = np.linalg.lstsq(J, -r, rcond=1e-13)[0]
        else:
            try:
                dx = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobianError(f"singular Jacobian at iteration {it}") from exc
            if not np.all(np.isfinite(dx)) or np.linalg.cond(J) > 1e15:
                raise SingularJacobianError(f"numerically singular Jacobian at iteration {it}")
        t = 1.0
        for _ in range(cfg.max_halvings + 1):
            x_try = x + t * dx
            r_try = evaluate(x_try)
            n_try = np.max(np.abs(r_try))
            if n_try < rnorm:
                break
            t *= cfg.damping
        else:
            raise ConvergenceError("line search failed to reduce the residual", rnorm, it)
        x, r, rnorm = x_try, r_try, n_try
    raise ConvergenceError("Newton iteration did not converge", rnorm, cfg.max_iter)


@dataclass
class LagrangianSystem:
    """A Lagrangian L(q, v) on R^dim.

    Callables act on the last axis, so q and v may carry leading batch axes.
    Missing partial derivatives are replaced by central differences.
    """

    dim: int
    lag: Callable
    dLdq: Optional[Callable] = None
    dLdv: Optional[Callable] = None
    hamiltonian: Optional[Callable] = None
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")

    def _fd_partial(self, q, v, wrt: str):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.empty(np.broadcast_shapes(q.shape, v.shape))
        base = q if wrt == "q" else v
        for j in range(self.dim):
            h = self.fd_step * (1.0 + np.abs(base[..., j]))
            e = np.zeros(self.dim)
            e[j] = 1.0
            dh = h[..., None] * e
            if wrt == "q":
                out[..., j] = (self.lag(q + dh, v) - self.lag(q - dh, v)) / (2 * h)
            else:
                out[..., j] = (self.lag(q, v + dh) - self.lag(q, v - dh)) / (2 * h)
        return out

    def partials(self, q, v) -> tuple[np.ndarray, np.ndarray]:
        Lq = self.dLdq(q, v) if self.dLdq is not None else self._fd_partial(q, v, "q")
        Lv = self.dLdv(q, v) if self.dLdv is not None else self._fd_partial(q, v, "v")
        return np.asarray(Lq, dtype=float), np.asarray(Lv, dtype=float)

    def energy(self, q, v):
        """Energy v . dL/dv - L; batched over leading axes."""
        q, v = np.asarray(q, dtype=float), np.asarray(v, dtype=float)
        _, Lv = self.partials(q, v)
        e = np.sum(Lv * v, axis=-1) - self.lag(q, v)
        return float(e) if np.ndim(e) == 0 else e

    def velocity(self, q, p, guess=None) -> np.ndarray:
        """Invert the Legendre transform p = dL/dv(q, v) by Newton."""
        q = as_vector(q)
        p = as_vector(p)
        v0 = p if guess is None else as_vector(guess)
        return newton_solve(lambda v: self.partials(q, v)[1] - p, v0, SolverConfig(tol=1e-12))

    def energy_qp(self, q, p) -> float:
        if self.hamiltonian is not None:
            return float(self.hamiltonian(np.asarray(q, float), np.asarray(p, float)))
        v = self.velocity(q, p)
        return float(np.dot(p, v) - self.lag(as_vector(q), v))
