"""Lie group variational integrators in natural exponential charts.

A segment is g(t) = g0 exp(xi(t/h)) where xi interpolates algebra control
points xi^0 = 0, xi^1, ..., xi^s through the cardinal basis. The body
velocity is eta = g^-1 g' = dexp_{-xi}(xi'), with

    dexp_a(w) = sum_n ad_a^n w / (n+1)!

Derivatives of the discrete Lagrangian with respect to the group arguments
are left-trivialised: the variation of g is g exp(eps zeta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .numcore import (
    ControlTimes,
    QuadratureRule,
    SolverConfig,
    SolverError,
    basis_tables,
    cardinal_basis,
    cardinal_basis_deriv,
    lobatto_rule,
    newton_solve,
)

MAX_SERIES_TERMS = 80


class ChartError(SolverError):
    """Relative displacement outside the injectivity radius of log."""


# ---------------------------------------------------------------- groups

@dataclass(frozen=True)
class MatrixGroupSpec:
    """A matrix Lie group given by an algebra basis and exp/log maps.

    ``structure[k, i, j]`` holds the k-th coordinate of [e_i, e_j].
    """

    name: str
    basis: np.ndarray  # (d, n, n)
    exp: Callable[[np.ndarray], np.ndarray]
    log: Callable[[np.ndarray], np.ndarray]
    structure: np.ndarray = field(init=False, repr=False)
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        object.__setattr__(self, "basis", basis)
        d = basis.shape[0]
        flat = basis.reshape(d, -1).T
        pinv = np.linalg.pinv(flat)
        object.__setattr__(self, "_pinv", pinv)
        C = np.zeros((d, d, d))
        for i in range(d):
            for j in range(d):
                comm = basis[i] @ basis[j] - basis[j] @ basis[i]
                C[:, i, j] = pinv @ comm.ravel()
        C[np.abs(C) < 1e-14] = 0.0
        object.__setattr__(self, "structure", C)

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    def identity(self) -> np.ndarray:
        return np.eye(self.n)

    def hat(self, x) -> np.ndarray:
        return np.tensordot(np.asarray(x, dtype=float), self.basis, axes=1)

    def vee(self, X) -> np.ndarray:
        return self._pinv @ np.asarray(X, dtype=float).ravel()

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.structure, x, y)

    def ad(self, x) -> np.ndarray:
        """Matrix of y -> [x, y]."""
        return np.einsum("kij,i->kj", self.structure, np.asarray(x, dtype=float))

    def Ad(self, g) -> np.ndarray:
        """Matrix of y -> vee(g hat(y) g^-1)."""
        ginv = np.linalg.inv(g)
        return np.column_stack([self.vee(g @ E @ ginv) for E in self.basis])

    def expv(self, x) -> np.ndarray:
        return self.exp(self.hat(x))

    def logv(self, g) -> np.ndarray:
        return self.vee(self.log(g))


def _so3_basis():
    E = np.zeros((3, 3, 3))
    E[0, 2, 1], E[0, 1, 2] = 1.0, -1.0
    E[1, 0, 2], E[1, 2, 0] = 1.0, -1.0
    E[2, 1, 0], E[2, 0, 1] = 1.0, -1.0
    return E


def _so3_exp(A):
    w = np.array([A[2, 1], A[0, 2], A[1, 0]])
    th = np.linalg.norm(w)
    if th < 1e-4:
        a = 1 - th**2 / 6 + th**4 / 120
        b = 0.5 - th**2 / 24 + th**4 / 720
    else:
        a = np.sin(th) / th
        b = (1 - np.cos(th)) / th**2
    return np.eye(3) + a * A + b * (A @ A)


def _so3_log(R):
    c = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    th = np.arccos(c)
    if th > np.pi - 1e-6:
        raise ChartError("rotation angle at the cut locus of log")
    S = 0.5 * (R - R.T)
    if th < 1e-4:
        return S * (1 + th**2 / 6 + 7 * th**4 / 360)
    return S * (th / np.sin(th))


def so3() -> MatrixGroupSpec:
    """Rotations with Rodrigues exp/log; hat(x) y = x cross y."""
    return MatrixGroupSpec("SO(3)", _so3_basis(), _so3_exp, _so3_log)


def translations(dim: int) -> MatrixGroupSpec:
    """R^dim as the abelian group of (dim+1)x(dim+1) translation matrices."""
    n = dim + 1
    E = np.zeros((dim, n, n))
    for i in range(dim):
        E[i, i, dim] = 1.0
    return MatrixGroupSpec(f"R^{dim}", E, lambda A: np.eye(n) + A, lambda g: g - np.eye(n))


def generic_group(name: str, basis) -> MatrixGroupSpec:
    """Any matrix group from an algebra basis, with scipy's expm/logm."""

    def log(g):
        L = linalg.logm(g)
        if np.iscomplexobj(L):
            if np.max(np.abs(L.imag)) > 1e-10:
                raise ChartError("matrix logarithm is not real")
            L = L.real
        return L

    return MatrixGroupSpec(name, basis, linalg.expm, log)


# ------------------------------------------------------- chart and series

def chart(group: MatrixGroupSpec, g0, g) -> np.ndarray:
    return group.logv(np.linalg.solve(g0, g))


def chart_inv(group: MatrixGroupSpec, g0, xi) -> np.ndarray:
    return g0 @ group.expv(xi)


def _series(ad: np.ndarray, v: np.ndarray, shift: int, tol: float) -> np.ndarray:
    out = v / factorial(shift)
    term = v
    for n in range(1, MAX_SERIES_TERMS):
        term = ad @ term
        add = term / factorial(n + shift)
        out = out + add
        if np.max(np.abs(add)) < tol:
            break
    return out


def dexp_apply(group: MatrixGroupSpec, xi, eta, tol: float = 1e-16) -> np.ndarray:
    """sum_n ad_xi^n eta / (n+1)!"""
    return _series(group.ad(xi), np.asarray(eta, dtype=float), 1, tol)


def ddexp_apply(group: MatrixGroupSpec, xi, eta, tol: float = 1e-16) -> np.ndarray:
    """sum_n ad_xi^n eta / (n+2)!"""
    return _series(group.ad(xi), np.asarray(eta, dtype=float), 2, tol)


def dexp_matrix(group: MatrixGroupSpec, xi, tol: float = 1e-16) -> np.ndarray:
    return _series(group.ad(xi), np.eye(group.d), 1, tol)


def dexp_and_derivative(group: MatrixGroupSpec, a, w, tol: float = 1e-16):
    """Return (M, J) with M = dexp matrix at a and J = d/da [dexp_a(w)].

    Uses P_n = ad_a^n w and its derivative J_n = ad_a J_{n-1} - ad(P_{n-1}).
    """
    A = group.ad(a)
    d = group.d
    M = np.eye(d)
    Mterm = np.eye(d)
    P = np.asarray(w, dtype=float)
    Jn = np.zeros((d, d))
    J = np.zeros((d, d))
    for n in range(1, MAX_SERIES_TERMS):
        Jn = A @ Jn - group.ad(P)
        P = A @ P
        Mterm = A @ Mterm
        f = factorial(n + 1)
        J = J + Jn / f
        M = M + Mterm / f
        if max(np.max(np.abs(Jn)), np.max(np.abs(Mterm)), np.max(np.abs(P))) / f < tol:
            break
    return M, J


# ----------------------------------------------------------------- scheme

@dataclass(frozen=True)
class LieGalerkinScheme:
    """Galerkin discretisation on a matrix group.

    ``lag(g, eta)`` takes a group matrix and body velocity coordinates.
    With ``invariant=True`` the Lagrangian must ignore g (left-invariant);
    the group gradient is then skipped. ``dlag_deta`` is optional.
    """

    group: MatrixGroupSpec
    lag: Callable[[np.ndarray, np.ndarray], float]
    times: ControlTimes
    quad: QuadratureRule
    solver: SolverConfig = SolverConfig()
    series_tol: float = 1e-16
    invariant: bool = False
    dlag_deta: Optional[Callable] = None
    fd_step: float = 1e-6
    B: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")
        B, D = basis_tables(self.times, self.quad.points)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)

    @classmethod
    def lobatto(cls, group, lag, s: int, npoints: Optional[int] = None, **kw) -> "LieGalerkinScheme":
        return cls(group, lag, ControlTimes.lobatto(s), lobatto_rule(npoints or s + 1), **kw)

    @property
    def s(self) -> int:
        return self.times.s

    @property
    def d(self) -> int:
        return self.group.d

    def reduced_lag(self, eta) -> float:
        return self.lag(self.group.identity(), eta)


def rigid_body(inertia) -> Callable:
    """Left-invariant kinetic energy 0.5 eta . I eta with its gradient."""
    inertia = np.asarray(inertia, dtype=float)
    if inertia.ndim == 1:
        inertia = np.diag(inertia)
    return (lambda g, eta: 0.5 * eta @ inertia @ eta), (lambda g, eta: inertia @ eta)


def interpolant(times: ControlTimes, xi_controls, tau: float):
    """Return (xi(tau), h * xi'(tau h)) for controls with xi^0 = 0."""
    X = np.asarray(xi_controls, dtype=float)
    if np.any(X[0] != 0):
        raise ValueError("the first control point must be zero")
    l = np.array([cardinal_basis(times, k, tau) for k in range(times.s + 1)])
    dl = np.array([cardinal_basis_deriv(times, k, tau) for k in range(times.s + 1)])
    return l @ X, dl @ X


def chart_interpolant(group: MatrixGroupSpec, times: ControlTimes, g_points, tau: float) -> np.ndarray:
    """Interpolate group points through the chart based at the first one."""
    g0 = g_points[0]
    X = np.array([chart(group, g0, g) for g in g_points])
    X[0] = 0.0
    xi, _ = interpolant(times, X, tau)
    return chart_inv(group, g0, xi)


def _group_grad(scheme: LieGalerkinScheme, g, eta) -> np.ndarray:
    """Left-trivialised derivative of L in g at fixed eta, by central differences."""
    grp = scheme.group
    out = np.empty(grp.d)
    for j in range(grp.d):
        e = np.zeros(grp.d)
        e[j] = scheme.fd_step
        out[j] = (scheme.lag(g @ grp.expv(e), eta) - scheme.lag(g @ grp.expv(-e), eta)) / (2 * scheme.fd_step)
    return out


def _eta_grad(scheme: LieGalerkinScheme, g, eta) -> np.ndarray:
    if scheme.dlag_deta is not None:
        return np.asarray(scheme.dlag_deta(g, eta), dtype=float)
    out = np.empty(scheme.d)
    for j in range(scheme.d):
        e = np.zeros(scheme.d)
        e[j] = scheme.fd_step
        out[j] = (scheme.lag(g, eta + e) - scheme.lag(g, eta - e)) / (2 * scheme.fd_step)
    return out


def _samples(scheme: LieGalerkinScheme, Xi: np.ndarray, h: float):
    return scheme.B @ Xi, scheme.D @ Xi / h


def segment_action(scheme: LieGalerkinScheme, g0, Xi, h: float) -> float:
    grp = scheme.group
    xs, ws = _samples(scheme, np.asarray(Xi, dtype=float), h)
    total = 0.0
    for b, x, w in zip(scheme.quad.weights, xs, ws):
        eta = dexp_apply(grp, -x, w, scheme.series_tol)
        g = g0 if scheme.invariant else g0 @ grp.expv(x)
        total += b * scheme.lag(g, eta)
    return float(h * total)


def action_gradient(scheme: LieGalerkinScheme, g0, Xi, h: float, with_base: bool = False):
    """Gradient of the segment action in every control point, shape (s+1, d).

    With ``with_base`` also returns the left-trivialised derivative in g0 at
    fixed controls (zero for invariant Lagrangians).
    """
    grp = scheme.group
    xs, ws = _samples(scheme, np.asarray(Xi, dtype=float), h)
    gx = np.zeros_like(xs)
    gw = np.zeros_like(ws)
    base = np.zeros(grp.d)
    for i, (b, x, w) in enumerate(zip(scheme.quad.weights, xs, ws)):
        M, J = dexp_and_derivative(grp, -x, w, scheme.series_tol)
        eta = M @ w
        g = g0 if scheme.invariant else g0 @ grp.expv(x)
        Le = _eta_grad(scheme, g, eta)
        gx[i] = -b * (J.T @ Le)
        gw[i] = b * (M.T @ Le)
        if not scheme.invariant:
            Lg = _group_grad(scheme, g, eta)
            gx[i] += b * (M.T @ Lg)
            base += b * (linalg.expm(-grp.ad(x)).T @ Lg)
    G = h * scheme.B.T @ gx + scheme.D.T @ gw
    if with_base:
        return G, h * base
    return G


def action_gradient_fd(scheme: LieGalerkinScheme, g0, Xi, h: float, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient in chart coordinates, used as a cross-check."""
    Xi = np.array(Xi, dtype=float)
    G = np.zeros_like(Xi)
    for k in range(Xi.shape[0]):
        for j in range(Xi.shape[1]):
            Xp, Xm = Xi.copy(), Xi.copy()
            Xp[k, j] += step
            Xm[k, j] -= step
            G[k, j] = (segment_action(scheme, g0, Xp, h) - segment_action(scheme, g0, Xm, h)) / (2 * step)
    return G


def lie_internal_residual(scheme: LieGalerkinScheme, g0, Xi, h: float) -> np.ndarray:
    return action_gradient(scheme, g0, Xi, h)[1:-1].ravel()


def _check_h(h):
    if not h > 0:
        raise ValueError("step size h must be positive")


def solve_internal(scheme: LieGalerkinScheme, g0, xi_end, h: float, guess=None) -> np.ndarray:
    """Controls (s+1, d) with xi^0 = 0, xi^s = xi_end and stationary internal points."""
    _check_h(h)
    s, d = scheme.s, scheme.d
    nodes = scheme.times.nodes[:, None]
    X = nodes * np.asarray(xi_end, dtype=float) if guess is None else np.array(guess, dtype=float)
    X[0] = 0.0
    X[-1] = xi_end
    if s == 1:
        return X

    def residual(z):
        Y = X.copy()
        Y[1:-1] = z.reshape(s - 1, d)
        return action_gradient(scheme, g0, Y, h)[1:-1].ravel()

    X[1:-1] = newton_solve(residual, X[1:-1].ravel(), scheme.solver).reshape(s - 1, d)
    return X


def lie_discrete_lagrangian(scheme: LieGalerkinScheme, g0, g1, h: float) -> float:
    X = solve_internal(scheme, g0, chart(scheme.group, g0, g1), h)
    return segment_action(scheme, g0, X, h)


def _endpoint_momenta(scheme: LieGalerkinScheme, g0, X, h: float):
    """Left-trivialised (-D1 L_d, D2 L_d) of a solved segment."""
    grp = scheme.group
    G, base = action_gradient(scheme, g0, X, h, with_base=True)
    xs = X[-1]
    mu1 = np.linalg.solve(dexp_matrix(grp, -xs, scheme.series_tol).T, G[-1])
    d1 = -np.linalg.solve(dexp_matrix(grp, xs, scheme.series_tol).T, G[-1]) + base
    return -d1, mu1


def lie_momenta(scheme: LieGalerkinScheme, g0, g1, h: float):
    X = solve_internal(scheme, g0, chart(scheme.group, g0, g1), h)
    return _endpoint_momenta(scheme, g0, X, h)


def lie_step_mu(scheme: LieGalerkinScheme, g1, mu1, h: float, guess=None):
    """Solve D1 L_d(g1, g2) = -mu1 and the internal rows; return (g2, mu2, controls)."""
    _check_h(h)
    grp = scheme.group
    s, d = scheme.s, scheme.d
    X = np.zeros((s + 1, d)) if guess is None else np.array(guess, dtype=float)
    X[0] = 0.0

    def unpack(z):
        Y = X.copy()
        Y[1:] = z.reshape(s, d)
        return Y

    def residual(z):
        Y = unpack(z)
        G, base = action_gradient(scheme, g1, Y, h, with_base=True)
        d1 = -np.linalg.solve(dexp_matrix(grp, Y[-1], scheme.series_tol).T, G[-1]) + base
        return np.concatenate([G[1:-1].ravel(), d1 + mu1])

    X = unpack(newton_solve(residual, X[1:].ravel(), scheme.solver))
    _, mu2 = _endpoint_momenta(scheme, g1, X, h)
    return g1 @ grp.expv(X[-1]), mu2, X


def lie_del_step(scheme: LieGalerkinScheme, g0, g1, h: float, guess=None) -> np.ndarray:
    _, mu1 = lie_momenta(scheme, g0, g1, h)
    if guess is None:
        guess = solve_internal(scheme, g0, chart(scheme.group, g0, g1), h)
    return lie_step_mu(scheme, g1, mu1, h, guess)[0]


@dataclass
class LieTrajectory:
    times: np.ndarray
    states: np.ndarray  # (N, n, n)
    body_momenta: np.ndarray
    spatial_momenta: np.ndarray


def spatial_momentum(group: MatrixGroupSpec, g, mu) -> np.ndarray:
    return group.Ad(np.linalg.inv(g)).T @ mu


def lie_integrate(scheme: LieGalerkinScheme, g0, g1, h: float, nsteps: int) -> LieTrajectory:
    """nsteps DEL steps from (g0, g1); returns nsteps + 2 group elements."""
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    grp = scheme.group
    X = solve_internal(scheme, g0, chart(grp, g0, g1), h)
    mu0, mu1 = _endpoint_momenta(scheme, g0, X, h)
    states = [np.asarray(g0, dtype=float), np.asarray(g1, dtype=float)]
    mus = [mu0, mu1]
    for k in range(nsteps):
        try:
            g2, mu2, X = lie_step_mu(scheme, states[-1], mus[-1], h, X)
        except SolverError as exc:
            from .galerkin import StepFailure
            raise StepFailure(k, exc) from exc
        states.append(g2)
        mus.append(mu2)
    states = np.array(states)
    mus = np.array(mus)
    spatial = np.array([spatial_momentum(grp, g, m) for g, m in zip(states, mus)])
    return LieTrajectory(h * np.arange(len(states)), states, mus, spatial)


# ------------------------------------------------------------- reduction

def reduced_discrete_lagrangian(scheme: LieGalerkinScheme, f, h: float) -> float:
    """l_d(f) = L_d(e, f), evaluated with the reduced Lagrangian only."""
    red = _reduced(scheme)
    X = solve_internal(red, red.group.identity(), red.group.logv(f), h)
    return segment_action(red, red.group.identity(), X, h)


def _reduced(scheme: LieGalerkinScheme) -> LieGalerkinScheme:
    if scheme.invariant:
        return scheme
    e = scheme.group.identity()
    dl = None if scheme.dlag_deta is None else (lambda g, eta: scheme.dlag_deta(e, eta))
    return LieGalerkinScheme(scheme.group, lambda g, eta: scheme.lag(e, eta), scheme.times, scheme.quad,
                             scheme.solver, scheme.series_tol, True, dl, scheme.fd_step)


def reduced_momentum(scheme: LieGalerkinScheme, X, h: float) -> np.ndarray:
    """Left-trivialised derivative of l_d at f = exp(xi^s) for solved controls X."""
    G = action_gradient(scheme, scheme.group.identity(), X, h)
    return np.linalg.solve(dexp_matrix(scheme.group, -X[-1], scheme.series_tol).T, G[-1])


def dep_step(scheme: LieGalerkinScheme, f_prev, h: float, guess=None, prev_controls=None):
    """Discrete Euler-Poincare step with f_k = g_k^-1 g_{k+1}.

    Solves l_d'(f_prev) = Ad_{f_next^-1}^T l_d'(f_next), where l_d' is the
    left-trivialised derivative; returns (f_next, controls of f_next).
    """
    red = _reduced(scheme)
    grp = red.group
    s, d = red.s, red.d
    e = grp.identity()
    Xp = prev_controls if prev_controls is not None else solve_internal(red, e, grp.logv(f_prev), h)
    lam_prev = reduced_momentum(red, Xp, h)
    X = np.array(Xp if guess is None else guess, dtype=float)

    def unpack(z):
        Y = X.copy()
        Y[1:] = z.reshape(s, d)
        return Y

    def residual(z):
        Y = unpack(z)
        G = action_gradient(red, e, Y, h)
        f = grp.expv(Y[-1])
        lam = np.linalg.solve(dexp_matrix(grp, -Y[-1], red.series_tol).T, G[-1])
        return np.concatenate([G[1:-1].ravel(), lam_prev - grp.Ad(np.linalg.inv(f)).T @ lam])

    X = unpack(newton_solve(residual, X[1:].ravel(), red.solver))
    return grp.expv(X[-1]), X


def dep_integrate(scheme: LieGalerkinScheme, f0, h: float, nsteps: int) -> list:
    red = _reduced(scheme)
    X = solve_internal(red, red.group.identity(), red.group.logv(f0), h)
    fs = [np.asarray(f0, dtype=float)]
    for _ in range(nsteps):
        f, X = dep_step(red, fs[-1], h, prev_controls=X)
        fs.append(f)
    return fs


def reconstruct(g0, f_sequence) -> np.ndarray:
    """g_{k+1} = g_k f_k."""
    out = [np.asarray(g0, dtype=float)]
    for f in f_sequence:
        out.append(out[-1] @ f)
    return np.array(out)
