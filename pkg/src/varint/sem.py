"""Symplectic-energy-momentum integrators with the time step as an unknown.

The second-order scheme is the midpoint discrete Lagrangian
h L((q0+q1)/2, (q1-q0)/h); the higher-order scheme reuses the Galerkin
segment action. Each step solves the discrete Euler-Lagrange equation
together with equality of the discrete energy E_d = -dL_d/dh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import galerkin as gk
from .numcore import (
    ControlTimes,
    LagrangianSystem,
    SolverConfig,
    SolverError,
    as_vector,
    midpoint_rule,
    newton_solve,
)

DEGENERATE_SLOPE = 1e-12


@dataclass(frozen=True)
class SemScheme:
    system: LagrangianSystem
    order2: bool = True
    s: int = 2
    solver: SolverConfig = SolverConfig()
    h_min: float = 1e-6
    h_max: float = 10.0
    galerkin: gk.GalerkinScheme = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.h_min < self.h_max:
            raise ValueError("need 0 < h_min < h_max")
        if self.order2:
            g = gk.GalerkinScheme(self.system, ControlTimes.equispaced(1), midpoint_rule(), self.solver)
        else:
            g = gk.GalerkinScheme.lobatto(self.system, self.s, solver=self.solver)
        object.__setattr__(self, "galerkin", g)


@dataclass
class SemStepRecord:
    q_i: np.ndarray
    q_next: np.ndarray
    h: float
    E_d: float
    controls: Optional[np.ndarray] = None
    fallback: bool = False


@dataclass
class SemTrajectory:
    times: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    energies: np.ndarray
    fallback: np.ndarray
    records: list


def _midpoint_parts(system, q0, q1, h):
    qm = 0.5 * (q0 + q1)
    v = (q1 - q0) / h
    return qm, v


def sem_discrete_lagrangian(scheme: SemScheme, q0, q1, h: float) -> float:
    if not h > 0:
        raise ValueError("h must be positive")
    q0, q1 = as_vector(q0), as_vector(q1)
    if scheme.order2:
        qm, v = _midpoint_parts(scheme.system, q0, q1, h)
        return float(h * scheme.system.lag(qm, v))
    return gk.discrete_lagrangian(scheme.galerkin, q0, q1, h)


def segment_energy(scheme: SemScheme, Q: np.ndarray, h: float) -> float:
    """-dS/dh at fixed control points; equals E_d at solved internal points."""
    return -gk.action_dh(scheme.galerkin, Q, h)


def discrete_energy(scheme: SemScheme, q0, q1, h: float) -> float:
    if not h > 0:
        raise ValueError("h must be positive")
    q0, q1 = as_vector(q0), as_vector(q1)
    if scheme.order2:
        qm, v = _midpoint_parts(scheme.system, q0, q1, h)
        _, Lv = scheme.system.partials(qm, v)
        return float(-scheme.system.lag(qm, v) + np.dot(Lv, v))
    seg = gk.solve_internal(scheme.galerkin, q0, q1, h)
    return segment_energy(scheme, seg.q, h)


def _prev_segment(scheme: SemScheme, q_prev, q_cur, h_prev, controls=None):
    if controls is None:
        controls = gk.solve_internal(scheme.galerkin, q_prev, q_cur, h_prev).q
    G = gk.action_gradient(scheme.galerkin, controls, h_prev)
    return controls, G[-1], segment_energy(scheme, controls, h_prev)


def _next_guess(scheme: SemScheme, q_prev, q_cur, h_prev, h_next, Q_prev=None):
    if Q_prev is not None:
        return Q_prev - Q_prev[0] + q_cur
    d = scheme.galerkin.times.nodes[:, None]
    return q_cur + d * (q_cur - q_prev) * (h_next / h_prev)


def solve_fixed_h(scheme: SemScheme, q_cur, p_cur, h: float, guess=None) -> np.ndarray:
    """Next segment controls solving the DEL and internal rows at a prescribed step."""
    seg, _ = gk.step_qp(scheme.galerkin, q_cur, p_cur, h, guess)
    return seg.q


def energy_fallback(scheme: SemScheme, q_cur, q_next_fn: Callable, E_target: float,
                    width: float = 1e-10) -> float:
    """Golden-section minimisation of (E_d - E_target)^2 over [h_min, h_max].

    ``q_next_fn(h)`` returns the next segment's control points for step h.
    Steps where that solve fails score +inf. The search assumes the error is
    unimodal on the bracket, so the bounds should be kept well inside the
    shortest time scale of the problem.
    """
    def err(h):
        try:
            Q = q_next_fn(h)
        except SolverError:
            return np.inf
        return (segment_energy(scheme, Q, h) - E_target) ** 2

    a, b = scheme.h_min, scheme.h_max
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = err(c), err(d)
    while b - a > width:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = err(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = err(d)
    candidates = [(fc, c), (fd, d), (err(scheme.h_min), scheme.h_min), (err(scheme.h_max), scheme.h_max)]
    return float(min(candidates)[1])


def _secant(f, x0, x1, tol, max_iter):
    """Secant iteration returning the first iterate with |f| <= tol, or None."""
    f0 = f(x0)
    if abs(f0) <= tol:
        return x0
    f1 = f(x1)
    for _ in range(max_iter):
        if abs(f1) <= tol:
            return x1
        if f1 == f0:
            return None
        x0, x1, f0 = x1, x1 - f1 * (x1 - x0) / (f1 - f0), f1
        f1 = f(x1)
    return x1 if abs(f1) <= tol else None


def sem_step(scheme: SemScheme, q_prev, q_cur, h_prev: float, guess=None,
             prev_controls: Optional[np.ndarray] = None) -> SemStepRecord:
    """Solve energy equality and the DEL equation for (q_next, h_next).

    q_next is eliminated through the fixed-step DEL solve and the energy
    mismatch is driven to zero by a secant iteration in h; a coupled Newton
    iteration on both rows stalls because they scale very differently.
    ``guess`` is an optional starting step. Falls back to energy-error
    minimisation when the iteration fails, leaves [h_min, h_max] or the
    energy is locally insensitive to h.
    """
    q_prev, q_cur = as_vector(q_prev), as_vector(q_cur)
    Q_prev, p_cur, E_target = _prev_segment(scheme, q_prev, q_cur, h_prev, prev_controls)
    tol = scheme.solver.tol
    cache: dict = {}
    last = [_next_guess(scheme, q_prev, q_cur, h_prev, h_prev, Q_prev)]

    def q_next_fn(h):
        if h not in cache:
            cache[h] = solve_fixed_h(scheme, q_cur, p_cur, h, last[0])
            last[0] = cache[h]
        return cache[h]

    def mismatch(h):
        if not h > 0:
            raise SolverError("non-positive step")
        return segment_energy(scheme, q_next_fn(h), h) - E_target

    h0 = h_prev if guess is None else float(guess)
    ok = True
    try:
        h = _secant(mismatch, h0, h0 * (1 + 1e-3), tol, scheme.solver.max_iter)
        if h is None:
            ok = False
        if ok:
            Qn = q_next_fn(h)
            dh = 1e-7 * h
            slope = (segment_energy(scheme, Qn, h + dh) - segment_energy(scheme, Qn, h - dh)) / (2 * dh)
            if not scheme.h_min <= h <= scheme.h_max or abs(slope) < DEGENERATE_SLOPE:
                ok = False
    except (SolverError, ArithmeticError):
        ok = False
    if ok:
        return SemStepRecord(q_cur, Qn[-1].copy(), float(h), segment_energy(scheme, Qn, h), Qn)

    h = energy_fallback(scheme, q_cur, q_next_fn, E_target)
    Qn = q_next_fn(h)
    return SemStepRecord(q_cur, Qn[-1].copy(), h, segment_energy(scheme, Qn, h), Qn, fallback=True)


def sem_step_direct(scheme: SemScheme, q_prev, q_cur, h_prev: float,
                    prev_controls: Optional[np.ndarray] = None, guess=None) -> tuple[np.ndarray, float]:
    """Same step from the unreduced variational equations with multipliers kept as unknowns.

    Unknowns: all controls of the next piece (its start point included), its
    length, the continuity multiplier lambda and the time multiplier omega.
    """
    g = scheme.galerkin
    s, dim = g.s, g.dim
    q_prev, q_cur = as_vector(q_prev), as_vector(q_cur)
    if prev_controls is None:
        prev_controls = gk.solve_internal(g, q_prev, q_cur, h_prev).q
    G_prev = gk.action_gradient(g, prev_controls, h_prev)
    dS_prev = gk.action_dh(g, prev_controls, h_prev)
    if guess is None:
        Q0 = _next_guess(scheme, q_prev, q_cur, h_prev, h_prev, prev_controls)
        h0 = h_prev
        try:
            Q0 = solve_fixed_h(scheme, q_cur, G_prev[-1], h0, Q0)
        except SolverError:
            pass
    else:
        Q0, h0 = np.array(guess[0], dtype=float), float(guess[1])
    lam0 = G_prev[-1]

    def unpack(z):
        n = (s + 1) * dim
        return z[:n].reshape(s + 1, dim), z[n], z[n + 1:n + 1 + dim], z[-1]

    def residual(z):
        Qn, h, lam, om = unpack(z)
        G = gk.action_gradient(g, Qn, h)
        return np.concatenate([
            [dS_prev - om],                 # time endpoint of the previous piece
            [-gk.action_dh(g, Qn, h) + om],  # time start point of the next piece
            G_prev[-1] - lam,               # end point of the previous piece
            G[0] + lam,                     # start point of the next piece
            G[1:-1].ravel(),                # internal points of the next piece
            Qn[0] - q_cur,                  # continuity
        ])

    z0 = np.concatenate([Q0.ravel(), [h0], lam0, [dS_prev]])
    z = newton_solve(residual, z0, scheme.solver)
    Qn, h, _, _ = unpack(z)
    return Qn[-1].copy(), float(h)


def sem_integrate(scheme: SemScheme, q0, q1, h0: float, nsteps: int) -> SemTrajectory:
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    q0, q1 = as_vector(q0), as_vector(q1)
    Q = gk.solve_internal(scheme.galerkin, q0, q1, h0).q
    states = [q0, q1]
    steps = [h0]
    energies = [segment_energy(scheme, Q, h0)]
    flags = [False]
    records = []
    for k in range(nsteps):
        try:
            rec = sem_step(scheme, states[-2], states[-1], steps[-1], prev_controls=Q)
        except SolverError as exc:
            raise gk.StepFailure(k, exc) from exc
        records.append(rec)
        Q = rec.controls
        states.append(rec.q_next)
        steps.append(rec.h)
        energies.append(rec.E_d)
        flags.append(rec.fallback)
    steps = np.array(steps)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    return SemTrajectory(times, np.array(states), steps, np.array(energies), np.array(flags), records)
