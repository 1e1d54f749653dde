"""Higher-order Galerkin variational integrators.

A time step of length h carries a degree-s polynomial through s+1 control
points. The internal control points are eliminated by stationarity of the
quadrature action, which leaves a two-point discrete Lagrangian. Its
derivatives come for free at the solved internal points: the internal
gradients vanish, so D1 L_d and D2 L_d are the endpoint rows of the action
gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numcore import (
    ControlTimes,
    LagrangianSystem,
    QuadratureRule,
    SolverConfig,
    SolverError,
    as_vector,
    basis_tables,
    lobatto_rule,
    newton_solve,
)


class StepFailure(SolverError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"step {index} failed: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class GalerkinScheme:
    system: LagrangianSystem
    times: ControlTimes
    quad: QuadratureRule
    solver: SolverConfig = SolverConfig()
    B: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.times.s < 1:
            raise ValueError("need s >= 1")
        B, D = basis_tables(self.times, self.quad.points)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)

    @classmethod
    def lobatto(cls, system: LagrangianSystem, s: int, npoints: Optional[int] = None,
                solver: SolverConfig = SolverConfig()) -> "GalerkinScheme":
        """Control times at the Lobatto nodes, quadrature on npoints (default s+1) Lobatto nodes."""
        return cls(system, ControlTimes.lobatto(s), lobatto_rule(npoints or s + 1), solver)

    @property
    def s(self) -> int:
        return self.times.s

    @property
    def dim(self) -> int:
        return self.system.dim


@dataclass
class SegmentControls:
    q: np.ndarray  # (s+1, dim)
    h: float

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if not self.h > 0:
            raise ValueError("step size must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    momenta: Optional[np.ndarray] = None
    energies: Optional[np.ndarray] = None
    controls: list = field(default_factory=list)
    iterations: list = field(default_factory=list)


def _check_h(h):
    if not h > 0:
        raise ValueError("step size h must be positive")


def _samples(scheme: GalerkinScheme, Q: np.ndarray, h: float):
    return scheme.B @ Q, scheme.D @ Q / h


def segment_action(scheme: GalerkinScheme, controls: SegmentControls) -> float:
    Q, h = controls.q, controls.h
    if Q.shape != (scheme.s + 1, scheme.dim):
        raise ValueError(f"controls have shape {Q.shape}, expected {(scheme.s + 1, scheme.dim)}")
    qc, vc = _samples(scheme, Q, h)
    return float(h * np.dot(scheme.quad.weights, scheme.system.lag(qc, vc)))


def action_gradient(scheme: GalerkinScheme, Q: np.ndarray, h: float) -> np.ndarray:
    """Gradient of the segment action with respect to every control point, shape (s+1, dim)."""
    qc, vc = _samples(scheme, Q, h)
    Lq, Lv = scheme.system.partials(qc, vc)
    b = scheme.quad.weights[:, None]
    return h * scheme.B.T @ (b * Lq) + scheme.D.T @ (b * Lv)


def action_dh(scheme: GalerkinScheme, Q: np.ndarray, h: float) -> float:
    """Partial derivative of the segment action in h at fixed control points."""
    qc, vc = _samples(scheme, Q, h)
    _, Lv = scheme.system.partials(qc, vc)
    L = scheme.system.lag(qc, vc)
    return float(np.dot(scheme.quad.weights, L - np.sum(Lv * vc, axis=-1)))


def internal_residual(scheme: GalerkinScheme, controls: SegmentControls) -> np.ndarray:
    G = action_gradient(scheme, controls.q, controls.h)
    return G[1:-1].ravel()


def _linear_controls(scheme: GalerkinScheme, q0: np.ndarray, q1: np.ndarray) -> np.ndarray:
    d = scheme.times.nodes[:, None]
    return (1 - d) * q0 + d * q1


def solve_internal(scheme: GalerkinScheme, q0, q1, h: float,
                   guess: Optional[np.ndarray] = None) -> SegmentControls:
    _check_h(h)
    q0, q1 = as_vector(q0), as_vector(q1)
    if q0.size != scheme.dim or q1.size != scheme.dim:
        raise ValueError(f"endpoint dimension mismatch: expected {scheme.dim}")
    Q = _linear_controls(scheme, q0, q1) if guess is None else np.array(guess, dtype=float)
    Q[0], Q[-1] = q0, q1
    if scheme.s == 1:
        return SegmentControls(Q, h)

    def residual(z):
        Q[1:-1] = z.reshape(scheme.s - 1, scheme.dim)
        return action_gradient(scheme, Q, h)[1:-1].ravel()

    z = newton_solve(residual, Q[1:-1].ravel(), scheme.solver)
    Q[1:-1] = z.reshape(scheme.s - 1, scheme.dim)
    return SegmentControls(Q, h)


def discrete_lagrangian(scheme: GalerkinScheme, q0, q1, h: float) -> float:
    return segment_action(scheme, solve_internal(scheme, q0, q1, h))


def discrete_momenta(scheme: GalerkinScheme, q0, q1, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Discrete Legendre transforms p0 = -D1 L_d and p1 = D2 L_d."""
    seg = solve_internal(scheme, q0, q1, h)
    G = action_gradient(scheme, seg.q, h)
    return -G[0], G[-1]


def ld_derivatives_fd(scheme: GalerkinScheme, q0, q1, h: float, step: float = 1e-6):
    """Finite-difference D1 L_d and D2 L_d, re-solving the internal points each time."""
    q0, q1 = as_vector(q0), as_vector(q1)
    D1 = np.empty(scheme.dim)
    D2 = np.empty(scheme.dim)
    for j in range(scheme.dim):
        e = np.zeros(scheme.dim)
        e[j] = step
        D1[j] = (discrete_lagrangian(scheme, q0 + e, q1, h) - discrete_lagrangian(scheme, q0 - e, q1, h)) / (2 * step)
        D2[j] = (discrete_lagrangian(scheme, q0, q1 + e, h) - discrete_lagrangian(scheme, q0, q1 - e, h)) / (2 * step)
    return D1, D2


def step_qp(scheme: GalerkinScheme, q, p, h: float, guess: Optional[np.ndarray] = None,
            counter: Optional[list] = None) -> tuple[SegmentControls, np.ndarray]:
    """Solve D1 L_d(q, q_next) = -p together with the internal stationarity rows.

    Returns the solved next segment and its end momentum D2 L_d(q, q_next).
    """
    _check_h(h)
    q, p = as_vector(q), as_vector(p)
    s, dim = scheme.s, scheme.dim
    if guess is None:
        Q = _linear_controls(scheme, q, q + h * p)
    else:
        Q = np.array(guess, dtype=float).reshape(s + 1, dim)
    Q[0] = q

    def residual(z):
        Q[1:] = z.reshape(s, dim)
        G = action_gradient(scheme, Q, h)
        G[0] += p
        return G[:-1].ravel()

    cb = None
    if counter is not None:
        counter.append(0)

        def cb(x, rn):
            counter[-1] += 1

    z = newton_solve(residual, Q[1:].ravel(), scheme.solver, callback=cb)
    Q[1:] = z.reshape(s, dim)
    p_next = action_gradient(scheme, Q, h)[-1]
    return SegmentControls(Q.copy(), h), p_next


def del_step(scheme: GalerkinScheme, q_prev, q_cur, h: float,
             guess: Optional[np.ndarray] = None) -> np.ndarray:
    """Next configuration from D2 L_d(q_prev, q_cur) + D1 L_d(q_cur, q_next) = 0."""
    q_prev, q_cur = as_vector(q_prev), as_vector(q_cur)
    _, p_cur = discrete_momenta(scheme, q_prev, q_cur, h)
    if guess is None:
        guess = _linear_controls(scheme, q_cur, 2 * q_cur - q_prev)
    seg, _ = step_qp(scheme, q_cur, p_cur, h, guess)
    return seg.q[-1].copy()


def integrate(scheme: GalerkinScheme, q0, q1, h: float, nsteps: int) -> Trajectory:
    """Run nsteps DEL steps from (q0, q1); the result holds nsteps + 2 states.

    A failure of the start-up segment through (q0, q1) is reported as step -1.
    """
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    _check_h(h)
    q0, q1 = as_vector(q0), as_vector(q1)
    try:
        seg = solve_internal(scheme, q0, q1, h)
    except SolverError as exc:
        raise StepFailure(-1, exc) from exc
    G = action_gradient(scheme, seg.q, h)
    states = [q0, q1]
    momenta = [-G[0], G[-1]]
    controls = [seg]
    iters: list = []
    for k in range(nsteps):
        guess = seg.q - seg.q[0] + seg.q[-1]
        try:
            seg, p = step_qp(scheme, states[-1], momenta[-1], h, guess, counter=iters)
        except SolverError as exc:
            raise StepFailure(k, exc) from exc
        states.append(seg.q[-1].copy())
        momenta.append(p)
        controls.append(seg)
    states = np.array(states)
    momenta = np.array(momenta)
    energies = np.array([scheme.system.energy_qp(q, p) for q, p in zip(states, momenta)])
    return Trajectory(h * np.arange(len(states)), states, momenta, energies, controls, iters)
