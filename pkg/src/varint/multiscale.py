"""Multiscale variational integrator for the planar pendulum with a stiff spring.

Each segment carries, per component, q(t) = P(t/h) (1 + a0 sin wt + a1 cos wt)
with a shared fast frequency w. Segments are glued by continuity
multipliers, and the segment action is evaluated with Filon-Lobatto weights:
the Lagrangian along the curve is a trigonometric polynomial in the phase
wt with smooth coefficients, so it is sampled at 2K+1 phases per Lobatto
node and every harmonic k is integrated with Filon weights at k w.

Filon quadrature and the one-dimensional MsFEM solver live in
:mod:`varint.filon` and :mod:`varint.msfem` and are re-exported here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .filon import (  # noqa: F401
    cardinal_monomials,
    filon_integrate,
    filon_moment,
    filon_moments,
    filon_weights,
    filon_weights_dtheta,
)
from .msfem import MsfemProblem, fd_reference, msfem_exact_u, msfem_solve  # noqa: F401
from .numcore import LagrangianSystem, SolverConfig, SolverError, lobatto_rule, newton_solve

log = logging.getLogger(__name__)


# ------------------------------------------------------------ the model

@dataclass(frozen=True)
class StiffPendulum:
    m: float = 1.0
    g: float = 9.81
    k: float = 1.0e4
    l: float = 1.0

    def __post_init__(self):
        if min(self.m, self.g, self.k, self.l) <= 0:
            raise ValueError("all parameters must be positive")

    @property
    def eps(self) -> float:
        return float(np.sqrt(self.m * self.g / (self.k * self.l)))

    @property
    def fast_frequency(self) -> float:
        return float(np.sqrt(self.k / self.m))

    @property
    def slow_frequency(self) -> float:
        return float(np.sqrt(self.g / self.l))

    def equilibrium_extension(self, theta: float = 0.0) -> float:
        return self.m * self.g * np.cos(theta) / self.k

    def hamilton_rhs(self, y: np.ndarray) -> np.ndarray:
        """(a, theta, p_a, p_theta) -> time derivative."""
        m, g, k, l = self.m, self.g, self.k, self.l
        a, th, pa, pt = y
        r = l + a
        thdot = pt / (m * r**2)
        return np.array([pa / m, thdot, -k * a + g * m * np.cos(th) + m * r * thdot**2, -g * m * r * np.sin(th)])

    def momenta(self, q, v) -> np.ndarray:
        a = q[0]
        return np.array([self.m * v[0], self.m * (self.l + a) ** 2 * v[1]])


def pendulum_lagrangian(sys: StiffPendulum) -> LagrangianSystem:
    """L = m/2 (a'^2 + (l+a)^2 theta'^2) + m g (l+a) cos(theta) - k/2 a^2 in q = (a, theta)."""
    m, g, k, l = sys.m, sys.g, sys.k, sys.l

    def lag(q, v):
        a, th = q[..., 0], q[..., 1]
        ad, thd = v[..., 0], v[..., 1]
        return 0.5 * m * (ad**2 + (l + a) ** 2 * thd**2) + m * g * (l + a) * np.cos(th) - 0.5 * k * a**2

    def dq(q, v):
        a, th = q[..., 0], q[..., 1]
        thd = v[..., 1]
        return np.stack([m * (l + a) * thd**2 + m * g * np.cos(th) - k * a, -m * g * (l + a) * np.sin(th)], axis=-1)

    def dv(q, v):
        a = q[..., 0]
        return np.stack([m * v[..., 0], m * (l + a) ** 2 * v[..., 1]], axis=-1)

    def ham(q, p):
        a, th = q[..., 0], q[..., 1]
        return (p[..., 0] ** 2 / (2 * m) + p[..., 1] ** 2 / (2 * m * (l + a) ** 2)
                - m * g * (l + a) * np.cos(th) + 0.5 * k * a**2)

    return LagrangianSystem(dim=2, lag=lag, dLdq=dq, dLdv=dv, hamiltonian=ham)


def rk4(rhs, y0, dt: float, nsteps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta; returns all nsteps + 1 states."""
    y = np.array(y0, dtype=float)
    out = np.empty((nsteps + 1, y.size))
    out[0] = y
    for n in range(nsteps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[n + 1] = y
    return out


def resolved_reference(sys: StiffPendulum, y0, t_end: float, dt_fine: Optional[float] = None):
    """Fully resolved reference: times and states (a, theta, p_a, p_theta)."""
    if dt_fine is None:
        dt_fine = (2 * np.pi / sys.fast_frequency) / 50
    n = int(np.ceil(t_end / dt_fine))
    dt = t_end / n
    return dt * np.arange(n + 1), rk4(sys.hamilton_rhs, y0, dt, n)


def dominant_frequency(signal, dt: float, pad: int = 8) -> float:
    """Angular frequency of the largest non-zero spectral peak (Hann window, parabolic refinement)."""
    x = np.asarray(signal, dtype=float)
    n = x.size
    t = np.arange(n)
    x = x - np.polyval(np.polyfit(t, x, 1), t)
    if np.max(np.abs(x)) < 1e-14 * max(1.0, np.max(np.abs(signal))):
        raise ValueError("signal has no oscillatory content")
    spec = np.abs(np.fft.rfft(x * np.hanning(n), pad * n))
    lo = 2 * pad  # skip the leakage lobe of the removed trend
    k = lo + int(np.argmax(spec[lo:]))
    if spec[k] < 10 * np.median(spec[lo:]) or k == len(spec) - 1:
        raise ValueError("no dominant spectral peak")
    y0, y1, y2 = np.log(spec[k - 1: k + 2])
    shift = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
    return float(2 * np.pi * (k + shift) / (pad * n * dt))


def estimate_fast_frequency(sys: StiffPendulum, y0, t_resolve: float, dt_fine: Optional[float] = None) -> float:
    """Dominant frequency of the spring extension from a short resolved run."""
    if dt_fine is None:
        dt_fine = (2 * np.pi / sys.fast_frequency) / 50
    if t_resolve < 10 * 2 * np.pi / sys.fast_frequency:
        raise ValueError("t_resolve must cover at least 10 fast periods")
    t, y = resolved_reference(sys, y0, t_resolve, dt_fine)
    return dominant_frequency(y[:, 0], t[1] - t[0])


# ---------------------------------------------------------- trial space

@dataclass
class OscillatoryCurve:
    """Per-component P_c(tau) (1 + a0_c sin wt + a1_c cos wt) on t in [0, h], tau = t/h.

    ``p[c]`` holds the coefficients of P_c in powers of tau.
    """

    p: list
    omega: float
    a0: np.ndarray
    a1: np.ndarray
    h: float

    def __post_init__(self):
        self.p = [np.asarray(c, dtype=float) for c in self.p]
        self.a0 = np.asarray(self.a0, dtype=float)
        self.a1 = np.asarray(self.a1, dtype=float)
        if self.omega < 0:
            raise ValueError("omega must be non-negative")


def _poly(coef, tau):
    tau = np.asarray(tau, dtype=float)
    val = np.polynomial.polynomial.polyval(tau, coef)
    der = np.polynomial.polynomial.polyval(tau, np.polynomial.polynomial.polyder(coef)) if len(coef) > 1 else 0 * tau
    return val, der


def oscillatory_eval(curve: OscillatoryCurve, t):
    """Value and exact time derivative, shape (..., dim)."""
    t = np.asarray(t, dtype=float)
    tau = t / curve.h
    s, c = np.sin(curve.omega * t), np.cos(curve.omega * t)
    q, v = [], []
    for j, coef in enumerate(curve.p):
        P, dP = _poly(coef, tau)
        g = 1 + curve.a0[j] * s + curve.a1[j] * c
        dg = curve.omega * (curve.a0[j] * c - curve.a1[j] * s)
        q.append(P * g)
        v.append(dP / curve.h * g + P * dg)
    return np.stack(q, axis=-1), np.stack(v, axis=-1)


def shift_curve(curve: OscillatoryCurve, h_next: Optional[float] = None) -> OscillatoryCurve:
    """Predictor for the next segment: extrapolate P and rotate the oscillation phase."""
    h = curve.h
    hn = h if h_next is None else h_next
    ph = curve.omega * h
    a0 = curve.a0 * np.cos(ph) - curve.a1 * np.sin(ph)
    a1 = curve.a0 * np.sin(ph) + curve.a1 * np.cos(ph)
    p = []
    for coef in curve.p:
        # P_new(tau) = P_old(1 + tau hn/h)
        poly = np.polynomial.Polynomial(coef)
        p.append((poly(np.polynomial.Polynomial([1.0, hn / h]))).coef[: len(coef)])
    return OscillatoryCurve(p, curve.omega, a0, a1, hn)


# ----------------------------------------------------------- the scheme

@dataclass(frozen=True)
class MultiscaleScheme:
    """Oscillatory Galerkin scheme.

    degrees[c] is the polynomial degree of component c and fast[c] whether it
    carries the oscillatory factor. K harmonics are resolved; the phase grid
    has 2K+1 points, which is exact for Lagrangians quadratic in the trial
    functions.
    """

    system: LagrangianSystem
    h: float
    degrees: Sequence[int]
    fast: Sequence[bool]
    npoints: int = 10
    harmonics: int = 2
    solver: SolverConfig = SolverConfig(tol=1e-8, least_squares=True, max_iter=60)
    omega_floor: float = 1e-8
    quad: object = field(init=False, repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if len(self.degrees) != self.system.dim or len(self.fast) != self.system.dim:
            raise ValueError("degrees and fast need one entry per component")
        if min(self.degrees) < 0 or self.harmonics < 1:
            raise ValueError("invalid trial space")
        object.__setattr__(self, "quad", lobatto_rule(self.npoints))

    @property
    def has_fast(self) -> bool:
        return any(self.fast)

    @property
    def nphase(self) -> int:
        return 2 * self.harmonics + 1

    @property
    def ndof(self) -> int:
        return sum(d + 1 for d in self.degrees) + 2 * sum(self.fast) + (1 if self.has_fast else 0)

    # z layout: [poly c0, poly c1, ..., (a0, a1) per fast component, omega]
    def pack(self, curve: OscillatoryCurve) -> np.ndarray:
        parts = [np.resize(c, d + 1) if len(c) != d + 1 else c for c, d in zip(curve.p, self.degrees)]
        for j, f in enumerate(self.fast):
            if f:
                parts.append([curve.a0[j], curve.a1[j]])
        if self.has_fast:
            parts.append([curve.omega])
        return np.concatenate([np.asarray(x, dtype=float) for x in parts])

    def unpack(self, z: np.ndarray, omega_default: float = 0.0) -> OscillatoryCurve:
        p, i = [], 0
        for d in self.degrees:
            p.append(z[i: i + d + 1])
            i += d + 1
        dim = self.system.dim
        a0, a1 = np.zeros(dim), np.zeros(dim)
        for j, f in enumerate(self.fast):
            if f:
                a0[j], a1[j] = z[i], z[i + 1]
                i += 2
        omega = z[i] if self.has_fast else omega_default
        return OscillatoryCurve(p, abs(omega), a0, a1, self.h)


def phase_weights(scheme: MultiscaleScheme, omega: float):
    """Real weights W[i, m] and dW/domega so that the action is sum W L(c_i h, phi_m)."""
    h, K, M = scheme.h, scheme.harmonics, scheme.nphase
    c = scheme.quad.points
    phi = 2 * np.pi * np.arange(M) / M
    W = np.outer(scheme.quad.weights, np.ones(M)) / M
    dW = np.zeros_like(W)
    for k in range(1, K + 1):
        b = filon_weights(c, k * h * omega)
        db = filon_weights_dtheta(c, k * h * omega) * (k * h)
        e = np.exp(-1j * k * phi)
        W = W + 2 * np.real(np.outer(b, e)) / M
        dW = dW + 2 * np.real(np.outer(db, e)) / M
    return h * W, h * dW


def _samples(scheme: MultiscaleScheme, z: np.ndarray, omega_default: float):
    """Positions, velocities and their derivatives in z on the (node, phase) grid."""
    curve = scheme.unpack(z, omega_default)
    h, M = scheme.h, scheme.nphase
    tau = scheme.quad.points[:, None] * np.ones(M)
    phi = np.ones_like(scheme.quad.points)[:, None] * (2 * np.pi * np.arange(M) / M)
    s, c = np.sin(phi), np.cos(phi)
    dim, n = scheme.system.dim, z.size
    q = np.empty(tau.shape + (dim,))
    v = np.empty_like(q)
    dq = np.zeros(tau.shape + (dim, n))
    dv = np.zeros_like(dq)
    w = curve.omega
    i = 0
    amp = sum(d + 1 for d in scheme.degrees)
    for j, d in enumerate(scheme.degrees):
        P, dP = _poly(curve.p[j], tau)
        g = 1 + curve.a0[j] * s + curve.a1[j] * c
        gp = curve.a0[j] * c - curve.a1[j] * s
        q[..., j] = P * g
        v[..., j] = dP / h * g + P * w * gp
        for r in range(d + 1):
            dq[..., j, i + r] = tau**r * g
            dv[..., j, i + r] = (r * tau ** (r - 1) / h if r else 0.0) * g + tau**r * w * gp
        if scheme.fast[j]:
            dq[..., j, amp] = P * s
            dv[..., j, amp] = dP / h * s + P * w * c
            dq[..., j, amp + 1] = P * c
            dv[..., j, amp + 1] = dP / h * c - P * w * s
            dv[..., j, n - 1] = P * gp
            amp += 2
        i += d + 1
    return curve, q, v, dq, dv


def segment_action(scheme: MultiscaleScheme, curve: OscillatoryCurve) -> float:
    z = scheme.pack(curve)
    _, q, v, _, _ = _samples(scheme, z, curve.omega)
    W, _ = phase_weights(scheme, curve.omega)
    return float(np.sum(W * scheme.system.lag(q, v)))


def action_gradient(scheme: MultiscaleScheme, z: np.ndarray, omega_default: float = 0.0) -> np.ndarray:
    curve, q, v, dq, dv = _samples(scheme, z, omega_default)
    W, dW = phase_weights(scheme, curve.omega)
    Lq, Lv = scheme.system.partials(q, v)
    grad = np.einsum("im,imj,imjn->n", W, Lq, dq) + np.einsum("im,imj,imjn->n", W, Lv, dv)
    if scheme.has_fast:
        grad[-1] += np.sum(dW * scheme.system.lag(q, v)) * np.sign(z[-1] or 1.0)
    return grad


def endpoint_values(scheme: MultiscaleScheme, z: np.ndarray, omega_default: float = 0.0):
    """q(0), q(h) and their Jacobians in z."""
    curve = scheme.unpack(z, omega_default)
    h, n, dim = scheme.h, z.size, scheme.system.dim
    ph = curve.omega * h
    out = []
    for tau, phase in ((0.0, 0.0), (1.0, ph)):
        s, c = np.sin(phase), np.cos(phase)
        q = np.empty(dim)
        J = np.zeros((dim, n))
        i = 0
        amp = sum(d + 1 for d in scheme.degrees)
        for j, d in enumerate(scheme.degrees):
            P, _ = _poly(curve.p[j], tau)
            g = 1 + curve.a0[j] * s + curve.a1[j] * c
            q[j] = P * g
            J[j, i: i + d + 1] = tau ** np.arange(d + 1) * g
            if scheme.fast[j]:
                J[j, amp] = P * s
                J[j, amp + 1] = P * c
                J[j, n - 1] = P * tau * h * (curve.a0[j] * c - curve.a1[j] * s)
                amp += 2
            i += d + 1
        out.append((q, J))
    return out


@dataclass
class MultiscaleState:
    curve: OscillatoryCurve
    lam: np.ndarray  # multiplier at the end of the segment, equal to minus the momentum
    t0: float = 0.0
    flagged: bool = False


def multiscale_step(scheme: MultiscaleScheme, q_start, lam_prev, guess: OscillatoryCurve,
                    t0: float = 0.0) -> MultiscaleState:
    """Solve stationarity of the augmented action for one segment.

    Unknowns are the segment parameters z and the closing multiplier
    lambda_next; equations are dS/dz - lambda_prev dq(0)/dz + lambda_next dq(h)/dz = 0
    and q(0) = q_start.
    """
    q_start = np.asarray(q_start, dtype=float)
    lam_prev = np.asarray(lam_prev, dtype=float)
    dim = scheme.system.dim
    z0 = scheme.pack(guess)
    n = z0.size
    omega_default = guess.omega

    def residual(x):
        z, lam = x[:n], x[n:]
        (q0, J0), (_, J1) = endpoint_values(scheme, z, omega_default)
        g = action_gradient(scheme, z, omega_default)
        return np.concatenate([g - J0.T @ lam_prev + J1.T @ lam, q0 - q_start])

    (_, _), (_, J1) = endpoint_values(scheme, z0, omega_default)
    g = action_gradient(scheme, z0, omega_default)
    (q0g, J0g), _ = endpoint_values(scheme, z0, omega_default)
    lam0 = np.linalg.lstsq(J1.T, -(g - J0g.T @ lam_prev), rcond=None)[0]
    x = newton_solve(residual, np.concatenate([z0, lam0]), scheme.solver)
    curve = scheme.unpack(x[:n], omega_default)
    flagged = scheme.has_fast and curve.omega < scheme.omega_floor * max(1.0, guess.omega)
    if flagged:
        log.warning("fast frequency collapsed to %.3e", curve.omega)
    return MultiscaleState(curve, x[n:], t0, flagged)


def initial_guess(scheme: MultiscaleScheme, sys: StiffPendulum, y0, omega: float) -> OscillatoryCurve:
    """Slow part from a resolved run of the spring-free pendulum, fast part from the initial offset."""
    a_init, th0, pa0, pt0 = y0
    r0 = sys.l + sys.m * sys.g * np.cos(th0) / sys.k
    slow = lambda y: np.array([y[1] / (sys.m * r0**2), -sys.g * sys.m * r0 * np.sin(y[0])])
    n = 400
    traj = rk4(slow, [th0, pt0], scheme.h / n, n)
    tau = np.linspace(0.0, 1.0, n + 1)
    th_coef = np.polynomial.polynomial.polyfit(tau, traj[:, 0], scheme.degrees[1])
    a_eq = sys.m * sys.g * np.cos(traj[:, 0]) / sys.k + sys.m * r0 * (traj[:, 1] / (sys.m * r0**2)) ** 2 / sys.k
    a_coef = np.polynomial.polynomial.polyfit(tau, a_eq, scheme.degrees[0])
    base = a_coef[0]
    # a(t) ~ P(tau) (1 + a0 sin + a1 cos) with a(0) and a'(0) matched at the start
    a1 = (a_init - base) / base
    a0 = (pa0 / sys.m) / (base * omega)
    p = [a_coef, th_coef]
    a0v = np.array([a0 if scheme.fast[0] else 0.0, 0.0])
    a1v = np.array([a1 if scheme.fast[0] else 0.0, 0.0])
    return OscillatoryCurve(p, omega, a0v, a1v, scheme.h)


@dataclass
class MultiscaleRun:
    states: list
    omega_estimate: float

    def sample(self, points_per_segment: int = 200):
        """Concatenated (t, q, v) along the piecewise curve."""
        ts, qs, vs = [], [], []
        for st in self.states:
            t = np.linspace(0.0, st.curve.h, points_per_segment, endpoint=False)
            q, v = oscillatory_eval(st.curve, t)
            ts.append(st.t0 + t)
            qs.append(q)
            vs.append(v)
        return np.concatenate(ts), np.concatenate(qs), np.concatenate(vs)


def run_stiff_pendulum(sys: StiffPendulum, y0, t_end: float, periods_per_step: float = 20.25,
                       degrees=(1, 8), fast=(True, False), npoints: int = 12,
                       omega: Optional[float] = None, t_resolve: Optional[float] = None) -> MultiscaleRun:
    """Estimate the fast frequency, then march segments of about periods_per_step fast periods."""
    y0 = np.asarray(y0, dtype=float)
    if omega is None:
        t_resolve = t_resolve or 40 * 2 * np.pi / sys.fast_frequency
        omega = estimate_fast_frequency(sys, y0, t_resolve)
    h = periods_per_step * 2 * np.pi / omega
    scheme = MultiscaleScheme(pendulum_lagrangian(sys), h, degrees, fast, npoints=npoints)
    q = y0[:2]
    lam = -y0[2:]
    guess = initial_guess(scheme, sys, y0, omega)
    states = []
    t = 0.0
    while t < t_end - 1e-12:
        try:
            st = multiscale_step(scheme, q, lam, guess, t)
        except SolverError as exc:
            from .galerkin import StepFailure
            raise StepFailure(len(states), exc) from exc
        states.append(st)
        (_, _), (q_end, _) = endpoint_values(scheme, scheme.pack(st.curve), st.curve.omega)
        q, lam = q_end, st.lam
        t += h
        # polynomial extrapolation over a whole segment is poor; restart the slow predictor instead
        guess = initial_guess(scheme, sys, np.concatenate([q, -lam]), st.curve.omega)
    return MultiscaleRun(states, omega)


def curve_energy(system: LagrangianSystem, q, v) -> np.ndarray:
    return system.energy(q, v)


def with_slow_only(scheme: MultiscaleScheme) -> MultiscaleScheme:
    return replace(scheme, fast=tuple(False for _ in scheme.fast))
