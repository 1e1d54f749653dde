"""Model Lagrangians used by the integrators, the tests and the CLI."""

from __future__ import annotations

import numpy as np

from .numcore import LagrangianSystem


def free_particle(dim: int = 1, mass: float = 1.0) -> LagrangianSystem:
    return LagrangianSystem(
        dim=dim,
        lag=lambda q, v: 0.5 * mass * np.sum(np.asarray(v) ** 2, axis=-1),
        dLdq=lambda q, v: np.zeros(np.broadcast_shapes(np.shape(q), np.shape(v))),
        dLdv=lambda q, v: mass * np.asarray(v, dtype=float) + 0.0 * np.asarray(q),
        hamiltonian=lambda q, p: 0.5 * np.sum(p**2, axis=-1) / mass,
    )


def harmonic_oscillator(mass: float = 1.0, stiffness: float = 1.0, dim: int = 1) -> LagrangianSystem:
    return LagrangianSystem(
        dim=dim,
        lag=lambda q, v: 0.5 * mass * np.sum(np.asarray(v) ** 2, axis=-1)
        - 0.5 * stiffness * np.sum(np.asarray(q) ** 2, axis=-1),
        dLdq=lambda q, v: -stiffness * np.asarray(q, dtype=float) + 0.0 * np.asarray(v),
        dLdv=lambda q, v: mass * np.asarray(v, dtype=float) + 0.0 * np.asarray(q),
        hamiltonian=lambda q, p: 0.5 * np.sum(p**2, axis=-1) / mass + 0.5 * stiffness * np.sum(q**2, axis=-1),
    )


def harmonic_exact(t, q0: float, v0: float, omega: float = 1.0):
    """Closed-form oscillator solution, position and velocity."""
    t = np.asarray(t, dtype=float)
    q = q0 * np.cos(omega * t) + v0 / omega * np.sin(omega * t)
    v = -q0 * omega * np.sin(omega * t) + v0 * np.cos(omega * t)
    return q, v


def pendulum(gravity: float = 1.0, length: float = 1.0) -> LagrangianSystem:
    """L = theta_dot^2 / 2 + (g/l) cos(theta)."""
    k = gravity / length
    return LagrangianSystem(
        dim=1,
        lag=lambda q, v: 0.5 * np.asarray(v)[..., 0] ** 2 + k * np.cos(np.asarray(q)[..., 0]),
        dLdq=lambda q, v: -k * np.sin(np.asarray(q, dtype=float)) + 0.0 * np.asarray(v),
        dLdv=lambda q, v: np.asarray(v, dtype=float) + 0.0 * np.asarray(q),
        hamiltonian=lambda q, p: 0.5 * np.asarray(p)[..., 0] ** 2 - k * np.cos(np.asarray(q)[..., 0]),
    )


MODELS = {
    "free_particle": free_particle,
    "harmonic_oscillator": harmonic_oscillator,
    "pendulum": pendulum,
}
