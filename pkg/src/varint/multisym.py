"""Multisymplectic variational integrator on a (1+1)D tensor-product mesh.

Each space-time cell carries the bilinear interpolant of its four corner
values; the cell discrete Lagrangian is a tensor Gauss rule applied to the
density. Corners are ordered (i, j), (i+1, j), (i, j+1), (i+1, j+1), so the
discrete Euler-Lagrange equation at node (i, j) reads

    D1 L(i, j) + D2 L(i-1, j) + D3 L(i, j-1) + D4 L(i-1, j-1) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from .numcore import SolverConfig, SolverError, fd_jacobian, newton_solve


@dataclass(frozen=True)
class SpaceTimeMesh:
    M: int  # spatial cells
    N: int  # temporal cells
    dx: float
    dt: float
    boundary: Literal["periodic", "fixed"] = "periodic"

    def __post_init__(self):
        if self.M < 2 or self.N < 1:
            raise ValueError("need M >= 2 and N >= 1")
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")
        if self.boundary not in ("periodic", "fixed"):
            raise ValueError("boundary must be 'periodic' or 'fixed'")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.M + 1)

    @property
    def courant(self) -> float:
        return self.dt / self.dx


@dataclass
class DensityLagrangian:
    """L(u, u_x, u_t) acting elementwise; missing partials use central differences."""

    L: Callable
    dLdu: Optional[Callable] = None
    dLdux: Optional[Callable] = None
    dLdut: Optional[Callable] = None
    fd_step: float = 1e-6

    def __call__(self, u, ux, ut):
        return self.L(u, ux, ut)

    def partials(self, u, ux, ut):
        args = [np.asarray(a, dtype=float) for a in (u, ux, ut)]
        out = []
        for k, given in enumerate((self.dLdu, self.dLdux, self.dLdut)):
            if given is not None:
                out.append(np.broadcast_to(given(*args), np.broadcast_shapes(*(a.shape for a in args))))
                continue
            h = self.fd_step * (1.0 + np.abs(args[k]))
            up = list(args)
            dn = list(args)
            up[k] = args[k] + h
            dn[k] = args[k] - h
            out.append((self.L(*up) - self.L(*dn)) / (2 * h))
        return tuple(out)


def wave_density(c: float = 1.0) -> DensityLagrangian:
    """L = u_t^2 / 2 - c^2 u_x^2 / 2."""
    return DensityLagrangian(
        L=lambda u, ux, ut: 0.5 * ut**2 - 0.5 * c**2 * ux**2,
        dLdu=lambda u, ux, ut: np.zeros_like(u),
        dLdux=lambda u, ux, ut: -c**2 * ux,
        dLdut=lambda u, ux, ut: ut,
    )


def sine_gordon_density() -> DensityLagrangian:
    """L = u_t^2 / 2 - u_x^2 / 2 - (1 - cos u)."""
    return DensityLagrangian(
        L=lambda u, ux, ut: 0.5 * ut**2 - 0.5 * ux**2 - (1.0 - np.cos(u)),
        dLdu=lambda u, ux, ut: -np.sin(u),
        dLdux=lambda u, ux, ut: -ux,
        dLdut=lambda u, ux, ut: ut,
    )


@dataclass(frozen=True)
class CellQuadrature:
    """Tensor product of two Gauss-Legendre rules on [0, 1]."""

    xi: np.ndarray
    tau: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss(cls, n: int = 2) -> "CellQuadrature":
        if n < 1:
            raise ValueError("need at least one point per direction")
        g, w = np.polynomial.legendre.leggauss(n)
        g, w = 0.5 * (g + 1.0), 0.5 * w
        xi, tau = np.meshgrid(g, g, indexing="ij")
        return cls(xi.ravel(), tau.ravel(), np.outer(w, w).ravel())


GAUSS2 = CellQuadrature.gauss(2)


def _shape(xi, tau):
    """Bilinear shape functions and their unit-square derivatives, corner axis last."""
    xi, tau = np.asarray(xi, dtype=float), np.asarray(tau, dtype=float)
    phi = np.stack([(1 - xi) * (1 - tau), xi * (1 - tau), (1 - xi) * tau, xi * tau], axis=-1)
    dxi = np.stack([-(1 - tau), 1 - tau, -tau, tau], axis=-1)
    dtau = np.stack([-(1 - xi), -xi, 1 - xi, xi], axis=-1)
    return phi, dxi, dtau


def cell_interpolant(corners, xi, tau, dx: float, dt: float):
    """(u, u_x, u_t) of the bilinear interpolant at local (xi, tau)."""
    if np.any((np.asarray(xi) < 0) | (np.asarray(xi) > 1) | (np.asarray(tau) < 0) | (np.asarray(tau) > 1)):
        raise ValueError("local coordinates must lie in [0, 1]")
    c = np.asarray(corners, dtype=float)
    phi, dxi, dtau = _shape(xi, tau)
    return (np.sum(phi * c, axis=-1), np.sum(dxi * c, axis=-1) / dx, np.sum(dtau * c, axis=-1) / dt)


def _cell_samples(corners, dx, dt, quad):
    c = np.asarray(corners, dtype=float)[..., None, :]  # (..., 1, 4)
    phi, dxi, dtau = _shape(quad.xi, quad.tau)  # (nq, 4)
    u = np.sum(phi * c, axis=-1)
    ux = np.sum(dxi * c, axis=-1) / dx
    ut = np.sum(dtau * c, axis=-1) / dt
    return u, ux, ut, phi, dxi, dtau


def cell_discrete_lagrangian(density: DensityLagrangian, corners, dx: float, dt: float,
                             quad: CellQuadrature = GAUSS2):
    u, ux, ut, *_ = _cell_samples(corners, dx, dt, quad)
    return dx * dt * np.sum(quad.weights * density(u, ux, ut), axis=-1)


def cell_gradient(density: DensityLagrangian, corners, dx: float, dt: float,
                  quad: CellQuadrature = GAUSS2) -> np.ndarray:
    """Partials of the cell discrete Lagrangian with respect to its four corners."""
    u, ux, ut, phi, dxi, dtau = _cell_samples(corners, dx, dt, quad)
    Lu, Lx, Lt = density.partials(u, ux, ut)
    integrand = Lu[..., None] * phi + Lx[..., None] * dxi / dx + Lt[..., None] * dtau / dt
    return dx * dt * np.sum(quad.weights[:, None] * integrand, axis=-2)


# --- lattice assembly --------------------------------------------------------------

def _slab_corners(lower, upper, periodic: bool):
    """Corner arrays (cells, 4) of the row of cells between two levels."""
    lo, up = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    if periodic:
        lo_r, up_r = np.roll(lo, -1), np.roll(up, -1)
        return np.stack([lo, lo_r, up, up_r], axis=-1)
    return np.stack([lo[:-1], lo[1:], up[:-1], up[1:]], axis=-1)


def _level_values(q, mesh):
    """Independent nodes of a level (the wrap node is dropped on periodic meshes)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != mesh.M + 1:
        raise ValueError(f"levels need {mesh.M + 1} node values")
    return q[..., :-1] if mesh.periodic else q


def _with_wrap(q, mesh):
    return np.concatenate([q, q[..., :1]], axis=-1) if mesh.periodic else q


def level_residual(density: DensityLagrangian, q_prev, q_cur, q_next, mesh: SpaceTimeMesh,
                   quad: CellQuadrature = GAUSS2) -> np.ndarray:
    """Four-term DEL residual at every independent node of the middle level.

    On fixed meshes the two boundary entries are left at zero.
    """
    a, b, c = (_level_values(q, mesh) for q in (q_prev, q_cur, q_next))
    G_up = cell_gradient(density, _slab_corners(b, c, mesh.periodic), mesh.dx, mesh.dt, quad)
    G_lo = cell_gradient(density, _slab_corners(a, b, mesh.periodic), mesh.dx, mesh.dt, quad)
    if mesh.periodic:
        return G_up[:, 0] + np.roll(G_up[:, 1], 1) + G_lo[:, 2] + np.roll(G_lo[:, 3], 1)
    r = np.zeros(mesh.M + 1)
    r[1:-1] = G_up[1:, 0] + G_up[:-1, 1] + G_lo[1:, 2] + G_lo[:-1, 3]
    return r


def msdel_residual(density: DensityLagrangian, lattice, i: int, j: int, mesh: SpaceTimeMesh,
                   quad: CellQuadrature = GAUSS2) -> float:
    q = np.asarray(lattice, dtype=float)
    if not 1 <= j <= q.shape[0] - 2:
        raise ValueError("level j needs a level on each side")
    if mesh.periodic:
        i %= mesh.M
    elif not 1 <= i <= mesh.M - 1:
        raise ValueError("boundary nodes of a fixed mesh carry no equation")
    return float(level_residual(density, q[j - 1], q[j], q[j + 1], mesh, quad)[i])


def level_momentum(density: DensityLagrangian, q_lower, q_upper, mesh: SpaceTimeMesh,
                   quad: CellQuadrature = GAUSS2) -> np.ndarray:
    """Discrete conjugate momentum of the upper level: upper-corner partials of the slab."""
    G = cell_gradient(density, _slab_corners(_level_values(q_lower, mesh), _level_values(q_upper, mesh),
                                             mesh.periodic), mesh.dx, mesh.dt, quad)
    if mesh.periodic:
        return G[:, 2] + np.roll(G[:, 3], 1)
    p = np.zeros(mesh.M + 1)
    p[:-1] += G[:, 2]
    p[1:] += G[:, 3]
    return p


def _column_colors(n: int, periodic: bool) -> np.ndarray:
    """Columns sharing a colour never touch the same residual row (rows see k-1, k, k+1)."""
    colors = np.arange(n) % 3
    if periodic:
        m = n - n % 3
        colors[m:] = 3 + np.arange(n - m)
    return colors


def _banded_jacobian(residual, z, step, periodic):
    """Compressed finite differences for a (cyclic) tridiagonal Jacobian."""
    n = z.size
    colors = _column_colors(n, periodic)
    r0 = residual(z)
    J = np.zeros((r0.size, n))
    rows = np.arange(n)
    for c in np.unique(colors):
        cols = np.flatnonzero(colors == c)
        h = step * (1.0 + np.abs(z[cols]))
        dz = np.zeros(n)
        dz[cols] = h
        diff = residual(z + dz) - residual(z - dz)
        for k, hk in zip(cols, h):
            nbr = (k + np.array([-1, 0, 1])) % n if periodic else k + np.array([-1, 0, 1])
            nbr = nbr[(nbr >= 0) & (nbr < n)]
            J[nbr, k] = diff[nbr] / (2 * hk)
    return J


class MarchFailure(SolverError):
    def __init__(self, level: int, node: int, residual: float):
        super().__init__(f"level {level}: Newton failed, worst residual {residual:.3e} at node {node}")
        self.level, self.node, self.residual = level, node, residual


def time_march(density: DensityLagrangian, q_prev, q_cur, mesh: SpaceTimeMesh,
               guess=None, boundary_values=None, solver: SolverConfig = SolverConfig(),
               quad: CellQuadrature = GAUSS2, level: int = 0) -> np.ndarray:
    """Next level from the two previous ones, solved for the whole level at once.

    On fixed meshes the end values come from ``boundary_values`` (default:
    those of the current level).
    """
    q_prev, q_cur = np.asarray(q_prev, dtype=float), np.asarray(q_cur, dtype=float)
    if guess is None:
        guess = 2 * q_cur - q_prev
    guess = np.asarray(guess, dtype=float)
    if mesh.periodic:
        def full(z):
            return _with_wrap(z, mesh)
        z0 = guess[:-1]
    else:
        ends = q_cur[[0, -1]] if boundary_values is None else np.asarray(boundary_values, dtype=float)

        def full(z):
            return np.concatenate([[ends[0]], z, [ends[1]]])
        z0 = guess[1:-1]

    def residual(z):
        r = level_residual(density, q_prev, q_cur, full(z), mesh, quad)
        return r if mesh.periodic else r[1:-1]

    last = [z0]

    def track(x, rnorm):
        last[0] = x

    try:
        if z0.size >= 6:
            def jac(z):
                return _banded_jacobian(residual, z, solver.fd_step, mesh.periodic)
        else:
            jac = None
        z = newton_solve(residual, z0, solver, jacobian=jac, callback=track)
    except SolverError as exc:
        r = np.abs(residual(last[0]))
        node = int(np.argmax(r)) + (0 if mesh.periodic else 1)
        raise MarchFailure(level, node, float(r.max())) from exc
    return full(z)


def level_jacobian(density: DensityLagrangian, q_prev, q_cur, q_next, mesh: SpaceTimeMesh,
                   wrt: Literal["prev", "cur", "next"] = "next", step: float = 1e-6,
                   quad: CellQuadrature = GAUSS2) -> np.ndarray:
    """Finite-difference Jacobian of ``level_residual`` with respect to one level's independent nodes."""
    levels = {"prev": 0, "cur": 1, "next": 2}
    k = levels[wrt]
    qs = [_level_values(q, mesh).copy() for q in (q_prev, q_cur, q_next)]

    def f(z):
        args = list(qs)
        args[k] = z
        return level_residual(density, *(_with_wrap(a, mesh) for a in args), mesh, quad)

    return fd_jacobian(f, qs[k], step)


# --- runs and energy ---------------------------------------------------------------

@dataclass
class FieldLattice:
    mesh: SpaceTimeMesh
    q: np.ndarray  # (levels, M + 1)

    @property
    def t(self) -> np.ndarray:
        return self.mesh.dt * np.arange(self.q.shape[0])


def march(density: DensityLagrangian, mesh: SpaceTimeMesh, q0, q1, nsteps: Optional[int] = None,
          solver: SolverConfig = SolverConfig(), quad: CellQuadrature = GAUSS2) -> FieldLattice:
    """Fill levels 2 ... N from the two seed levels."""
    nsteps = mesh.N - 1 if nsteps is None else nsteps
    q = [np.asarray(q0, dtype=float), np.asarray(q1, dtype=float)]
    for j in range(1, nsteps + 1):
        q.append(time_march(density, q[-2], q[-1], mesh, solver=solver, quad=quad, level=j + 1))
    return FieldLattice(mesh, np.array(q))


def quadratic_level_matrices(density: DensityLagrangian, mesh: SpaceTimeMesh,
                             quad: CellQuadrature = GAUSS2) -> tuple[np.ndarray, np.ndarray]:
    """(C, D) with residual = C q^{j+1} + D q^j + C q^{j-1} for a homogeneous quadratic density.

    Columns are probed with unit vectors, which is exact for such densities.
    """
    n = mesh.M if mesh.periodic else mesh.M + 1
    zero = np.zeros(mesh.M + 1)
    C = np.zeros((n, n))
    D = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        ew = _with_wrap(e, mesh)
        C[:, k] = level_residual(density, zero, zero, ew, mesh, quad)
        D[:, k] = level_residual(density, zero, ew, zero, mesh, quad)
    return C, D


def discrete_energy(C: np.ndarray, D: np.ndarray, q_lower, q_upper, dt: float, mesh: SpaceTimeMesh) -> float:
    """Invariant of C q^{j+1} + D q^j + C q^{j-1} = 0 (C, D symmetric), scaled to an energy.

    E = -[(b - a)^T C (b - a) + a^T (2C + D) b] / (2 dt); for the wave density
    this is the tent-mass kinetic term in (b - a)/dt plus the stiffness term
    coupling the two levels. Fixed meshes are assumed to hold zero end values.
    """
    a, b = _level_values(q_lower, mesh), _level_values(q_upper, mesh)
    if not mesh.periodic:
        a, b = a[1:-1], b[1:-1]
        C, D = C[1:-1, 1:-1], D[1:-1, 1:-1]
    d = b - a
    return float(-(d @ C @ d + a @ (2 * C + D) @ b) / (2 * dt))
