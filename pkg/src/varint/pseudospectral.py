"""Pseudospectral variational integrator for the periodic 1D Schrodinger equation.

The wavefunction on [0, 2pi] is interpolated by

    psi(x, (l + tau) dt) = (1/2pi) sum'_k e^{ikx} ((1 - tau) v_k^l + tau v_k^{l+1}),

k = -N/2 ... N/2, where the primed sum halves the two end modes and
v_{-N/2} is identified with v_{N/2}. The action of this interpolant is a
quadratic form in the coefficients that can be evaluated exactly, so the
integrator is assembled from three Hermitian matrices on the full index set:

    M = diag(w_k^2)                       (the double-primed weights)
    K = diag(w_k^2 k^2)
    P[n, m] = w_n w_m w_{n-m} V_{n-m}     (|n - m| <= N/2)

with w_k = 1 except w_{+-N/2} = 1/2. Solvers work on the N reduced
coefficients k = -N/2+1 ... N/2; the identification is built in.

Coefficient conventions: ``dft_forward`` uses the 1/N scaling of the plain
DFT, while the interpolant carries a 1/2pi prefactor, so interpolant
coefficients of grid samples are 2pi times their DFT (``state_from_samples``).
``PotentialSpectrum`` keeps the DFT values and the scheme uses 2pi times
those as expansion coefficients of V.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional

import numpy as np
from scipy import linalg

from .numcore import SolverConfig, SolverError, newton_solve

TWO_PI = 2.0 * np.pi
DIRECT_DFT_MAX = 64
NORM_PRECONDITION = 1e-8


@dataclass(frozen=True)
class SpectralGrid:
    N: int

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise ValueError("N must be an even integer >= 4")

    @property
    def hx(self) -> float:
        return TWO_PI / self.N

    @property
    def x(self) -> np.ndarray:
        # x_N = 2pi is identified with x = 0
        return self.hx * np.arange(1, self.N + 1)

    @property
    def k(self) -> np.ndarray:
        """Full mode range -N/2 ... N/2."""
        return np.arange(-self.N // 2, self.N // 2 + 1)

    @property
    def k_reduced(self) -> np.ndarray:
        return np.arange(-self.N // 2 + 1, self.N // 2 + 1)

    @cached_property
    def prime_weights(self) -> np.ndarray:
        w = np.ones(self.N + 1)
        w[0] = w[-1] = 0.5
        return w

    @cached_property
    def embed(self) -> np.ndarray:
        """E with full = E @ reduced (v_{-N/2} copies v_{N/2})."""
        E = np.zeros((self.N + 1, self.N))
        E[1:, :] = np.eye(self.N)
        E[0, -1] = 1.0
        return E

    def full(self, reduced) -> np.ndarray:
        r = np.asarray(reduced)
        return np.concatenate([r[..., -1:], r], axis=-1)

    @staticmethod
    def reduce(full) -> np.ndarray:
        return np.asarray(full)[..., 1:]


@dataclass(frozen=True)
class SpectralState:
    """Coefficients v_k for k = -N/2 ... N/2 (length N + 1)."""

    coef: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=complex)
        if c.ndim != 1 or c.size < 5 or c.size % 2 == 0:
            raise ValueError("need N + 1 coefficients with N even and >= 4")
        object.__setattr__(self, "coef", c)

    @property
    def N(self) -> int:
        return self.coef.size - 1

    @classmethod
    def from_reduced(cls, reduced) -> "SpectralState":
        r = np.asarray(reduced, dtype=complex)
        return cls(np.concatenate([r[-1:], r]))

    @classmethod
    def mode(cls, N: int, k: int, amplitude: complex = np.sqrt(TWO_PI)) -> "SpectralState":
        """Single Fourier mode; the default amplitude has unit norm for interior k."""
        c = np.zeros(N + 1, dtype=complex)
        c[k + N // 2] = amplitude
        if abs(k) == N // 2:
            c[0] = c[-1] = amplitude
        return cls(c)

    def conj(self) -> "SpectralState":
        return SpectralState(self.coef.conj())


def _coef(state) -> np.ndarray:
    return state.coef if isinstance(state, SpectralState) else np.asarray(state, dtype=complex)


@dataclass(frozen=True)
class PotentialSpectrum:
    """DFT values of V on the grid; V(x) = (1/2pi) sum' e^{ikx} (2pi coef_k)."""

    coef: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=complex))

    @property
    def expansion(self) -> np.ndarray:
        return TWO_PI * self.coef

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        c = self.coef
        return bool(np.allclose(c, c[::-1].conj(), rtol=0.0, atol=tol * max(1.0, np.max(np.abs(c)))))

    @classmethod
    def zero(cls, N: int) -> "PotentialSpectrum":
        return cls(np.zeros(N + 1, dtype=complex))


# --- transforms and sums -----------------------------------------------------------

def dft_forward(samples) -> SpectralState:
    """v_k = (1/N) sum_j e^{-ikx_j} v_j on x_j = 2pi j / N, j = 1..N."""
    v = np.asarray(samples, dtype=complex)
    N = v.size
    grid = SpectralGrid(N)
    kr = grid.k_reduced
    if N <= DIRECT_DFT_MAX:
        red = np.exp(-1j * np.outer(kr, grid.x)) @ v / N
    else:
        # samples sit at x_1..x_N; rolling puts x_N = 2pi (= 0) first
        red = np.fft.fft(np.roll(v, 1))[kr % N] / N
    return SpectralState.from_reduced(red)


def state_from_samples(samples) -> SpectralState:
    """Interpolant coefficients reproducing the samples at the grid points."""
    return SpectralState(TWO_PI * dft_forward(samples).coef)


def potential_spectrum(samples) -> PotentialSpectrum:
    V = np.asarray(samples)
    if np.iscomplexobj(V):
        if np.max(np.abs(V.imag)) > 1e-14 * max(1.0, np.max(np.abs(V))):
            raise ValueError("potential samples must be real")
        V = V.real
    c = dft_forward(V.astype(float)).coef
    return PotentialSpectrum(0.5 * (c + c[::-1].conj()))


def weighted_sum(terms, mode: Literal["prime", "double_prime"] = "prime"):
    t = np.asarray(terms)
    w = np.ones(t.shape[-1])
    end = {"prime": 0.5, "double_prime": 0.25}[mode]
    w[0] = w[-1] = end
    return np.sum(t * w, axis=-1)


def norm(state) -> float:
    c = _coef(state)
    return float(weighted_sum(np.abs(c) ** 2, "double_prime") / TWO_PI)


def eval_interpolant(state_l, state_l1, tau: float, x):
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    a, b = _coef(state_l), _coef(state_l1)
    N = a.size - 1
    k = np.arange(-N // 2, N // 2 + 1)
    xs = np.asarray(x, dtype=float)
    phase = np.exp(1j * xs[..., None] * k)
    return weighted_sum(phase * ((1.0 - tau) * a + tau * b), "prime") / TWO_PI


def eval_potential(spec: PotentialSpectrum, x):
    c = spec.expansion
    N = c.size - 1
    k = np.arange(-N // 2, N // 2 + 1)
    xs = np.asarray(x, dtype=float)
    return weighted_sum(np.exp(1j * xs[..., None] * k) * c, "prime") / TWO_PI


# --- scheme and assembled matrices -------------------------------------------------

@dataclass(frozen=True)
class TdseScheme:
    """Linear-in-time, Fourier-in-space discretization of i hbar psi_t = H psi.

    ``coefficients="rederived"`` uses the exactly integrated action with
    H = -(hbar^2 / 2m) d^2/dx^2 + V. ``"printed"`` reproduces the constants
    as typeset in the source text (kinetic and potential both scaled by
    dt / 24 pi^2, end-mode rows not summed); it is kept for regression only.
    The default mass 1/2 makes hbar^2 / 2m = hbar^2, where both readings
    share the kinetic eigenvalues.
    """

    grid: SpectralGrid
    dt: float
    hbar: float = 1.0
    potential: Optional[PotentialSpectrum] = None
    solver: SolverConfig = SolverConfig(tol=1e-12)
    coefficients: Literal["rederived", "printed"] = "rederived"
    mass: float = 0.5
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.hbar > 0 or not self.mass > 0:
            raise ValueError("hbar and mass must be positive")
        if self.coefficients not in ("rederived", "printed"):
            raise ValueError("coefficients must be 'rederived' or 'printed'")
        pot = self.potential or PotentialSpectrum.zero(self.grid.N)
        if pot.coef.size != self.grid.N + 1:
            raise ValueError("potential spectrum size does not match the grid")
        if not pot.is_hermitian():
            raise ValueError("potential spectrum is not Hermitian (V must be real)")
        object.__setattr__(self, "potential", pot)

    @property
    def printed(self) -> bool:
        return self.coefficients == "printed"

    @cached_property
    def mass_full(self) -> np.ndarray:
        return np.diag(self.grid.prime_weights ** 2)

    @cached_property
    def potential_full(self) -> np.ndarray:
        """P[n, m] = w_n w_m (w_{n-m}) V_{n-m}; the printed form omits w_{n-m}."""
        N = self.grid.N
        w = self.grid.prime_weights
        c = self.potential.expansion
        k = self.grid.k
        d = k[:, None] - k[None, :]
        inside = np.abs(d) <= N // 2
        idx = np.clip(d + N // 2, 0, N)
        P = np.where(inside, c[idx], 0.0) * np.outer(w, w)
        if not self.printed:
            P = P * np.where(inside, w[idx], 0.0)
        return P

    @cached_property
    def hamiltonian_full(self) -> np.ndarray:
        """T with (time-independent) action -dt * u^H T u per unit slab."""
        K = np.diag(self.grid.prime_weights ** 2 * self.grid.k ** 2)
        if self.printed:
            return (self.hbar ** 2 * K + self.potential_full) / TWO_PI ** 2
        return (self.hbar ** 2 / (2 * self.mass)) * K / TWO_PI + self.potential_full / TWO_PI ** 2

    @cached_property
    def row_operator(self) -> np.ndarray:
        """Maps full-index variations to the N equations of the stepper.

        Variationally the two identified end modes contribute one summed
        equation; the printed system keeps only the +N/2 row.
        """
        if self.printed:
            return np.eye(self.grid.N + 1)[1:]
        return self.grid.embed.T

    @cached_property
    def mass_reduced(self) -> np.ndarray:
        E = self.grid.embed
        return E.T @ self.mass_full @ E

    @cached_property
    def hamiltonian_reduced(self) -> np.ndarray:
        E = self.grid.embed
        return E.T @ self.hamiltonian_full @ E

    @cached_property
    def multiplier_matrix(self) -> np.ndarray:
        """Coefficient of -(lambda / 2pi) v^l in the reduced equations."""
        if self.printed:
            return np.eye(self.grid.N)
        return self.mass_reduced


# --- action and residual -----------------------------------------------------------

def discrete_action(scheme: TdseScheme, v_l, v_l1) -> float:
    """Exact action of the interpolant over one slab (without the multiplier term)."""
    a, b = _coef(v_l), _coef(v_l1)
    M, T = scheme.mass_full, scheme.hamiltonian_full
    h = scheme.hbar
    kinetic = (1j * h / (2 * TWO_PI)) * (a.conj() @ M @ b - b.conj() @ M @ a)
    energy = (scheme.dt / 6.0) * (2 * a.conj() @ T @ a + a.conj() @ T @ b
                                  + b.conj() @ T @ a + 2 * b.conj() @ T @ b)
    S = kinetic - energy
    return float(S.real)


def _full_variation(scheme, vm, v, vp, conjugate=False):
    """d/d(conj v^l) of the two slab actions meeting at level l, full index."""
    M = scheme.mass_full
    T = scheme.hamiltonian_full.T if conjugate else scheme.hamiltonian_full
    sign = -1.0 if conjugate else 1.0
    c = 1j * scheme.hbar / (2 * TWO_PI)
    return sign * c * (M @ (vp - vm)) - (scheme.dt / 6.0) * (T @ (vm + 4 * v + vp))


def _mode_equations(scheme, vm, v, vp, lam, conjugate=False):
    rows = scheme.row_operator @ _full_variation(scheme, vm, v, vp, conjugate)
    return rows - (lam / TWO_PI) * (scheme.multiplier_matrix @ SpectralGrid.reduce(v))


def residual_blocks(N: int) -> dict:
    """Slices of the ``tdse_residual`` vector."""
    out, start = {}, 0
    for name, n in [("re_v", N), ("im_v", N), ("re_vbar", N), ("im_vbar", N),
                    ("norm", 1), ("id_v", 2), ("id_vbar", 2)]:
        out[name] = slice(start, start + n)
        start += n
    return out


def tdse_residual(scheme: TdseScheme, v_prev, v_cur, v_next, lam: float) -> np.ndarray:
    """All 2N + 3 equations of one step as a real vector (layout: ``residual_blocks``).

    The normalization row constrains the new level v^{l+1}.
    """
    vm, v, vp = (_coef(s) for s in (v_prev, v_cur, v_next))
    eq = _mode_equations(scheme, vm, v, vp, lam)
    eqb = _mode_equations(scheme, vm.conj(), v.conj(), vp.conj(), lam, conjugate=True)
    ident = vp[0] - vp[-1]
    identb = vp[0].conj() - vp[-1].conj()
    return np.concatenate([eq.real, eq.imag, eqb.real, eqb.imag, [1.0 - norm(vp)],
                           [ident.real, ident.imag, identb.real, identb.imag]])


# --- stepping ----------------------------------------------------------------------

def tdse_step(scheme: TdseScheme, v_prev, v_cur, lam_guess: float = 0.0,
              conjugate: bool = False) -> tuple[SpectralState, float]:
    """Solve for (v^{l+1}, lambda_l) from the two previous levels.

    ``conjugate=True`` solves the conjugate equations instead, treating the
    inputs as the conjugated coefficients.
    """
    vm, v = _coef(v_prev), _coef(v_cur)
    if abs(norm(v) - 1.0) > NORM_PRECONDITION:
        raise ValueError(f"current level is not normalized (norm = {norm(v):.3e})")
    N = scheme.grid.N
    c = 1j * scheme.hbar / (2 * TWO_PI) * (-1.0 if conjugate else 1.0)
    T = scheme.hamiltonian_full.T if conjugate else scheme.hamiltonian_full
    R, E = scheme.row_operator, scheme.grid.embed
    A = R @ (c * scheme.mass_full - (scheme.dt / 6.0) * T) @ E
    base = _mode_equations(scheme, vm, v, np.zeros_like(v), 0.0, conjugate)
    lam_dir = -(scheme.multiplier_matrix @ SpectralGrid.reduce(v)) / TWO_PI
    Mr = scheme.mass_reduced

    def split(x):
        return x[:N] + 1j * x[N:2 * N], x[-1]

    def residual(x):
        r, lam = split(x)
        eq = A @ r + base + lam * lam_dir
        return np.concatenate([eq.real, eq.imag, [1.0 - np.real(r.conj() @ Mr @ r) / TWO_PI]])

    def jacobian(x):
        r, _ = split(x)
        J = np.zeros((2 * N + 1, 2 * N + 1))
        J[:N, :N], J[N:2 * N, :N] = A.real, A.imag
        J[:N, N:2 * N], J[N:2 * N, N:2 * N] = -A.imag, A.real
        J[:N, -1], J[N:2 * N, -1] = lam_dir.real, lam_dir.imag
        g = -(Mr @ r) / np.pi
        J[-1, :N], J[-1, N:2 * N] = g.real, g.imag
        return J

    r0 = SpectralGrid.reduce(2 * v - vm)
    x0 = np.concatenate([r0.real, r0.imag, [lam_guess]])
    x = newton_solve(residual, x0, scheme.solver, jacobian=jacobian)
    r, lam = split(x)
    return SpectralState.from_reduced(r), float(lam)


def _eigenbasis(scheme: TdseScheme):
    """Generalized eigenpairs T u = mu M u on the reduced coefficients (U^H M U = I)."""
    key = "eig"
    if key not in scheme._cache:
        T, M = scheme.hamiltonian_reduced, scheme.mass_reduced
        if scheme.printed:
            mu, U = linalg.eig(T, M)
            U = U / np.sqrt(np.real(np.einsum("ij,ik,kj->j", U.conj(), M, U)))
        else:
            mu, U = linalg.eigh(T, M)
        scheme._cache[key] = (np.real(mu), U)
    return scheme._cache[key]


def principal_factors(scheme: TdseScheme, mu) -> np.ndarray:
    """Principal roots z of (a z^2 + b z + conj(a)) for each eigenvalue mu of (T, M).

    For a single generalized eigenmode the three-level recurrence with
    lambda = 0 is a z^2 + b z + conj(a) = 0 with a = i hbar/4pi - dt mu/6,
    b = -2 dt mu/3. Both roots are unimodular when |2 pi dt mu / hbar| < sqrt(3);
    the principal one tends to exp(-2 pi i mu dt / hbar).
    """
    mu = np.asarray(mu, dtype=float)
    a = 1j * scheme.hbar / (2 * TWO_PI) - scheme.dt * mu / 6.0
    b = -2.0 * scheme.dt * mu / 3.0
    disc = 4 * np.abs(a) ** 2 - b ** 2
    if np.any(disc <= 0):
        raise ValueError("time step beyond the stability limit |2 pi dt mu / hbar| < sqrt(3)")
    s = np.sqrt(disc)
    z1, z2 = (-b + 1j * s) / (2 * a), (-b - 1j * s) / (2 * a)
    return np.where(np.abs(np.angle(z1)) <= np.abs(np.angle(z2)), z1, z2)


def tdse_start(scheme: TdseScheme, v0) -> SpectralState:
    """Second level from the first.

    Each generalized eigenmode is advanced by the scheme's own principal
    root, so the parasitic branch of the three-level recurrence is not
    excited and the multiplier stays at zero. Generic one-step starters
    (Crank-Nicolson, say) excite that branch at O(dt^3), after which the
    normalization row can lose its real solution in lambda.
    """
    r = SpectralGrid.reduce(_coef(v0))
    mu, U = _eigenbasis(scheme)
    coords = linalg.solve(U, r)
    out = SpectralState.from_reduced(U @ (principal_factors(scheme, mu) * coords))
    return SpectralState(out.coef / np.sqrt(norm(out)))


@dataclass
class TdseTrajectory:
    times: np.ndarray
    states: np.ndarray  # (levels, N + 1)
    multipliers: np.ndarray
    norms: np.ndarray


def tdse_integrate(scheme: TdseScheme, v0, nsteps: int, v1=None) -> TdseTrajectory:
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    v0 = SpectralState(_coef(v0))
    v1 = tdse_start(scheme, v0) if v1 is None else SpectralState(_coef(v1))
    states = [v0.coef, v1.coef]
    lams = []
    lam = 0.0
    for _ in range(nsteps - 1):
        nxt, lam = tdse_step(scheme, states[-2], states[-1], lam)
        states.append(nxt.coef)
        lams.append(lam)
    S = np.array(states)
    return TdseTrajectory(scheme.dt * np.arange(len(S)), S, np.array(lams),
                          np.array([norm(s) for s in S]))


# --- time-independent problem ------------------------------------------------------

def tise_matrices(scheme: TdseScheme) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) with A v = -lambda B v on the reduced coefficients.

    In the re-derived form A = 2pi T and B = M (both Hermitian for real V).
    The printed form is the literal row system with B = I.
    """
    if not scheme.printed:
        return TWO_PI * scheme.hamiltonian_reduced, scheme.mass_reduced
    N = scheme.grid.N
    w = scheme.grid.prime_weights
    k = scheme.grid.k
    c = scheme.potential.expansion
    rows = np.zeros((N, N + 1), dtype=complex)
    for i, j in enumerate(k[1:]):
        lo, hi = max(-N // 2, j - N // 2), min(N // 2, j + N // 2)
        for n in range(lo, hi + 1):
            rows[i, n + N // 2] += w[n + N // 2] * c[j - n + N // 2]
        rows[i, j + N // 2] += scheme.hbar ** 2 * j ** 2 * (0.5 if j == N // 2 else 1.0)
    return rows @ scheme.grid.embed, np.eye(N)


def tise_solve(scheme: TdseScheme) -> list[tuple[float, SpectralState]]:
    """Eigenpairs sorted by lambda, each eigenvector scaled to unit norm."""
    A, B = tise_matrices(scheme)
    try:
        if scheme.printed:
            mu, U = linalg.eig(A, B)
        else:
            mu, U = linalg.eigh(A, B)
    except linalg.LinAlgError as exc:
        raise SolverError("eigen-solver failed") from exc
    lam = -np.real(mu)
    out = []
    for i in np.argsort(lam):
        s = SpectralState.from_reduced(U[:, i])
        out.append((float(lam[i]), SpectralState(s.coef / np.sqrt(norm(s)))))
    return out
