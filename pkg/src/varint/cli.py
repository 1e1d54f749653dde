"""Command-line harness: ``varint run``, ``varint filon-weights``, ``varint diagnose``.

A run is described by one JSON object::

    {"integrator": "galerkin",
     "model": {"id": "harmonic_oscillator", "stiffness": 1.0},
     "scheme": {"s": 2, "quad_points": 3, "h": 0.1, "steps": 100},
     "initial": {"q0": [1.0], "v0": [0.0]},
     "output": {"trajectory": "traj.csv", "diagnostics": "diag.json"},
     "seed": 0}

The keys accepted by each integrator are listed in ``INTEGRATORS`` below and in the
README. Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 I/O error; failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy.linalg import expm

from . import __version__
from .numcore import SolverConfig, SolverError, lobatto_rule

log = logging.getLogger("varint")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


# --- configuration -----------------------------------------------------------------

@dataclass
class RunConfig:
    integrator: str
    model: dict = field(default_factory=dict)
    scheme: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: Any) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"integrator", "model", "scheme", "initial", "output", "seed"}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown top-level key")
        if "integrator" not in raw:
            raise ConfigError("integrator", "missing")
        integ = raw["integrator"]
        if integ not in INTEGRATORS:
            raise ConfigError("integrator", f"unknown integrator {integ!r}; choose from {sorted(INTEGRATORS)}")
        for key in ("model", "scheme", "initial", "output"):
            if not isinstance(raw.get(key, {}), dict):
                raise ConfigError(key, "must be an object")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        cfg = cls(integ, dict(raw.get("model", {})), dict(raw.get("scheme", {})),
                  dict(raw.get("initial", {})), dict(raw.get("output", {})), seed)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self):
        entry = INTEGRATORS[self.integrator]
        for section in ("model", "scheme", "initial"):
            allowed = entry[section]
            for key in getattr(self, section):
                if key not in allowed:
                    raise ConfigError(f"{section}.{key}", f"not accepted by integrator {self.integrator!r}")
        for key in self.output:
            if key not in ("trajectory", "diagnostics"):
                raise ConfigError(f"output.{key}", "expected 'trajectory' or 'diagnostics'")
            if not isinstance(self.output[key], str):
                raise ConfigError(f"output.{key}", "must be a path string")


def _get(section: dict, name: str, key: str, default=None, kind: type = float,
         check: Optional[Callable] = None, why: str = "out of range"):
    if key not in section:
        if default is None:
            raise ConfigError(f"{name}.{key}", "missing")
        return default
    val = section[key]
    try:
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
        elif kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise TypeError
            val = int(val)
        elif kind is float:
            if isinstance(val, bool):
                raise TypeError
            val = float(val)
        elif kind is list:
            val = [float(v) for v in np.atleast_1d(val)]
        elif kind is str:
            if not isinstance(val, str):
                raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f"{name}.{key}", f"expected {kind.__name__}") from None
    if check is not None and not check(val):
        raise ConfigError(f"{name}.{key}", why)
    return val


def _positive(x):
    return x > 0


# --- integrator runners ------------------------------------------------------------

@dataclass
class RunResult:
    header: list
    table: np.ndarray
    extra: dict = field(default_factory=dict)
    iterations: Optional[int] = None


def _mechanics_model(cfg: RunConfig):
    from .models import MODELS

    mid = _get(cfg.model, "model", "id", kind=str)
    if mid not in MODELS:
        raise ConfigError("model.id", f"unknown model {mid!r}; choose from {sorted(MODELS)}")
    factory = MODELS[mid]
    params = {k: v for k, v in cfg.model.items() if k != "id"}
    sig = inspect.signature(factory)
    for key in params:
        if key not in sig.parameters:
            raise ConfigError(f"model.{key}", f"not a parameter of {mid}")
    try:
        return factory(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError("model", str(exc)) from exc


def _initial_pair(cfg: RunConfig, system, h, scheme):
    """(q0, q1) from either explicit q1 or an initial velocity."""
    from . import galerkin as gk

    q0 = np.array(_get(cfg.initial, "initial", "q0", kind=list))
    if q0.size != system.dim:
        raise ConfigError("initial.q0", f"expected {system.dim} components")
    if "q1" in cfg.initial:
        q1 = np.array(_get(cfg.initial, "initial", "q1", kind=list))
    else:
        v0 = np.array(_get(cfg.initial, "initial", "v0", kind=list))
        if v0.size != system.dim:
            raise ConfigError("initial.v0", f"expected {system.dim} components")
        _, p0 = system.partials(q0, v0)
        seg, _ = gk.step_qp(scheme, q0, p0, h)
        q1 = seg.q[-1].copy()
    if q1.size != system.dim:
        raise ConfigError("initial.q1", f"expected {system.dim} components")
    return q0, q1


def _solver(cfg: RunConfig) -> SolverConfig:
    tol = _get(cfg.scheme, "scheme", "tol", 1e-11, float, _positive, "must be positive")
    it = _get(cfg.scheme, "scheme", "max_iter", 50, int, _positive, "must be positive")
    return SolverConfig(tol=tol, max_iter=it)


def run_galerkin(cfg: RunConfig, rng) -> RunResult:
    from . import galerkin as gk

    system = _mechanics_model(cfg)
    s = _get(cfg.scheme, "scheme", "s", 2, int, lambda v: 1 <= v <= 12, "need 1 <= s <= 12")
    npts = _get(cfg.scheme, "scheme", "quad_points", s + 1, int, lambda v: v >= 2, "need >= 2 points")
    h = _get(cfg.scheme, "scheme", "h", kind=float, check=_positive, why="must be positive")
    steps = _get(cfg.scheme, "scheme", "steps", kind=int, check=_positive, why="must be positive")
    scheme = gk.GalerkinScheme.lobatto(system, s, npts, _solver(cfg))
    q0, q1 = _initial_pair(cfg, system, h, scheme)
    tr = gk.integrate(scheme, q0, q1, h, steps)
    d = system.dim
    header = ["t"] + [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)] + ["energy"]
    table = np.column_stack([tr.times, tr.states, tr.momenta, tr.energies])
    return RunResult(header, table, iterations=int(sum(tr.iterations)) if tr.iterations else None)


def run_sem(cfg: RunConfig, rng) -> RunResult:
    from . import galerkin as gk
    from .sem import SemScheme, sem_integrate

    system = _mechanics_model(cfg)
    order2 = _get(cfg.scheme, "scheme", "order2", True, bool)
    s = _get(cfg.scheme, "scheme", "s", 2, int, lambda v: 1 <= v <= 8, "need 1 <= s <= 8")
    h = _get(cfg.scheme, "scheme", "h", kind=float, check=_positive, why="must be positive")
    steps = _get(cfg.scheme, "scheme", "steps", kind=int, check=_positive, why="must be positive")
    h_min = _get(cfg.scheme, "scheme", "h_min", h / 10, float, _positive, "must be positive")
    h_max = _get(cfg.scheme, "scheme", "h_max", 3 * h, float, lambda v: v > h_min, "must exceed h_min")
    try:
        scheme = SemScheme(system, order2, s, _solver(cfg), h_min, h_max)
    except ValueError as exc:
        raise ConfigError("scheme", str(exc)) from exc
    q0, q1 = _initial_pair(cfg, system, h, scheme.galerkin)
    tr = sem_integrate(scheme, q0, q1, h, steps)
    d = system.dim
    steps_col = np.concatenate([tr.steps, [np.nan]])
    energy = np.concatenate([[tr.energies[0]], tr.energies])
    header = ["t"] + [f"q{i}" for i in range(d)] + ["h", "energy"]
    table = np.column_stack([tr.times, tr.states, steps_col, energy])
    return RunResult(header, table, {"fallback_steps": int(np.sum(tr.fallback))})


def _rigid_body_scheme(cfg: RunConfig):
    from . import liegroup as lg

    mid = _get(cfg.model, "model", "id", kind=str)
    if mid != "rigid_body":
        raise ConfigError("model.id", "group integrators support 'rigid_body' only")
    inertia = np.array(_get(cfg.model, "model", "inertia", [1.0, 2.0, 3.0], list,
                            lambda v: len(v) == 3 and min(v) > 0, "need three positive moments"))
    s = _get(cfg.scheme, "scheme", "s", 2, int, lambda v: 1 <= v <= 8, "need 1 <= s <= 8")
    npts = _get(cfg.scheme, "scheme", "quad_points", s + 1, int, lambda v: v >= 2, "need >= 2 points")
    lag, dlag = lg.rigid_body(inertia)
    grp = lg.so3()
    scheme = lg.LieGalerkinScheme.lobatto(grp, lag, s, npts, solver=_solver(cfg), invariant=True, dlag_deta=dlag)
    h = _get(cfg.scheme, "scheme", "h", kind=float, check=_positive, why="must be positive")
    steps = _get(cfg.scheme, "scheme", "steps", kind=int, check=_positive, why="must be positive")
    omega = np.array(_get(cfg.initial, "initial", "omega", kind=list, check=lambda v: len(v) == 3,
                          why="need three components"))
    return grp, scheme, inertia, h, steps, omega


def run_liegroup(cfg: RunConfig, rng) -> RunResult:
    from . import liegroup as lg

    grp, scheme, inertia, h, steps, omega = _rigid_body_scheme(cfg)
    g0 = np.eye(3)
    g1 = g0 @ expm(h * grp.hat(omega))
    tr = lg.lie_integrate(scheme, g0, g1, h, steps)
    energy = 0.5 * np.sum(tr.body_momenta ** 2 / inertia, axis=1)
    header = ["t"] + [f"g{i}{j}" for i in range(3) for j in range(3)] + ["energy", "momentum_x", "momentum_y",
                                                                         "momentum_z"]
    table = np.column_stack([tr.times, tr.states.reshape(len(tr.times), 9), energy, tr.spatial_momenta])
    defect = max(np.linalg.norm(g.T @ g - np.eye(3)) for g in tr.states)
    return RunResult(header, table, {"orthogonality_defect": float(defect)})


def run_dep(cfg: RunConfig, rng) -> RunResult:
    from . import liegroup as lg

    grp, scheme, inertia, h, steps, omega = _rigid_body_scheme(cfg)
    fs = lg.dep_integrate(scheme, expm(h * grp.hat(omega)), h, steps)
    gs = lg.reconstruct(np.eye(3), fs)
    # discrete body velocity log(f_k) / h on each step
    xi = np.array([grp.logv(f) / h for f in fs])
    energy = np.concatenate([0.5 * np.sum(inertia * xi ** 2, axis=1), [np.nan]])
    t = h * np.arange(len(gs))
    header = ["t"] + [f"g{i}{j}" for i in range(3) for j in range(3)] + ["energy"]
    return RunResult(header, np.column_stack([t, gs.reshape(len(t), 9), energy]))


def run_multiscale(cfg: RunConfig, rng) -> RunResult:
    from . import multiscale as ms

    mid = _get(cfg.model, "model", "id", kind=str)
    if mid != "stiff_pendulum":
        raise ConfigError("model.id", "the multiscale integrator supports 'stiff_pendulum' only")
    params = {k: _get(cfg.model, "model", k, d, float, _positive, "must be positive")
              for k, d in (("m", 1.0), ("g", 9.81), ("k", 1e4), ("l", 1.0))}
    sysm = ms.StiffPendulum(**params)
    t_end = _get(cfg.scheme, "scheme", "t_end", kind=float, check=_positive, why="must be positive")
    pps = _get(cfg.scheme, "scheme", "periods_per_step", 20.25, float, _positive, "must be positive")
    npts = _get(cfg.scheme, "scheme", "npoints", 14, int, lambda v: v >= 3, "need >= 3 points")
    samples = _get(cfg.scheme, "scheme", "samples_per_segment", 50, int, _positive, "must be positive")
    theta0 = _get(cfg.initial, "initial", "theta0", kind=float)
    # a fast component must be present, otherwise its frequency is not identifiable
    excite = _get(cfg.initial, "initial", "fast_amplitude", 0.01, float, lambda v: v != 0, "must be non-zero")
    a0 = _get(cfg.initial, "initial", "a0", sysm.equilibrium_extension(theta0) + excite, float)
    y0 = np.array([a0, theta0, 0.0, 0.0])
    run = ms.run_stiff_pendulum(sysm, y0, t_end, pps, npoints=npts)
    t, q, v = run.sample(samples)
    energy = ms.curve_energy(ms.pendulum_lagrangian(sysm), q, v)
    header = ["t", "a", "theta", "energy"]
    flagged = sum(bool(st.flagged) for st in run.states)
    return RunResult(header, np.column_stack([t, q, energy]),
                     {"omega_estimate": run.omega_estimate, "segments": len(run.states), "flagged": flagged})


def run_multisym(cfg: RunConfig, rng) -> RunResult:
    from . import multisym as msy

    mid = _get(cfg.model, "model", "id", kind=str)
    if mid == "wave":
        density = msy.wave_density(_get(cfg.model, "model", "c", 1.0, float, _positive, "must be positive"))
    elif mid == "sine_gordon":
        density = msy.sine_gordon_density()
    else:
        raise ConfigError("model.id", "choose 'wave' or 'sine_gordon'")
    M = _get(cfg.scheme, "scheme", "M", kind=int, check=lambda v: v >= 2, why="need M >= 2")
    length = _get(cfg.scheme, "scheme", "length", 2 * np.pi, float, _positive, "must be positive")
    courant = _get(cfg.scheme, "scheme", "courant", 0.5, float, _positive, "must be positive")
    steps = _get(cfg.scheme, "scheme", "steps", kind=int, check=_positive, why="must be positive")
    boundary = _get(cfg.scheme, "scheme", "boundary", "periodic", str,
                    lambda v: v in ("periodic", "fixed"), "choose 'periodic' or 'fixed'")
    dx = length / M
    mesh = msy.SpaceTimeMesh(M, steps + 1, dx, courant * dx, boundary)
    width = _get(cfg.initial, "initial", "width", 0.5, float, _positive, "must be positive")
    amp = _get(cfg.initial, "initial", "amplitude", 1.0, float)
    center = _get(cfg.initial, "initial", "center", length / 2, float)
    speed = _get(cfg.initial, "initial", "speed", 1.0, float)
    noise = _get(cfg.initial, "initial", "noise", 0.0, float, lambda v: v >= 0, "must be >= 0")
    x = mesh.x
    q0 = amp * np.exp(-((x - center) / width) ** 2)
    q1 = amp * np.exp(-((x - center - speed * mesh.dt) / width) ** 2)
    if noise:
        q0 = q0 + noise * rng.standard_normal(x.size)
    if boundary == "periodic":
        q0[-1], q1[-1] = q0[0], q1[0]
    lat = msy.march(density, mesh, q0, q1, steps, solver=_solver(cfg))
    q = lat.q
    C, D = msy.quadratic_level_matrices(density if mid == "wave" else msy.wave_density(), mesh)
    energy = [msy.discrete_energy(C, D, q[j], q[j + 1], mesh.dt, mesh) for j in range(len(q) - 1)]
    if mid == "sine_gordon":
        energy = [e + _potential_energy(q[j], q[j + 1], mesh) for j, e in enumerate(energy)]
    mom = [msy.level_momentum(density, q[j], q[j + 1], mesh).sum() for j in range(len(q) - 1)]
    t = lat.t[1:]
    header = ["t"] + [f"u{i}" for i in range(M + 1)] + ["energy", "momentum"]
    return RunResult(header, np.column_stack([t, q[1:], energy, mom]))


def _potential_energy(a, b, mesh) -> float:
    """Approximate (1 - cos u) energy of a slab, averaged over its two levels.

    Added to the exact invariant of the linear part this is not conserved
    exactly, but its drift stays at the level of the time-step error.
    """
    n = mesh.M if mesh.periodic else mesh.M + 1
    return float(0.5 * mesh.dx * np.sum((1 - np.cos(a[:n])) + (1 - np.cos(b[:n]))))


def _tdse_scheme(cfg: RunConfig):
    from . import pseudospectral as ps

    N = _get(cfg.scheme, "scheme", "N", 16, int, lambda v: v >= 4 and v % 2 == 0, "need even N >= 4")
    dt = _get(cfg.scheme, "scheme", "dt", 0.01, float, _positive, "must be positive")
    hbar = _get(cfg.model, "model", "hbar", 1.0, float, _positive, "must be positive")
    mass = _get(cfg.model, "model", "mass", 0.5, float, _positive, "must be positive")
    coef = _get(cfg.scheme, "scheme", "coefficients", "rederived", str,
                lambda v: v in ("rederived", "printed"), "choose 'rederived' or 'printed'")
    grid = ps.SpectralGrid(N)
    pot = cfg.model.get("potential", "zero")
    x = grid.x
    if pot == "zero":
        V = np.zeros(N)
    elif isinstance(pot, dict) and pot.get("type") == "cos":
        amp = _get(pot, "model.potential", "amplitude", 1.0, float)
        V = amp * np.cos(x)
    elif isinstance(pot, dict) and pot.get("type") == "samples":
        V = np.array(_get(pot, "model.potential", "values", kind=list,
                          check=lambda v: len(v) == N, why=f"need {N} samples"))
    else:
        raise ConfigError("model.potential", "use 'zero', {'type': 'cos'} or {'type': 'samples'}")
    sch = ps.TdseScheme(grid, dt, hbar, ps.potential_spectrum(V), SolverConfig(tol=1e-12), coef, mass)
    return sch


def run_tdse(cfg: RunConfig, rng) -> RunResult:
    from . import pseudospectral as ps

    sch = _tdse_scheme(cfg)
    grid = sch.grid
    steps = _get(cfg.scheme, "scheme", "steps", kind=int, check=_positive, why="must be positive")
    kind = _get(cfg.initial, "initial", "type", "gaussian", str,
                lambda v: v in ("gaussian", "mode"), "choose 'gaussian' or 'mode'")
    if kind == "mode":
        k = _get(cfg.initial, "initial", "k", 1, int, lambda v: abs(v) < grid.N // 2, "need |k| < N/2")
        v0 = ps.SpectralState.mode(grid.N, k)
    else:
        width = _get(cfg.initial, "initial", "width", 0.7, float, _positive, "must be positive")
        k0 = _get(cfg.initial, "initial", "k0", 1.0, float)
        psi = np.exp(-((grid.x - np.pi) / width) ** 2 + 1j * k0 * grid.x)
        noise = _get(cfg.initial, "initial", "noise", 0.0, float, lambda v: v >= 0, "must be >= 0")
        if noise:
            psi = psi + noise * (rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N))
        v0 = ps.state_from_samples(psi)
        v0 = ps.SpectralState(v0.coef / np.sqrt(ps.norm(v0)))
    tr = ps.tdse_integrate(sch, v0, steps)
    T = sch.hamiltonian_full
    energy = np.real(np.einsum("li,ij,lj->l", tr.states.conj(), T, tr.states))
    ks = grid.k
    header = (["t"] + [f"re_v{k}" for k in ks] + [f"im_v{k}" for k in ks] + ["energy", "norm"])
    table = np.column_stack([tr.times, tr.states.real, tr.states.imag, energy, tr.norms])
    return RunResult(header, table, {"max_abs_multiplier": float(np.max(np.abs(tr.multipliers), initial=0.0))})


def run_tise(cfg: RunConfig, rng) -> RunResult:
    from . import pseudospectral as ps

    sch = _tdse_scheme(cfg)
    pairs = ps.tise_solve(sch)
    lam = np.array([p[0] for p in pairs])
    norms = np.array([ps.norm(p[1]) for p in pairs])
    header = ["index", "lambda", "norm"]
    return RunResult(header, np.column_stack([np.arange(len(lam)), lam, norms]),
                     {"eigenvalues": lam.tolist()})


def _section_keys(*names):
    return set(names)


INTEGRATORS: dict = {
    "galerkin": {"run": run_galerkin, "model": _section_keys("id", "mass", "stiffness", "dim", "gravity", "length"),
                 "scheme": _section_keys("s", "quad_points", "h", "steps", "tol", "max_iter"),
                 "initial": _section_keys("q0", "q1", "v0")},
    "sem": {"run": run_sem, "model": _section_keys("id", "mass", "stiffness", "dim", "gravity", "length"),
            "scheme": _section_keys("order2", "s", "h", "steps", "h_min", "h_max", "tol", "max_iter"),
            "initial": _section_keys("q0", "q1", "v0")},
    "liegroup": {"run": run_liegroup, "model": _section_keys("id", "inertia"),
                 "scheme": _section_keys("s", "quad_points", "h", "steps", "tol", "max_iter"),
                 "initial": _section_keys("omega")},
    "dep": {"run": run_dep, "model": _section_keys("id", "inertia"),
            "scheme": _section_keys("s", "quad_points", "h", "steps", "tol", "max_iter"),
            "initial": _section_keys("omega")},
    "multiscale": {"run": run_multiscale, "model": _section_keys("id", "m", "g", "k", "l"),
                   "scheme": _section_keys("t_end", "periods_per_step", "npoints", "samples_per_segment"),
                   "initial": _section_keys("theta0", "a0", "fast_amplitude")},
    "multisym": {"run": run_multisym, "model": _section_keys("id", "c"),
                 "scheme": _section_keys("M", "length", "courant", "steps", "boundary", "tol", "max_iter"),
                 "initial": _section_keys("width", "amplitude", "center", "speed", "noise")},
    "tdse": {"run": run_tdse, "model": _section_keys("hbar", "mass", "potential"),
             "scheme": _section_keys("N", "dt", "steps", "coefficients"),
             "initial": _section_keys("type", "k", "width", "k0", "noise")},
    "tise": {"run": run_tise, "model": _section_keys("hbar", "mass", "potential"),
             "scheme": _section_keys("N", "dt", "coefficients"),
             "initial": set()},
}


# --- diagnostics -------------------------------------------------------------------

@dataclass
class DiagnosticsSummary:
    rows: int
    energy_max_drift: Optional[float] = None
    energy_drift_slope: Optional[float] = None
    momentum_max_drift: dict = field(default_factory=dict)
    norm_max_drift: Optional[float] = None
    solver_iterations: Optional[int] = None
    wall_time: Optional[float] = None
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)


def _drift(series):
    s = np.asarray(series, dtype=float)
    s = s[np.isfinite(s)]
    return float(np.max(np.abs(s - s[0]))) if s.size else None


def drift_slope(t, series) -> Optional[float]:
    """Least-squares slope of series against t (finite entries only)."""
    t, s = np.asarray(t, dtype=float), np.asarray(series, dtype=float)
    ok = np.isfinite(s) & np.isfinite(t)
    if ok.sum() < 2:
        return None
    A = np.column_stack([t[ok], np.ones(ok.sum())])
    return float(np.linalg.lstsq(A, s[ok], rcond=None)[0][0])


def summarize(header: list, table: np.ndarray) -> DiagnosticsSummary:
    table = np.atleast_2d(table)
    cols = {name: table[:, i] for i, name in enumerate(header)}
    out = DiagnosticsSummary(rows=table.shape[0])
    t = cols.get("t", np.arange(table.shape[0], dtype=float))
    if "energy" in cols:
        out.energy_max_drift = _drift(cols["energy"])
        out.energy_drift_slope = drift_slope(t, cols["energy"])
    for name in header:
        if name.startswith("momentum"):
            out.momentum_max_drift[name] = _drift(cols[name])
    if "norm" in cols:
        out.norm_max_drift = _drift(cols["norm"])
    return out


def write_csv(path: str, header: list, table: np.ndarray):
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(table), fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: str) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError("csv", "empty file") from None
        rows = [r for r in reader if r]
    if not header or any(not h.strip() for h in header):
        raise ConfigError("csv.header", "blank column name")
    if not rows:
        raise ConfigError("csv", "no data rows")
    for n, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise ConfigError(f"csv.line{n}", f"expected {len(header)} fields, found {len(r)}")
    try:
        table = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ConfigError("csv", f"non-numeric entry: {exc}") from None
    return header, table


# --- commands ----------------------------------------------------------------------

def _fail(code: int, kind: str, **info) -> int:
    print(json.dumps({"error": kind, **info}), file=sys.stderr)
    return code


def execute(cfg: RunConfig) -> tuple[RunResult, DiagnosticsSummary]:
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    result = INTEGRATORS[cfg.integrator]["run"](cfg, rng)
    summary = summarize(result.header, result.table)
    summary.wall_time = time.perf_counter() - t0
    summary.solver_iterations = result.iterations
    summary.seed = cfg.seed
    summary.extra = result.extra
    return result, summary


def cmd_run(args) -> int:
    from .galerkin import StepFailure

    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", field=exc.field, reason=exc.reason)
    except OSError as exc:
        return _fail(EXIT_IO, "io", path=args.config, reason=str(exc))
    log.info("running %s", cfg.integrator)
    try:
        result, summary = execute(cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", field=exc.field, reason=exc.reason)
    except StepFailure as exc:
        return _fail(EXIT_SOLVER, "solver", step=exc.index, reason=str(exc.cause))
    except SolverError as exc:
        return _fail(EXIT_SOLVER, "solver", step=getattr(exc, "level", None), reason=str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", field="<run>", reason=str(exc))
    traj = cfg.output.get("trajectory")
    diag = cfg.output.get("diagnostics")
    payload = asdict(summary)
    try:
        if traj:
            write_csv(traj, result.header, result.table)
        if diag:
            with open(diag, "w") as fh:
                json.dump(payload, fh, indent=2)
    except OSError as exc:
        return _fail(EXIT_IO, "io", reason=str(exc))
    print(json.dumps(payload))
    return EXIT_OK


def cmd_filon_weights(args) -> int:
    from .filon import filon_weights

    if args.points < 2:
        print("varint filon-weights: --points must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    w = filon_weights(lobatto_rule(args.points).points, args.theta)
    for z in w:
        print(f"{z.real:.17g},{z.imag:.17g}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    try:
        header, table = read_csv(args.trajectory)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "schema", field=exc.field, reason=exc.reason)
    except OSError as exc:
        return _fail(EXIT_IO, "io", path=args.trajectory, reason=str(exc))
    print(json.dumps(asdict(summarize(header, table))))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varint", description="Generalized Galerkin variational integrators")
    p.add_argument("--version", action="version", version=f"varint {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a JSON-configured integration")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    f = sub.add_parser("filon-weights", help="print Filon-Lobatto weights as re,im rows")
    f.add_argument("--points", type=int, required=True)
    f.add_argument("--theta", type=float, required=True)
    f.set_defaults(func=cmd_filon_weights)
    d = sub.add_parser("diagnose", help="summarize a trajectory CSV")
    d.add_argument("trajectory")
    d.set_defaults(func=cmd_diagnose)
    return p


def _configure_logging():
    level = os.environ.get("VARINT_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
