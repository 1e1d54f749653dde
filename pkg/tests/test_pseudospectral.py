import numpy as np
import pytest
from hypothesis import given, strategies as st

from varint import pseudospectral as ps
from varint.numcore import SolverError

TWO_PI = 2 * np.pi


def random_state(rng, N, normalized=True):
    r = rng.normal(size=N) + 1j * rng.normal(size=N)
    s = ps.SpectralState.from_reduced(r)
    return ps.SpectralState(s.coef / np.sqrt(ps.norm(s))) if normalized else s


def cos_potential(N, amp=1.0, extra=0.3):
    x = ps.SpectralGrid(N).x
    return ps.potential_spectrum(amp * np.cos(x) + extra * np.sin(2 * x))


def scheme(N=8, dt=0.01, potential=None, **kw):
    return ps.TdseScheme(ps.SpectralGrid(N), dt, potential=potential, **kw)


# --- conventions -------------------------------------------------------------------

def test_grid_validation_and_layout():
    g = ps.SpectralGrid(8)
    assert g.hx == pytest.approx(TWO_PI / 8)
    assert g.x[-1] == pytest.approx(TWO_PI)
    np.testing.assert_array_equal(g.k, np.arange(-4, 5))
    for bad in (3, 2, 7):
        with pytest.raises(ValueError):
            ps.SpectralGrid(bad)


def test_dft_examples():
    N = 8
    x = ps.SpectralGrid(N).x
    c = ps.dft_forward(np.ones(N)).coef
    expect = np.zeros(N + 1)
    expect[N // 2] = 1.0
    assert np.max(np.abs(c - expect)) < 1e-13
    c = ps.dft_forward(np.exp(1j * x)).coef
    expect = np.zeros(N + 1)
    expect[N // 2 + 1] = 1.0
    assert np.max(np.abs(c - expect)) < 1e-13
    # the end coefficients are identified
    c = ps.dft_forward(np.cos(4 * x)).coef
    assert c[0] == c[-1]


@given(st.integers(2, 40).map(lambda n: 2 * n))
def test_dft_linearity_and_fast_path(N):
    rng = np.random.default_rng(N)
    a = rng.normal(size=N) + 1j * rng.normal(size=N)
    b = rng.normal(size=N)
    lhs = ps.dft_forward(a + 2.5 * b).coef
    rhs = ps.dft_forward(a).coef + 2.5 * ps.dft_forward(b).coef
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    grid = ps.SpectralGrid(N)
    direct = np.exp(-1j * np.outer(grid.k_reduced, grid.x)) @ a / N
    assert np.max(np.abs(ps.SpectralGrid.reduce(ps.dft_forward(a).coef) - direct)) < 1e-12


def test_interpolant_examples(rng):
    N = 8
    a, b = random_state(rng, N), random_state(rng, N)
    x = np.linspace(0, TWO_PI, 11)
    np.testing.assert_allclose(ps.eval_interpolant(a, b, 0.0, x), ps.eval_interpolant(a, a, 0.3, x), atol=1e-14)
    one = ps.SpectralState.mode(N, 0, TWO_PI)
    np.testing.assert_allclose(ps.eval_interpolant(one, one, 0.5, x), 1.0, atol=1e-15)
    with pytest.raises(ValueError):
        ps.eval_interpolant(a, b, 1.5, x)


@given(st.integers(2, 16).map(lambda n: 2 * n))
def test_interpolant_inverts_dft(N):
    rng = np.random.default_rng(N)
    samples = rng.normal(size=N) + 1j * rng.normal(size=N)
    s = ps.state_from_samples(samples)
    vals = ps.eval_interpolant(s, s, 0.0, ps.SpectralGrid(N).x)
    assert np.max(np.abs(vals - samples)) < 1e-12


def test_weighted_sum_examples():
    assert ps.weighted_sum(np.ones(5), "prime") == 4.0
    assert ps.weighted_sum(np.ones(5), "double_prime") == 3.5
    assert ps.weighted_sum(np.zeros(5)) == 0.0


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_norm_examples(re, im):
    s = ps.SpectralState.mode(8, 0)
    assert ps.norm(s) == pytest.approx(1.0, abs=1e-15)
    assert ps.norm(ps.SpectralState(np.zeros(9))) == 0.0
    c = complex(re, im)
    assert ps.norm(ps.SpectralState(c * s.coef)) == pytest.approx(abs(c) ** 2, rel=1e-14, abs=1e-300)


def test_potential_spectrum_examples():
    N = 8
    x = ps.SpectralGrid(N).x
    assert not ps.potential_spectrum(np.zeros(N)).coef.any()
    c = ps.potential_spectrum(np.full(N, 2.5)).coef
    assert c[N // 2] == pytest.approx(2.5) and np.max(np.abs(np.delete(c, N // 2))) < 1e-13
    c = ps.potential_spectrum(np.cos(x)).coef
    expect = np.zeros(N + 1)
    expect[N // 2 - 1] = expect[N // 2 + 1] = 0.5
    assert np.max(np.abs(c - expect)) < 1e-13
    with pytest.raises(ValueError):
        ps.potential_spectrum(1j * np.ones(N))
    spec = cos_potential(N)
    xs = np.linspace(0, TWO_PI, 13)
    np.testing.assert_allclose(ps.eval_potential(spec, xs).real, np.cos(xs) + 0.3 * np.sin(2 * xs), atol=1e-13)


def test_scheme_validation():
    with pytest.raises(ValueError):
        scheme(dt=0.0)
    with pytest.raises(ValueError):
        scheme(potential=ps.PotentialSpectrum(np.arange(9) * 1j))
    with pytest.raises(ValueError):
        scheme(potential=ps.PotentialSpectrum.zero(6))
    with pytest.raises(ValueError):
        scheme(coefficients="typeset")


# --- exact action ------------------------------------------------------------------

def brute_force_action(sch, a, b, nx=64, nt=4):
    """Space-time quadrature of the Lagrangian density over the interpolant."""
    N = sch.grid.N
    k = sch.grid.k
    x = TWO_PI * np.arange(nx) / nx
    tg, tw = np.polynomial.legendre.leggauss(nt)
    tau, tw = 0.5 * (tg + 1), 0.5 * tw
    ca, cb = a.coef, b.coef
    V = ps.eval_potential(sch.potential, x).real
    total = 0.0
    for t, w in zip(tau, tw):
        psi = ps.eval_interpolant(ca, cb, t, x)
        psi_x = ps.eval_interpolant(1j * k * ca, 1j * k * cb, t, x)
        psi_t = ps.eval_interpolant(ca, cb, 1.0, x) / sch.dt - ps.eval_interpolant(ca, cb, 0.0, x) / sch.dt
        dens = (0.5j * sch.hbar * (psi.conj() * psi_t - psi * psi_t.conj())
                - sch.hbar ** 2 / (2 * sch.mass) * np.abs(psi_x) ** 2 - V * np.abs(psi) ** 2)
        total += w * np.mean(dens).real * TWO_PI
    return total * sch.dt


@pytest.mark.parametrize("N", [4, 6])
def test_exact_action_matches_brute_force(N, rng):
    sch = scheme(N, dt=0.07, potential=cos_potential(N, 0.8, 0.4 if N > 4 else 0.0), hbar=1.3, mass=0.7)
    for _ in range(5):
        a, b = random_state(rng, N, False), random_state(rng, N, False)
        exact = brute_force_action(sch, a, b)
        assert abs(ps.discrete_action(sch, a, b) - exact) < 1e-10 * max(1.0, abs(exact))


# --- residual ----------------------------------------------------------------------

def test_residual_zero_states():
    sch = scheme(8)
    z = ps.SpectralState(np.zeros(9))
    r = ps.tdse_residual(sch, z, z, z, 0.0)
    blocks = ps.residual_blocks(8)
    assert r.size == 2 * 8 * 2 + 5
    assert r[blocks["norm"]][0] == 1.0
    assert not np.delete(r, blocks["norm"]).any()


@given(st.integers(-3, 3), st.lists(st.floats(-1, 1), min_size=7, max_size=7))
def test_residual_single_mode_recurrence(j, vals):
    N, dt, hbar = 8, 0.03, 1.0
    sch = scheme(N, dt)
    vm, v, vp = complex(vals[0], vals[1]), complex(vals[2], vals[3]), complex(vals[4], vals[5])
    lam = vals[6]
    states = [ps.SpectralState.mode(N, j, c) for c in (vm, v, vp)]
    r = ps.tdse_residual(sch, *states, lam)
    blocks = ps.residual_blocks(N)
    row = j + N // 2 - 1
    eq = r[blocks["re_v"]][row] + 1j * r[blocks["im_v"]][row]
    by_hand = (1j * hbar / (4 * np.pi) * (vp - vm) - dt / 6 * hbar ** 2 * j ** 2 / TWO_PI * (vm + 4 * v + vp)
               - lam / TWO_PI * v)
    assert eq == pytest.approx(by_hand, abs=1e-14)
    others = np.delete(r[blocks["re_v"]], row)
    assert not others.any()


def test_residual_conjugate_blocks(rng):
    sch = scheme(8, potential=cos_potential(8))
    blocks = ps.residual_blocks(8)
    for _ in range(5):
        s = [random_state(rng, 8) for _ in range(3)]
        r = ps.tdse_residual(sch, *s, rng.normal())
        np.testing.assert_allclose(r[blocks["re_vbar"]], r[blocks["re_v"]], atol=1e-14)
        np.testing.assert_allclose(r[blocks["im_vbar"]], -r[blocks["im_v"]], atol=1e-14)


# --- stepping ----------------------------------------------------------------------

def test_step_requires_normalized_level(rng):
    sch = scheme(8)
    s = random_state(rng, 8)
    with pytest.raises(ValueError):
        ps.tdse_step(sch, s, ps.SpectralState(2 * s.coef))


def test_principal_factors_stability_limit():
    sch = scheme(8, dt=0.01)
    z = ps.principal_factors(sch, np.array([0.0, 1.0, 5.0]))
    np.testing.assert_allclose(np.abs(z), 1.0, atol=1e-14)
    assert z[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ps.principal_factors(sch, np.array([1e4]))


@pytest.mark.parametrize("j", [0, 1, -3, 4])
def test_plane_wave_amplitude_and_phase(j):
    N = 8
    sch = scheme(N, dt=0.02)
    # the identified end mode carries weight 1/2 twice, so it needs a larger amplitude
    v0 = ps.SpectralState.mode(N, j, np.sqrt(2 * TWO_PI) if abs(j) == N // 2 else np.sqrt(TWO_PI))
    assert ps.norm(v0) == pytest.approx(1.0)
    tr = ps.tdse_integrate(sch, v0, 200)
    amp = np.abs(tr.states[:, j + N // 2])
    assert np.max(np.abs(amp - amp[0])) < 1e-10
    z = ps.principal_factors(sch, [j ** 2 / TWO_PI])[0]
    ratios = tr.states[1:, j + N // 2] / tr.states[:-1, j + N // 2]
    np.testing.assert_allclose(ratios, z, atol=1e-12)
    if j == 0:
        np.testing.assert_allclose(tr.states, np.broadcast_to(v0.coef, tr.states.shape), atol=1e-12)


def test_temporal_convergence_on_phase():
    N, j, t_end = 8, 2, 1.0
    errs = []
    for n in (20, 40, 80):
        sch = scheme(N, dt=t_end / n)
        tr = ps.tdse_integrate(sch, ps.SpectralState.mode(N, j), n)
        exact = np.sqrt(TWO_PI) * np.exp(-1j * j ** 2 * t_end)
        errs.append(abs(tr.states[-1, j + N // 2] - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.min(orders) >= 1.9


def test_linearity_without_potential():
    N = 8
    sch = scheme(N, dt=0.05)
    u, w = ps.SpectralState.mode(N, 1), ps.SpectralState.mode(N, -2)
    al, be = 0.6, 0.8j
    mix = ps.SpectralState(al * u.coef + be * w.coef)
    su, sw, sm = (ps.tdse_start(sch, s) for s in (u, w, mix))
    nu, _ = ps.tdse_step(sch, u, su)
    nw, _ = ps.tdse_step(sch, w, sw)
    nm, lam = ps.tdse_step(sch, mix, sm)
    np.testing.assert_allclose(nm.coef, al * nu.coef + be * nw.coef, atol=1e-10)
    assert abs(lam) < 1e-10


def test_conjugate_consistency(rng):
    sch = scheme(8, dt=0.02, potential=cos_potential(8))
    v0 = random_state(rng, 8)
    v1 = ps.tdse_start(sch, v0)
    a, b = v0, v1
    ac, bc = v0.conj(), v1.conj()
    for _ in range(20):
        (a, b), _ = (b, ps.tdse_step(sch, a, b)[0]), None
        (ac, bc), _ = (bc, ps.tdse_step(sch, ac, bc, conjugate=True)[0]), None
        np.testing.assert_allclose(bc.coef, b.coef.conj(), atol=1e-10)


def test_trajectory_satisfies_residual(rng):
    sch = scheme(8, dt=0.02, potential=cos_potential(8))
    tr = ps.tdse_integrate(sch, random_state(rng, 8), 30)
    for l in range(1, len(tr.states) - 1):
        r = ps.tdse_residual(sch, tr.states[l - 1], tr.states[l], tr.states[l + 1], tr.multipliers[l - 1])
        assert np.max(np.abs(r)) < 1e-11


def test_norm_conservation_with_potential(rng):
    sch = scheme(16, dt=0.01, potential=cos_potential(16))
    tr = ps.tdse_integrate(sch, random_state(rng, 16), 300)
    assert np.max(np.abs(tr.norms - 1)) <= 1e-8
    assert tr.states.shape == (301, 17)


def test_printed_coefficients_without_potential():
    # the typeset kinetic constant equals the derived one at mass = pi
    N = 8
    v0 = ps.SpectralState.mode(N, 3)
    a = ps.tdse_integrate(scheme(N, dt=0.02, coefficients="printed"), v0, 50)
    b = ps.tdse_integrate(scheme(N, dt=0.02, mass=np.pi), v0, 50)
    assert np.max(np.abs(a.states - b.states)) < 1e-8


def test_printed_coefficients_with_potential_fail_to_step(rng):
    sch = scheme(8, dt=0.02, potential=cos_potential(8), coefficients="printed")
    with pytest.raises(SolverError):
        ps.tdse_integrate(sch, random_state(rng, 8), 200)


# --- time-independent problem ------------------------------------------------------

@pytest.mark.parametrize("hbar", [1.0, 0.7])
def test_tise_free_eigenvalues(hbar):
    N = 10
    pairs = ps.tise_solve(scheme(N, hbar=hbar))
    lam = np.array([p[0] for p in pairs])
    expect = np.sort(-hbar ** 2 * ps.SpectralGrid(N).k_reduced ** 2.0)
    np.testing.assert_allclose(lam, expect, atol=1e-10)
    for lam_i, s in pairs:
        assert ps.norm(s) == pytest.approx(1.0, abs=1e-10)
        # single modes (up to mixing inside the degenerate +-j pair)
        j = int(round(np.sqrt(-lam_i) / hbar))
        support = np.flatnonzero(np.abs(s.coef) > 1e-8)
        assert set(np.abs(ps.SpectralGrid(N).k[support])) <= {j}


def test_tise_constant_shift():
    N = 8
    c = 1.7
    free = [p[0] for p in ps.tise_solve(scheme(N))]
    shifted = [p[0] for p in ps.tise_solve(scheme(N, potential=ps.potential_spectrum(np.full(N, c))))]
    np.testing.assert_allclose(np.array(shifted), np.array(free) - c, atol=1e-12)


def test_tise_hermitian_for_real_potential():
    sch = scheme(16, potential=cos_potential(16))
    A, B = ps.tise_matrices(sch)
    assert np.max(np.abs(A - A.conj().T)) < 1e-12
    assert np.max(np.abs(B - B.conj().T)) < 1e-12
    for lam, s in ps.tise_solve(sch):
        assert ps.norm(s) == pytest.approx(1.0, abs=1e-10)
