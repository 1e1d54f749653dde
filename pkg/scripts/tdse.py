"""Pseudospectral variational integrator for the periodic Schrodinger equation.

Reports norm conservation in a smooth potential, the temporal order of the
free phase and the free TISE spectrum.
"""

import argparse

import numpy as np

from varint import pseudospectral as ps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=16)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--steps", type=int, default=1000)
    args = ap.parse_args()
    N = args.N
    grid = ps.SpectralGrid(N)
    x = grid.x
    V = ps.potential_spectrum(np.cos(x) + 0.3 * np.sin(2 * x))

    psi = np.exp(-((x - np.pi) / 0.7) ** 2 + 1j * x)
    v0 = ps.state_from_samples(psi)
    v0 = ps.SpectralState(v0.coef / np.sqrt(ps.norm(v0)))
    tr = ps.tdse_integrate(ps.TdseScheme(grid, args.dt, potential=V), v0, args.steps)
    print(f"N = {N}, dt = {args.dt}, {args.steps} steps in V = cos x + 0.3 sin 2x")
    print(f"  max |norm - 1| = {np.max(np.abs(tr.norms - 1)):.2e}")

    j, t_end = 3, 1.0
    print(f"free phase of mode {j} at t = {t_end}")
    prev = None
    for n in (40, 80, 160, 320):
        out = ps.tdse_integrate(ps.TdseScheme(grid, t_end / n), ps.SpectralState.mode(N, j), n)
        err = abs(out.states[-1, j + N // 2] - np.sqrt(2 * np.pi) * np.exp(-1j * j ** 2 * t_end))
        rate = "" if prev is None else f"  order {np.log2(prev / err):.2f}"
        print(f"  dt = {t_end / n:.5f}  error = {err:.3e}{rate}")
        prev = err

    lam = sorted(p[0] for p in ps.tise_solve(ps.TdseScheme(grid, args.dt)))
    print("free TISE eigenvalues:", " ".join(f"{v + 0.0:g}" for v in lam))


if __name__ == "__main__":
    main()
