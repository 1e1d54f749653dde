"""Stiff spring pendulum with the oscillatory multiscale trial space.

Each segment spans many fast periods. The slow angle is compared with a
resolved RK4 reference over one slow period.
"""

import argparse
import time

import numpy as np

from varint import multiscale as ms


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--theta0", type=float, default=0.5)
    ap.add_argument("--periods-per-step", type=float, default=20.25)
    ap.add_argument("--npoints", type=int, default=14)
    ap.add_argument("--k", type=float, default=1e4)
    args = ap.parse_args()

    model = ms.StiffPendulum(1.0, 9.81, args.k, 1.0)
    y0 = np.array([model.equilibrium_extension(args.theta0) + 0.01, args.theta0, 0.0, 0.0])
    t_slow = 2 * np.pi / model.slow_frequency
    t0 = time.perf_counter()
    run = ms.run_stiff_pendulum(model, y0, t_slow, periods_per_step=args.periods_per_step, npoints=args.npoints)
    wall = time.perf_counter() - t0
    t_ref, y_ref = ms.resolved_reference(model, y0, t_slow)
    t, q, v = run.sample()
    keep = t <= t_slow
    err = np.abs(q[keep, 1] - np.interp(t[keep], t_ref, y_ref[:, 1]))
    E = ms.curve_energy(ms.pendulum_lagrangian(model), q[keep], v[keep])

    print(f"eps = {model.eps:.4f}, fast frequency estimate {run.omega_estimate:.3f} (exact {model.fast_frequency:.3f})")
    print(f"segments {len(run.states)}, h * omega = {run.states[0].curve.h * run.omega_estimate:.1f}, wall {wall:.2f} s")
    print(f"slow angle: max error {err.max():.3e} ({100 * err.max() / np.abs(y_ref[:, 1]).max():.2f}% of amplitude)")
    print(f"energy: relative spread {np.ptp(E) / abs(E[0]):.2e}")
    for tk in np.linspace(0.0, t_slow, 9):
        i = min(np.searchsorted(t, tk), t.size - 1)
        print(f"  t = {t[i]:7.3f}  theta = {q[i, 1]: .5f}  reference = {np.interp(t[i], t_ref, y_ref[:, 1]): .5f}")


if __name__ == "__main__":
    main()
