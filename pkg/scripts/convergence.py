"""Convergence of the Galerkin integrators on the unit harmonic oscillator.

Prints the endpoint error at t = 1 and the observed order for each degree s.
"""

import argparse

import numpy as np

from varint import galerkin as gk
from varint.models import harmonic_exact, harmonic_oscillator


def endpoint_errors(s, hs, q0=1.0, v0=0.5, t_end=1.0):
    sch = gk.GalerkinScheme.lobatto(harmonic_oscillator(), s)
    errs = []
    for h in hs:
        n = int(round(t_end / h))
        q1, _ = harmonic_exact(h, q0, v0)
        tr = gk.integrate(sch, [q0], [float(q1)], h, n - 1)
        errs.append(abs(tr.states[-1, 0] - harmonic_exact(n * h, q0, v0)[0]))
    return np.array(errs)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degrees", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--steps", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    args = ap.parse_args()
    hs = np.array(args.steps)
    for s in args.degrees:
        errs = endpoint_errors(s, hs)
        orders = np.concatenate([[np.nan], np.log2(errs[:-1] / errs[1:])])
        print(f"s = {s} (expected order {2 * s})")
        for h, e, p in zip(hs, errs, orders):
            print(f"  h = {h:<8g} error = {e:.3e}  order = {p:.2f}")


if __name__ == "__main__":
    main()
