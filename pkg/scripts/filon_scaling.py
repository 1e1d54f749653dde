"""Error of Filon-Lobatto quadrature for the integral of e^x e^{i omega x} on [0, h].

At fixed omega the error shrinks like h^(nu - 1) for nu points once h * omega
is large. The error oscillates with h * omega, so each entry is the worst of
four quarter-period phase offsets.
"""

import argparse

import numpy as np

from varint import filon
from varint.numcore import lobatto_rule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--omega", type=float, default=200.0)
    ap.add_argument("--points", type=int, nargs="+", default=[2, 3, 4, 5])
    args = ap.parse_args()
    omega = args.omega
    periods = np.array([64, 32, 16, 8, 4])
    hs = 2 * np.pi * periods / omega

    def exact(h):
        return (np.exp((1 + 1j * omega) * h) - 1) / (1 + 1j * omega)

    for n in args.points:
        pts = lobatto_rule(n).points
        errs = []
        for h in hs:
            shifted = h + np.arange(4) * np.pi / (2 * omega)
            errs.append(max(abs(filon.filon_integrate(np.exp, omega, hh, pts) - exact(hh)) for hh in shifted))
        errs = np.array(errs)
        slopes = np.concatenate([[np.nan], np.log2(errs[:-1] / errs[1:])])
        print(f"{n} points (expected slope {n - 1})")
        for p, h, e, sl in zip(periods, hs, errs, slopes):
            print(f"  {p:3d} periods  h = {h:.4f}  error = {e:.3e}  slope = {sl:.2f}")


if __name__ == "__main__":
    main()
