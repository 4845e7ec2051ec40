"""Eigenvalue counts of the breather operator on an (alpha, beta) grid,
next to the Wronskian count and the continuum edge."""

import argparse

from solitonlab.grid import GridSpec
from solitonlab.profiles import BreatherParams, breather_directions
from solitonlab.spectral import assemble_breather_operator, eigen_report, wronskian_negative_count


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    ap.add_argument("--beta", type=float, nargs="+", default=[0.5, 0.75, 1.0])
    ap.add_argument("--t", type=float, default=0.0)
    ap.add_argument("--n", type=int, default=1024)
    args = ap.parse_args()
    print("alpha,beta,negative,wronskian,lambda_min,near_zero,continuum,edge")
    for a in args.alpha:
        for b in args.beta:
            bp = BreatherParams(a, b)
            g = GridSpec(32.0 / b, args.n)
            d1, d2, _ = breather_directions(bp, args.t, g)
            rep = eigen_report(assemble_breather_operator(bp, args.t, g), 8, (d1, d2))
            w = wronskian_negative_count(bp, args.t)[0]
            print(
                f"{a},{b},{rep.negative_count},{w},{rep.eigenvalues[0]:.6f},"
                f"{len(rep.near_zero)},{rep.continuum_estimate:.6f},{rep.spectrum_edge:.6f}"
            )


if __name__ == "__main__":
    main()
