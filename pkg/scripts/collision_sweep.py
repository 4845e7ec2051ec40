"""Post-collision defect of the two-soliton sum over a list of small speeds.

Takes several minutes per speed at p = 4. Set SOLITONLAB_THREADS to run the
speeds concurrently.

    python scripts/collision_sweep.py --p 4 --c 0.02 0.05 0.1 --out runs/collision
"""

import argparse

from solitonlab import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=4)
    ap.add_argument("--c", type=float, nargs="+", default=[0.02, 0.05, 0.1])
    ap.add_argument("--region", default="right_of_midpoint", choices=["right_of_midpoint", "full"])
    ap.add_argument("--out", default="runs/collision")
    args = ap.parse_args()
    rep = ex.run_scenario(ex.Scenario("collision", {"p": args.p, "c_list": args.c, "region": args.region}))
    ex.emit_report(rep, args.out)
    for run in rep.summary["runs"]:
        print(f"c = {run['c']:g}: defect {run['defect_norm']:.4e} (whole box {run['defect_full']:.4e})")
    if "fit" in rep.summary:
        f = rep.summary["fit"]
        print(f"exponent {f['exponent']:.3f}, bootstrap 95% interval {f['ci95'][0]:.3f} .. {f['ci95'][1]:.3f}")
    print(f"b = {rep.summary['b']:.6g}, passed {rep.passed}")


if __name__ == "__main__":
    main()
