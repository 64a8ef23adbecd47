"""Final tumour radius of the no-flow run and the three density cases of the Darcy model."""
import argparse
from pathlib import Path

from tumourgrowth.experiments import DARCY_CASES, darcy_ordering
from tumourgrowth.mesh import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--tau", type=float, default=0.01)
    ap.add_argument("--t-end", type=float, default=1.5)
    ap.add_argument("--cases", nargs="+", choices=sorted(DARCY_CASES), default=None)
    ap.add_argument("--out", type=Path, default=Path("darcy_ordering.csv"))
    args = ap.parse_args()

    res = darcy_ordering(eps=args.eps, tau=args.tau, t_end=args.t_end, cases=args.cases)
    rows = [(k, d.radius_mean, d.radius_min, d.radius_max, d.mass) for k, d in res.items()]
    for row in rows:
        print("{}: mean radius {:.4f} (min {:.4f}, max {:.4f}), mass {:.4f}".format(*row))
    write_csv(args.out, ("case", "radius_mean", "radius_min", "radius_max", "mass"), rows)


if __name__ == "__main__":
    main()
