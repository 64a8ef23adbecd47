"""Nutrient jump at t = 4 over a grid of interface widths and transport strengths."""
import argparse
import time
from pathlib import Path

from tumourgrowth.experiments import jump_run
from tumourgrowth.mesh import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.04, 0.02])
    ap.add_argument("--lam", type=float, nargs="+", default=[0.0, 0.03, 0.07, 0.09])
    ap.add_argument("--tau", type=float, default=0.02)
    ap.add_argument("--t-end", type=float, default=4.0)
    ap.add_argument("--out", type=Path, default=Path("jump_study.csv"))
    args = ap.parse_args()

    rows = []
    for eps in args.eps:
        for lam in args.lam:
            t0 = time.time()
            jump, res = jump_run(eps, lam, tau=args.tau, t_end=args.t_end)
            rows.append((eps, lam, jump, 2 * lam, res.state.mesh.n_vertices, res.max_kkt))
            print(f"eps={eps} lam={lam}: jump {jump:.4f} (2 lam = {2 * lam:.2f}), "
                  f"{time.time() - t0:.0f} s", flush=True)
    write_csv(args.out, ("eps", "lambda", "jump", "two_lambda", "n_vertices", "max_kkt"), rows)


if __name__ == "__main__":
    main()
