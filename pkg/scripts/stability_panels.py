"""Critical apoptosis curves for the four stability panels and the sign checks."""
import argparse
from pathlib import Path

import numpy as np

from tumourgrowth.mesh import write_csv
from tumourgrowth.radial import RadialParams
from tumourgrowth.stability import (PHASE_COLUMNS, SIGN_COLUMNS, PerturbParams, phase_diagram,
                                    sign_checks)

PANELS = {"a": (2, [0.0]), "b": (3, [0.0]), "c": (2, [0.1, 0.3]), "d": (3, [0.3, 1.7])}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--form", choices=("derived", "printed"), default="printed")
    ap.add_argument("--n-q", type=int, default=200)
    ap.add_argument("--out", type=Path, default=Path("stability"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    q = np.linspace(0.2, 13.0, args.n_q)
    lambdas = [0.0, 0.25, 0.5]
    for name, (d, chis) in PANELS.items():
        pp = PerturbParams(2, RadialParams(d=d, R=13.0, P=0.1, D=1.0, beta_gamma=0.1))
        form = args.form if d == 3 else "derived"
        rows = phase_diagram(q, lambdas, chis, pp, form)
        write_csv(args.out / f"panel_{name}.csv", PHASE_COLUMNS, rows)
        for chi in chis:
            a = np.array([r[-1] for r in rows if r[2] == chi]).reshape(len(lambdas), -1)
            diff = np.diff(a, axis=0)
            trend = "up" if np.all(diff > 0) else "down" if np.all(diff < 0) else "mixed"
            print(f"panel {name} chi={chi}: curves move {trend} as lambda grows")

    rep = sign_checks(np.linspace(13.0 / 1000, 13.0, 1000))
    write_csv(args.out / "signs.csv", SIGN_COLUMNS, rep.rows)
    print(f"sign checks pass: {rep.all_pass}; ratio range [{rep.ratio_min:.6f}, "
          f"{rep.ratio_max:.6f}]")


if __name__ == "__main__":
    main()
