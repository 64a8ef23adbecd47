"""Command line entry point: tumourgrowth <experiment> --config <file|preset> [--out DIR].

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import contextlib
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import config as cfgmod
from . import experiments as ex
from . import mesh as fem
from . import stability as stab
from .phasefield import TIMESERIES_COLUMNS, tau_safeguard
from .radial import integrate_q, interface_values, radial_fields
from .solvers import ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _threads(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def write_manifest(out: Path, cfg: cfgmod.RunConfig) -> None:
    lines = [f"tumourgrowth = {__version__}", f"python = {platform.python_version()}",
             f"numpy = {np.__version__}", f"scipy = {scipy.__version__}",
             f"config = {cfg.source}"]
    for sec, key, val in cfg.manifest_rows():
        if isinstance(val, tuple):
            val = " ".join(fem._fmt(v) for v in val)
        elif isinstance(val, float):
            val = fem._fmt(val)
        lines.append(f"{sec}.{key} = {val}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def write_summary(out: Path, summary: dict) -> None:
    lines = []
    for key, val in summary.items():
        if isinstance(val, (float, np.floating)):
            val = fem._fmt(float(val))
        lines.append(f"{key} = {val}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# --- experiments ------------------------------------------------------------------

def _initial_phase(cfg) -> float:
    if cfg["initial"]["random_phase"]:
        return float(np.random.default_rng(cfg.seed).uniform(0.0, 2.0 * math.pi))
    return 0.0


def _buffer(cfg, eps: float) -> float:
    b = cfg["mesh"]["buffer"]
    return eps if b < 0 else b


def run_simulate(cfg, out: Path, darcy: bool) -> dict:
    params = cfgmod.model_params(cfg)
    m, t, ini, pr = cfg["mesh"], cfg["time"], cfg["initial"], cfg["probe"]
    dist = ex.initial_distance(ini["shape"], ini["radius"], ini["amp"], ini["mode"],
                               _initial_phase(cfg))
    dumps = out / "dumps"
    every = t["output_every"]
    if every:
        dumps.mkdir(exist_ok=True)

    def on_step(k, s):
        if every and k % every == 0:
            fem.write_dump(dumps / f"field_{k:06d}.txt", s.mesh, s.fields(), s.t)

    # constant mobility m0 for Darcy; the degenerate mobility peaks at 2
    tau_max = tau_safeguard(m["h_min"], params.beta, params.eps, params.m0 if darcy else 2.0)
    if t["tau"] > tau_max:
        print(f"warning: tau={t['tau']} exceeds the advisory bound {tau_max:.3g}", file=sys.stderr)
    res = ex.simulate(params, ex.make_domain(m["domain"], m["size"]), m["h_min"], m["h_max"],
                      t["tau"], t["t_end"], dist, darcy=darcy, buffer=_buffer(cfg, params.eps),
                      margin=None if m["margin"] < 0 else m["margin"],
                      probe=((pr["x0"], pr["y0"]), (pr["x1"], pr["y1"])), probe_n=pr["n"],
                      diag_every=t["diag_every"], startup_substeps=t["startup_substeps"],
                      on_step=on_step)
    fem.write_csv(out / "timeseries.csv", TIMESERIES_COLUMNS, [d.row() for d in res.diagnostics])
    fem.write_dump(out / "final_fields.txt", res.state.mesh, res.state.fields(), res.state.t)
    last = res.diagnostics[-1]
    return {"t_final": res.state.t, "steps": res.steps, "final_radius": last.radius_mean,
            "final_radius_min": last.radius_min, "final_radius_max": last.radius_max,
            "measured_jump": last.row()[-1], "mass_final": last.mass, "energy_final": last.energy,
            "max_kkt": res.max_kkt, "max_vi_iterations": res.max_vi_iterations,
            "n_vertices": res.state.mesh.n_vertices, "tau_advisory_max": tau_max}


def _circle(cfg, eps: float, h_min: float, out: Path | None = None):
    m, t, c = cfg["mesh"], cfg["time"], cfg["circle"]
    buffer = None if m["buffer"] < 0 else m["buffer"]
    return ex.growing_circle(eps, h_min, t["tau"], t["t_end"], m["h_max"], m["size"],
                             c["rho0"], c["R_exact"], c["sigma_R"], t["diag_every"],
                             c["profile_time"], buffer)


def _write_circle(res, out: Path, tag: str = "") -> None:
    fem.write_csv(out / f"circle{tag}.csv", ("t", "radius_fem", "rho_exact", "error"),
                  zip(res.t, res.radius, res.exact, res.error))
    fem.write_csv(out / f"profile{tag}.csv", ("r", "sigma_fem", "sigma_exact"),
                  zip(res.profile_r, res.profile_fem, res.profile_exact))


def run_circle(cfg, out: Path) -> dict:
    if cfg["mesh"]["domain"] != "disk":
        raise cfgmod.ConfigError("[mesh] the growing-circle benchmark needs domain = disk")
    res = _circle(cfg, cfg["circle"]["eps"], cfg["mesh"]["h_min"])
    _write_circle(res, out)
    return {"eps": res.eps, "final_radius": res.radius[-1], "exact_final_radius": res.exact[-1],
            "max_radius_error": res.max_error, "profile_error": res.profile_error,
            "max_kkt": res.max_kkt, "n_vertices": res.n_vertices}


def run_radial(cfg, out: Path) -> dict:
    p = cfgmod.radial_params(cfg)
    r = cfg["radial"]
    hist = integrate_q(r["q0"], p, r["t_end"], r["dt"])
    fem.write_csv(out / "q.csv", ("t", "q"), zip(hist.t, hist.q))
    q = r["q0"]
    rows = []
    for rr in np.linspace(0.0, p.R, r["n_profile"]):
        sig, mu = radial_fields(float(rr), q, p)
        rows.append((rr, sig, mu))
    fem.write_csv(out / "profile.csv", ("r", "sigma", "mu"), rows)
    iv = interface_values(q, p)
    return {"q0": q, "q_final": hist.q[-1], "t_final": hist.t[-1],
            "event": hist.event or "none", "sigma_T": iv["sigma_T"], "sigma_H": iv["sigma_H"],
            "jump": iv["sigma_T"] - iv["sigma_H"], "mu_T": iv["mu_T"]}


def run_stability(cfg, out: Path) -> dict:
    s = cfg["stability"]
    from .radial import RadialParams
    pp = stab.PerturbParams(s["l"], RadialParams(d=s["d"], R=s["R"], P=s["P"], D=s["D"],
                                                 beta_gamma=s["beta_gamma"]))
    q_grid = np.linspace(s["q_min"], s["q_max"], s["n_q"])
    rows = stab.phase_diagram(q_grid, s["lambdas"], s["chis"], pp, s["form"])
    fem.write_csv(out / "phase_diagram.csv", stab.PHASE_COLUMNS, rows)
    worst = 0.0
    if s["form"] == "derived":
        for q, lam, chi, _, _, ac in rows:
            sub = stab.PerturbParams(pp.l, pp.radial.with_(lam=lam, chi_phi=chi))
            worst = max(worst, abs(stab.shape_growth_rate(q, ac, sub, s["f0_mode"])))
    return {"rows": len(rows), "form": s["form"], "min_A_c": min(r[-1] for r in rows),
            "max_A_c": max(r[-1] for r in rows),
            "max_abs_growth_rate_at_A_c": worst if s["form"] == "derived" else "n/a"}


def run_signcheck(cfg, out: Path) -> dict:
    s = cfg["signcheck"]
    grid = np.linspace(s["q_min"], s["q_max"], s["n_q"])
    rep = stab.sign_checks(grid, s["R"])
    fem.write_csv(out / "signs.csv", stab.SIGN_COLUMNS,
                  [r[:5] + tuple(int(b) for b in r[5:]) for r in rep.rows])
    ratio = stab.sign_checks(np.linspace(s["ratio_q_min"], s["q_max"], s["n_q"]), s["R"])
    return {"points": len(rep.rows), "all_pass": rep.all_pass,
            "violations": len(rep.violations), "ratio_min": ratio.ratio_min,
            "ratio_max": ratio.ratio_max}


def run_convergence(cfg, out: Path) -> dict:
    c = cfg["convergence"]
    rows = []
    if c["kind"] == "circle":
        if cfg["mesh"]["domain"] != "disk":
            raise cfgmod.ConfigError("[mesh] the growing-circle benchmark needs domain = disk")
        for eps in c["eps_list"]:
            h = c["h_ratio"] * eps
            res = _circle(cfg, eps, h)
            _write_circle(res, out, f"_eps{eps:g}")
            rows.append((eps, h, res.max_error, res.profile_error))
        header = ("eps", "h_min", "max_radius_error", "profile_error")
        errors = [r[2] for r in rows]
    else:
        params = cfgmod.model_params(cfg)
        m, t, ini = cfg["mesh"], cfg["time"], cfg["initial"]
        for eps in c["eps_list"]:
            h = c["h_ratio"] * eps
            jump, _ = ex.jump_run(eps, params.lam, h, t["tau"], t["t_end"], m["size"], m["h_max"],
                                  ini["radius"], params)
            rows.append((eps, h, jump, abs(jump - 2.0 * params.lam)))
        header = ("eps", "h_min", "jump", "jump_error")
        errors = [r[3] for r in rows]
    fem.write_csv(out / "convergence.csv", header, rows)
    summary = {"kind": c["kind"], "runs": len(rows), "final_error": errors[-1]}
    summary["monotone"] = ex.is_decreasing(errors) if len(rows) > 1 else "n/a"
    return summary


RUNNERS = {
    "simulate": lambda cfg, out: run_simulate(cfg, out, darcy=False),
    "darcy": lambda cfg, out: run_simulate(cfg, out, darcy=True),
    "circle": run_circle,
    "radial": run_radial,
    "stability": run_stability,
    "signcheck": run_signcheck,
    "convergence": run_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tumourgrowth", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=cfgmod.EXPERIMENTS)
    ap.add_argument("--config", required=True, help="INI file or shipped preset name")
    ap.add_argument("--out", default=None, help="output directory (default runs/<experiment>)")
    ap.add_argument("--threads", type=int, default=None, help="overrides [run] threads")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        if cfg.experiment != args.experiment:
            raise cfgmod.ConfigError(
                f"config is for experiment '{cfg.experiment}', not '{args.experiment}'")
        if args.threads is not None:
            if args.threads < 1:
                raise cfgmod.ConfigError("--threads must be >= 1")
            cfg.threads = args.threads
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or Path("runs") / cfg.experiment)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, cfg)
    try:
        with _threads(cfg.threads):
            summary = RUNNERS[cfg.experiment](cfg, out)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, fem.MeshError, FloatingPointError, np.linalg.LinAlgError) as exc:
        lines = [f"error = {type(exc).__name__}", f"message = {exc}"]
        if isinstance(exc, ConvergenceError):
            lines += [f"residual = {exc.residual!r}", f"iterations = {exc.iterations}"]
        (out / "failure.txt").write_text("\n".join(lines) + "\n")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_summary(out, summary)
    for key, val in summary.items():
        print(f"{key} = {val}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
