"""Strict INI run configuration.

Every key a run consumes is declared in SCHEMA with its type and default; an
unknown section or key, a missing required key or a value that fails the
embedded dataclass validation raises ConfigError before any computation.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

EXPERIMENTS = ("simulate", "darcy", "circle", "radial", "stability", "convergence", "signcheck")
PRESET_DIR = Path(__file__).with_name("presets")

REQUIRED = object()


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


MODEL_KEYS = {
    "P": (float, 0.1), "A": (float, 0.0), "C": (float, 2.0), "D": (float, 1.0),
    "chi_phi": (float, 5.0), "lam": (float, 0.0), "beta": (float, 0.1), "eps": (float, 0.02),
    "K": (float, 0.0), "alpha": (float, 0.0), "rho_S": (float, 2.0), "sigma_B": (float, 1.0),
    "m0": (float, 1.0), "potential": (str, "obstacle"),
}
MESH_KEYS = {
    "domain": (str, "rect"), "size": (float, 12.5), "h_min": (float, REQUIRED),
    "h_max": (float, REQUIRED), "buffer": (float, -1.0), "margin": (float, -1.0),
}
TIME_KEYS = {
    "tau": (float, REQUIRED), "t_end": (float, REQUIRED), "output_every": (int, 0),
    "diag_every": (int, 10), "startup_substeps": (int, 1),
}
INITIAL_KEYS = {
    "shape": (str, "circle"), "radius": (float, 2.0), "amp": (float, 0.1), "mode": (int, 2),
    "random_phase": (_bool, False),
}
PROBE_KEYS = {
    "x0": (float, 0.0), "y0": (float, 0.0), "x1": (float, 4.0), "y1": (float, 0.0),
    "n": (int, 4000),
}
CIRCLE_KEYS = {
    "eps": (float, 0.05), "rho0": (float, 0.25), "R_exact": (float, 10.0),
    "sigma_R": (float, 2.0), "profile_time": (float, 0.1),
}
RADIAL_KEYS = {
    "d": (int, 2), "R": (float, 13.0), "sigma_inf": (float, 1.0), "P": (float, 0.1),
    "A": (float, 0.0), "C": (float, 1.0), "D": (float, 1.0), "chi_phi": (float, 0.0),
    "lam": (float, 0.0), "beta_gamma": (float, 0.1), "c2_form": (str, "consistent"),
    "q0": (float, 1.0), "dt": (float, 1e-3), "t_end": (float, 10.0), "n_profile": (int, 201),
}
STABILITY_KEYS = {
    "d": (int, 2), "l": (int, 2), "R": (float, 13.0), "P": (float, 0.1), "D": (float, 1.0),
    "beta_gamma": (float, 0.1), "q_min": (float, 0.2), "q_max": (float, 13.0),
    "n_q": (int, 200), "lambdas": (_floats, (0.0, 0.25, 0.5)), "chis": (_floats, (0.0,)),
    "form": (str, "derived"), "f0_mode": (str, "neglect"),
}
SIGNCHECK_KEYS = {
    "R": (float, 13.0), "q_min": (float, 0.013), "q_max": (float, 13.0), "n_q": (int, 1000),
    "ratio_q_min": (float, 0.01),
}
CONVERGENCE_KEYS = {
    "kind": (str, "circle"), "eps_list": (_floats, REQUIRED), "h_ratio": (float, 0.5),
}
RUN_KEYS = {"experiment": (str, REQUIRED), "seed": (int, 0), "threads": (int, 1)}

SCHEMA = {
    "run": RUN_KEYS, "model": MODEL_KEYS, "mesh": MESH_KEYS, "time": TIME_KEYS,
    "initial": INITIAL_KEYS, "probe": PROBE_KEYS, "circle": CIRCLE_KEYS, "radial": RADIAL_KEYS,
    "stability": STABILITY_KEYS, "signcheck": SIGNCHECK_KEYS, "convergence": CONVERGENCE_KEYS,
}

# sections each experiment reads; anything else in the file is an error
SECTIONS = {
    "simulate": ("run", "model", "mesh", "time", "initial", "probe"),
    "darcy": ("run", "model", "mesh", "time", "initial", "probe"),
    "circle": ("run", "mesh", "time", "circle"),
    "radial": ("run", "radial"),
    "stability": ("run", "stability"),
    "signcheck": ("run", "signcheck"),
    "convergence": ("run", "convergence", "model", "mesh", "time", "initial", "probe", "circle"),
}


@dataclass
class RunConfig:
    experiment: str
    seed: int
    threads: int
    sections: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, name: str) -> dict:
        return self.sections[name]

    def manifest_rows(self):
        rows = [("run", "experiment", self.experiment), ("run", "seed", self.seed),
                ("run", "threads", self.threads)]
        for sec in SECTIONS[self.experiment]:
            if sec == "run":
                continue
            for key, val in self.sections[sec].items():
                rows.append((sec, key, val))
        return rows


def resolve_path(name: str) -> Path:
    """A file path, or the name of a shipped preset."""
    p = Path(name)
    if p.is_file():
        return p
    preset = PRESET_DIR / f"{name}.ini"
    if preset.is_file():
        return preset
    raise ConfigError(f"config file not found: {name}")


def parse_text(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if "run" not in cp:
        raise ConfigError(f"{source}: missing [run] section")
    exp = cp["run"].get("experiment", "").strip()
    if exp not in EXPERIMENTS:
        raise ConfigError(f"{source}: experiment must be one of {', '.join(EXPERIMENTS)}")
    allowed = SECTIONS[exp]
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(f"{source}: section [{sec}] is not used by experiment '{exp}'")
    sections = {}
    for sec in allowed:
        schema = SCHEMA[sec]
        raw = dict(cp[sec]) if sec in cp else {}
        for key in raw:
            if key not in schema:
                raise ConfigError(f"{source}: unknown key '{key}' in [{sec}]")
        vals = {}
        for key, (typ, default) in schema.items():
            if key in raw:
                try:
                    vals[key] = typ(raw[key].strip())
                except ValueError as exc:
                    raise ConfigError(f"{source}: [{sec}] {key}: {exc}") from exc
            elif default is REQUIRED:
                raise ConfigError(f"{source}: missing required key '{key}' in [{sec}]")
            else:
                vals[key] = default
        sections[sec] = vals
    cfg = RunConfig(exp, sections["run"]["seed"], sections["run"]["threads"], sections, source)
    validate(cfg)
    return cfg


def load(name: str) -> RunConfig:
    path = resolve_path(name)
    return parse_text(path.read_text(), str(path))


def _positive(cfg: RunConfig, sec: str, *keys) -> None:
    for k in keys:
        v = cfg[sec][k]
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"[{sec}] {k} must be positive, got {v}")


def validate(cfg: RunConfig) -> None:
    """Cross-field checks plus construction of the embedded parameter dataclasses."""
    from .phasefield import ModelParams
    from .radial import RadialParams
    from .stability import PerturbParams

    if cfg.threads < 1:
        raise ConfigError("[run] threads must be >= 1")
    secs = SECTIONS[cfg.experiment]
    if "mesh" in secs:
        m = cfg["mesh"]
        _positive(cfg, "mesh", "h_min", "h_max", "size")
        if m["h_min"] >= m["h_max"]:
            raise ConfigError(f"[mesh] h_min={m['h_min']} must be smaller than h_max={m['h_max']}")
        if m["domain"] not in ("rect", "disk"):
            raise ConfigError("[mesh] domain must be 'rect' or 'disk'")
    if "time" in secs:
        _positive(cfg, "time", "tau", "t_end")
        if cfg["time"]["output_every"] < 0 or cfg["time"]["diag_every"] < 1:
            raise ConfigError("[time] output_every must be >= 0 and diag_every >= 1")
        if cfg["time"]["startup_substeps"] < 1:
            raise ConfigError("[time] startup_substeps must be >= 1")
    try:
        if "model" in secs:
            model_params(cfg)
        if "radial" in secs:
            radial_params(cfg)
        if "stability" in secs:
            s = cfg["stability"]
            PerturbParams(s["l"], RadialParams(d=s["d"], R=s["R"], P=s["P"], D=s["D"],
                                               beta_gamma=s["beta_gamma"]))
            if s["form"] not in ("derived", "printed") or s["f0_mode"] not in ("neglect", "full"):
                raise ValueError("form must be derived|printed and f0_mode neglect|full")
            if not (0 < s["q_min"] < s["q_max"] < s["R"] + 1e-12) or s["n_q"] < 2:
                raise ValueError("need 0 < q_min < q_max <= R and n_q >= 2")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "initial" in secs:
        i = cfg["initial"]
        if i["shape"] not in ("circle", "perturbed"):
            raise ConfigError("[initial] shape must be 'circle' or 'perturbed'")
        _positive(cfg, "initial", "radius")
    if "circle" in secs:
        _positive(cfg, "circle", "eps", "rho0", "R_exact", "sigma_R")
    if cfg.experiment == "signcheck":
        s = cfg["signcheck"]
        if not (0 < s["ratio_q_min"] and 0 < s["q_min"] < s["q_max"]) or s["n_q"] < 2:
            raise ConfigError("[signcheck] need positive q range and n_q >= 2")
    if cfg.experiment == "convergence":
        c = cfg["convergence"]
        if c["kind"] not in ("circle", "jump"):
            raise ConfigError("[convergence] kind must be 'circle' or 'jump'")
        eps = c["eps_list"]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("[convergence] eps_list must be strictly decreasing")
        if not 0 < c["h_ratio"] <= 1:
            raise ConfigError("[convergence] h_ratio must lie in (0, 1]")


def model_params(cfg: RunConfig):
    from .phasefield import ModelParams
    return ModelParams(**cfg["model"])


def radial_params(cfg: RunConfig):
    from .radial import RadialParams
    r = cfg["radial"]
    keys = ("d", "R", "sigma_inf", "P", "A", "C", "D", "chi_phi", "lam", "beta_gamma", "c2_form")
    p = RadialParams(**{k: r[k] for k in keys})
    if not 0 < r["q0"] < p.R:
        raise ValueError("q0 must lie in (0, R)")
    if r["dt"] <= 0 or r["t_end"] < 0 or r["n_profile"] < 2:
        raise ValueError("need dt > 0, t_end >= 0 and n_profile >= 2")
    return p
