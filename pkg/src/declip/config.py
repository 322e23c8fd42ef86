"""Run configuration files.

Configuration is flat ``key = value`` text grouped in sections::

    [solver]
    max_iters = 500
    step = golden_section

    [bench]
    k_values = 32, 64, 128

Unknown sections or keys are rejected. A run manifest (JSON) written by the
CLI can be passed wherever a config file is accepted; its ``config`` entry
is used.
"""
from __future__ import annotations

import configparser
import json
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

from .bench import DEFAULT_K_VALUES, RNG_NAME, SOLVERS, BenchConfig
from .dictionary import KINDS
from .framing import FramePlan
from .solver import AdaptiveSchedule, FixedStep, GoldenSection, SolverConfig

__all__ = ["ConfigError", "DEFAULTS", "load_config", "resolve", "to_ini", "solver_config",
           "frame_plan", "bench_config"]


class ConfigError(ValueError):
    pass


def _auto(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def fn(s):
        return None if str(s).strip().lower() in ("auto", "none", "") else parse(s)

    return fn


def _choice(options):
    def fn(s):
        s = str(s).strip()
        if s not in options:
            raise ValueError(f"{s!r} not in {list(options)}")
        return s

    return fn


def _list(parse):
    def fn(s):
        if isinstance(s, (list, tuple)):
            return [parse(v) for v in s]
        return [parse(v) for v in str(s).split(",") if v.strip()]

    return fn


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _int(s):
    if isinstance(s, bool):
        raise ValueError("expected an integer")
    return int(s)


# section -> key -> (parser, default)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "solver": {
        "max_iters": (_int, 500),
        "coeff_tol": (float, 1e-7),
        "cost_tol": (float, 1e-12),
        "step": (_choice(("golden_section", "fixed")), "golden_section"),
        "mu": (float, 1.0),
        "mu_max": (_auto(float), None),
        "ls_tol": (float, 1e-4),
        "max_evals": (_int, 40),
    },
    "adaptive": {
        "k_start": (_int, 1),
        "k_step": (_int, 1),
        "residual_energy_frac": (float, 1e-4),
        "k_max": (_auto(_int), None),
    },
    "framing": {
        "frame_len": (_int, 1024),
        "hop": (_auto(_int), None),
        "dict": (_choice(KINDS), "redundant_dct"),
        "eps_mask": (_auto(float), None),
        "replace_reliable": (_bool, False),
    },
    "bench": {
        "n": (_int, 1024),
        "dict_kind": (_choice(KINDS), "orthonormal_dct"),
        "k_values": (_list(_int), list(DEFAULT_K_VALUES)),
        "target_isnr_db": (_list(float), [5.0, 10.0, 20.0]),
        "trials": (_int, 100),
        "success_osnr_db": (float, 80.0),
        "seed": (_int, 0),
        "isnr_tol_db": (float, 0.1),
        "rng": (_choice((RNG_NAME,)), RNG_NAME),
        "solvers": (_list(_choice(SOLVERS)), ["iht_dc", "iht_baseline"]),
    },
}

DEFAULTS = {sec: {k: v[1] for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def resolve(raw: Optional[Mapping[str, Mapping[str, Any]]] = None) -> Dict[str, Dict[str, Any]]:
    """Merge ``raw`` over the defaults, parsing values and rejecting unknowns."""
    out = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    raw = raw or {}
    unknown = [f"[{s}]" for s in raw if s not in SCHEMA]
    for sec, vals in raw.items():
        if sec not in SCHEMA:
            continue
        unknown += [f"{sec}.{k}" for k in vals if k not in SCHEMA[sec]]
    if unknown:
        raise ConfigError("unknown configuration entries: " + ", ".join(sorted(unknown)))
    for sec, vals in raw.items():
        for key, value in vals.items():
            parse = SCHEMA[sec][key][0]
            try:
                out[sec][key] = None if value is None else parse(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {sec}.{key}: {exc}") from None
    return out


def load_config(path: Union[str, Path, None]) -> Dict[str, Dict[str, Any]]:
    if path is None:
        return resolve()
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if "subcommand" in doc:
            # a run manifest: only the schema sections are configuration
            doc = {k: v for k, v in doc.get("config", {}).items() if k in SCHEMA}
        return resolve(doc)
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__", inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return resolve({s: dict(cp[s]) for s in cp.sections()})


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def to_ini(resolved: Mapping[str, Mapping[str, Any]]) -> str:
    lines = []
    for sec, vals in resolved.items():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in vals.items()]
        lines.append("")
    return "\n".join(lines)


def solver_config(resolved, adaptive: bool = False) -> SolverConfig:
    s = resolved["solver"]
    try:
        if s["step"] == "fixed":
            ls = FixedStep(s["mu"])
        else:
            ls = GoldenSection(s["mu_max"], s["ls_tol"], s["max_evals"])
        sched = None
        if adaptive:
            a = resolved["adaptive"]
            sched = AdaptiveSchedule(a["k_start"], a["k_step"], a["residual_energy_frac"], a["k_max"])
        return SolverConfig(s["max_iters"], s["coeff_tol"], s["cost_tol"], ls, sched)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver configuration: {exc}") from None


def frame_plan(resolved) -> FramePlan:
    f = resolved["framing"]
    try:
        return FramePlan(f["frame_len"], f["hop"])
    except ValueError as exc:
        raise ConfigError(f"invalid framing configuration: {exc}") from None


def bench_config(resolved) -> BenchConfig:
    b = resolved["bench"]
    try:
        return BenchConfig(
            n=b["n"],
            dict_kind=b["dict_kind"],
            k_values=tuple(b["k_values"]),
            target_isnr_db=tuple(b["target_isnr_db"]),
            trials=b["trials"],
            success_osnr_db=b["success_osnr_db"],
            seed=b["seed"],
            isnr_tol_db=b["isnr_tol_db"],
            solver=solver_config(resolved, adaptive=True),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid bench configuration: {exc}") from None
