"""Experiment configuration: YAML or JSON, one panel or a list of panels.

A panel looks like::

    name: average_x20_s20
    model: {kind: contois, mu_max: 0.74, K_s: 1}
    process: {s_in: 100, u_max: 1.5}
    initial_conditions:
      - {x0: 20, s0: 20}          # or {s0: ..., z0: ...}
    laws:
      - {type: sbar, z1: z0}      # z1: number | "z0" | "mid"
      - {type: mrap_curve}
    T: 5
    T_grid: {start: 0.1, stop: 5, num: 50}
    z1_num: 61
    ic_grid: {x0: [1, 60], s0: [1, 80], num: 41}
    integrator: {h: 0.001, thin: 10}

A file may instead hold ``panels: [panel, panel, ...]``. Missing keys are
filled from the command's defaults, panel by panel.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import StateSX, StateSZ, to_sz
from .errors import BiogasError, ConfigError
from .growth import GrowthModel, ProcessParams
from .simulate import SimOptions

PANEL_KEYS = {
    "name", "model", "process", "initial_conditions", "laws", "T", "T_grid", "T_list",
    "z1_num", "z1", "ic_grid", "integrator", "appendix", "deltas",
}
INTEGRATOR_KEYS = {"h", "thin", "slide_band", "method", "atol", "rtol"}


@dataclass
class Panel:
    name: str
    model: GrowthModel
    params: ProcessParams
    initial_conditions: list
    laws: list
    T: float
    T_grid: np.ndarray
    z1_num: int
    z1: object
    ic_grid: dict
    opts: SimOptions
    appendix: dict = field(default_factory=dict)
    deltas: tuple = ()
    raw: dict = field(default_factory=dict, repr=False)


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        # a model with its own kind replaces the default model outright
        replace_model = k == "model" and isinstance(v, dict) and "kind" in v
        if isinstance(v, dict) and isinstance(out.get(k), dict) and not replace_model:
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing")
    try:
        return float(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: not a number") from None


def parse_initial_condition(d, params: ProcessParams, where="initial_conditions") -> StateSZ:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: each entry must be a mapping with s0 and x0 or z0")
    unknown = set(d) - {"s0", "x0", "z0"}
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown key")
    s0 = _num(d, "s0", where)
    if ("x0" in d) == ("z0" in d):
        raise ConfigError(f"{where}.x0: give exactly one of x0, z0")
    try:
        if "x0" in d:
            return to_sz(params, StateSX(s0, _num(d, "x0", where)))
        z0 = _num(d, "z0", where)
        if not (0 <= s0 < params.s_in and z0 > 0):
            raise ConfigError(f"{where}.z0: state (s0={s0}, z0={z0}) outside the domain")
        return StateSZ(s0, z0)
    except BiogasError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}.s0: {exc}") from None


def _grid(spec, where):
    if isinstance(spec, (list, tuple)):
        return np.asarray([float(v) for v in spec])
    if isinstance(spec, dict):
        for k in spec:
            if k not in ("start", "stop", "num"):
                raise ConfigError(f"{where}.{k}: unknown key")
        return np.linspace(_num(spec, "start", where), _num(spec, "stop", where), int(_num(spec, "num", where)))
    raise ConfigError(f"{where}: expected a list or {{start, stop, num}}")


def parse_panel(d: dict, index=0) -> Panel:
    if not isinstance(d, dict):
        raise ConfigError(f"panels[{index}]: must be a mapping")
    for k in d:
        if k not in PANEL_KEYS:
            raise ConfigError(f"{k}: unknown config key")
    if "model" not in d:
        raise ConfigError("model: missing")
    if not isinstance(d["model"], dict):
        raise ConfigError("model: must be a mapping")
    model = GrowthModel.from_dict(d["model"])
    proc = d.get("process")
    if not isinstance(proc, dict):
        raise ConfigError("process: missing or not a mapping")
    for k in proc:
        if k not in ("s_in", "u_max"):
            raise ConfigError(f"process.{k}: unknown key")
    params = ProcessParams(_num(proc, "s_in", "process"), _num(proc, "u_max", "process"))
    if not params.s_in > 0:
        raise ConfigError("process.s_in: must be positive")
    if not params.u_max >= 0:
        raise ConfigError("process.u_max: must be non-negative")
    ics = d.get("initial_conditions", [])
    if not isinstance(ics, list):
        raise ConfigError("initial_conditions: must be a list")
    states = [parse_initial_condition(e, params, f"initial_conditions[{i}]") for i, e in enumerate(ics)]
    laws = d.get("laws", [])
    if not isinstance(laws, list) or not all(isinstance(v, dict) for v in laws):
        raise ConfigError("laws: must be a list of mappings")
    integ = d.get("integrator", {}) or {}
    for k in integ:
        if k not in INTEGRATOR_KEYS:
            raise ConfigError(f"integrator.{k}: unknown key")
    try:
        opts = SimOptions(
            h=float(integ.get("h", 1e-3)),
            thin=int(integ.get("thin", 10)),
            slide_band=None if integ.get("slide_band") is None else float(integ["slide_band"]),
            method=str(integ.get("method", "rk4")),
            atol=float(integ.get("atol", 1e-9)),
            rtol=float(integ.get("rtol", 1e-9)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator.h: {exc}") from None
    except BiogasError as exc:
        raise ConfigError(f"integrator.h: {exc}") from None
    T = float(d.get("T", 5.0))
    if not T > 0:
        raise ConfigError("T: must be positive")
    T_grid = _grid(d.get("T_grid", d.get("T_list", [T])), "T_grid")
    ic_grid = d.get("ic_grid", {}) or {}
    for k in ic_grid:
        if k not in ("x0", "s0", "num", "T_list"):
            raise ConfigError(f"ic_grid.{k}: unknown key")
    return Panel(
        name=str(d.get("name", f"panel{index}")),
        model=model,
        params=params,
        initial_conditions=states,
        laws=laws,
        T=T,
        T_grid=T_grid,
        z1_num=int(d.get("z1_num", 61)),
        z1=d.get("z1", "mid"),
        ic_grid=ic_grid,
        opts=opts,
        appendix=d.get("appendix", {}) or {},
        deltas=tuple(float(v) for v in d.get("deltas", ())),
        raw=d,
    )


def resolve_panels(defaults: list, user: dict | None) -> list:
    """Combine command defaults with a user config.

    A user ``panels`` list replaces the default list (each entry merged over
    the first default panel); top-level panel keys are merged into every
    default panel.
    """
    if user is None:
        raw = defaults
    elif "panels" in user:
        extra = set(user) - {"panels"}
        if extra:
            raise ConfigError(f"{sorted(extra)[0]}: not allowed next to panels")
        if not isinstance(user["panels"], list):
            raise ConfigError("panels: must be a list")
        base = defaults[0] if defaults else {}
        raw = [merge(base, p if isinstance(p, dict) else {}) for p in user["panels"]]
    else:
        raw = [merge(p, user) for p in defaults] if defaults else [user]
    return [parse_panel(p, i) for i, p in enumerate(raw)]
