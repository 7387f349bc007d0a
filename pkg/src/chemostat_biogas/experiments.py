"""Figure and appendix reproductions, plus the ``check`` gate.

Each ``cmd_*`` function takes resolved panels, writes CSV and SVG files into
``out`` and returns a list of summary rows ``(key, value)`` for stdout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import plotting
from .control import appendix_schedule, law_from_dict, resolve_z1
from .dynamics import StateSX, StateSZ, check_controllability, invariant_box, to_sz
from .errors import AssumptionError, BiogasError, ConfigError, ControlError, NumericError
from .growth import check_assumptions, fmt, s_bar
from .parallel import pmap
from .rewards import (
    Average,
    appendix_averages,
    auxiliary_run,
    brute_force_value,
    normalized_reward_surface,
    value_frame,
)
from .simulate import simulate

CONTOIS = {"kind": "contois", "mu_max": 0.74, "K_s": 1.0}
HALDANE = {"kind": "haldane", "mu_bar": 0.74, "K_s": 9.28, "K_i": 256.0}
CONTOIS_PROC = {"s_in": 100.0, "u_max": 1.5}
HALDANE_PROC = {"s_in": 100.0, "u_max": 3.0}


def _ic_grid(s0s, z0s):
    return [{"s0": s, "z0": z} for z in z0s for s in s0s]


DEFAULTS = {
    "phase-portrait": [
        {
            "name": "haldane_phase",
            "model": HALDANE,
            "process": HALDANE_PROC,
            "initial_conditions": _ic_grid([5, 40, 70, 95], [0.2, 0.7, 1.5, 3]),
            "laws": [{"type": "sbar", "z1": 1}],
            "T": 30.0,
        },
        {
            "name": "contois_phase",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": _ic_grid([10, 60, 75], [0.2, 0.7, 1.5, 3]),
            "laws": [{"type": "sbar", "z1": "z0"}],
            "T": 30.0,
        },
    ],
    "reward-surface": [
        {
            "name": "surface_x20_s20",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": [{"x0": 20, "s0": 20}],
            "T_grid": {"start": 0.5, "stop": 6.0, "num": 56},
            "z1_num": 61,
        },
        {
            "name": "surface_x70_s60",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": [{"x0": 70, "s0": 60}],
            "T_grid": {"start": 0.5, "stop": 6.0, "num": 56},
            "z1_num": 61,
        },
    ],
    "compare-feedbacks": [
        {
            "name": "time_x30_s2",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": [{"x0": 30, "s0": 2}],
            "laws": [{"type": "sbar", "z1": "z0"}, {"type": "sbar", "z1": 1}, {"type": "mrap_curve"}],
            "T": 5.0,
        },
        {
            "name": "average_x20_s20",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": [{"x0": 20, "s0": 20}],
            "laws": [
                {"type": "sbar", "z1": "z0"},
                {"type": "sbar", "z1": 0.625},
                {"type": "sbar", "z1": 1},
                {"type": "mrap_curve"},
            ],
            "T_grid": {"start": 0.1, "stop": 5.0, "num": 50},
        },
        {
            "name": "average_x10_s70",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": [{"x0": 10, "s0": 70}],
            "laws": [
                {"type": "sbar", "z1": "z0"},
                {"type": "sbar", "z1": 0.6666666666666666},
                {"type": "sbar", "z1": 1},
                {"type": "mrap_curve"},
            ],
            "T_grid": {"start": 0.1, "stop": 5.0, "num": 50},
        },
        {
            "name": "difference_map",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "laws": [{"type": "sbar", "z1": 1}, {"type": "sbar", "z1": "z0"}],
            "ic_grid": {"x0": [1.0, 60.0], "s0": [1.0, 80.0], "num": 41, "T_list": [1, 2, 4, 6]},
        },
    ],
    "value-surface": [
        {
            "name": "value_contois",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "T": 2.0,
            "z1": 1.0,
            "ic_grid": {"x0": [5.0, 100.0], "s0": [0.0, 80.0], "num": 41},
        },
        {
            "name": "value_haldane",
            "model": HALDANE,
            "process": HALDANE_PROC,
            "T": 2.0,
            "z1": 1.0,
            "ic_grid": {"x0": [5.0, 100.0], "s0": [0.0, 80.0], "num": 41},
        },
    ],
    "appendix": [
        {
            "name": "appendix",
            "model": HALDANE,
            "process": HALDANE_PROC,
            "appendix": {"eps": 5.0, "s_star": "sbar", "N_max": 10, "full_N": 4},
        }
    ],
    "check": [
        {
            "name": "contois",
            "model": CONTOIS,
            "process": CONTOIS_PROC,
            "initial_conditions": [
                {"x0": 20, "s0": 20},
                {"x0": 70, "s0": 60},
                {"x0": 10, "s0": 70},
                {"x0": 30, "s0": 2},
            ],
            "laws": [{"type": "sbar", "z1": "z0"}, {"type": "sbar", "z1": 1}, {"type": "mrap_curve"}],
            "T": 5.0,
        },
        {
            "name": "haldane",
            "model": HALDANE,
            "process": HALDANE_PROC,
            "initial_conditions": [{"x0": 20, "s0": 20}, {"x0": 70, "s0": 60}, {"s0": 80, "z0": 1}],
            "laws": [{"type": "sbar", "z1": 1}, {"type": "constant", "u": 0.5}],
            "T": 5.0,
        },
    ],
}


def law_label(spec: dict, xi: StateSZ | None = None) -> str:
    if "label" in spec:
        return str(spec["label"])
    kind = spec.get("type")
    if kind == "sbar":
        z1 = spec.get("z1", 1.0)
        return f"sbar({z1})" if isinstance(z1, str) else f"sbar({float(z1):g})"
    if kind == "mrap_curve":
        return "curve"
    if kind == "mrap":
        return f"mrap({float(spec.get('s_star', 0)):g})"
    if kind == "constant":
        return f"u={float(spec.get('u', 0)):g}"
    return str(kind)


def _law_specs(spec):
    return {k: v for k, v in spec.items() if k != "label"}


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def _out(out) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _sx(panel, xi):
    return xi.z * (panel.params.s_in - xi.s)


# ---------------------------------------------------------------------------
# phase portrait
# ---------------------------------------------------------------------------


def cmd_phase_portrait(panels, out, jobs=None):
    out = _out(out)
    summary = []
    for panel in panels:
        if not panel.initial_conditions:
            summary.append((f"{panel.name}.trajectories", 0))
            continue
        rows = []
        curves = []
        for k, xi in enumerate(panel.initial_conditions):
            ok, margin = check_controllability(panel.model, panel.params, xi)
            for spec in panel.laws or [{"type": "sbar", "z1": 1}]:
                label = law_label(spec)
                status = "ok"
                sT = zT = math.nan
                try:
                    law = law_from_dict(_law_specs(spec), panel.model, panel.params, xi, panel.opts.slide_band)
                    traj = simulate(panel.model, panel.params, law, xi, panel.opts.replace(T=panel.T))
                    traj.to_csv(out / f"{panel.name}_ic{k}_{_slug(label)}.csv")
                    curves.append((f"z0={xi.z:g}" if len(panel.laws) <= 1 else label, traj.x, traj.s))
                    sT, zT = float(traj.s[-1]), float(traj.z[-1])
                except ControlError as exc:
                    status = f"inadmissible: {exc}"
                rows.append([k, xi.s, _sx(panel, xi), xi.z, label, "yes" if ok else "no", margin, sT, zT, status])
        _write_csv(
            out / f"{panel.name}_summary.csv",
            ["ic", "s0", "x0", "z0", "law", "assumption2", "margin", "s_T", "z_T", "status"],
            [[str(r[0]), r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8], r[9].replace(",", ";")] for r in rows],
        )
        plotting.phase_portrait(out / f"{panel.name}.svg", curves, panel.params.s_in, panel.name)
        summary.append((f"{panel.name}.trajectories", len(curves)))
        summary.append((f"{panel.name}.inadmissible", sum(1 for r in rows if r[9] != "ok")))
    return summary


def _slug(label):
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in label).strip("_")


# ---------------------------------------------------------------------------
# normalized reward surface
# ---------------------------------------------------------------------------


def cmd_reward_surface(panels, out, jobs=None):
    out = _out(out)
    summary = []
    for panel in panels:
        for k, xi in enumerate(panel.initial_conditions):
            lo, hi = min(xi.z, 1.0), max(xi.z, 1.0)
            z1 = np.linspace(lo, hi, max(1, panel.z1_num)) if panel.z1_num > 1 else np.array([lo])
            surf = normalized_reward_surface(panel.model, panel.params, xi, z1, panel.T_grid, panel.opts, jobs)
            stem = f"{panel.name}_ic{k}"
            _write_csv(out / f"{stem}_surface.csv", ["T", "z1", "J_avg", "J_N"], surf.rows())
            arg = surf.argmax_z1()
            _write_csv(
                out / f"{stem}_argmax.csv",
                ["T", "argmax_z1", "degenerate"],
                [[T, a, "yes" if d else "no"] for T, a, d in zip(surf.T_grid, arg, surf.degenerate)],
            )
            if len(z1) > 1 and len(surf.T_grid) > 1:
                plotting.heatmap(
                    out / f"{stem}_surface.svg", z1, surf.T_grid, surf.J_N, "z1", "T",
                    f"{panel.name}: normalized average reward",
                )
            summary.append((f"{stem}.z0", xi.z))
            summary.append((f"{stem}.argmax_z1_first_T", float(arg[0])))
            summary.append((f"{stem}.argmax_z1_last_T", float(arg[-1])))
            summary.append((f"{stem}.degenerate_rows", int(surf.degenerate.sum())))
    return summary


# ---------------------------------------------------------------------------
# feedback comparison
# ---------------------------------------------------------------------------


def _view(panel):
    if panel.ic_grid:
        return "ic_map"
    if len(panel.T_grid) > 1:
        return "curves"
    return "time"


def _average_curve(panel, xi, spec, T_grid):
    law = law_from_dict(_law_specs(spec), panel.model, panel.params, xi, panel.opts.slide_band)
    T_grid = [float(t) for t in T_grid]
    traj = simulate(
        panel.model, panel.params, law, xi, panel.opts.replace(t0=0.0, T=max(T_grid)), checkpoints=tuple(T_grid)
    )
    return [traj.biogas[traj.index_at(T)] / T for T in T_grid], traj


def feedback_curves(panel, xi, T_grid=None):
    T_grid = panel.T_grid if T_grid is None else T_grid
    out = []
    for spec in panel.laws:
        J, traj = _average_curve(panel, xi, spec, T_grid)
        out.append((law_label(spec), np.asarray(J), traj))
    return out


def _ic_cell(panel, T_list, cell):
    s0, x0 = cell
    xi = to_sz(panel.params, StateSX(s0, x0))
    vals = []
    for spec in panel.laws:
        try:
            law = law_from_dict(_law_specs(spec), panel.model, panel.params, xi, panel.opts.slide_band)
            traj = simulate(
                panel.model, panel.params, law, xi,
                panel.opts.replace(t0=0.0, T=max(T_list), thin=10**9), checkpoints=tuple(T_list),
            )
            vals.append([traj.biogas[traj.index_at(T)] for T in T_list])
        except ControlError:
            vals.append([math.nan] * len(T_list))
    return vals


def ic_map(panel, jobs=None):
    g = panel.ic_grid
    n = int(g.get("num", 41))
    xs = np.linspace(*[float(v) for v in g.get("x0", [1.0, 60.0])], n)
    ss = np.linspace(*[float(v) for v in g.get("s0", [1.0, 80.0])], n)
    T_list = [float(t) for t in g.get("T_list", [panel.T])]
    cells = [(s, x) for s in ss for x in xs]
    res = pmap(partial(_ic_cell, panel, T_list), cells, jobs)
    arr = np.array(res, dtype=float).reshape(len(ss), len(xs), len(panel.laws), len(T_list))
    return xs, ss, T_list, arr


def cmd_compare_feedbacks(panels, out, jobs=None):
    out = _out(out)
    summary = []
    for panel in panels:
        view = _view(panel)
        if view == "ic_map":
            xs, ss, T_list, arr = ic_map(panel, jobs)
            rows = []
            compare = len(panel.laws) >= 2
            for i, s0 in enumerate(ss):
                for j, x0 in enumerate(xs):
                    for t, T in enumerate(T_list):
                        vals = arr[i, j, :, t]
                        diff = vals[0] - vals[1] if compare else vals[0]
                        rows.append([T, x0, s0, x0 / (panel.params.s_in - s0), *vals, diff])
            labels = [law_label(s) for s in panel.laws]
            _write_csv(out / f"{panel.name}.csv", ["T", "x0", "s0", "z0", *[f"J_{_slug(l)}" for l in labels], "diff"], rows)
            for t, T in enumerate(T_list):
                D = arr[:, :, 0, t] - arr[:, :, 1, t] if compare else arr[:, :, 0, t]
                plotting.heatmap(
                    out / f"{panel.name}_T{T:g}.svg", xs, ss, D, "x0", "s0",
                    f"J({labels[0]}) - J({labels[1]}), T={T:g}" if compare else f"J({labels[0]}), T={T:g}",
                    center=compare,
                )
                if compare:
                    finite = D[np.isfinite(D)]
                    summary.append((f"{panel.name}.T{T:g}.positive_fraction", float(np.mean(finite > 0))))
            continue
        for k, xi in enumerate(panel.initial_conditions):
            stem = f"{panel.name}_ic{k}"
            if view == "time":
                series = []
                for spec in panel.laws:
                    law = law_from_dict(_law_specs(spec), panel.model, panel.params, xi, panel.opts.slide_band)
                    traj = simulate(panel.model, panel.params, law, xi, panel.opts.replace(t0=0.0, T=panel.T, thin=1))
                    label = law_label(spec)
                    traj.to_csv(out / f"{stem}_{_slug(label)}.csv")
                    with open(out / f"{stem}_{_slug(label)}_control.csv", "w") as fh:
                        fh.write("t,u\n")
                        for t, u in zip(traj.times, traj.u):
                            fh.write(f"{fmt(t)},{fmt(u)}\n")
                    series.append((label, traj.times, traj.x, traj.s, traj.u))
                    summary.append((f"{stem}.{label}.J", float(traj.biogas[-1])))
                plotting.time_series(out / f"{stem}.svg", series, panel.name)
                continue
            curves = feedback_curves(panel, xi)
            labels = [c[0] for c in curves]
            rows = [[T, *[c[1][i] for c in curves]] for i, T in enumerate(panel.T_grid)]
            _write_csv(out / f"{stem}_average.csv", ["T", *[f"J_{_slug(l)}" for l in labels]], rows)
            plotting.reward_curves(out / f"{stem}_average.svg", panel.T_grid, [(c[0], c[1]) for c in curves], panel.name)
            plotting.phase_portrait(
                out / f"{stem}_states.svg", [(c[0], c[2].x, c[2].s) for c in curves], panel.params.s_in, panel.name
            )
            if len(curves) >= 2:
                rank = curve_ranks(curves)
                _write_csv(out / f"{stem}_ranking.csv", ["T", *[f"rank_{_slug(l)}" for l in labels]],
                           [[T, *[float(r) for r in rank[i]]] for i, T in enumerate(panel.T_grid)])
                for li, label in enumerate(labels):
                    summary.append((f"{stem}.{label}.worst_rank", int(rank[:, li].max())))
                if "curve" in labels and len(curves) >= 3:
                    summary.append((f"{stem}.curve.min_margin_vs_second", float(second_best_margin(curves).min())))
    return summary


def curve_ranks(curves, rtol=1e-9):
    """Competition rank (1 = best) of each curve at each horizon; ties share a rank."""
    J = np.vstack([c[1] for c in curves]).T
    tol = rtol * np.abs(J).max(axis=1, keepdims=True)
    better = J[:, None, :] > J[:, :, None] + tol[:, :, None]
    return 1 + better.sum(axis=2)


def second_best_margin(curves, label="curve"):
    """Relative margin of ``label`` over the second best of the other curves, per horizon."""
    idx = [c[0] for c in curves].index(label)
    J = np.vstack([c[1] for c in curves]).T
    others = np.delete(J, idx, axis=1)
    ref = np.sort(others, axis=1)[:, -2] if others.shape[1] >= 2 else others[:, 0]
    return (J[:, idx] - ref) / np.abs(ref)


# ---------------------------------------------------------------------------
# auxiliary value surface
# ---------------------------------------------------------------------------


def _w_cell(panel, z1, cell):
    s0, x0 = cell
    xi = to_sz(panel.params, StateSX(s0, x0))
    lo, hi = min(xi.z, 1.0), max(xi.z, 1.0)
    zz = min(max(z1, lo), hi)
    try:
        return auxiliary_run(panel.model, panel.params, xi, zz, 0.0, panel.T, panel.opts.replace(thin=10**9)).W
    except ControlError:
        return math.nan


def value_surface(panel, jobs=None):
    g = panel.ic_grid
    n = int(g.get("num", 41))
    xs = np.linspace(*[float(v) for v in g.get("x0", [5.0, 100.0])], n)
    ss = np.linspace(*[float(v) for v in g.get("s0", [0.0, 80.0])], n)
    z1 = float(panel.z1) if not isinstance(panel.z1, str) else 1.0
    cells = [(s, x) for s in ss for x in xs]
    W = np.array(pmap(partial(_w_cell, panel, z1), cells, jobs), dtype=float).reshape(len(ss), len(xs))
    return xs, ss, W


def row_variation(W):
    """Relative spread (max - min) / mean along x0, per s0 row."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return (np.nanmax(W, axis=1) - np.nanmin(W, axis=1)) / np.nanmean(W, axis=1)


def cmd_value_surface(panels, out, jobs=None):
    out = _out(out)
    summary = []
    for panel in panels:
        xs, ss, W = value_surface(panel, jobs)
        rows = [[x0, s0, x0 / (panel.params.s_in - s0), W[i, j]] for i, s0 in enumerate(ss) for j, x0 in enumerate(xs)]
        _write_csv(out / f"{panel.name}.csv", ["x0", "s0", "z0", "W"], rows)
        plotting.heatmap(out / f"{panel.name}.svg", xs, ss, W, "x0", "s0", f"{panel.name}: W, T={panel.T:g}")
        var = row_variation(W)
        summary.append((f"{panel.name}.max_row_variation", float(np.nanmax(var))))
        summary.append((f"{panel.name}.median_row_variation", float(np.nanmedian(var))))
    return summary


# ---------------------------------------------------------------------------
# appendix
# ---------------------------------------------------------------------------


@dataclass
class AppendixRun:
    result: object
    averages: object
    summary: list = field(default_factory=list)


def run_appendix(panel):
    cfg = panel.appendix
    eps = float(cfg.get("eps", 5.0))
    star = cfg.get("s_star", "sbar")
    s_star = s_bar(panel.model, panel.params, 1.0) if star == "sbar" else float(star)
    res = appendix_schedule(panel.model, panel.params, eps, s_star, panel.opts)
    av = appendix_averages(
        panel.model, panel.params, res, int(cfg.get("N_max", 10)), int(cfg.get("full_N", 4)), panel.opts
    )
    return AppendixRun(res, av)


def cmd_appendix(panels, out, jobs=None):
    out = _out(out)
    summary = []
    for panel in panels:
        run = run_appendix(panel)
        res, av = run.result, run.averages
        items = [
            ("eps", res.law.eps), ("s_star", res.law.s_star), ("t_star", res.t_star), ("t_up", res.t_up),
            ("I_star", res.I_star), ("I_eps", res.I_eps), ("K_inf", av.K_inf), ("L_inf", av.L_inf),
            ("L_inf_minus_K_inf", av.gap), ("gap_formula", (res.I_star - res.I_eps) / (3 * res.t_star)),
            ("K_last", float(av.K_sim[-1])), ("L_last", float(av.L_sim[-1])),
            ("max_rel_err_K", float(np.max(np.abs(av.K_sim / av.K_formula - 1)))),
            ("max_rel_err_L", float(np.max(np.abs(av.L_sim / av.L_formula - 1)))),
        ]
        verdict = "liminf<limsup" if av.gap > 0 else "no-gap"
        _write_csv(out / f"{panel.name}_summary.csv", ["quantity", "value"], [[k, v] for k, v in items] + [["verdict", verdict]])
        _write_csv(
            out / f"{panel.name}_sequences.csv",
            ["N", "K_sim", "K_formula", "L_sim", "L_formula"],
            [[str(int(n)), a, b, c, d] for n, a, b, c, d in zip(av.N, av.K_sim, av.K_formula, av.L_sim, av.L_formula)],
        )
        av.traj.to_csv(out / f"{panel.name}_trajectory.csv")
        t = av.traj.times[1:]
        plotting.reward_curves(
            out / f"{panel.name}_running_average.svg", t,
            [("running average", av.traj.biogas[1:] / t)], "oscillating schedule", "J^T",
        )
        summary.extend((f"{panel.name}.{k}", v) for k, v in items)
        summary.append((f"{panel.name}.verdict", verdict))
    return summary


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


@dataclass
class CheckReport:
    rows: list = field(default_factory=list)

    def add(self, check, target, passed, value=math.nan, kind="numeric"):
        self.rows.append((check, target, bool(passed), float(value), kind))

    @property
    def passed(self):
        return all(r[2] for r in self.rows)

    def exit_code(self):
        if self.passed:
            return 0
        kinds = {r[4] for r in self.rows if not r[2]}
        return AssumptionError.exit_code if "admissibility" in kinds else NumericError.exit_code


def z_oracle(z0, mu_integral):
    """Logistic solution of dz/dt = mu (1 - z) z in terms of int mu dt."""
    e = np.exp(mu_integral)
    return z0 * e / (1.0 - z0 + z0 * e)


def trajectory_checks(traj, report, target, tol_box=1e-7, tol_z=1e-6):
    report.add("invariant_box", target, traj.max_box_violation <= tol_box, traj.max_box_violation)
    report.add("z_monotone", target, traj.max_z_backtrack <= 1e-12, traj.max_z_backtrack)
    zo = z_oracle(traj.xi.z, traj.mu_int)
    err = float(np.max(np.abs(zo - traj.z)))
    report.add("z_closed_form", target, err <= tol_z, err)
    p = traj.params
    ok = traj.u_min >= 0 and traj.u_max_seen <= p.u_max * (1 + 1e-12)
    report.add("control_bounds", target, ok, traj.u_max_seen)


def cmd_check(panels, out, jobs=None):
    out = _out(out)
    report = CheckReport()
    for panel in panels:
        m, p = panel.model, panel.params
        for k, xi in enumerate(panel.initial_conditions):
            target = f"{panel.name}/ic{k}"
            box = invariant_box(p, xi)
            ar = check_assumptions(m, p, box)
            for name, c in ar.checks.items():
                report.add(f"assumption.{name}", target, c["passed"], c["worst"], "admissibility")
            ok, margin = check_controllability(m, p, xi)
            report.add("assumption.controllability", target, ok, margin, "admissibility")
            if not ar.passed or not ok:
                continue
            for spec in panel.laws:
                label = law_label(spec)
                try:
                    law = law_from_dict(_law_specs(spec), m, p, xi, panel.opts.slide_band)
                    traj = simulate(m, p, law, xi, panel.opts.replace(t0=0.0, T=panel.T))
                except ControlError as exc:
                    report.add("law_admissible", f"{target}/{label}", False, math.nan, "admissibility")
                    continue
                trajectory_checks(traj, report, f"{target}/{label}")
            zs = sorted({min(xi.z, 1.0), 0.5 * (xi.z + 1.0), max(xi.z, 1.0)})
            for z1 in zs:
                try:
                    fr = value_frame(m, p, xi, z1, 0.0, panel.T, panel.opts)
                    report.add("frame", f"{target}/z1={z1:.4g}", True, fr.J_feedback / fr.W if fr.W else 0.0)
                except BiogasError as exc:
                    report.add("frame", f"{target}/z1={z1:.4g}", False, math.nan)
            # maximizer oracle: dense grid search
            for z1 in zs:
                grid = np.linspace(0, p.s_in, 200001)[1:-1]
                rate = m.rate_function()
                vals = rate(grid, (p.s_in - grid) * z1) * (p.s_in - grid)
                err = abs(grid[int(np.argmax(vals))] - s_bar(m, p, z1))
                report.add("s_bar_vs_grid", f"{target}/z1={z1:.4g}", err <= 2 * (grid[1] - grid[0]), err)
            if panel.T <= 5:
                bf = brute_force_value(m, p, xi, 0.0, min(panel.T, 2.0), 6, h=max(panel.opts.h, 2e-3), aux_z1=zs)
                for z1 in zs:
                    W = auxiliary_run(m, p, xi, z1, 0.0, min(panel.T, 2.0), panel.opts).W
                    report.add("auxiliary_optimality", f"{target}/z1={z1:.4g}", W >= (1 - 1e-3) * bf.aux_value(z1), W)
                    report.add("frame_vs_oracle", f"{target}/z1={z1:.4g}", bf.value <= (1 + 1e-3) * max(xi.z, 1) * W, bf.value)
    _write_csv(
        out / "check_report.csv", ["check", "target", "passed", "value", "kind"],
        [[c, t, "yes" if ok else "no", v, kd] for c, t, ok, v, kd in report.rows],
    )
    return report


COMMANDS = {
    "phase-portrait": cmd_phase_portrait,
    "reward-surface": cmd_reward_surface,
    "compare-feedbacks": cmd_compare_feedbacks,
    "value-surface": cmd_value_surface,
    "appendix": cmd_appendix,
}


def merge_integrator(panel: dict, h: float) -> dict:
    panel = dict(panel) if isinstance(panel, dict) else {}
    integ = dict(panel.get("integrator") or {})
    integ["h"] = float(h)
    panel["integrator"] = integ
    return panel
