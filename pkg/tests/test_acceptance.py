"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import filecmp
import time

import numpy as np
import pytest
import yaml

from chemostat_biogas import (
    ConsistencyError,
    GrowthModel,
    PiecewiseConstant,
    ProcessParams,
    SimOptions,
    StateSX,
    StateSZ,
    appendix_averages,
    appendix_schedule,
    auxiliary_run,
    average_reward_limits,
    brute_force_value,
    check_controllability,
    curve_law,
    discounted_limit,
    law_from_dict,
    mrap_to_sbar,
    normalized_reward_surface,
    phi_bar,
    s_bar,
    simulate,
    to_sz,
    value_frame,
)
from chemostat_biogas.cli import main
from chemostat_biogas.experiments import feedback_curves, second_best_margin, z_oracle
from chemostat_biogas.config import parse_panel

from conftest import ACCEPTANCE

CONTOIS = GrowthModel.contois(0.74, 1.0)
HALDANE = GrowthModel.haldane(0.74, 9.28, 256.0)
P_C = ProcessParams(100.0, 1.5)
P_H = ProcessParams(100.0, 3.0)


def xi_of(x0, s0, p=P_C):
    return to_sz(p, StateSX(s0, x0))


def report(n, ok, detail, elapsed, budget):
    if budget is not None:
        ok = ok and elapsed < budget
    limit = f" / {budget:.0f}s" if budget is not None else ""
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{elapsed:.1f}s{limit}]"
    ACCEPTANCE[n] = line
    print(line)
    return ok


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def haldane_root():
    a, b, c = 1 + 100 / 256, 2 * 9.28, -100 * 9.28
    return (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)


def test_criterion_1_maximizers():
    with Clock() as clk:
        err_h = abs(s_bar(HALDANE, P_H, 1.0) - haldane_root())
        err_c = abs(s_bar(CONTOIS, P_C, 1.0) - 50.0)
        err_p = abs(phi_bar(CONTOIS, P_C, 1.0) - 18.5)
    ok = err_h <= 1e-6 and err_c <= 1e-8 and err_p <= 1e-8
    assert report(1, ok, f"|s_bar_H - root|={err_h:.1e}, |s_bar_C(1) - 50|={err_c:.1e}, "
                         f"|phi_bar_C(1) - 18.5|={err_p:.1e}", clk.elapsed, 1.0)


def _random_pairs(n, rng):
    pairs = []
    while len(pairs) < n:
        model, p = (CONTOIS, P_C) if rng.random() < 0.5 else (HALDANE, P_H)
        xi = StateSZ(float(rng.uniform(0, 95)), float(rng.uniform(0.15, 2.0)))
        if not check_controllability(model, p, xi, n_s=64, n_z=16)[0]:
            continue
        kind = rng.integers(4)
        if kind == 0:
            k = int(rng.integers(1, 5))
            law = PiecewiseConstant(tuple(np.sort(rng.uniform(0, 2, k - 1))), tuple(rng.uniform(0, p.u_max, k)), p)
        elif kind == 1:
            z1 = float(rng.uniform(min(xi.z, 1), max(xi.z, 1)))
            law = mrap_to_sbar(model, p, z1)
        elif kind == 2:
            law = curve_law(model, p, xi)
        else:
            law = law_from_dict({"type": "constant", "u": float(rng.uniform(0, p.u_max))}, model, p, xi)
        pairs.append((model, p, xi, law))
    return pairs


def test_criterion_2_invariance():
    rng = np.random.default_rng(20240611)
    with Clock() as clk:
        pairs = _random_pairs(200, rng)
        worst_box = worst_back = worst_oracle = 0.0
        for model, p, xi, law in pairs:
            traj = simulate(model, p, law, xi, SimOptions(T=2.0, thin=5))
            worst_box = max(worst_box, traj.max_box_violation)
            worst_back = max(worst_back, traj.max_z_backtrack)
            worst_oracle = max(worst_oracle, float(np.max(np.abs(z_oracle(xi.z, traj.mu_int) - traj.z))))
    ok = worst_box <= 1e-7 and worst_back <= 0.0 and worst_oracle <= 1e-6
    assert report(2, ok, f"{len(pairs)} pairs, box violation {worst_box:.1e}, z backtrack {worst_back:.1e}, "
                         f"z oracle {worst_oracle:.1e}", clk.elapsed, 120.0)


C3_ICS = [(20, 20), (70, 60), (10, 70)]


def criterion_3_values(h=1e-3):
    opts = SimOptions(h=h)
    out = []
    for x0, s0 in C3_ICS:
        xi = xi_of(x0, s0)
        law = mrap_to_sbar(CONTOIS, P_C, 1.0)
        J200 = average_reward_limits(CONTOIS, P_C, xi, law, [200.0], opts).J[-1]
        disc = discounted_limit(CONTOIS, P_C, xi, law, (0.1, 0.03, 0.01), opts, tail_tol=1e-5)
        out.append((J200, [d.J for d in disc], max(d.tail_bound for d in disc)))
    return out


def test_criterion_3_infinite_horizon():
    with Clock() as clk:
        vals = criterion_3_values()
    ok = True
    worst_avg = 0.0
    for J200, Jd, tail in vals:
        worst_avg = max(worst_avg, abs(J200 - 18.5))
        gaps = [abs(j - 18.5) for j in Jd]
        ok &= abs(J200 - 18.5) < 0.2
        # strict decrease, each step larger than the truncation bound
        ok &= all(a - b > 2 * tail for a, b in zip(gaps, gaps[1:]))
    detail = f"max |J^200 - 18.5|={worst_avg:.3f}; |J_delta - 18.5| over delta=0.1,0.03,0.01: " + "; ".join(
        ",".join(f"{abs(j - 18.5):.3f}" for j in Jd) for _, Jd, _ in vals
    )
    assert report(3, ok, detail, clk.elapsed, 60.0)


C4_ICS = [(20, 20), (70, 60), (10, 70), (30, 2), (50, 40)]
C4_T = [1.0, 2.5, 5.0]


def test_criterion_4_frames():
    n = bad_frame = bad_oracle = 0
    worst_ratio = 0.0
    with Clock() as clk:
        for x0, s0 in C4_ICS:
            xi = xi_of(x0, s0)
            lo, hi = min(xi.z, 1.0), max(xi.z, 1.0)
            z1s = list(np.linspace(lo, hi, 5))
            for T in C4_T:
                bf = brute_force_value(CONTOIS, P_C, xi, 0.0, T, 8)
                for z1 in z1s:
                    n += 1
                    try:
                        fr = value_frame(CONTOIS, P_C, xi, z1, 0.0, T)
                    except ConsistencyError:
                        bad_frame += 1
                        continue
                    ratio = bf.value / fr.upper
                    worst_ratio = max(worst_ratio, ratio)
                    if ratio > 1 + 1e-3:
                        bad_oracle += 1
    ok = n >= 50 and bad_frame == 0 and bad_oracle == 0
    assert report(4, ok, f"{n} triples, frame violations {bad_frame}, oracle/upper max {worst_ratio:.4f}",
                  clk.elapsed, 600.0)


def criterion_5_values(h=1e-3):
    xi = xi_of(20, 20)
    z1s = (xi.z, 0.5 * (xi.z + 1), 1.0)
    bf = brute_force_value(CONTOIS, P_C, xi, 0.0, 5.0, 8, h=h, aux_z1=z1s)
    return [(auxiliary_run(CONTOIS, P_C, xi, z1, 0.0, 5.0, SimOptions(h=h)).W, bf.aux_value(z1)) for z1 in z1s]


def test_criterion_5_auxiliary_optimality():
    with Clock() as clk:
        vals = criterion_5_values()
    ok = all(W >= (1 - 1e-3) * best for W, best in vals)
    detail = "W / best schedule = " + ", ".join(f"{W / best:.4f}" for W, best in vals)
    assert report(5, ok, detail, clk.elapsed, 300.0)


def criterion_6_values(h=1e-3):
    out = []
    for x0, s0 in ((20, 20), (70, 60)):
        xi = xi_of(x0, s0)
        lo, hi = min(xi.z, 1.0), max(xi.z, 1.0)
        z1 = np.linspace(lo, hi, 31)
        T = np.linspace(0.5, 6.0, 12)
        surf = normalized_reward_surface(CONTOIS, P_C, xi, z1, T, SimOptions(h=h), jobs=1)
        out.append((xi.z, surf.argmax_z1(), surf.J_avg))
    return out


def test_criterion_6_argmax_drift():
    with Clock() as clk:
        vals = criterion_6_values()
    ok = True
    parts = []
    for z0, arg, _ in vals:
        lo, hi = min(z0, 1.0), max(z0, 1.0)
        third = (hi - lo) / 3
        near_z0 = abs(arg[0] - z0) <= third + 1e-12
        near_1 = abs(arg[-1] - 1.0) <= third + 1e-12
        ok &= near_z0 and near_1
        parts.append(f"z0={z0:.3g}: argmax {arg[0]:.3f} at T=0.5, {arg[-1]:.3f} at T=6")
    assert report(6, ok, "; ".join(parts), clk.elapsed, 300.0)


C7_PANELS = [((20, 20), 0.625), ((10, 70), 2 / 3), ((30, 2), "mid")]


def criterion_7_values(h=1e-3):
    out = []
    for (x0, s0), z1 in C7_PANELS:
        panel = parse_panel({
            "model": {"kind": "contois", "mu_max": 0.74, "K_s": 1.0},
            "process": {"s_in": 100.0, "u_max": 1.5},
            "laws": [{"type": "sbar", "z1": "z0"}, {"type": "sbar", "z1": z1},
                     {"type": "sbar", "z1": 1}, {"type": "mrap_curve"}],
            "T_grid": {"start": 0.1, "stop": 5.0, "num": 50},
            "integrator": {"h": h},
        })
        curves = feedback_curves(panel, xi_of(x0, s0))
        out.append(curves)
    return out


def test_criterion_7_curve_dominance():
    with Clock() as clk:
        vals = criterion_7_values()
    margins = [float(second_best_margin(c).min()) for c in vals]
    ok = all(m >= -0.01 for m in margins)
    detail = "min relative margin over second best: " + ", ".join(f"{m:+.4f}" for m in margins)
    assert report(7, ok, detail, clk.elapsed, 120.0)


def criterion_8_values(h=1e-3):
    opts = SimOptions(h=h)
    res = appendix_schedule(HALDANE, P_H, 5.0, s_bar(HALDANE, P_H, 1.0), opts)
    return res, appendix_averages(HALDANE, P_H, res, N_max=10, full_N=4, opts=opts)


def test_criterion_8_appendix():
    with Clock() as clk:
        res, av = criterion_8_values()
    err_K = float(np.max(np.abs(av.K_sim / av.K_formula - 1)))
    err_L = float(np.max(np.abs(av.L_sim / av.L_formula - 1)))
    gap_formula = (res.I_star - res.I_eps) / (3 * res.t_star)
    ok = err_K <= 1e-4 and err_L <= 1e-4 and av.gap > 0 and abs(av.gap - gap_formula) <= 1e-12 * gap_formula
    ok &= bool(np.allclose(av.L_sim, 0.5 * (av.K_sim + res.I_star / res.t_star), rtol=1e-4))
    detail = (f"N<=10 rel err K {err_K:.1e}, L {err_L:.1e}; K_inf={av.K_inf:.4f} < L_inf={av.L_inf:.4f}, "
              f"gap {av.gap:.4f}")
    assert report(8, ok, detail, clk.elapsed, 60.0)


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def _cli_outputs(tmp_path, tag, jobs):
    cfgs = {
        "reward-surface": {"panels": [{"name": "rs", "initial_conditions": [{"x0": 70, "s0": 60}],
                                       "T_grid": {"start": 0.5, "stop": 3, "num": 4}, "z1_num": 6}]},
        "compare-feedbacks": {"panels": [{"name": "cf", "initial_conditions": [{"x0": 20, "s0": 20}],
                                          "laws": [{"type": "sbar", "z1": "z0"}, {"type": "mrap_curve"},
                                                   {"type": "sbar", "z1": 1}],
                                          "T_grid": [0.5, 1, 2]},
                                         {"name": "map", "laws": [{"type": "sbar", "z1": 1}, {"type": "sbar", "z1": "z0"}],
                                          "ic_grid": {"x0": [1, 60], "s0": [1, 80], "num": 4, "T_list": [1, 2]}}]},
        "value-surface": {"ic_grid": {"x0": [5, 100], "s0": [0, 80], "num": 3}, "T": 1.0},
        "appendix": {"appendix": {"N_max": 3, "full_N": 2}},
        "phase-portrait": {"T": 2.0},
        "check": {"T": 1.0},
    }
    outs = []
    for cmd, cfg in cfgs.items():
        path = tmp_path / f"{cmd}.yaml"
        path.write_text(yaml.safe_dump(cfg))
        out = tmp_path / tag / cmd
        code = main([cmd, "--config", str(path), "--out", str(out), "--jobs", str(jobs)])
        assert code == 0, cmd
        outs.append(out)
    return outs


def test_criterion_9_hygiene(tmp_path):
    with Clock() as clk:
        changes = {}
        # 2: terminal states of a sample of random pairs
        pairs = _random_pairs(20, np.random.default_rng(7))
        a = [simulate(m, p, l, xi, SimOptions(T=2.0, h=1e-3)) for m, p, xi, l in pairs]
        b = [simulate(m, p, l, xi, SimOptions(T=2.0, h=5e-4)) for m, p, xi, l in pairs]
        changes[2] = max(_rel([t.s[-1], t.z[-1], t.biogas[-1]], [u.s[-1], u.z[-1], u.biogas[-1]]) for t, u in zip(a, b))
        # 3: J^200 and the largest-rate discounted reward for one initial condition
        xi = xi_of(20, 20)
        law = mrap_to_sbar(CONTOIS, P_C, 1.0)
        j3 = [average_reward_limits(CONTOIS, P_C, xi, law, [200.0], SimOptions(h=h)).J[-1] for h in (1e-3, 5e-4)]
        d3 = [discounted_limit(CONTOIS, P_C, xi, law, (0.1,), SimOptions(h=h), 1e-5)[0].J for h in (1e-3, 5e-4)]
        changes[3] = max(_rel(j3[0], j3[1]), _rel(d3[0], d3[1]))
        # 4: frame quantities and brute-force value
        fr = [value_frame(CONTOIS, P_C, xi_of(70, 60), 1.3, 0.0, 2.5, SimOptions(h=h)) for h in (1e-3, 5e-4)]
        bf = [brute_force_value(CONTOIS, P_C, xi_of(70, 60), 0.0, 2.5, 8, h=h).value for h in (1e-3, 5e-4)]
        changes[4] = max(_rel([fr[0].W, fr[0].J_feedback], [fr[1].W, fr[1].J_feedback]), _rel(bf[0], bf[1]))
        # 5
        v5 = [np.array(criterion_5_values(h)) for h in (1e-3, 5e-4)]
        changes[5] = _rel(v5[0], v5[1])
        # 6: surfaces and argmax
        v6 = [criterion_6_values(h) for h in (1e-3, 5e-4)]
        changes[6] = max(_rel(x[2], y[2]) for x, y in zip(*v6))
        same_argmax = all(np.array_equal(x[1], y[1]) for x, y in zip(*v6))
        # 7: reward curves
        v7 = [criterion_7_values(h) for h in (1e-3, 5e-4)]
        changes[7] = max(_rel(c[1], d[1]) for x, y in zip(*v7) for c, d in zip(x, y))
        # 8
        v8 = [criterion_8_values(h) for h in (1e-3, 5e-4)]
        changes[8] = max(
            _rel(v8[0][1].K_sim, v8[1][1].K_sim), _rel(v8[0][1].L_sim, v8[1][1].L_sim),
            _rel(v8[0][0].t_star, v8[1][0].t_star),
        )
        # CLI byte identity across reruns and worker counts
        first = _cli_outputs(tmp_path, "a", 1)
        second = _cli_outputs(tmp_path, "b", 1)
        third = _cli_outputs(tmp_path, "c", 2)
        identical = True
        for x, y, z in zip(first, second, third):
            names = sorted(p.name for p in x.iterdir())
            identical &= names == sorted(p.name for p in y.iterdir()) == sorted(p.name for p in z.iterdir())
            for name in names:
                identical &= filecmp.cmp(x / name, y / name, shallow=False)
                identical &= filecmp.cmp(x / name, z / name, shallow=False)
    worst = max(changes.values())
    ok = worst < 1e-5 and same_argmax and identical
    detail = (f"max relative change on step halving {worst:.1e} (" +
              ", ".join(f"c{k}: {v:.0e}" for k, v in sorted(changes.items())) +
              f"), argmax unchanged: {same_argmax}, CLI outputs byte-identical: {identical}")
    assert report(9, ok, detail, clk.elapsed, None)
