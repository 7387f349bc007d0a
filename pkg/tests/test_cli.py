import csv

import numpy as np
import pytest
import yaml

from chemostat_biogas.cli import main


def run(tmp_path, command, config=None, *extra):
    out = tmp_path / "out"
    argv = [command, "--out", str(out), "--jobs", "1", *extra]
    if config is not None:
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(config))
        argv += ["--config", str(path)]
    return main(argv), out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


SMALL_SURFACE = {
    "panels": [
        {
            "name": "s",
            "initial_conditions": [{"x0": 20, "s0": 20}],
            "T_grid": {"start": 0.5, "stop": 2, "num": 4},
            "z1_num": 5,
        }
    ]
}


class TestPhasePortrait:
    def test_haldane_converges(self, tmp_path):
        cfg = {"panels": [{"name": "h", "initial_conditions": [{"s0": 95, "z0": 3}, {"s0": 5, "z0": 0.2}]}]}
        code, out = run(tmp_path, "phase-portrait", cfg)
        assert code == 0
        for k in (0, 1):
            rows = read_csv(out / f"h_ic{k}_sbar_1.csv")
            last = rows[-1]
            assert float(last["s"]) == pytest.approx(20.0074, abs=1e-3)
            assert float(last["x"]) == pytest.approx(100 - 20.0074, abs=0.05)
        assert (out / "h.svg").exists()

    def test_contois_z_monotone(self, tmp_path):
        cfg = {"panels": [{"name": "c", "model": {"kind": "contois", "mu_max": 0.74, "K_s": 1},
                           "process": {"s_in": 100, "u_max": 1.5}, "laws": [{"type": "sbar", "z1": "z0"}],
                           "initial_conditions": [{"s0": 60, "z0": 0.2}, {"s0": 10, "z0": 1.5}], "T": 5}]}
        code, out = run(tmp_path, "phase-portrait", cfg)
        assert code == 0
        for k, up in ((0, True), (1, False)):
            z = np.array([float(r["z"]) for r in read_csv(out / f"c_ic{k}_sbar_z0.csv")])
            assert np.all(np.diff(z) >= 0) if up else np.all(np.diff(z) <= 0)

    def test_empty_initial_conditions(self, tmp_path):
        code, out = run(tmp_path, "phase-portrait", {"initial_conditions": []})
        assert code == 0
        assert not any(out.iterdir())


class TestRewardSurface:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "reward-surface", SMALL_SURFACE)
        assert code == 0
        rows = read_csv(out / "s_ic0_surface.csv")
        assert list(rows[0]) == ["T", "z1", "J_avg", "J_N"]
        assert len(rows) == 20
        assert (out / "s_ic0_surface.svg").exists()

    def test_single_z1_degenerate(self, tmp_path):
        cfg = {"panels": [dict(SMALL_SURFACE["panels"][0], z1_num=1)]}
        code, out = run(tmp_path, "reward-surface", cfg)
        assert code == 0
        assert {r["degenerate"] for r in read_csv(out / "s_ic0_argmax.csv")} == {"yes"}

    def test_byte_identical_reruns(self, tmp_path):
        code, out = run(tmp_path, "reward-surface", SMALL_SURFACE)
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        main(["reward-surface", "--out", str(tmp_path / "b"), "--jobs", "2", "--config", str(tmp_path / "cfg.yaml")])
        second = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
        assert first == second


class TestCompare:
    def test_single_feedback(self, tmp_path):
        cfg = {"panels": [{"name": "one", "initial_conditions": [{"x0": 20, "s0": 20}],
                           "laws": [{"type": "mrap_curve"}], "T_grid": [1, 2, 3]}]}
        code, out = run(tmp_path, "compare-feedbacks", cfg)
        assert code == 0
        rows = read_csv(out / "one_ic0_average.csv")
        assert list(rows[0]) == ["T", "J_curve"]
        assert not (out / "one_ic0_ranking.csv").exists()

    def test_time_view(self, tmp_path):
        cfg = {"panels": [{"name": "t", "initial_conditions": [{"x0": 30, "s0": 2}], "T": 1.0,
                           "laws": [{"type": "sbar", "z1": 1}, {"type": "mrap_curve"}]}]}
        code, out = run(tmp_path, "compare-feedbacks", cfg)
        assert code == 0
        assert (out / "t_ic0.svg").exists()
        u = [float(r["u"]) for r in read_csv(out / "t_ic0_curve_control.csv")]
        assert min(u) >= 0 and max(u) <= 1.5

    def test_difference_map(self, tmp_path):
        cfg = {"panels": [{"name": "m", "laws": [{"type": "sbar", "z1": 1}, {"type": "sbar", "z1": "z0"}],
                           "ic_grid": {"x0": [1, 60], "s0": [1, 80], "num": 5, "T_list": [1, 6]}}]}
        code, out = run(tmp_path, "compare-feedbacks", cfg)
        assert code == 0
        rows = read_csv(out / "m.csv")
        assert len(rows) == 50
        assert (out / "m_T1.svg").exists() and (out / "m_T6.svg").exists()


class TestValueSurface:
    def test_small_grid(self, tmp_path):
        cfg = {"ic_grid": {"x0": [5, 100], "s0": [0, 80], "num": 3}, "T": 0.5}
        code, out = run(tmp_path, "value-surface", cfg)
        assert code == 0
        rows = read_csv(out / "value_haldane.csv")
        assert len(rows) == 9 and all(float(r["W"]) > 0 for r in rows)

    def test_vanishing_horizon(self, tmp_path):
        cfg = {"ic_grid": {"x0": [5, 100], "s0": [0, 80], "num": 3}, "T": 1e-4}
        code, out = run(tmp_path, "value-surface", cfg, "--step", "1e-5")
        assert code == 0
        W = [float(r["W"]) for r in read_csv(out / "value_contois.csv")]
        assert max(W) < 1e-4 * 18.5 * 1.01


class TestAppendix:
    def test_reports(self, tmp_path):
        code, out = run(tmp_path, "appendix", {"appendix": {"eps": 5, "s_star": "sbar", "N_max": 3, "full_N": 2}})
        assert code == 0
        summary = {r["quantity"]: r["value"] for r in read_csv(out / "appendix_summary.csv")}
        assert summary["verdict"] == "liminf<limsup"
        assert float(summary["max_rel_err_K"]) < 1e-4
        assert len(read_csv(out / "appendix_sequences.csv")) == 3

    def test_bad_levels(self, tmp_path):
        code, _ = run(tmp_path, "appendix", {"appendix": {"eps": 50, "s_star": "sbar"}})
        assert code == 2


class TestCheck:
    def test_defaults_pass(self, tmp_path, capsys):
        code, out = run(tmp_path, "check")
        assert code == 0
        assert "0 failed" in capsys.readouterr().out
        assert (out / "check_report.csv").exists()

    def test_small_u_max(self, tmp_path, capsys):
        cfg = {"panels": [{"process": {"s_in": 100, "u_max": 0.1}}]}
        code, _ = run(tmp_path, "check", cfg)
        assert code == 3
        text = capsys.readouterr().out
        assert "FAIL,assumption.controllability" in text
        line = next(l for l in text.splitlines() if l.startswith("FAIL,assumption.controllability"))
        assert float(line.rsplit(",", 1)[1]) < 0

    def test_malformed(self, tmp_path, capsys):
        code, _ = run(tmp_path, "check", {"modle": {}})
        assert code == 2
        assert "modle" in capsys.readouterr().err

    def test_seedless_is_noop(self, tmp_path):
        assert run(tmp_path, "appendix", {"appendix": {"N_max": 2, "full_N": 1}}, "--seedless")[0] == 0
