"""Config loading, the experiment runner, exit codes, and the selftest."""

import io
import json
import math

import numpy as np
import pytest

from cocyclelab.cli import main, selftest, write_csv
from cocyclelab.config import base_point, build_base, build_cocycle, build_group, load_config
from cocyclelab.base import cat_map, full_shift
from cocyclelab.cocycles import FourierTorus, LocallyConstant, Perturbed
from cocyclelab.errors import ConfigError

ROTATION_TABLE = """
[group]
family = "SL"
d = 2

[base]
kind = "full_shift"

[cocycle]
kind = "locally_constant"
window = 0
[cocycle.table]
"0" = [[0.9553364891256061, -0.29552020666133955], [0.29552020666133955, 0.9553364891256061]]
"1" = [[0.9800665778412416, 0.19866933079506122], [-0.19866933079506122, 0.9800665778412416]]
"""

FOURIER_CAT = """
[group]
family = "SL"
d = 2

[base]
kind = "cat_map"

[cocycle]
kind = "fourier"
terms = [{ k1 = 1, k2 = 0, kind = "cos", coeff = [[0.0, -0.05], [0.05, 0.0]] }]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema=")
    schema = lines[0].split("=", 1)[1]
    cols = lines[1].split(",")
    rows = [dict(zip(cols, line.split(","))) for line in lines[2:]]
    return schema, rows


class TestConfig:
    def test_unknown_section_rejected(self, tmp_path):
        p = write(tmp_path, "[nonsense]\nx = 1\n")
        with pytest.raises(ConfigError, match="nonsense"):
            load_config(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = write(tmp_path, "[lyap]\nn = 10\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_config(p)

    def test_unknown_bump_key_rejected(self, tmp_path):
        p = write(tmp_path, ROTATION_TABLE + """
[cocycle.base]
kind = "constant"
""")
        # table and base together is structurally odd but key-checked first;
        # use a real bump typo instead
        p = write(tmp_path, """
[cocycle]
kind = "perturbed"
bumps = [{ center = [0], radius = 0.5, direction = [[0.0, 1.0], [-1.0, 0.0]], amplitude = 0.1, wobble = 2 }]

[cocycle.base]
kind = "constant"
matrix = [[1.0, 0.0], [0.0, 1.0]]
""")
        with pytest.raises(ConfigError, match="wobble"):
            load_config(p)

    def test_not_toml(self, tmp_path):
        p = write(tmp_path, "this is { not toml\n")
        with pytest.raises(ConfigError, match="TOML"):
            load_config(p)

    def test_builds_locally_constant(self, tmp_path):
        raw = load_config(write(tmp_path, ROTATION_TABLE))
        G = build_group(raw)
        base = build_base(raw)
        A = build_cocycle(raw, G, base)
        assert isinstance(A, LocallyConstant)
        assert np.isclose(A.table[(0,)][0, 0], math.cos(0.3))

    def test_builds_fourier(self, tmp_path):
        raw = load_config(write(tmp_path, FOURIER_CAT))
        A = build_cocycle(raw, build_group(raw), build_base(raw))
        assert isinstance(A, FourierTorus)

    def test_builds_perturbed(self, tmp_path):
        raw = load_config(write(tmp_path, """
[group]
family = "SL"
d = 2

[base]
kind = "full_shift"

[cocycle]
kind = "perturbed"
bumps = [{ center = [0, 1], radius = 0.5, direction = [[0.0, 1.0], [-1.0, 0.0]], amplitude = 0.01 }]

[cocycle.base]
kind = "constant"
matrix = [[1.0, 0.0], [0.0, 1.0]]
"""))
        A = build_cocycle(raw, build_group(raw), build_base(raw))
        assert isinstance(A, Perturbed)
        assert A.bumps[0].center.window(0, 3) == (0, 1, 0, 1)

    def test_base_point_torus_needs_pair(self):
        with pytest.raises(ConfigError, match="x, y"):
            base_point([0.1], cat_map(), "here")

    def test_base_point_shift_symbol_range(self):
        with pytest.raises(ConfigError, match="symbols"):
            base_point([0, 2], full_shift(2), "here")

    def test_wrong_shape_matrix(self, tmp_path):
        p = write(tmp_path, """
[group]
family = "SL"
d = 2

[base]
kind = "full_shift"

[cocycle]
kind = "constant"
matrix = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
""")
        raw = load_config(p)
        with pytest.raises(ConfigError, match="2x2"):
            build_cocycle(raw, build_group(raw), build_base(raw))


class TestRunner:
    def test_lyap_constant_diag(self, tmp_path):
        cfg = write(tmp_path, """
[group]
family = "SL"
d = 2

[base]
kind = "full_shift"

[cocycle]
kind = "constant"
matrix = [[2.0, 0.0], [0.0, 0.5]]

[lyap]
n = 1000
""")
        assert main(["lyap", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        schema, rows = read_csv(tmp_path / "lyap.csv")
        assert schema == "lyap/1"
        assert abs(float(rows[0]["lambda_1"]) - math.log(2.0)) < 1e-12
        assert abs(float(rows[0]["lambda_2"]) + math.log(2.0)) < 1e-12
        summary = json.loads((tmp_path / "lyap_summary.json").read_text())
        assert summary["seed"] == 0 and len(summary["config_hash"]) == 64
        assert summary["versions"]["numpy"] == np.__version__

    def test_lyap_checkpoints_rows(self, tmp_path):
        cfg = write(tmp_path, ROTATION_TABLE + """
[lyap]
n = 400
checkpoints = [100, 200, 400]
""")
        assert main(["lyap", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "lyap.csv")
        assert [int(r["n"]) for r in rows] == [100, 200, 400]
        assert len({r["x0"] for r in rows}) == 1  # one orbit, three cuts

    def test_exit_2_names_constraint(self, tmp_path, capsys):
        cfg = write(tmp_path, """
[group]
family = "Sp"
d = 3

[base]
kind = "full_shift"

[cocycle]
kind = "constant"
matrix = [[1.0]]

[lyap]
n = 10
""")
        assert main(["lyap", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert err.count("\n") == 1 and "even d" in err
        assert "kind=config" in err and "exit=2" in err

    def test_exit_4_on_refusal(self, tmp_path, capsys):
        cfg = write(tmp_path, """
[group]
family = "SL"
d = 2

[base]
kind = "full_shift"

[cocycle]
kind = "constant"
matrix = [[2.0, 1.0], [1.0, 1.0]]

[disintegration]
pairs = 4
""")
        assert main(["disintegration", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 4
        assert "kind=refusal" in capsys.readouterr().err

    def test_exit_3_on_numerical_failure(self, tmp_path, capsys):
        # an impossible holonomy tolerance at a tiny step cap
        cfg = write(tmp_path, FOURIER_CAT + """
[holonomy_deriv_check]
kind = "stable"
tol = 1e-15
n_max = 3
""")
        assert main(["holonomy-deriv-check", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 3
        assert "kind=numerical" in capsys.readouterr().err

    def test_holonomy_csv_and_gap_history(self, tmp_path):
        cfg = write(tmp_path, FOURIER_CAT + """
[holonomy]
pairs = 2
side = "both"
gap_history = true
""")
        assert main(["holonomy", "--config", str(cfg), "--out", str(tmp_path),
                     "--seed", "3"]) == 0
        schema, rows = read_csv(tmp_path / "holonomy.csv")
        assert schema == "holonomy/1"
        assert rows[0]["converged"] == "true"
        assert {r["kind"] for r in rows} == {"stable", "unstable"}
        gschema, grows = read_csv(tmp_path / "holonomy_gaps.csv")
        assert gschema == "holonomy_gaps/1"
        gaps = [float(r["cauchy_gap"]) for r in grows if r["pair"] == "0"]
        assert gaps[-1] < gaps[0] * 1e-3  # geometric decay visible
        # tail gaps are monotone non-increasing by construction
        for pair in {r["pair"] for r in grows}:
            g = [float(r["cauchy_gap"]) for r in grows if r["pair"] == pair]
            assert all(b <= a for a, b in zip(g, g[1:]))

    def test_holonomy_deriv_check_small_error(self, tmp_path):
        cfg = write(tmp_path, FOURIER_CAT)
        assert main(["holonomy-deriv-check", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "holonomy_deriv.csv")
        assert {r["kind"] for r in rows} == {"stable", "unstable"}
        assert all(float(r["rel_error"]) < 1e-4 for r in rows)

    def test_domination_row(self, tmp_path):
        cfg = write(tmp_path, ROTATION_TABLE + """
[domination]
point = [0]
""")
        assert main(["domination", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "domination.csv")
        assert rows[0]["holds"] == "true" and rows[0]["bunched"] == "true"

    def test_phi_rank_full(self, tmp_path):
        cfg = write(tmp_path, ROTATION_TABLE + """
[phi_rank]
l = 1
""")
        assert main(["phi-rank", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        schema, rows = read_csv(tmp_path / "phi_rank.csv")
        assert schema == "phi_rank/1"
        assert len(rows) == 6 and all(r["rank"] == "6" for r in rows)
        assert all(r["upper_right"] == "0.0" for r in rows)
        assert float(rows[0]["mode_agreement"]) < 1e-3
        assert rows[0]["mode_flagged"] == "false"

    def test_invariant_measure_verdicts(self, tmp_path):
        cfg = write(tmp_path, """
[group]
family = "SL"
d = 2

[invariant_measure]
a = [[2.0, 0.0], [0.0, 0.5]]
b = [[0.5403023058681398, -0.8414709848078965], [0.8414709848078965, 0.5403023058681398]]
""")
        assert main(["invariant-measure", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        cert = json.loads((tmp_path / "invariant_measure.json").read_text())
        assert cert["kind"] == "NoCommonMeasure"
        assert cert["growth_rate"] > 0.0

    def test_invariant_measure_rejects_nonmember(self, tmp_path):
        cfg = write(tmp_path, """
[group]
family = "SL"
d = 2

[invariant_measure]
a = [[2.0, 0.0], [0.0, 2.0]]
b = [[1.0, 0.0], [0.0, 1.0]]
""")
        assert main(["invariant-measure", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_sweep_rows_and_thread_bytes(self, tmp_path):
        cfg = write(tmp_path, FOURIER_CAT + """
[run]
seed = 11

[sweep]
epsilon = 1e-2
trials = 3
n = 5000
""")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", str(cfg), "--out", str(a),
                     "--threads", "1"]) == 0
        assert main(["sweep", "--config", str(cfg), "--out", str(b),
                     "--threads", "3"]) == 0
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
        schema, rows = read_csv(a / "sweep.csv")
        assert schema == "sweep/1" and len(rows) == 3
        assert all(float(r["amplitude"]) <= 1e-2 for r in rows)

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write(tmp_path, FOURIER_CAT + """
[run]
seed = 11

[sweep]
epsilon = 1e-2
trials = 2
n = 2000
""")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["sweep", "--config", str(cfg), "--out", str(b),
                     "--seed", "12"]) == 0
        assert (a / "sweep.csv").read_bytes() != (b / "sweep.csv").read_bytes()
        assert json.loads((b / "sweep_summary.json").read_text())["seed"] == 12

    def test_env_var_default_outdir(self, tmp_path, monkeypatch):
        out = tmp_path / "from_env"
        monkeypatch.setenv("COCYCLELAB_OUTDIR", str(out))
        cfg = write(tmp_path, ROTATION_TABLE + "\n[lyap]\nn = 50\n")
        assert main(["lyap", "--config", str(cfg)]) == 0
        assert (out / "lyap.csv").exists()

    def test_disintegration_csv(self, tmp_path):
        cfg = write(tmp_path, ROTATION_TABLE + """
[disintegration]
pairs = 6
depth = 3
n_orbits = 20
n_iter = 300
spectrum_n = 1500
""")
        assert main(["disintegration", "--config", str(cfg),
                     "--out", str(tmp_path), "--seed", "2"]) == 0
        schema, rows = read_csv(tmp_path / "disintegration.csv")
        assert schema == "disintegration/1"
        assert all(float(r["distance"]) >= 0.0 for r in rows)
        summary = json.loads((tmp_path / "disintegration_summary.json").read_text())
        assert summary["pairs"] + summary["skipped"] == 6


class TestSelftest:
    def test_clean_run(self, capsys):
        buf = io.StringIO()
        assert selftest(False, out=buf) == 0
        text = buf.getvalue()
        assert text.count("\nok") + text.startswith("ok") >= 20
        assert "0 failures" in text
        n_cases = int(text.rsplit("selftest: ", 1)[1].split(" cases")[0])
        assert n_cases >= 20

    def test_corrupted_tolerance_fails_membership(self):
        buf = io.StringIO()
        assert selftest(True, out=buf) == 1
        text = buf.getvalue()
        fails = [l for l in text.splitlines() if l.startswith("FAIL")]
        assert len(fails) >= 2
        assert all("member" in l for l in fails)

    def test_cli_entry(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "failures" in out


class TestCsvFormat:
    def test_float_roundtrip(self, tmp_path):
        p = tmp_path / "t.csv"
        vals = [1.0 / 3.0, 2.0 ** -52, math.pi]
        write_csv(p, "t", 1, ["a", "b", "c"], [vals])
        _, rows = read_csv(p)
        assert [float(v) for v in rows[0].values()] == vals

    def test_bool_and_int(self, tmp_path):
        p = tmp_path / "t.csv"
        write_csv(p, "t", 1, ["f", "i"], [[True, np.int64(3)]])
        assert p.read_text().splitlines()[2] == "true,3"
