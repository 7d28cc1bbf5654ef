import csv
import io
import json

import numpy as np
import pytest

from gpexp import cli
from gpexp.binary import g_star
from gpexp.verify import SuiteReport

FAST_SOLVER = "solver:\n  n_restarts: 1\n  polish_evals: 100\n  ga:\n    population: 8\n    generations: 4\n"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


def sim_args(*extra):
    return ("simulate", "--preset", "degenerate", "--n", "6", "--trials", "5", "--rate", "0.2", *extra)


class TestExitCodes:
    def test_verify_ok(self):
        code, out, err = call("verify", "inequality")
        assert code == cli.EXIT_OK
        rows = table(out)
        assert rows and all(r["status"] == "pass" for r in rows)
        assert "[PASS] inequality" in err

    def test_verify_failure(self, monkeypatch):
        import gpexp.verify

        def failing(name, seed=0, solver=None):
            rep = SuiteReport(name)
            rep.add("forced", False)
            return rep

        monkeypatch.setattr(gpexp.verify, "run_suite", failing)
        code, _, err = call("verify", "types")
        assert code == cli.EXIT_VERIFY
        assert "[FAIL] types: forced" in err

    def test_argparse_error(self):
        assert call("exponent", "--model", "avc")[0] == cli.EXIT_CONFIG

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("bogus: 1\n")
        assert call(*sim_args("--config", str(cfg)))[0] == cli.EXIT_CONFIG

    def test_bad_model_in_file(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("model: avc\n")
        assert call(*sim_args("--config", str(cfg)))[0] == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert call(*sim_args("--config", str(tmp_path / "nope.yaml")))[0] == cli.EXIT_CONFIG

    def test_budget(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("codebook_budget: 10\n")
        code, _, err = call("simulate", "--preset", "public", "--n", "12", "--rate", "0.5", "--config", str(cfg))
        assert code == cli.EXIT_BUDGET
        assert "budget" in err

    def test_version(self, capsys):
        assert cli.run(["--version"]) == 0
        assert "gpexp" in capsys.readouterr().out


class TestConfigPrecedence:
    def _seed(self, tmp_path, *argv):
        out = tmp_path / "r.csv"
        code, _, _ = call(*argv, "--out", str(out))
        assert code == 0
        return json.loads((tmp_path / "r.manifest.json").read_text())["config"]["seed"]

    def test_flag_after_file_wins(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("seed: 5\n")
        assert self._seed(tmp_path, *sim_args("--config", str(cfg), "--seed", "7")) == 7

    def test_file_beats_earlier_flag(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("seed: 5\n")
        assert self._seed(tmp_path, *sim_args("--seed", "7", "--config", str(cfg))) == 5

    def test_defaults(self, tmp_path):
        assert self._seed(tmp_path, *sim_args()) == 0


class TestOutputs:
    def test_simulate_files_and_replay(self, tmp_path):
        a = tmp_path / "a.csv"
        assert call(*sim_args("--seed", "3", "--out", str(a)))[0] == 0
        manifest = json.loads((tmp_path / "a.manifest.json").read_text())
        assert manifest["subcommand"] == "simulate" and manifest["seed"] == 3
        assert str(a) in manifest["outputs"]
        rows = table(a.read_text())
        assert list(rows[0]) == ["n", "R", "trials", "p_e_hat", "stderr", "enc_err_rate", "seed"]
        mirror = json.loads((tmp_path / "a.json").read_text())
        assert len(mirror["rows"]) == len(rows)

        b = tmp_path / "b.csv"
        assert call("simulate", "--config", str(tmp_path / "a.manifest.json"), "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_header_has_digest(self):
        _, out, err = call(*sim_args())
        header = [line for line in out.splitlines() if line.startswith("#")]
        assert header[0].startswith("# gpexp ")
        assert any(line.startswith("# config-sha256: ") for line in header)
        assert json.loads(err)["subcommand"] == "simulate"

    def test_capacity_closed_form_column(self, tmp_path):
        # above delta2 the single-letter value needs no time sharing, so both columns agree
        cfg = tmp_path / "c.yaml"
        cfg.write_text(FAST_SOLVER)
        code, out, _ = call("capacity", "--preset", "degenerate", "--D1", "0.4", "0.45", "--config", str(cfg))
        assert code == 0
        rows = table(out)
        assert [float(r["D1"]) for r in rows] == [0.4, 0.45]
        for r in rows:
            np.testing.assert_allclose(float(r["closed_form"]), g_star(float(r["D1"]), 0.2))
            np.testing.assert_allclose(float(r["C_L"]), float(r["closed_form"]), atol=1e-3)

    def test_exponent_and_sweep_columns(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(FAST_SOLVER)
        code, out, _ = call("exponent", "--preset", "degenerate", "--model", "cam", "--rate", "0.1",
                            "--config", str(cfg))
        assert code == 0
        (row,) = table(out)
        assert row["model"] == "cam" and row["preset"] == "degenerate"
        np.testing.assert_allclose(float(row["value"]), g_star(0.4, 0.2) - 0.1, atol=0.01)
        code, out, _ = call("sweep", "--preset", "degenerate", "--model", "cam", "--rates", "0", "0.3",
                            "--config", str(cfg))
        rows = table(out)
        assert code == 0 and len(rows) == 2 and "C_L" in rows[0]
        assert float(rows[1]["value"]) < 1e-3

    def test_bad_solver_setting(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("solver:\n  bogus: 1\n")
        assert call("exponent", "--preset", "degenerate", "--config", str(cfg))[0] == cli.EXIT_CONFIG


@pytest.mark.parametrize("value", ["inf", "0.3"])
def test_budget_parsing(value):
    cfg = cli._normalise("exponent", {"D1": value, "D2": 0.2})
    assert cfg["D1"] == float(value)
