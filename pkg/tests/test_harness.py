import csv
import json
from fractions import Fraction

import pytest

from gaplab import acceptance
from gaplab.config import KINDS, ConfigError, load_config, parse_value, validate
from gaplab.harness import main


def write_ini(tmp_path, kind, params, seed=None):
    lines = ["[experiment]", f"kind = {kind}"]
    if seed is not None:
        lines.append(f"seed = {seed}")
    lines.append("[params]")
    lines += [f"{k} = {v}" for k, v in params.items()]
    path = tmp_path / f"{kind}.ini"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestConfig:
    def test_parse_value(self):
        assert parse_value("3") == 3
        assert parse_value("0.25") == 0.25
        assert parse_value("[[1, 2], [3, 4]]") == [[1, 2], [3, 4]]
        assert parse_value("true") is True
        assert parse_value("decompose") == "decompose"

    def test_defaults_validate(self):
        for kind in KINDS:
            cfg = validate(kind, {}, 1)
            assert cfg.kind == kind and cfg.seed == 1

    def test_load(self, tmp_path):
        path = write_ini(tmp_path, "walk", {"p": 7, "ell": 4}, seed=11)
        cfg = load_config(path)
        assert (cfg.kind, cfg.seed, cfg.params["p"], cfg.params["ell"]) == ("walk", 11, 7, 4)
        assert load_config(path, seed=5).seed == 5

    def test_all_problems_reported(self, tmp_path):
        path = write_ini(tmp_path, "transport", {"A": 2, "foo": 1})
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        text = str(exc.value)
        assert "foo" in text and "A > 2" in text

    def test_cross_field_check(self):
        with pytest.raises(ConfigError, match="j_max"):
            validate("counterexample", {"M": 16, "j_max": 4}, 1)

    def test_kind_mismatch(self, tmp_path):
        path = write_ini(tmp_path, "walk", {})
        with pytest.raises(ConfigError):
            load_config(path, kind="bch")


class TestCLI:
    @pytest.mark.parametrize("kind", KINDS)
    def test_defaults_run(self, kind, tmp_path, capsys):
        out = tmp_path / kind
        assert main([kind, "--out", str(out), "--seed", "3"]) == 0
        rec = json.loads((out / "record.json").read_text())
        assert rec["config"]["kind"] == kind and rec["config"]["seed"] == 3
        assert "wall_time" in json.loads((out / "timing.json").read_text())
        assert str(out / "record.json") in capsys.readouterr().out

    def test_record_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["counterexample", "--out", str(a), "--seed", "7"])
        main(["counterexample", "--out", str(b), "--seed", "7"])
        for name in ("record.json", "decay.csv", "decay_report.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_record(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["counterexample", "--out", str(a), "--seed", "7"])
        main(["counterexample", "--out", str(b), "--seed", "8"])
        assert (a / "record.json").read_bytes() != (b / "record.json").read_bytes()

    def test_transport_two_by_two(self, tmp_path):
        out = tmp_path / "t"
        cfg = write_ini(tmp_path, "transport", {"mode": "decompose", "coupling": "[[1, 1], [1, 1]]"})
        assert main(["transport", "--config", cfg, "--out", str(out)]) == 0
        res = json.loads((out / "record.json").read_text())["results"]
        assert res["terms"] == 2 and res["reconstructs"]
        assert [Fraction(w) for w in res["weights"]] == [Fraction(1, 2)] * 2
        rows = list(csv.reader(open(out / "decomposition.csv", newline="")))
        assert rows[0] == ["term", "weight", "edges"] and len(rows) == 3

    def test_transport_correct_mode(self, tmp_path):
        out = tmp_path / "c"
        cfg = write_ini(tmp_path, "transport", {"mode": "correct", "coupling": "[[1, 1, 1], [1, 1, 1]]",
                                                "perturb": 3})
        assert main(["transport", "--config", cfg, "--out", str(out)]) == 0
        res = json.loads((out / "record.json").read_text())["results"]
        assert res["instances"] == 4 and res["all_within_bound"]

    def test_plot_data(self, tmp_path):
        out = tmp_path / "p"
        main(["bch", "--out", str(out), "--emit-plot-data"])
        assert len(list(out.glob("*.csv"))) >= 1

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = write_ini(tmp_path, "transport", {"A": 2})
        assert main(["transport", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
        err = capsys.readouterr().err
        assert err.startswith("error: invalid configuration:") and "A > 2" in err

    def test_bad_seed(self):
        with pytest.raises(SystemExit):
            main(["walk", "--seed", "-1"])

    def test_verify_unknown_selector(self, capsys):
        assert main(["verify", "nonsense"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_verify_suite(self, tmp_path, capsys):
        assert main(["verify", "entropy", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "[PASS] 13" in out and "1/1 criteria passed" in out
        assert json.loads((tmp_path / "verify.json").read_text())[0]["number"] == 13


class TestSelect:
    def test_selectors(self):
        assert acceptance.select("all") == list(range(1, 14))
        assert acceptance.select("walks") == [10, 11]
        assert acceptance.select("3,1") == [3, 1]  # caller order is kept
        with pytest.raises(KeyError):
            acceptance.select("99")
