import json


import numpy as np
import pytest

from voterlab import cli, config, graphs
from voterlab.config import ConfigInvalid, load_config, parse_family_string

GOOD = """
[graph]
family = "cycle"
n = 16

[init]
rule = "distinct"
kappa = 16

[run]
seed = 7
max_rounds = 100000

[output]
out_dir = "{out}"
prefix = "t"
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_load_and_resolve(self, tmp_path):
        cfg = load_config(write(tmp_path, GOOD.format(out=tmp_path)))
        assert cfg.graph["family"] == "cycle"
        resolved = cfg.resolved()
        assert resolved["version"]
        assert resolved["run"]["seed"] == 7

    def test_unknown_key_rejected(self, tmp_path):
        bad = GOOD.format(out=tmp_path) + "\n[graph.extra]\nfoo = 1\n"
        with pytest.raises(ConfigInvalid):
            load_config(write(tmp_path, bad))

    def test_unknown_section_rejected(self, tmp_path):
        bad = GOOD.format(out=tmp_path) + "\n[mystery]\nx = 1\n"
        with pytest.raises(ConfigInvalid):
            load_config(write(tmp_path, bad))

    def test_missing_graph(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(write(tmp_path, "[run]\nseed = 1\n"))

    def test_syntax_error_has_location(self, tmp_path):
        with pytest.raises(ConfigInvalid) as exc:
            load_config(write(tmp_path, "[graph\nfamily='x'"))
        assert "line" in str(exc.value)

    def test_seed_precedence(self, tmp_path, monkeypatch):
        cfg = load_config(write(tmp_path, GOOD.format(out=tmp_path)))
        assert cfg.seed() == 7
        monkeypatch.setenv(config.SEED_ENV_VAR, "99")
        assert cfg.seed() == 99
        assert cfg.seed(override=3) == 3

    def test_family_strings(self):
        assert parse_family_string("cycle:8").n == 8
        assert parse_family_string("circulant:10:2").degrees[0] == 4
        assert parse_family_string("complete:5").m == 10
        assert parse_family_string("regular:16:3:7").is_connected()
        with pytest.raises(ConfigInvalid):
            parse_family_string("moebius:8")

    def test_provider_kinds(self, tmp_path):
        text = """
[graph]
family = "random-regular"
n = 48
d = 6
seed = 1

[provider]
kind = "cut-adversary"
phi = 0.05

[init]
rule = "split"
"""
        cfg = load_config(write(tmp_path, text))
        prov = cfg.build_provider()
        assert prov.degree_sequence.shape == (48,)


class TestCLI:
    def test_simulate_roundtrip(self, tmp_path):
        cfg_path = write(tmp_path, GOOD.format(out=tmp_path))
        rc = cli.main(["simulate", "--config", cfg_path])
        assert rc == 0
        trace = (tmp_path / "t_trace.csv").read_text()
        assert trace.startswith("t,count0")
        summary = json.loads((tmp_path / "t_summary.json").read_text())
        assert summary["T"] is not None
        assert summary["config"]["graph"]["family"] == "cycle"
        assert summary["resolved_seed"] == 7

    def test_simulate_byte_identical(self, tmp_path):
        cfg_path = write(tmp_path, GOOD.format(out=tmp_path))
        cli.main(["simulate", "--config", cfg_path])
        first = (tmp_path / "t_trace.csv").read_bytes()
        out2 = tmp_path / "again"
        cli.main(["simulate", "--config", cfg_path, "--out-dir", str(out2)])
        assert (out2 / "t_trace.csv").read_bytes() == first

    def test_simulate_bad_config(self, tmp_path, capsys):
        rc = cli.main(["simulate", "--config", write(tmp_path, "[graph]\nzzz = 1\n")])
        assert rc == 1
        assert "zzz" in capsys.readouterr().err

    def test_simulate_max_rounds_exit_code(self, tmp_path):
        text = GOOD.format(out=tmp_path).replace("max_rounds = 100000", "max_rounds = 1")
        rc = cli.main(["simulate", "--config", write(tmp_path, text)])
        assert rc == 2

    def test_conductance_exact(self, capsys):
        rc = cli.main(["conductance", "--family", "cycle:8"])
        assert rc == 0
        assert "exact 0.25" in capsys.readouterr().out

    def test_conductance_fallback(self, capsys):
        rc = cli.main(["conductance", "--family", "regular:200:3:1"])
        assert rc == 0
        captured = capsys.readouterr()
        assert "cheeger [" in captured.out
        assert "falling back" in captured.err

    def test_conductance_disconnected(self, tmp_path, capsys):
        g = graphs.build_graph([(0, 1), (2, 3)], 4)
        path = tmp_path / "dis.txt"
        graphs.write_edge_list(g, path)
        rc = cli.main(["conductance", "--graph", str(path)])
        assert rc == 1

    def test_verify_unknown_suite(self, capsys):
        rc = cli.main(["verify", "nonsense"])
        assert rc == 1
        assert "unknown suite" in capsys.readouterr().err

    def test_verify_runs_and_writes(self, tmp_path, capsys):
        rc = cli.main(
            ["verify", "moments", "--scale", "0.1", "--out-dir", str(tmp_path)]
        )
        assert rc == 0
        verdict = json.loads((tmp_path / "moments.json").read_text())
        assert verdict["claim"] == "moments"
        assert verdict["passed"] is True

    def test_oracle_fixation(self, capsys):
        rc = cli.main(["oracle", "fixation", "--family", "cycle:4", "--state-bits", "1"])
        assert rc == 0
        assert "0.25" in capsys.readouterr().out

    def test_oracle_drift_upper(self, tmp_path, capsys):
        out = tmp_path / "certs.json"
        rc = cli.main(
            ["oracle", "drift-upper", "--family", "cycle:6", "--state-bits", "3",
             "--out", str(out)]
        )
        assert rc == 0
        rows = json.loads(out.read_text())
        assert rows[0]["satisfied"]
        assert set(rows[0]) == {"state_bits", "exact", "bound", "satisfied"}

    def test_scaling_subcommand(self, tmp_path, capsys):
        rc = cli.main(
            ["scaling", "--sizes", "8,16,32,64", "--trials", "120",
             "--seed", "4", "--out-dir", str(tmp_path)]
        )
        assert rc == 0
        assert (tmp_path / "scaling.csv").read_text().startswith("n,median_T")
        summary = json.loads((tmp_path / "scaling.json").read_text())
        assert 1.5 <= summary["exponent"] <= 2.5
