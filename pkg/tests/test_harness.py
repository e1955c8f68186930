import json
import math
import os

import pytest
from hypothesis import given
from hypothesis import strategies as st

from drastoch.errors import ConfigError
from drastoch.harness import cli
from drastoch.harness import config as cfgmod
from drastoch.harness.tables import METRIC_COLUMNS, NULL, ResultsTable, mean


def load(mode, **kw):
    return cfgmod.from_dict(kw, mode)


def read_dir(path):
    return {name: open(os.path.join(path, name), "rb").read() for name in sorted(os.listdir(path))}


class TestConfig:
    def test_defaults(self):
        c = load("simulate")
        assert c.n_runs == 10 and c.seed == 0 and c.resolved_world().n_findings == 32

    @pytest.mark.parametrize("raw, path", [
        ({"n_runs": 1}, "n_runs"),
        ({"seed": -1}, "seed"),
        ({"seed": 2 ** 64}, "seed"),
        ({"judge": {"timeout": "slow"}}, "judge.timeout"),
        ({"judge": {"colour": 1}}, "judge.colour"),
        ({"temperatures": {"query": [1, -1]}}, "temperatures.query[1]"),
        ({"temperatures": {"plan": [1]}}, "temperatures.plan"),
        ({"world": "huge"}, "world"),
        ({"steps": [1, 9]}, "steps[1]"),
        ({"lambdas": ["hot"]}, "lambdas[0]"),
        ({"wat": 1}, "wat"),
        ({"mode": "simulate"}, "mode"),
    ])
    def test_field_paths(self, raw, path):
        with pytest.raises(ConfigError) as exc:
            cfgmod.from_dict(raw, "ablate")
        assert exc.value.path == path

    def test_missing_reports(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            load("evaluate", reports=str(tmp_path / "nope.jsonl"))
        assert exc.value.path == "reports"
        with pytest.raises(ConfigError):
            load("evaluate")

    def test_aggregate_input(self):
        assert load("aggregate", input="fixture:table1").input == "fixture:table1"
        with pytest.raises(ConfigError):
            load("aggregate", input="/no/such.csv")

    def test_decompose_step_range(self):
        with pytest.raises(ConfigError) as exc:
            load("decompose", world="tiny", step=3)
        assert exc.value.path == "step"

    def test_hash_ignores_out_and_endpoint_details(self):
        a = load("simulate", out="x")
        b = load("simulate", out="y")
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != load("simulate", seed=1).config_hash()

    def test_overrides(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 4, "n_runs": 5}))
        c = cfgmod.load(str(p), "simulate", {"n_runs": 7, "judge_endpoint": "http://j"})
        assert (c.seed, c.n_runs, c.judge.endpoint) == (4, 7, "http://j")
        assert not c.judge.use_mock()

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(ConfigError) as exc:
            cfgmod.load(str(p), "simulate")
        assert exc.value.path == "--config"


class TestTables:
    values = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False))

    @given(st.lists(st.tuples(st.text("abc,\"\n x", min_size=1), st.lists(values, min_size=8, max_size=8)), max_size=6))
    def test_round_trip(self, rows):
        t = ResultsTable(("question_id",))
        for key, vals in rows:
            t.add({"question_id": key}, dict(zip(METRIC_COLUMNS, vals)))
        back = ResultsTable.from_csv(t.to_csv(), ("question_id",))
        assert back.rows == t.rows
        assert back.columns == t.columns

    def test_null_accuracy(self):
        t = ResultsTable(("q",))
        t.add({"q": "a"}, {"tv_answer": 0.5})
        line = t.to_csv().splitlines()[1]
        assert line.endswith(NULL)

    def test_fixed_header(self):
        assert ResultsTable(("q",)).to_csv() == "q," + ",".join(METRIC_COLUMNS) + "\n"

    def test_mean_skips_null(self):
        assert mean([1.0, None, 3.0]) == 2.0 and mean([None]) is None

    def test_ragged(self):
        with pytest.raises(ValueError):
            ResultsTable.from_csv("a,b\n1\n")


class TestAggregate:
    def test_table1(self):
        out = cli.aggregate_table(cli.load_table("fixture:table1"))
        row = out.rows[0]
        assert abs(row["tv_finding"] - 0.76) <= 0.005
        assert abs(row["tv_citation"] - 0.44) <= 0.005

    def test_table1_matches_table2(self):
        t2 = cli.load_table("fixture:table2").rows[0]
        row = cli.aggregate_table(cli.load_table("fixture:table1")).rows[0]
        assert round(row["tv_finding"], 2) == t2["findings"]
        assert round(row["tv_citation"], 2) == t2["citations"]

    def test_table3(self):
        out = cli.aggregate_table(cli.load_table("fixture:table3"), ["method"])
        avg = {r["method"]: r["avg_tv"] for r in out.rows}
        assert f"{avg['baseline']:.2f}" == "0.69" and f"{avg['combined']:.2f}" == "0.47"
        for r in out.rows:
            assert abs(r["avg_tv"] - r["published_avg_tv"]) <= 0.005 + 1e-12

    def test_grouping(self):
        out = cli.aggregate_table(cli.load_table("fixture:table1"), ["module"])
        assert [r["module"] for r in out.rows] == ["query", "sum", "update"]

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="valid keys: lambda, step, module"):
            cli.aggregate_table(cli.load_table("fixture:table1"), ["colour"])

    def test_unknown_fixture(self):
        with pytest.raises(ConfigError):
            cli.load_table("fixture:table9")


class TestEvaluate:
    def test_identical_reports(self, tmp_path):
        rec = {"question_id": "q", "question": "Who?", "gold_answer": "X",
               "report": "X won the title in 2019 [1].\nAnswer: X\n[1] https://a.org/x"}
        p = tmp_path / "r.jsonl"
        p.write_text("\n".join(json.dumps(dict(rec, run_id=str(i))) for i in range(2)))
        table = cli.cmd_evaluate(load("evaluate", reports=str(p))).table
        q = table.rows[0]
        assert q["tv_answer"] == q["tv_finding"] == q["tv_citation"] == 0.0
        assert q["accuracy"] == 1.0
        assert all(q[c] is not None for c in METRIC_COLUMNS)

    def test_corpus_row_and_skip(self, fixtures_dir):
        res = cli.cmd_evaluate(load("evaluate", reports=str(fixtures_dir / "aab.jsonl")))
        assert [r["question_id"] for r in res.table.rows] == ["aab", "corpus"]
        assert res.table.rows[0]["tv_answer"] == pytest.approx(0.6667, abs=1e-4)
        assert res.warnings and res.warnings[0]["question_id"] == "lonely"

    def test_corpus_is_unweighted_mean(self, fixtures_dir):
        rows = cli.cmd_evaluate(load("evaluate", reports=str(fixtures_dir / "corpus.jsonl"))).table.rows
        per_q, corpus = rows[:-1], rows[-1]
        for c in METRIC_COLUMNS:
            vals = [r[c] for r in per_q if r[c] is not None]
            assert corpus[c] == pytest.approx(math.fsum(vals) / len(vals), abs=1e-12)
        assert per_q[2]["accuracy"] is None  # open-ended question


class TestCommandLine:
    def test_ablate_rows(self, tmp_path, capsys):
        assert cli.main(["ablate", "--out", str(tmp_path), "--runs", "3"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("lambda,step,module,") and len(out) == 25

    def test_replay_is_byte_identical(self, tmp_path):
        args = ["mitigate", "--runs", "6", "--seed", "12"]
        assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
        (da,), (db,) = os.listdir(tmp_path / "a"), os.listdir(tmp_path / "b")
        assert da == db
        assert read_dir(tmp_path / "a" / da) == read_dir(tmp_path / "b" / db)

    def test_refuses_overwrite(self, tmp_path, capsys):
        args = ["simulate", "--out", str(tmp_path)]
        assert cli.main(args) == 0
        assert cli.main(args) == 3
        assert "refusing to overwrite" in capsys.readouterr().err

    def test_config_error_exit(self, tmp_path, capsys):
        assert cli.main(["simulate", "--runs", "1", "--out", str(tmp_path)]) == 2
        assert "n_runs" in capsys.readouterr().err

    def test_decompose_tiny(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"world": "tiny", "step": 2}))
        assert cli.main(["decompose", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        (d,) = [x for x in os.listdir(tmp_path) if x.startswith("decompose-")]
        row = ResultsTable.read(tmp_path / d / "results.csv").rows[0]
        assert row["residual"] <= 1e-9

    def test_metadata(self, tmp_path, fixtures_dir):
        assert cli.main(["evaluate", str(fixtures_dir / "aab.jsonl"), "--out", str(tmp_path)]) == 0
        (d,) = os.listdir(tmp_path)
        meta = json.loads((tmp_path / d / "meta.json").read_text())
        assert d == f"evaluate-{meta['config_hash'][:8]}"
        assert meta["judge_deterministic"] is True and meta["template_versions"]
        assert meta["warnings"]
        for line in (tmp_path / d / "raw.jsonl").read_text().splitlines():
            assert json.loads(line)["config_hash"] == meta["config_hash"]

    def test_aggregate_cli(self, tmp_path, capsys):
        assert cli.main(["aggregate", "fixture:table3", "--group-by", "method", "--out", str(tmp_path)]) == 0
        assert "baseline" in capsys.readouterr().out
        assert cli.main(["aggregate", "fixture:table3", "--group-by", "nope", "--out", str(tmp_path)]) == 2
