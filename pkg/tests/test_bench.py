import json
import os

import numpy as np
import pytest

from causalbench.bench import (
    ConfigError,
    MeasureSpec,
    Task,
    default_ks,
    emit_plot_data,
    expand_tasks,
    load_config,
    load_records,
    parse_config,
    resolve_measure,
    run_experiment,
    run_task,
    stable_seed,
    summarize,
)
from causalbench.cli import main as cli_main


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def tiny_config(tmp_path, **overrides):
    payload = {
        "system": "S1",
        "n_list": [128],
        "measures": ["CGCI"],
        "realizations": 2,
        "master_seed": 42,
        "output_dir": str(tmp_path / "out"),
    }
    payload.update(overrides)
    return write_config(tmp_path, payload)


class TestLoadConfig:
    def test_minimal_defaults(self, tmp_path):
        path = write_config(tmp_path, {"system": "S1", "measures": ["CGCI"]})
        cfg = load_config(path)
        assert cfg.n_list == (512, 1024, 2048, 4096)
        assert cfg.realizations_for(5) == 100  # published schedule
        assert cfg.alpha == 0.05
        resolved = resolve_measure(cfg.measures[0], "S1", 5)
        assert resolved.P == 4

    def test_published_realization_schedule(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"system": "S3", "K_list": [10],
                                                  "measures": ["PMIME"]}))
        assert cfg.realizations_for(10) == 30
        assert cfg.realizations_for(20) == 10

    def test_unknown_measure_named_in_error(self, tmp_path):
        path = write_config(tmp_path, {"system": "S1", "measures": ["PGC"]})
        with pytest.raises(ConfigError, match="PGC"):
            load_config(path)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_field_validation(self, tmp_path):
        bad = [
            {"system": "S9", "measures": ["GCI"]},
            {"system": "S1", "measures": []},
            {"system": "S1", "measures": ["GCI"], "alpha": 1.5},
            {"system": "S1", "measures": ["GCI"], "c_list": [0.3]},
            {"system": "S3", "measures": ["GCI"], "c_list": [2.0]},
            {"system": "S1", "measures": ["GCI"], "typo_field": 1},
            {"system": "S1", "measures": [{"name": "GCI", "bogus": 2}]},
            {"system": "S1", "measures": ["GCI"], "noise": {"kind": "pink"}},
        ]
        for payload in bad:
            with pytest.raises(ConfigError):
                parse_config(payload)

    def test_system_object_form(self, tmp_path):
        cfg = parse_config({"system": {"id": "S4"}, "measures": ["GCI"]})
        assert cfg.system == "S4" and cfg.K_list == (4,)


class TestSeedsAndSchedules:
    def test_stable_seed_is_reproducible_and_sensitive(self):
        a = stable_seed(1, "S1", 5, None, 512, 0)
        assert a == stable_seed(1, "S1", 5, None, 512, 0)
        assert a != stable_seed(1, "S1", 5, None, 512, 1)
        assert a != stable_seed(2, "S1", 5, None, 512, 0)

    def test_ks_schedule(self):
        assert default_ks("S1", 5) == 2
        assert default_ks("S4", 4) == 1
        assert default_ks("S6", 20) == 3
        assert default_ks("S3", 5) == 2
        assert default_ks("S3", 10) == 3
        assert default_ks("S3", 15) == 4
        assert default_ks("S3", 20) == 4
        assert default_ks("S3", 100) == 18
        assert default_ks("S3", 60) == 11

    def test_resolve_measure_fills_system_lag(self):
        m = resolve_measure(MeasureSpec("TE"), "S2", 5)
        assert m.m == 3 and m.P == 3
        m2 = resolve_measure(MeasureSpec("TE", m=2), "S2", 5)
        assert m2.m == 2


class TestRunExperiment:
    def test_record_cardinality(self, tmp_path):
        cfg = load_config(tiny_config(tmp_path, realizations=1,
                                      n_list=[128, 256]))
        records = run_experiment(cfg)
        assert len(records) == 2  # |n_list| x |measures| x 1 realization

    def test_deterministic_output_bytes(self, tmp_path):
        cfg_a = load_config(tiny_config(tmp_path, output_dir=str(tmp_path / "a")))
        cfg_b = load_config(tiny_config(tmp_path, output_dir=str(tmp_path / "b")))
        run_experiment(cfg_a)
        run_experiment(cfg_b)

        def strip_wall(path):
            lines = (path / "records.csv").read_text().splitlines()
            return [",".join(line.split(",")[:-1]) for line in lines]

        assert strip_wall(tmp_path / "a") == strip_wall(tmp_path / "b")
        assert (tmp_path / "a" / "pairs.csv").read_text() == (
            tmp_path / "b" / "pairs.csv"
        ).read_text()

    def test_resume_computes_only_missing(self, tmp_path):
        cfg = load_config(tiny_config(tmp_path, realizations=3))
        full = run_experiment(cfg)
        out = tmp_path / "out"
        # drop the last record and its pair rows, then rerun
        rec_lines = (out / "records.csv").read_text().splitlines()
        (out / "records.csv").write_text("\n".join(rec_lines[:-1]) + "\n")
        pair_lines = (out / "pairs.csv").read_text().splitlines()
        (out / "pairs.csv").write_text("\n".join(pair_lines[:-20]) + "\n")
        resumed = run_experiment(cfg)
        assert len(resumed) == len(full)
        assert [r.key() for r in resumed] == [r.key() for r in full]
        assert [r.seed for r in resumed] == [r.seed for r in full]
        a = [r.score.f1 for r in resumed]
        b = [r.score.f1 for r in full]
        assert a == b

    def test_measures_share_realizations(self, tmp_path):
        cfg = load_config(tiny_config(tmp_path, measures=["GCI", "CGCI"]))
        records = run_experiment(cfg)
        seeds = {}
        for rec in records:
            seeds.setdefault(rec.realization, set()).add(rec.seed)
        for r, s in seeds.items():
            assert len(s) == 1  # same series seed for every measure

    def test_worker_pool_matches_serial(self, tmp_path):
        cfg_s = load_config(tiny_config(tmp_path, output_dir=str(tmp_path / "ser")))
        cfg_p = load_config(tiny_config(tmp_path, output_dir=str(tmp_path / "par")))
        run_experiment(cfg_s, workers=1)
        run_experiment(cfg_p, workers=2)
        a = [(r.key(), r.score.f1) for r in load_records(tmp_path / "ser")]
        b = [(r.key(), r.score.f1) for r in load_records(tmp_path / "par")]
        assert a == b

    def test_run_task_reproducible_from_parameters(self, tmp_path):
        cfg = load_config(tiny_config(tmp_path))
        task = expand_tasks(cfg)[0]
        a = run_task(cfg, task)
        b = run_task(cfg, task)
        assert a.counts == b.counts
        assert a.pairs == b.pairs


class TestSummaries:
    def _records(self, tmp_path):
        cfg = load_config(tiny_config(tmp_path, measures=["GCI", "CGCI"],
                                      realizations=2))
        return run_experiment(cfg)

    def test_summarize_ranks_by_f1(self, tmp_path):
        records = self._records(tmp_path)
        summary = summarize(records)
        f1s = [row["f1"] for row in summary["overall"]]
        assert f1s == sorted(f1s, reverse=True)
        assert {row["measure"] for row in summary["overall"]} == {"GCI", "CGCI"}

    def test_summarize_mean_matches_hand_computation(self, tmp_path):
        records = self._records(tmp_path)
        summary = summarize(records)
        for row in summary["overall"]:
            recs = [r for r in records if r.measure == row["measure"]]
            assert row["f1"] == pytest.approx(np.mean([r.score.f1 for r in recs]))
            assert row["records"] == len(recs)

    def test_plot_data_k_sweep(self, tmp_path):
        records = self._records(tmp_path)
        header, rows = emit_plot_data(records, "k_sweep")
        assert header[0] == "K"
        assert len(rows) == 1 and rows[0][0] == 5

    def test_plot_data_noise_rows(self):
        header, rows = emit_plot_data([], "noise_sweep")
        assert header == ["noise_level"]
        assert rows == []

    def test_plot_data_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            emit_plot_data([], "c_sweep")


class TestCli:
    def test_run_and_summarize(self, tmp_path, capsys):
        path = tiny_config(tmp_path)
        assert cli_main(["run", str(path)]) == 0
        out_dir = str(tmp_path / "out")
        assert cli_main(["summarize", out_dir]) == 0
        captured = capsys.readouterr().out
        assert "CGCI" in captured
        assert (tmp_path / "out" / "summary.json").exists()

    def test_bad_config_exit_code(self, tmp_path):
        path = write_config(tmp_path, {"system": "S1", "measures": ["PGC"]})
        assert cli_main(["run", str(path)]) == 2

    def test_gen_writes_series_and_truth(self, tmp_path):
        out = tmp_path / "henon.csv"
        code = cli_main(["gen", "S3", "--K", "5", "--c", "0.3", "--n", "256",
                         "--seed", "3", "-o", str(out)])
        assert code == 0
        assert out.exists()
        truth = (tmp_path / "henon_truth.csv").read_text().splitlines()
        assert truth[0] == "from,to"
        assert len(truth) == 1 + 6  # header + 2(K-2) links

    def test_plotdata_cli(self, tmp_path):
        path = tiny_config(tmp_path)
        cli_main(["run", str(path)])
        out_dir = str(tmp_path / "out")
        assert cli_main(["plotdata", out_dir, "--kind", "k_sweep"]) == 0
        assert (tmp_path / "out" / "k_sweep.csv").exists()
