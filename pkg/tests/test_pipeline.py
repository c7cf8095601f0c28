import filecmp
import json
import math
import os
from types import SimpleNamespace

import pytest

from explaudit import dataset as ds
from explaudit import pipeline
from explaudit import stats
from explaudit import textmodel as tm
from explaudit.errors import ConfigError, DataError


def _fast_cfg(**kwargs):
    defaults = dict(
        methods=("GRAD", "GXI"),
        metrics=("gini", "sparsity"),
        runs=1,
        train_cfg=tm.TrainConfig(epochs=2, warmup_steps=5),
        model_cfg=tm.ModelConfig(embed_dim=8, hidden_dim=8),
    )
    defaults.update(kwargs)
    return pipeline.AuditConfig(**defaults)


class TestAuditConfig:
    def test_methods_uppercased(self):
        cfg = _fast_cfg(methods=("grad", "shap"))
        assert cfg.methods == ("GRAD", "SHAP")

    @pytest.mark.parametrize("kwargs", [
        {"runs": 0}, {"methods": ()}, {"metrics": ()},
        {"methods": ("GRAD", "ANCHOR")}, {"metrics": ("gini", "auc")},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            _fast_cfg(**kwargs)

    def test_content_hash_stable_and_sensitive(self):
        assert _fast_cfg().content_hash() == _fast_cfg().content_hash()
        assert _fast_cfg().content_hash() != \
            _fast_cfg(alpha=0.01).content_hash()


class TestRunSingleAudit:
    def test_sample_and_disparity_counts(self):
        # 2 test pairs x 2 variants x 1 method x 1 metric -> 4 samples
        records = ds.generate_synthetic_paired(4, seed=0)
        cfg = _fast_cfg(methods=("GRAD",), metrics=("gini",),
                        split_ratio=0.5)
        run = pipeline.run_single_audit(records, cfg, run_seed=1)
        assert len(run.samples) == 4
        assert len(run.disparity) == 1
        assert ("GRAD", "gini") in run.disparity

    def test_one_explanation_per_method_and_input(self):
        records = ds.generate_synthetic_paired(10, seed=0)
        cfg = _fast_cfg(methods=("GRAD", "IG"), metrics=("gini", "sparsity"))
        run = pipeline.run_single_audit(records, cfg, run_seed=2)
        n_test_inputs = len({(s.pair_id, s.subgroup) for s in run.samples})
        assert run.explain_calls == 2 * n_test_inputs
        assert len(run.samples) == 4 * n_test_inputs

    def test_tied_embeddings_null(self):
        # weight tying makes paired variants tokenize identically, so all
        # per-pair scores match and no cell can be significant
        records = ds.generate_synthetic_paired(15, "NONE", seed=3)
        cfg = _fast_cfg(tied_embeddings=True,
                        metrics=("gini", "sparsity", "comprehensiveness"))
        run = pipeline.run_single_audit(records, cfg, run_seed=4)
        by_key = {}
        for s in run.samples:
            by_key.setdefault((s.pair_id, s.method, s.metric), {})[
                s.subgroup] = s.value
        for values in by_key.values():
            assert values["MALE"] == values["FEMALE"]
        assert not any(r.significant for r in run.disparity.values())

    def test_single_label_rejected(self):
        records = [ds.UnpairedRecord(f"text number {i}", "MALE", "x")
                   for i in range(10)]
        records += [ds.UnpairedRecord(f"other text {i}", "FEMALE", "x")
                    for i in range(10)]
        with pytest.raises(DataError, match="labels"):
            pipeline.run_single_audit(records, _fast_cfg(), run_seed=0)

    def test_threaded_matches_serial(self, monkeypatch):
        records = ds.generate_synthetic_paired(8, seed=5)
        cfg = _fast_cfg()
        serial = pipeline.run_single_audit(records, cfg, run_seed=6)
        monkeypatch.setenv("AUDIT_THREADS", "3")
        threaded = pipeline.run_single_audit(records, cfg, run_seed=6)
        assert [(s.pair_id, s.subgroup, s.method, s.metric, s.value)
                for s in serial.samples] == \
            [(s.pair_id, s.subgroup, s.method, s.metric, s.value)
             for s in threaded.samples]


class TestRunAudit:
    def test_run_seeds_increment(self):
        records = ds.generate_synthetic_paired(8, seed=0)
        report = pipeline.run_audit(records, _fast_cfg(runs=3, base_seed=10))
        assert [r.seed for r in report.runs] == [10, 11, 12]
        assert [r.run_index for r in report.runs] == [0, 1, 2]
        assert report.aggregate.n_runs == 3


def _fake_result(significant, d, direction, considerable=None):
    if considerable is None:
        considerable = significant and d is not None and abs(d) >= 0.2
    return stats.DisparityResult(
        u_statistic=1.0, p_value=0.01 if significant else 0.5,
        cohens_d=d, significant=significant, considerable=considerable,
        direction=direction, n_a=5, n_b=5, mode="exact",
        metric="gini", method="IG")


def _fake_run(idx, results):
    return SimpleNamespace(run_index=idx, disparity=results)


class TestAggregation:
    def test_all_significant_negative_d(self):
        runs = [_fake_run(i, {("IG", "gini"):
                              _fake_result(True, -0.5, "FEMALE")})
                for i in range(5)]
        agg = pipeline.aggregate_reports(runs)
        cell = agg.cells[("IG", "gini")]
        assert cell.significant_runs == 5
        assert cell.considerable_runs == 5
        assert cell.direction == "FEMALE"
        assert cell.mean_d == pytest.approx(-0.5)
        assert agg.significant_fraction == 1.0

    def test_disjoint_significance_fraction(self):
        runs = [_fake_run(0, {("IG", "gini"):
                              _fake_result(True, 0.4, "MALE")}),
                _fake_run(1, {("IG", "gini"):
                              _fake_result(False, None, "MALE")})]
        agg = pipeline.aggregate_reports(runs)
        assert agg.significant_fraction == 0.5

    def test_majority_direction(self):
        runs = [_fake_run(i, {("IG", "gini"): _fake_result(True, d, direc)})
                for i, (d, direc) in enumerate(
                    [(0.3, "MALE"), (-0.4, "FEMALE"), (-0.5, "FEMALE")])]
        agg = pipeline.aggregate_reports(runs)
        assert agg.cells[("IG", "gini")].direction == "FEMALE"

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            pipeline.aggregate_reports([])

    def test_infinite_d_excluded_from_mean(self):
        runs = [_fake_run(0, {("IG", "gini"):
                              _fake_result(True, math.inf, "MALE")}),
                _fake_run(1, {("IG", "gini"):
                              _fake_result(True, 0.6, "MALE")})]
        agg = pipeline.aggregate_reports(runs)
        assert agg.cells[("IG", "gini")].mean_d == pytest.approx(0.6)


class TestCellFormatting:
    def test_not_significant(self):
        cell = pipeline.CellAggregate(0, 0, None, None, None)
        assert cell.format_cell() == "(0) NA"

    def test_paper_style_numbers(self):
        cell = pipeline.CellAggregate(3, 2, -0.42, 0.10, "MALE")
        assert cell.format_cell() == "(3) -.42±.10"
        cell = pipeline.CellAggregate(5, 5, -1.68, 1.28, "FEMALE")
        assert cell.format_cell() == "(5) -1.68±1.28"


class TestSaveReport:
    def test_report_files_and_determinism(self, tmp_path):
        records = ds.generate_synthetic_paired(8, seed=0)
        cfg = _fast_cfg(runs=2)
        d1, d2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        pipeline.save_report(pipeline.run_audit(records, cfg), d1)
        pipeline.save_report(pipeline.run_audit(records, cfg), d2)
        expected = {"config.json", "scores.csv", "disparity.json",
                    "aggregate.json", "bias.json"}
        assert set(os.listdir(d1)) == expected
        for name in sorted(expected):
            assert filecmp.cmp(os.path.join(d1, name),
                               os.path.join(d2, name), shallow=False), name

    def test_config_json_contents(self, tmp_path):
        records = ds.generate_synthetic_paired(8, seed=0)
        cfg = _fast_cfg(runs=2, base_seed=7)
        out = str(tmp_path / "rep")
        pipeline.save_report(pipeline.run_audit(records, cfg), out)
        with open(os.path.join(out, "config.json")) as f:
            doc = json.load(f)
        assert doc["run_seeds"] == [7, 8]
        assert doc["config_hash"] == cfg.content_hash()
        assert doc["config"]["alpha"] == 0.05

    def test_no_leftover_tmp_dir(self, tmp_path):
        records = ds.generate_synthetic_paired(8, seed=0)
        out = str(tmp_path / "rep")
        pipeline.save_report(
            pipeline.run_audit(records, _fast_cfg()), out)
        assert not os.path.exists(out + ".tmp")

    def test_overwrites_existing_report(self, tmp_path):
        records = ds.generate_synthetic_paired(8, seed=0)
        out = str(tmp_path / "rep")
        pipeline.save_report(pipeline.run_audit(records, _fast_cfg()), out)
        pipeline.save_report(pipeline.run_audit(records, _fast_cfg()), out)
        assert os.path.exists(os.path.join(out, "scores.csv"))
