import os
import math

import numpy as np
import pytest

from plugins.common.errors import ValidationError, InvariantViolation
from plugins.common.serialization import read_csv, read_json
from plugins.common.errors import ResourceExceededError
from plugins.ht_prior.ht_prior import DecisionFunction, theta_family_objective, bound_curve
from plugins.mc_lab import mc_lab
from plugins.mc_lab.mc_lab import (
    CSV_COLUMNS, ExperimentConfig, run_repetition, simulate, summarize, estimate_curves,
    split_by_parity, optimize_theta, write_outputs, apply_overrides, run_ld_bound,
    run_compare, run_theta_opt, record_rows, simulation_footprint, RECORD_COLUMNS,
)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@pytest.fixture
def config(tiny_experiment):
    return ExperimentConfig.from_dict(tiny_experiment)


@pytest.fixture
def results(config):
    return simulate(config)


class TestConfig:
    def test_from_dict(self, config):
        assert config.n == 4
        assert config.schedule.T == 12
        assert config.repetitions == 4
        assert config.theta == DecisionFunction("erf", 1.0)
        assert len(config.theta_grid) == 5
        assert config.baselines.which == ()
        assert config.resolved_eval_size == 20

    def test_defaults(self):
        config = ExperimentConfig.from_dict({})
        assert config.n == 50
        assert config.repetitions == 40
        assert config.schedule.T == 500
        assert config.resolved_eval_size == 500
        assert config.baselines.lipschitz_L == "empirical"

    def test_seeds(self, tiny_experiment):
        config = ExperimentConfig.from_dict(tiny_experiment)
        assert config.repetition_seed(3) == (11, 3)
        tiny_experiment["fixed_repetition_seed"] = 5
        fixed = ExperimentConfig.from_dict(tiny_experiment)
        assert fixed.repetition_seed(0) == fixed.repetition_seed(3) == (5, 0)

    @pytest.mark.parametrize("key,value,match", [
        ("n", 1, "too small"),
        ("repetitions", 1, "too small"),
        ("theta", "sigmoid", "Unknown decision function"),
        ("baselines", ["xu"], "Invalid entries"),
        ("colour", "blue", "Unknown parameter"),
    ])
    def test_invalid(self, tiny_experiment, key, value, match):
        tiny_experiment[key] = value
        with pytest.raises(ValidationError, match=match):
            ExperimentConfig.from_dict(tiny_experiment)

    def test_model_dims_follow_source(self, config):
        source, model = config.build()
        assert model.input_dim == source.input_dim == 2

    def test_overrides(self, tiny_experiment):
        params = apply_overrides(tiny_experiment, seed=3, out="elsewhere", theta="sign", baselines=[])
        assert params["master_seed"] == 3
        assert params["out_dir"] == "elsewhere"
        assert params["theta"] == "sign"
        assert params["baselines"] == []
        assert tiny_experiment["master_seed"] == 11


class TestRepetition:
    def test_branches_share_initialization(self, config, monkeypatch):
        calls = []
        real_run_ld = mc_lab.run_ld

        def recording_run_ld(model, pair, u, schedule, seed, w0=None, **kwargs):
            calls.append((u, seed, np.array(w0)))
            return real_run_ld(model, pair, u, schedule, seed, w0=w0, **kwargs)

        monkeypatch.setattr(mc_lab, "run_ld", recording_run_ld)
        run_repetition(config, 2)
        assert [u for u, _, _ in calls] == [1, 1, 2, 2]
        assert [seed for _, seed, _ in calls] == [(11, 2, 1, 0), (11, 2, 1, 1), (11, 2, 2, 0), (11, 2, 2, 1)]
        for _, _, w0 in calls[1:]:
            np.testing.assert_array_equal(w0, calls[0][2])

    def test_branch_contents(self, config):
        rep = run_repetition(config, 0)
        first, second = rep.branches
        assert [s.indicator for s in first.replicates] == [1, 1]
        assert [s.indicator for s in second.replicates] == [0, 0]
        assert len(first.baselines) == 2
        for branch in rep.branches:
            assert branch.train01.shape == branch.test01.shape == (12,)
            assert np.all((branch.test01 >= 0) & (branch.test01 <= 1))

    def test_deterministic(self, config):
        a, b = run_repetition(config, 1), run_repetition(config, 1)
        for x, y in zip(a.branches, b.branches):
            for p, q in zip(x.replicates, y.replicates):
                np.testing.assert_array_equal(p.delta_y, q.delta_y)
            np.testing.assert_array_equal(x.test01, y.test01)


    def test_replicates_use_distinct_noise(self, config):
        rep = run_repetition(config, 0)
        for branch in rep.branches:
            first, second = branch.replicates
            assert not np.array_equal(first.zeta_sq, second.zeta_sq)

    def test_replicates_average_inside_square_root(self, tiny_experiment):
        tiny_experiment["noise_replicates"] = 6
        config = ExperimentConfig.from_dict(tiny_experiment)
        rep = run_repetition(config, 0)
        theta = config.theta
        replicated = bound_curve([b.summands(theta) for b in rep.branches], config.n)
        single_draw = bound_curve([s for b in rep.branches for s in b.summands(theta)], config.n)
        assert np.all(replicated >= single_draw - 1e-15)
        assert replicated[-1] > single_draw[-1]
        totals = [b.summands(theta).sum(axis=1).mean() for b in rep.branches]
        assert rep.v_values(theta) == pytest.approx(np.sqrt(totals))

    def test_risks_average_replicates(self, config):
        rep = run_repetition(config, 3)
        for branch in rep.branches:
            assert branch.train01.shape == (12,)
            assert np.all((branch.train01 >= 0) & (branch.train01 <= 1))


class TestSummaries:
    def test_curves(self, config, results):
        result = summarize(config, results)
        curve = result.curve
        assert [r.rep_index for r in results] == [0, 1, 2, 3]
        assert curve.cmi_mean.shape == (12,)
        assert np.all(np.diff(curve.cmi_mean) >= -1e-15)
        assert curve.cmi_opt_mean is not None
        assert result.selection.train_reps == (0, 2)
        assert result.selection.test_reps == (1, 3)
        assert curve.baselines == {}
        assert result.lipschitz_L is None

    def test_generalization_error(self, config, results):
        result = summarize(config, results)
        expected = np.mean([[b.test01[-1] - b.train01[-1] for b in rep.branches] for rep in results])
        assert result.summary()["generalization_error"] == pytest.approx(expected)

    def test_cmi_below_gradient_norm_baseline(self, tiny_experiment):
        tiny_experiment["baselines"] = ["li-lipschitz", "li-data-dependent"]
        result = estimate_curves(ExperimentConfig.from_dict(tiny_experiment))
        assert set(result.curve.baselines) == {"li-lipschitz", "li-data-dependent"}
        assert result.lipschitz_L > 0
        assert np.all(result.curve.cmi_mean <= result.curve.baselines["li-lipschitz"] + 1e-12)
        assert "baseline_note" in result.summary()

    def test_two_repetitions_skip_selection(self, tiny_experiment, tmp_path):
        tiny_experiment["repetitions"] = 2
        result = estimate_curves(ExperimentConfig.from_dict(tiny_experiment))
        assert result.selection is None
        paths = write_outputs(result, str(tmp_path))
        assert "records" not in paths
        assert all(row["cmi_opt_mean"] == "" for row in read_csv(paths["csv"]))


class TestThetaSelection:
    def test_disjoint_halves(self, results):
        train, test = split_by_parity(results)
        assert set(train) == {0, 2} and set(test) == {1, 3}
        train[1] = test[1]
        with pytest.raises(InvariantViolation) as excinfo:
            optimize_theta(train, test, ["erf"], [1.0], 4)
        assert excinfo.value.invariant == "held-out-theta"

    def test_needs_two_per_half(self, results):
        train, test = split_by_parity(results)
        del test[3]
        with pytest.raises(ValidationError, match="two repetitions"):
            optimize_theta(train, test, ["sign"], [1.0], 4)

    def test_constant_half(self, results):
        train, test = split_by_parity(results)
        selection = optimize_theta(train, test, ["constant-half"], [1.0], 4)
        held_out = [b for rep in sorted(test) for b in test[rep]]
        assert selection.a is None
        assert selection.test_bound == pytest.approx(
            theta_family_objective(DecisionFunction("constant-half"), held_out, 4))

    def test_best_family(self, config, results):
        train, test = split_by_parity(results)
        per_family = [optimize_theta(train, test, [kind], config.theta_grid, 4).train_bound
                      for kind in config.theta_families]
        best = optimize_theta(train, test, config.theta_families, config.theta_grid, 4)
        assert best.train_bound == pytest.approx(min(per_family))


    def test_never_worse_than_reference_on_train(self, config, results):
        train, test = split_by_parity(results)
        cells = [cell for rep in sorted(train) for cell in train[rep]]
        selection = optimize_theta(train, test, config.theta_families, config.theta_grid, 4, reference=config.theta)
        assert selection.train_bound <= theta_family_objective(config.theta, cells, 4) + 1e-15

    def test_reference_kept_on_ties(self, results):
        train, test = split_by_parity(results)
        reference = DecisionFunction("erf", 1.0)
        selection = optimize_theta(train, test, ["erf"], [1.0], 4, reference=reference)
        assert selection.theta == reference

    def test_reference_scale_joins_grid(self, results):
        train, test = split_by_parity(results)
        reference = DecisionFunction("tanh", 0.37)
        cells = [cell for rep in sorted(train) for cell in train[rep]]
        selection = optimize_theta(train, test, ["tanh"], [100.0], 4, reference=reference)
        assert selection.train_bound <= theta_family_objective(reference, cells, 4) + 1e-15

    def test_tuned_beats_reference_on_mirrored_halves(self, config, results):
        train, _ = split_by_parity(results)
        mirrored = {rep + 1: cells for rep, cells in train.items()}
        held_out = [cell for rep in sorted(mirrored) for cell in mirrored[rep]]
        selection = optimize_theta(train, mirrored, config.theta_families, config.theta_grid, 4,
                                   reference=config.theta)
        assert selection.test_bound <= theta_family_objective(config.theta, held_out, 4) + 1e-15

    def test_summary_reports_reference_on_held_out(self, config, results):
        result = summarize(config, results)
        held_out = [rep for rep in results if rep.rep_index in (1, 3)]
        expected = np.mean([bound_curve([b.summands(config.theta) for b in rep.branches], 4)[-1]
                            for rep in held_out])
        assert result.summary()["cmi_heldout"] == pytest.approx(expected)


class TestOutputs:
    def test_csv_layout(self, tiny_experiment):
        output = run_ld_bound(tiny_experiment)
        rows = read_csv(output["csv"])
        with open(output["csv"]) as f:
            assert f.readline().strip().split(",") == CSV_COLUMNS
        assert len(rows) == 12
        assert [int(r["t"]) for r in rows] == list(range(1, 13))
        assert all(r["li_dd"] == "" and r["negrea_lip"] == "" for r in rows)
        summary = read_json(output["json"])
        assert summary["config"]["n"] == 4
        assert "elapsed_seconds" not in summary["summary"]

    def test_same_seed_same_bytes(self, tiny_experiment, tmp_path):
        first = run_ld_bound(tiny_experiment, seed=5, out=str(tmp_path / "a"))
        second = run_ld_bound(tiny_experiment, seed=5, threads=1, out=str(tmp_path / "b"))
        with open(first["csv"], "rb") as a, open(second["csv"], "rb") as b:
            assert a.read() == b.read()

    def test_compare_enables_baselines(self, tiny_experiment):
        output = run_compare(tiny_experiment)
        assert output["csv"].endswith("compare.csv")
        assert set(output["summary"]["baselines"]) == {
            "li-lipschitz", "negrea-lipschitz", "negrea-data-dependent", "li-data-dependent"}
        rows = read_csv(output["csv"])
        assert all(r["negrea_dd"] != "" for r in rows)

    def test_theta_opt(self, tiny_experiment):
        output = run_theta_opt(tiny_experiment)
        assert [row["kind"] for row in output["families"]] == ["erf", "tanh", "sign", "constant-half"]
        assert output["train_bound"] == pytest.approx(min(row["train_bound"] for row in output["families"]))
        assert os.path.exists(output["json"])

    def test_records_through_write_outputs(self, config, results, tmp_path):
        result = summarize(config, results)
        paths = write_outputs(result, str(tmp_path), prefix="run", records=True)
        rows = read_csv(paths["records"])
        with open(paths["records"]) as f:
            assert f.readline().strip().split(",") == RECORD_COLUMNS
        assert len(rows) == 4 * 2 * 2 * 12
        first = rows[0]
        assert (first["rep"], first["u_j"], first["replicate"], first["t"]) == ("0", "1", "0", "1")
        assert float(first["delta_y"]) == 0.0
        assert float(first["theta"]) == pytest.approx(0.5)
        assert float(first["test_err_sq"]) == pytest.approx(0.25)

    def test_record_kl_matches_curve(self, config, results):
        rep = results[0]
        rows = [row for row in record_rows([rep], config.theta) if row[1] == 2 and row[2] == 1]
        expected = rep.branches[1].replicates[1].summands(config.theta) / (4.0 * config.n ** 2)
        np.testing.assert_allclose([row[-1] for row in rows], expected, rtol=1e-12)

    def test_simulation_refuses_without_memory(self, config, monkeypatch):
        monkeypatch.setattr(mc_lab, "check_memory_usage", lambda required_bytes=0: False)
        with pytest.raises(ResourceExceededError, match="memory"):
            simulate(config)

    def test_simulation_falls_back_to_one_thread(self, config, monkeypatch):
        _, model = config.build()
        single = simulation_footprint(config, model.dim, 1)
        monkeypatch.setattr(mc_lab, "check_memory_usage", lambda required_bytes=0: required_bytes <= single)
        assert [r.rep_index for r in simulate(config, threads=4)] == [0, 1, 2, 3]

    def test_footprint_grows_with_replicates(self, tiny_experiment):
        base = ExperimentConfig.from_dict(tiny_experiment)
        tiny_experiment["noise_replicates"] = 8
        more = ExperimentConfig.from_dict(tiny_experiment)
        assert simulation_footprint(more, 3, 2) > simulation_footprint(base, 3, 2)


@pytest.mark.slow
def test_desk_configuration(tmp_path):
    config = read_json(os.path.join(CONFIG_DIR, "desk_ld.json"))
    config.update({"repetitions": 6, "out_dir": str(tmp_path)})
    config["schedule"] = dict(config["schedule"], T=100)
    output = run_compare(config)
    summary = output["summary"]
    assert summary["cmi"] >= 0
    assert abs(summary["generalization_error"]) <= 1
    assert summary["cmi"] <= summary["baselines"]["li-lipschitz"]


@pytest.mark.slow
def test_desk_tuned_theta_not_above_reference():
    config = read_json(os.path.join(CONFIG_DIR, "desk_ld.json"))
    config.update({"repetitions": 8, "noise_replicates": 2})
    experiment = ExperimentConfig.from_dict(config)
    summary = summarize(experiment, simulate(experiment)).summary()
    assert summary["cmi_opt"] <= summary["cmi_heldout"] + 2 * summary["cmi_stderr"]


@pytest.mark.slow
def test_tuned_theta_discounts_late_steps():
    config = read_json(os.path.join(CONFIG_DIR, "desk_ld.json"))
    config.update({"repetitions": 8, "noise_replicates": 1, "theta_families": ["erf"]})
    experiment = ExperimentConfig.from_dict(config)
    result = summarize(experiment, simulate(experiment))
    theta = result.selection.theta
    err = np.mean([s.test_error_sq(theta) for rep in result.repetitions
                   for b in rep.branches for s in b.replicates], axis=0)
    quarter = len(err) // 4
    assert err[-quarter:].mean() < err[:quarter].mean()


@pytest.mark.slow
def test_estimate_covers_generalization_error_across_seeds(tiny_experiment):
    tiny_experiment.update({"repetitions": 8, "threads": 1})
    covered = 0
    for seed in range(100):
        tiny_experiment["master_seed"] = seed
        summary = estimate_curves(ExperimentConfig.from_dict(tiny_experiment)).summary()
        slack = 3 * math.sqrt(summary["generalization_error_stderr"] ** 2 + summary["cmi_stderr"] ** 2)
        covered += summary["generalization_error"] <= summary["cmi"] + slack
    assert covered >= 95
