import numpy as np
import pytest

from gafadapt.evaluation import (
    EvalConfig,
    anees_series,
    evaluate,
    rmse_series,
    write_param_hist_csv,
    write_per_step_csv,
    write_summary_csv,
    write_tradeoff_csv,
)
from gafadapt.filters import ukf_params
from gafadapt.models import simulate, ungm
from gafadapt.policy import DefaultPolicy, FixedPolicy, MyopicPolicy, run_filter
from gafadapt.rl import CostSpec, action_set_from_values
from gafadapt.rng import FILTER, SIM, derive_seed
from helpers import kf_filter_vectorized, linear_model


class TestRmseSeries:
    def test_three_four_five(self):
        errors = np.array([[[3.0, 4.0]]])  # one run, one step
        np.testing.assert_allclose(rmse_series(errors), [5.0])

    def test_all_zero(self):
        np.testing.assert_array_equal(rmse_series(np.zeros((4, 7, 2))), np.zeros(7))

    def test_sign_symmetry(self):
        errors = np.array([[[1.0]], [[-1.0]]])  # two runs, scalar error
        np.testing.assert_allclose(rmse_series(errors), [1.0])


class TestAneesSeries:
    def test_error_equal_to_posterior_std(self):
        errors = np.full((3, 5, 1), 2.0)
        covs = np.full((3, 5, 1, 1), 4.0)
        series, excluded = anees_series(errors, covs)
        np.testing.assert_allclose(series, np.ones(5))
        assert excluded == []

    def test_zero_errors(self):
        errors = np.zeros((2, 4, 2))
        covs = np.broadcast_to(np.eye(2), (2, 4, 2, 2)).copy()
        series, _ = anees_series(errors, covs)
        np.testing.assert_array_equal(series, np.zeros(4))

    def test_singular_covariance_excluded(self):
        errors = np.ones((2, 3, 2))
        covs = np.broadcast_to(np.eye(2), (2, 3, 2, 2)).copy()
        covs[1] = -np.eye(2)  # unfactorizable for every jitter rung
        series, excluded = anees_series(errors, covs)
        assert excluded == [1]
        np.testing.assert_allclose(series, np.full(3, 2.0))

    def test_exact_kf_chi_square_band(self):
        # 1e4 Monte Carlo runs through the reference KF: the normalized
        # squared error has mean n_x, so ANEES_k must sit in the CLT band
        model = linear_model(horizon=5)
        n_runs = 10_000
        states = np.empty((n_runs, model.horizon, 2))
        meas = np.empty((n_runs, model.horizon, 1))
        for r in range(n_runs):
            traj = simulate(model, 50_000 + r)
            states[r] = traj.states
            meas[r] = traj.measurements
        errors, covs, _ = kf_filter_vectorized(model, states, meas)
        series, excluded = anees_series(
            errors, np.broadcast_to(covs, (n_runs, *covs.shape)).copy()
        )
        assert excluded == []
        assert np.all(series >= 0.95 * model.n_x)
        assert np.all(series <= 1.05 * model.n_x)


def _ungm_cfg(policies, n_runs=20, seed=5, **kw):
    return EvalConfig(
        n_runs=n_runs,
        master_seed=seed,
        policies=policies,
        cost_spec=CostSpec("nis"),
        **kw,
    )


class TestEvaluate:
    def test_identical_policies_identical_reports(self):
        model = ungm().with_horizon(30)
        cfg = _ungm_cfg(
            [("a", FixedPolicy(ukf_params(1.0))), ("b", FixedPolicy(ukf_params(1.0)))]
        )
        rep = evaluate(model, "ukf", cfg)
        np.testing.assert_array_equal(rep.results["a"].rmse, rep.results["b"].rmse)
        np.testing.assert_array_equal(rep.results["a"].anees, rep.results["b"].anees)
        assert rep.results["a"].traj_digest == rep.results["b"].traj_digest

    def test_single_run_matches_pointwise_values(self):
        model = ungm().with_horizon(25)
        cfg = _ungm_cfg([("default", DefaultPolicy())], n_runs=1, seed=9)
        rep = evaluate(model, "ukf", cfg)

        traj = simulate(model, derive_seed(9, SIM, 0))
        run = run_filter(
            model, "ukf", DefaultPolicy(), traj, CostSpec("nis"), derive_seed(9, FILTER, 0)
        )
        means = np.array([rec.update.posterior.mean for rec in run.records])
        err = traj.states - means
        np.testing.assert_allclose(
            rep.results["default"].rmse, np.linalg.norm(err, axis=1), atol=1e-12
        )
        costs = np.array([rec.cost for rec in run.records])
        np.testing.assert_allclose(rep.results["default"].mean_cost, costs, atol=1e-12)

    def test_common_random_numbers_across_policies(self):
        model = ungm().with_horizon(20)
        cfg = _ungm_cfg(
            [
                ("default", DefaultPolicy()),
                ("fixed:0", FixedPolicy(ukf_params(0.0))),
                ("myopic", MyopicPolicy(action_set_from_values("ukf", [0, 2]))),
            ]
        )
        rep = evaluate(model, "ukf", cfg)
        digests = {res.traj_digest for res in rep.results.values()}
        assert len(digests) == 1

    def test_policy_order_invariance(self):
        model = ungm().with_horizon(20)
        pa = [("a", DefaultPolicy()), ("b", FixedPolicy(ukf_params(0.5)))]
        pb = [("b", FixedPolicy(ukf_params(0.5))), ("a", DefaultPolicy())]
        ra = evaluate(model, "ukf", _ungm_cfg(pa))
        rb = evaluate(model, "ukf", _ungm_cfg(pb))
        for name in ("a", "b"):
            np.testing.assert_array_equal(ra.results[name].rmse, rb.results[name].rmse)
            np.testing.assert_array_equal(ra.results[name].anees, rb.results[name].anees)

    def test_parallel_workers_match_sequential(self):
        model = ungm().with_horizon(15)
        policies = [("default", DefaultPolicy())]
        seq = evaluate(model, "ukf", _ungm_cfg(policies, n_runs=8))
        par = evaluate(model, "ukf", _ungm_cfg(policies, n_runs=8, parallel_workers=2))
        np.testing.assert_array_equal(
            seq.results["default"].rmse, par.results["default"].rmse
        )
        np.testing.assert_array_equal(
            seq.results["default"].anees, par.results["default"].anees
        )

    def test_param_histogram_counts(self):
        model = ungm().with_horizon(12)
        action_set = action_set_from_values("ukf", [0, 2])
        cfg = _ungm_cfg([("myopic", MyopicPolicy(action_set))], n_runs=6)
        rep = evaluate(model, "ukf", cfg)
        hist = rep.results["myopic"].param_hist
        assert hist.shape == (12, 2)
        np.testing.assert_array_equal(hist.sum(axis=1), np.full(12, 6))

    def test_myopic_choice_minimizes_per_step_candidates(self):
        model = ungm().with_horizon(20)
        action_set = action_set_from_values("ukf", [0, 0.5, 1, 2, 3, 5])
        spec = CostSpec("nis")
        for seed in range(5):
            traj = simulate(model, 900 + seed)
            out = run_filter(model, "ukf", MyopicPolicy(action_set), traj, spec, seed)
            for rec in out.records:
                assert rec.cost == rec.candidate_costs.min()
                assert np.all(rec.cost <= rec.candidate_costs)

    def test_time_average_warmup_excludes_leading_steps(self):
        model = ungm().with_horizon(15)
        base = _ungm_cfg([("default", DefaultPolicy())], n_runs=4)
        rep0 = evaluate(model, "ukf", base)
        warm = _ungm_cfg([("default", DefaultPolicy())], n_runs=4, time_avg_warmup=5)
        rep5 = evaluate(model, "ukf", warm)
        res0, res5 = rep0.results["default"], rep5.results["default"]
        np.testing.assert_array_equal(res0.rmse, res5.rmse)
        assert res5.time_avg_rmse == pytest.approx(float(np.mean(res0.rmse[5:])))
        assert res5.time_avg_anees == pytest.approx(float(np.mean(res0.anees[5:])))

    def test_regression_values_fixed_by_seed(self):
        # frozen smoke oracle: deterministic given master_seed
        model = ungm().with_horizon(200)
        cfg = EvalConfig(
            n_runs=100,
            master_seed=424242,
            policies=[("fixed:2", FixedPolicy(ukf_params(2.0)))],
            cost_spec=CostSpec("nis"),
        )
        rep = evaluate(model, "ukf", cfg)
        res = rep.results["fixed:2"]
        assert np.isfinite(res.time_avg_rmse) and np.isfinite(res.time_avg_anees)
        assert res.time_avg_rmse == pytest.approx(6.8841063829485325, rel=1e-9)
        assert res.time_avg_anees == pytest.approx(319.5864666726281, rel=1e-9)
        assert res.time_avg_cost == pytest.approx(7480.884601816394, rel=1e-9)
        assert res.divergence_count == 0
        assert (
            res.traj_digest
            == "6450c274ac5e0211a3a2aec5ab3c6806c82bd5d3c32b45a9e1821b84705fcf41"
        )


class TestCsvExport:
    def test_headers_and_determinism(self, tmp_path):
        model = ungm().with_horizon(10)
        cfg = _ungm_cfg([("default", DefaultPolicy())], n_runs=4)
        rep = evaluate(model, "ukf", cfg)

        paths = {
            "per_step": tmp_path / "per_step.csv",
            "summary": tmp_path / "summary.csv",
            "tradeoff": tmp_path / "tradeoff.csv",
            "hist": tmp_path / "hist.csv",
        }
        write_per_step_csv(rep, paths["per_step"])
        write_summary_csv(rep, paths["summary"])
        write_tradeoff_csv(rep, paths["tradeoff"])
        write_param_hist_csv(rep, paths["hist"])

        assert paths["per_step"].read_text().splitlines()[0] == "policy,k,rmse,anees,mean_cost"
        assert paths["summary"].read_text().splitlines()[0].startswith(
            "policy,time_avg_rmse,time_avg_anees,time_avg_cost"
        )
        assert paths["tradeoff"].read_text().splitlines()[0] == (
            "policy,time_avg_rmse,time_avg_anees"
        )
        per_step_rows = paths["per_step"].read_text().splitlines()
        assert len(per_step_rows) == 1 + 10

        before = {k: p.read_bytes() for k, p in paths.items()}
        write_per_step_csv(rep, paths["per_step"])
        write_summary_csv(rep, paths["summary"])
        write_tradeoff_csv(rep, paths["tradeoff"])
        write_param_hist_csv(rep, paths["hist"])
        for k, p in paths.items():
            assert p.read_bytes() == before[k]

    def test_normalized_anees_option(self, tmp_path):
        model = linear_model(horizon=8)
        cfg = EvalConfig(
            n_runs=3,
            master_seed=2,
            policies=[("default", DefaultPolicy())],
            cost_spec=CostSpec("nis"),
        )
        rep = evaluate(model, "ukf", cfg)
        raw, norm = tmp_path / "raw.csv", tmp_path / "norm.csv"
        write_tradeoff_csv(rep, raw)
        write_tradeoff_csv(rep, norm, normalized_anees=True)
        raw_val = float(raw.read_text().splitlines()[1].split(",")[2])
        norm_val = float(norm.read_text().splitlines()[1].split(",")[2])
        assert norm_val == pytest.approx(raw_val / 2.0)
