"""Monte Carlo evaluation: RMSE, ANEES and cost series across policies.

All policies inside one evaluate() call are run on the same simulated
trajectories (common random numbers) and the same per-step transform
substreams; the per-policy trajectory digest in the report certifies it.
Divergent runs (factorization failure, non-finite estimate, singular
posterior covariance) are excluded from every series and counted.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve

from .linalg import NotFactorizableError, cholesky_psd
from .models import StateSpaceModel, Trajectory, simulate
from .rl import CostSpec
from .policy import run_filter
from .rng import FILTER, SIM, derive_seed


def rmse_series(errors: np.ndarray) -> np.ndarray:
    """RMSE_k = sqrt(mean over runs of squared error norm); errors is (M, T, n_x)."""
    errors = np.asarray(errors, dtype=float)
    return np.sqrt(np.mean(np.sum(errors**2, axis=2), axis=0))


def _nees_one_run(errors: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Per-step normalized squared error for one run; raises on singular cov."""
    out = np.empty(errors.shape[0])
    for t in range(errors.shape[0]):
        chol, _ = cholesky_psd(covs[t])
        out[t] = float(errors[t] @ cho_solve((chol, True), errors[t]))
    return out


def anees_series(errors: np.ndarray, posterior_covs: np.ndarray):
    """ANEES_k averaged over runs; errors (M, T, n_x), covs (M, T, n_x, n_x).

    Runs whose posterior covariance fails to factorize are excluded and
    reported in the second return value.
    """
    errors = np.asarray(errors, dtype=float)
    posterior_covs = np.asarray(posterior_covs, dtype=float)
    rows = []
    excluded: list[int] = []
    for m in range(errors.shape[0]):
        try:
            rows.append(_nees_one_run(errors[m], posterior_covs[m]))
        except NotFactorizableError:
            excluded.append(m)
    if not rows:
        raise ValueError("all runs excluded: no factorizable posterior covariances")
    return np.mean(np.asarray(rows), axis=0), excluded


@dataclass
class EvalConfig:
    n_runs: int
    master_seed: int
    policies: list  # list of (name, policy) pairs
    cost_spec: CostSpec
    parallel_workers: int = 1
    time_avg_warmup: int = 0

    def validate(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        names = [name for name, _ in self.policies]
        if len(set(names)) != len(names):
            raise ValueError("policy names must be unique")


@dataclass
class PolicyResult:
    name: str
    rmse: np.ndarray
    anees: np.ndarray
    mean_cost: np.ndarray
    time_avg_rmse: float
    time_avg_anees: float
    time_avg_cost: float
    divergence_count: int
    runs_used: int
    traj_digest: str
    action_labels: Optional[list[str]] = None
    param_hist: Optional[np.ndarray] = None  # (T, n_actions) counts


@dataclass
class EvalReport:
    model_name: str
    filter_kind: str
    horizon: int
    n_runs: int
    n_x: int
    results: dict[str, PolicyResult] = field(default_factory=dict)


def _traj_hash(traj: Trajectory) -> bytes:
    h = hashlib.sha256()
    h.update(traj.states.tobytes())
    h.update(traj.measurements.tobytes())
    return h.digest()


def _run_stats_task(args):
    """One (policy, trajectory) filter run reduced to per-step statistics."""
    model, filter_kind, policy, traj, cost_spec, stream_seed, n_actions = args
    run = run_filter(model, filter_kind, policy, traj, cost_spec, stream_seed)
    horizon = model.horizon
    if run.diverged or len(run.records) != horizon:
        return None
    means = np.array([rec.update.posterior.mean for rec in run.records])
    covs = np.array([rec.update.posterior.cov for rec in run.records])
    errors = traj.states - means
    try:
        nees = _nees_one_run(errors, covs)
    except NotFactorizableError:
        return None
    err_sq = np.sum(errors**2, axis=1)
    costs = np.array([rec.cost for rec in run.records])
    actions = np.array([rec.action_index for rec in run.records], dtype=np.int64)
    return err_sq, nees, costs, actions, _traj_hash(traj)


def evaluate(model: StateSpaceModel, filter_kind: str, cfg: EvalConfig) -> EvalReport:
    """Run every policy over the same cfg.n_runs simulated trajectories."""
    cfg.validate()
    horizon = model.horizon
    trajectories = [
        simulate(model, derive_seed(cfg.master_seed, SIM, r)) for r in range(cfg.n_runs)
    ]
    stream_seeds = [derive_seed(cfg.master_seed, FILTER, r) for r in range(cfg.n_runs)]

    report = EvalReport(
        model_name=model.name,
        filter_kind=filter_kind,
        horizon=horizon,
        n_runs=cfg.n_runs,
        n_x=model.n_x,
    )

    for name, policy in cfg.policies:
        action_set = getattr(policy, "action_set", None)
        n_actions = len(action_set) if action_set is not None else 0
        tasks = [
            (model, filter_kind, policy, trajectories[r], cfg.cost_spec, stream_seeds[r], n_actions)
            for r in range(cfg.n_runs)
        ]
        if cfg.parallel_workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.parallel_workers) as pool:
                outcomes = list(pool.map(_run_stats_task, tasks, chunksize=8))
        else:
            outcomes = [_run_stats_task(t) for t in tasks]

        sum_err_sq = np.zeros(horizon)
        sum_nees = np.zeros(horizon)
        sum_cost = np.zeros(horizon)
        hist = np.zeros((horizon, n_actions), dtype=np.int64) if n_actions else None
        digest = hashlib.sha256()
        used = 0
        diverged = 0
        for outcome in outcomes:
            if outcome is None:
                diverged += 1
                continue
            err_sq, nees, costs, actions, thash = outcome
            sum_err_sq += err_sq
            sum_nees += nees
            sum_cost += costs
            if hist is not None:
                hist[np.arange(horizon), actions] += 1
            digest.update(thash)
            used += 1
        if used == 0:
            raise RuntimeError(f"policy {name!r}: every run diverged")

        rmse = np.sqrt(sum_err_sq / used)
        anees = sum_nees / used
        mean_cost = sum_cost / used
        w = cfg.time_avg_warmup
        report.results[name] = PolicyResult(
            name=name,
            rmse=rmse,
            anees=anees,
            mean_cost=mean_cost,
            time_avg_rmse=float(np.mean(rmse[w:])),
            time_avg_anees=float(np.mean(anees[w:])),
            time_avg_cost=float(np.mean(mean_cost[w:])),
            divergence_count=diverged,
            runs_used=used,
            traj_digest=digest.hexdigest(),
            action_labels=action_set.labels() if action_set is not None else None,
            param_hist=hist,
        )
    return report


# --- CSV export ---------------------------------------------------------------


def write_per_step_csv(report: EvalReport, path, normalized_anees: bool = False) -> None:
    import csv

    div = report.n_x if normalized_anees else 1.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "k", "rmse", "anees", "mean_cost"])
        for name, res in report.results.items():
            for t in range(report.horizon):
                writer.writerow(
                    [
                        name,
                        t + 1,
                        repr(float(res.rmse[t])),
                        repr(float(res.anees[t] / div)),
                        repr(float(res.mean_cost[t])),
                    ]
                )


def write_summary_csv(report: EvalReport, path, normalized_anees: bool = False) -> None:
    import csv

    div = report.n_x if normalized_anees else 1.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "policy",
                "time_avg_rmse",
                "time_avg_anees",
                "time_avg_cost",
                "divergence_count",
                "runs_used",
                "trajectory_digest",
            ]
        )
        for name, res in report.results.items():
            writer.writerow(
                [
                    name,
                    repr(res.time_avg_rmse),
                    repr(res.time_avg_anees / div),
                    repr(res.time_avg_cost),
                    res.divergence_count,
                    res.runs_used,
                    res.traj_digest,
                ]
            )


def write_tradeoff_csv(report: EvalReport, path, normalized_anees: bool = False) -> None:
    import csv

    div = report.n_x if normalized_anees else 1.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "time_avg_rmse", "time_avg_anees"])
        for name, res in report.results.items():
            writer.writerow(
                [name, repr(res.time_avg_rmse), repr(res.time_avg_anees / div)]
            )


def write_param_hist_csv(report: EvalReport, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "k", "action", "count"])
        for name, res in report.results.items():
            if res.param_hist is None:
                continue
            for t in range(report.horizon):
                for a, label in enumerate(res.action_labels):
                    writer.writerow([name, t + 1, label, int(res.param_hist[t, a])])
