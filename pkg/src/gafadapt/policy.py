"""Runtime parameter-selection policies and the adaptive filtering loop.

Five policies are available: the greedy policy read from a trained actor
checkpoint, a fixed parameter, the heuristic default, the myopic per-step
cost minimizer, and the per-step likelihood maximizer (UKF only).

run_filter drives the Gaussian assumed filter over one trajectory under a
policy.  Every moment-transform call draws from its own counter-based
substream keyed by (stream_seed, step, slot), so candidate evaluations are
reproducible, independent of policy evaluation order, and a fixed
parameter run is bit-identical to an adaptive run that always picks it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .filters import (
    SIF,
    UKF,
    GaussianBelief,
    InnovationNotFiniteError,
    TransformParams,
    UpdateResult,
    gaf_predict,
    gaf_update,
)
from .linalg import NotFactorizableError, log_det_psd
from .models import StateSpaceModel, Trajectory
from .nn import Mlp, forward, softmax
from .rl import (
    ActionSet,
    CostSpec,
    FeatureScaler,
    action_set_from_values,
    build_info_state,
    default_params,
    nominal_innovation,
    step_cost,
)
from .rng import substream

CHECKPOINT_VERSION = "1"

# Substream slots within one filter step.
_SLOT_PREDICT = 0
_SLOT_NOMINAL = 1
_SLOT_UPDATE = 2  # + action index


class AllActionsFailedError(RuntimeError):
    """Every candidate parameter produced a failing update."""


@dataclass(eq=False)
class FixedPolicy:
    params: TransformParams


@dataclass(eq=False)
class DefaultPolicy:
    pass


@dataclass(eq=False)
class MyopicPolicy:
    action_set: ActionSet


@dataclass(eq=False)
class MaxLikelihoodPolicy:
    action_set: ActionSet

    def __post_init__(self):
        if self.action_set.kind != UKF:
            raise ValueError("likelihood-optimal baseline applies only to the UKF")


@dataclass(eq=False)
class AdaptivePolicy:
    actor: Mlp
    action_set: ActionSet
    scaler: FeatureScaler


def select_default(model: StateSpaceModel, filter_kind: str) -> TransformParams:
    """Heuristic default: kappa = max(0, 3 - n_x) for UKF, N_it = 10 for SIF."""
    return default_params(filter_kind, model.n_x)


def adaptive_action_index(
    actor: Mlp,
    scaler: FeatureScaler,
    pred: GaussianBelief,
    z: np.ndarray,
    innov_nominal: np.ndarray,
) -> int:
    """Greedy action index; ties resolve to the lowest index via argmax."""
    feats = build_info_state(pred, z, innov_nominal, scaler)
    logits, _ = forward(actor, feats)
    return int(np.argmax(softmax(logits)))


def select_adaptive(
    actor: Mlp,
    scaler: FeatureScaler,
    action_set: ActionSet,
    pred: GaussianBelief,
    z: np.ndarray,
    innov_nominal: np.ndarray,
) -> TransformParams:
    return action_set[adaptive_action_index(actor, scaler, pred, z, innov_nominal)]


class CandidateChoice(NamedTuple):
    index: int
    params: TransformParams
    update: UpdateResult
    scores: np.ndarray


def _candidate_updates(pred, model, z, k, action_set, rng_for_action):
    """Yield (index, update-or-None) for every candidate parameter."""
    for idx, params in enumerate(action_set.values):
        try:
            yield idx, gaf_update(pred, model, z, k, params, rng_for_action(idx))
        except (NotFactorizableError, InnovationNotFiniteError):
            yield idx, None


def select_myopic(
    pred: GaussianBelief,
    model: StateSpaceModel,
    z: np.ndarray,
    k: int,
    action_set: ActionSet,
    cost_spec: CostSpec,
    rng_for_action,
) -> CandidateChoice:
    """Single-step cost minimizer over the action set.

    rng_for_action(index) must return the substream for that candidate.
    Failing candidates count as +inf; ties go to the lowest index.  The
    winning update is returned so the caller can reuse it.
    """
    costs = np.full(len(action_set), np.inf)
    updates = [None] * len(action_set)
    for idx, upd in _candidate_updates(pred, model, z, k, action_set, rng_for_action):
        if upd is not None:
            updates[idx] = upd
            costs[idx] = step_cost(cost_spec, upd, action_set[idx], model.n_z)
    best = int(np.argmin(costs))
    if not np.isfinite(costs[best]):
        raise AllActionsFailedError(f"all candidate updates failed at step {k}")
    return CandidateChoice(best, action_set[best], updates[best], costs)


def select_max_likelihood(
    pred: GaussianBelief,
    model: StateSpaceModel,
    z: np.ndarray,
    k: int,
    action_set: ActionSet,
    rng_for_action=lambda idx: None,
) -> CandidateChoice:
    """Gaussian measurement log-likelihood maximizer (UKF action sets only)."""
    if action_set.kind != UKF:
        raise ValueError("likelihood-optimal selection applies only to the UKF")
    logliks = np.full(len(action_set), -np.inf)
    updates = [None] * len(action_set)
    for idx, upd in _candidate_updates(pred, model, z, k, action_set, rng_for_action):
        if upd is not None:
            updates[idx] = upd
            logliks[idx] = -0.5 * (
                model.n_z * np.log(2.0 * np.pi)
                + log_det_psd(upd.innov_cov)
                + upd.nis
            )
    best = int(np.argmax(logliks))
    if not np.isfinite(logliks[best]):
        raise AllActionsFailedError(f"all candidate updates failed at step {k}")
    return CandidateChoice(best, action_set[best], updates[best], logliks)


@dataclass(frozen=True)
class StepRecord:
    k: int
    action_index: int
    params: TransformParams
    update: UpdateResult
    cost: float
    candidate_costs: Optional[np.ndarray] = None


@dataclass
class FilterRun:
    records: list[StepRecord]
    diverged: bool = False
    diverged_at: Optional[int] = None


def run_filter(
    model: StateSpaceModel,
    filter_kind: str,
    policy,
    trajectory: Trajectory,
    cost_spec: CostSpec,
    stream_seed: int,
) -> FilterRun:
    """Run the Gaussian assumed filter under a parameter policy.

    The state prediction always uses the default transform parameter; the
    policy chooses the update-step parameter.  A factorization failure or
    non-finite estimate flags the run as divergent and stops it.
    """
    predict_params = default_params(filter_kind, model.n_x)
    belief = GaussianBelief(model.init_mean.copy(), model.init_cov.copy())
    records: list[StepRecord] = []
    # Only the stochastic integration rule consumes randomness; skip the
    # (comparatively costly) stream construction for UKF runs.
    needs_rng = filter_kind == SIF

    for k in range(1, model.horizon + 1):
        z = trajectory.measurements[k - 1]
        rng_for_action = (
            (lambda idx: substream(stream_seed, k, _SLOT_UPDATE + idx))
            if needs_rng
            else (lambda idx: None)
        )
        try:
            pred_rng = substream(stream_seed, k, _SLOT_PREDICT) if needs_rng else None
            pred = gaf_predict(belief, model, k - 1, predict_params, pred_rng)
            candidate_costs = None
            if isinstance(policy, FixedPolicy):
                idx, upd = 0, gaf_update(pred, model, z, k, policy.params, rng_for_action(0))
                params, cost = policy.params, step_cost(cost_spec, upd, policy.params, model.n_z)
            elif isinstance(policy, DefaultPolicy):
                params = predict_params
                idx, upd = 0, gaf_update(pred, model, z, k, params, rng_for_action(0))
                cost = step_cost(cost_spec, upd, params, model.n_z)
            elif isinstance(policy, MyopicPolicy):
                choice = select_myopic(
                    pred, model, z, k, policy.action_set, cost_spec, rng_for_action
                )
                idx, params, upd = choice.index, choice.params, choice.update
                cost = float(choice.scores[idx])
                candidate_costs = choice.scores
            elif isinstance(policy, MaxLikelihoodPolicy):
                choice = select_max_likelihood(
                    pred, model, z, k, policy.action_set, rng_for_action
                )
                idx, params, upd = choice.index, choice.params, choice.update
                cost = step_cost(cost_spec, upd, params, model.n_z)
            elif isinstance(policy, AdaptivePolicy):
                nom_rng = substream(stream_seed, k, _SLOT_NOMINAL) if needs_rng else None
                innov_nom = nominal_innovation(pred, model, k, z, filter_kind, nom_rng)
                idx = adaptive_action_index(policy.actor, policy.scaler, pred, z, innov_nom)
                params = policy.action_set[idx]
                upd = gaf_update(pred, model, z, k, params, rng_for_action(idx))
                cost = step_cost(cost_spec, upd, params, model.n_z)
            else:
                raise TypeError(f"unknown policy type {type(policy).__name__}")
        except (NotFactorizableError, InnovationNotFiniteError, AllActionsFailedError):
            return FilterRun(records=records, diverged=True, diverged_at=k)

        if not (
            np.all(np.isfinite(upd.posterior.mean)) and np.all(np.isfinite(upd.posterior.cov))
        ):
            return FilterRun(records=records, diverged=True, diverged_at=k)

        records.append(
            StepRecord(
                k=k,
                action_index=idx,
                params=params,
                update=upd,
                cost=cost,
                candidate_costs=candidate_costs,
            )
        )
        belief = upd.posterior

    return FilterRun(records=records)


# --- checkpoint I/O ---------------------------------------------------------


@dataclass
class PolicyCheckpoint:
    actor: Mlp
    action_set: ActionSet
    scaler: FeatureScaler
    model: str
    filter_kind: str
    cost: CostSpec
    gamma: float
    seed: int
    version: str = CHECKPOINT_VERSION

    def policy(self) -> AdaptivePolicy:
        return AdaptivePolicy(actor=self.actor, action_set=self.action_set, scaler=self.scaler)


def _json_fmt(value) -> str:
    """JSON text with floats at 17 significant digits (exact round-trip)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        return _json_fmt(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(k)}: {_json_fmt(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def save_checkpoint(path, ckpt: PolicyCheckpoint) -> None:
    doc = {
        "version": ckpt.version,
        "model": ckpt.model,
        "filter": ckpt.filter_kind,
        "cost": {"kind": ckpt.cost.kind, "compute_weight": ckpt.cost.compute_weight},
        "gamma": ckpt.gamma,
        "seed": ckpt.seed,
        "action_set": ckpt.action_set.raw_values(),
        "normalization": {
            "shift": ckpt.scaler.shift,
            "scale": ckpt.scaler.scale,
        },
        "actor": {
            "dims": ckpt.actor.layer_dims,
            "weights": [w for w in ckpt.actor.weights],
            "biases": [b for b in ckpt.actor.biases],
        },
    }
    with open(path, "w") as fh:
        fh.write(_json_fmt(doc))
        fh.write("\n")


def load_checkpoint(path) -> PolicyCheckpoint:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    actor = Mlp(
        weights=[np.asarray(w, dtype=float) for w in doc["actor"]["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["actor"]["biases"]],
    )
    action_set = action_set_from_values(doc["filter"], doc["action_set"])
    scaler = FeatureScaler(
        shift=np.asarray(doc["normalization"]["shift"], dtype=float),
        scale=np.asarray(doc["normalization"]["scale"], dtype=float),
    )
    if actor.layer_dims[-1] != len(action_set):
        raise ValueError("checkpoint actor output does not match its action set")
    return PolicyCheckpoint(
        actor=actor,
        action_set=action_set,
        scaler=scaler,
        model=doc["model"],
        filter_kind=doc["filter"],
        cost=CostSpec(kind=doc["cost"]["kind"], compute_weight=float(doc["cost"]["compute_weight"])),
        gamma=float(doc["gamma"]),
        seed=int(doc["seed"]),
        version=doc["version"],
    )
