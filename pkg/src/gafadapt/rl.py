"""On-policy actor-critic TD(0) training of the parameter-selection policy.

Each episode simulates a fresh trajectory and walks the Gaussian assumed
filter along it.  At every step the actor samples a transform parameter
from a softmax over the discrete action set, the realized filtering cost
plus the bootstrapped value of the next information state forms the TD
error, and both networks take one Adam step.  A Polyak-averaged target
critic supplies the bootstrap value.

The information state fed to both networks is the flattened
[predicted mean, trace(P), log det(P), measurement, nominal innovation]
vector under a frozen per-feature affine normalization collected from
warm-up episodes run with the default parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filters import (
    SIF,
    UKF,
    GaussianBelief,
    TransformParams,
    UpdateResult,
    gaf_predict,
    gaf_update,
    innovation,
    measurement_moments,
    sif_params,
    ukf_params,
)
from .linalg import log_det_psd
from .models import StateSpaceModel, simulate
from .nn import (
    AdamState,
    Mlp,
    adam_step,
    backward,
    entropy,
    forward,
    init_mlp,
    polyak_update,
    softmax,
)
from .rng import ACTIONS, FILTER, INIT, TRAIN, WARMUP, derive_seed, substream

NIS_COST = "nis"
LOGMAXNIS_COST = "logmaxnis"
STATEINNOV_COST = "stateinnov"
COST_KINDS = (NIS_COST, LOGMAXNIS_COST, STATEINNOV_COST)

DEFAULT_UKF_KAPPAS = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0)
DEFAULT_SIF_ITERS = (1, 2, 5, 10, 20, 50)

HIDDEN_DIMS = (64, 64)


class TrainingDivergedError(RuntimeError):
    """A network parameter or TD error became non-finite during training."""


@dataclass(frozen=True)
class ActionSet:
    """Ordered discrete set of transform parameters (one kind)."""

    values: tuple[TransformParams, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("action set must not be empty")
        kinds = {p.kind for p in self.values}
        if len(kinds) != 1:
            raise ValueError("action set must hold a single transform kind")

    @property
    def kind(self) -> str:
        return self.values[0].kind

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i) -> TransformParams:
        return self.values[i]

    def labels(self) -> list[str]:
        return [p.label() for p in self.values]

    def raw_values(self) -> list[float]:
        return [p.value for p in self.values]


def default_action_set(filter_kind: str) -> ActionSet:
    if filter_kind == UKF:
        return ActionSet(tuple(ukf_params(k) for k in DEFAULT_UKF_KAPPAS))
    if filter_kind == SIF:
        return ActionSet(tuple(sif_params(n) for n in DEFAULT_SIF_ITERS))
    raise ValueError(f"unknown filter kind {filter_kind!r}")


def action_set_from_values(filter_kind: str, values) -> ActionSet:
    if filter_kind == UKF:
        return ActionSet(tuple(ukf_params(float(v)) for v in values))
    return ActionSet(tuple(sif_params(int(v)) for v in values))


def default_params(filter_kind: str, n_x: int) -> TransformParams:
    """Heuristic deployment defaults: kappa = max(0, 3 - n_x), N_it = 10."""
    if filter_kind == UKF:
        return ukf_params(max(0.0, 3.0 - n_x))
    return sif_params(10)


def nominal_params(filter_kind: str, n_x: int) -> TransformParams:
    """Cheap side-computation parameters used only for feature innovations."""
    if filter_kind == UKF:
        return ukf_params(max(0.0, 3.0 - n_x))
    return sif_params(1)


@dataclass(frozen=True)
class CostSpec:
    """Per-step filtering cost with an optional per-iteration compute penalty."""

    kind: str
    compute_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.compute_weight < 0.0:
            raise ValueError("compute_weight must be >= 0")


def step_cost(spec: CostSpec, update: UpdateResult, action: TransformParams, n_z: int) -> float:
    if spec.kind == NIS_COST:
        cost = (update.nis - n_z) ** 2
    elif spec.kind == LOGMAXNIS_COST:
        cost = math.log1p(max(0.0, update.nis - n_z))
    else:
        cost = float(np.linalg.norm(update.gain @ update.innovation))
    if action.kind == SIF:
        cost += spec.compute_weight * action.n_iter
    return cost


def td_error(cost: float, gamma: float, v_next_target: float, v_now: float) -> float:
    return cost + gamma * v_next_target - v_now


@dataclass(frozen=True)
class FeatureScaler:
    """Frozen per-feature affine normalization (x - shift) / scale."""

    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "FeatureScaler":
        return cls(shift=np.zeros(dim), scale=np.ones(dim))

    @classmethod
    def from_samples(cls, samples: np.ndarray, min_scale: float = 1e-8) -> "FeatureScaler":
        shift = samples.mean(axis=0)
        scale = np.maximum(samples.std(axis=0), min_scale)
        return cls(shift=shift, scale=scale)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.shift) / self.scale


def feature_dim(model: StateSpaceModel) -> int:
    return model.n_x + 2 + 2 * model.n_z


def build_info_state(
    pred: GaussianBelief,
    z: np.ndarray,
    innov_nominal: np.ndarray,
    scaler: FeatureScaler,
) -> np.ndarray:
    """Normalized [pred mean, tr(P), log det(P), z, nominal innovation]."""
    raw = np.concatenate(
        [
            pred.mean,
            [float(np.trace(pred.cov)), log_det_psd(pred.cov)],
            np.asarray(z, dtype=float),
            np.asarray(innov_nominal, dtype=float),
        ]
    )
    return scaler.apply(raw)


def nominal_innovation(pred, model, k, z, filter_kind, rng) -> np.ndarray:
    """Innovation under the nominal (feature-only) transform parameters."""
    params = nominal_params(filter_kind, model.n_x)
    pred_meas, _, _ = measurement_moments(pred, model, k, params, rng)
    return innovation(z, pred_meas, model)


def _sample_with_cache(actor: Mlp, features: np.ndarray, rng: np.random.Generator):
    logits, cache = forward(actor, features)
    probs = softmax(logits)
    idx = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    return min(idx, len(probs) - 1), probs, cache


def sample_action(actor: Mlp, features: np.ndarray, rng: np.random.Generator):
    """Categorical draw from softmax(actor(features)); returns (index, probs)."""
    idx, probs, _ = _sample_with_cache(actor, features, rng)
    return idx, probs


def critic_step(critic: Mlp, opt: AdamState, cache, delta: float) -> None:
    """One Adam descent step on the squared TD error delta^2.

    d(delta^2)/dpsi = -2 delta dV/dpsi, so a positive delta pushes the
    value estimate up.
    """
    gw, gb, _ = backward(critic, cache, np.array([-2.0 * delta]))
    adam_step(critic.parameters(), gw + gb, opt)


def actor_step(
    actor: Mlp,
    opt: AdamState,
    cache,
    action_index: int,
    probs: np.ndarray,
    delta: float,
    entropy_coeff: float,
) -> float:
    """One Adam descent step on delta * log pi(a) - entropy_coeff * H(pi).

    Reinforces actions whose realized cost-to-go beat the critic's
    estimate (delta < 0); the entropy bonus keeps exploration alive.
    Returns the policy entropy at this step.
    """
    ent = entropy(probs)
    onehot = np.zeros(len(probs))
    onehot[action_index] = 1.0
    dlogits = delta * (onehot - probs)
    dlogits += entropy_coeff * probs * (np.log(probs) + ent)
    gw, gb, _ = backward(actor, cache, dlogits)
    adam_step(actor.parameters(), gw + gb, opt)
    return ent


@dataclass
class TrainConfig:
    action_set: ActionSet
    cost: CostSpec
    gamma: float = 0.5
    n_episodes: int = 1000
    tau: float = 0.01
    actor_lr: float = 1e-4
    critic_lr: float = 5e-4
    entropy_coeff: float = 1e-3
    master_seed: int = 0
    normalization_warmup_episodes: int = 50
    hidden_dims: tuple[int, ...] = HIDDEN_DIMS

    def validate(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.action_set.kind == UKF and self.cost.compute_weight != 0.0:
            raise ValueError("compute penalty applies only to SIF action sets")


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    cumulative_cost: float
    mean_entropy: float
    mean_abs_td: float
    target_gap: float


@dataclass
class TrainResult:
    actor: Mlp
    critic: Mlp
    target_critic: Mlp
    scaler: FeatureScaler
    log: list[EpisodeStats] = field(default_factory=list)


def _collect_warmup_features(model, filter_kind, cfg) -> FeatureScaler:
    """Run warm-up episodes with the default parameter and freeze feature stats."""
    dim = feature_dim(model)
    if cfg.normalization_warmup_episodes <= 0:
        return FeatureScaler.identity(dim)
    params = default_params(filter_kind, model.n_x)
    rows = []
    for ep in range(cfg.normalization_warmup_episodes):
        traj = simulate(model, derive_seed(cfg.master_seed, WARMUP, ep))
        rng = substream(cfg.master_seed, WARMUP, ep)
        belief = GaussianBelief(model.init_mean.copy(), model.init_cov.copy())
        pred = gaf_predict(belief, model, 0, params, rng)
        for k in range(1, model.horizon + 1):
            z = traj.measurements[k - 1]
            innov_nom = nominal_innovation(pred, model, k, z, filter_kind, rng)
            rows.append(
                build_info_state(pred, z, innov_nom, FeatureScaler.identity(dim))
            )
            if k == model.horizon:
                break
            upd = gaf_update(pred, model, z, k, params, rng)
            pred = gaf_predict(upd.posterior, model, k, params, rng)
    return FeatureScaler.from_samples(np.asarray(rows))


def _check_finite(nets: list[Mlp], episode: int, step: int):
    for net in nets:
        for p in net.parameters():
            if not np.all(np.isfinite(p)):
                raise TrainingDivergedError(
                    f"non-finite network parameter at episode {episode}, step {step}"
                )


def train(
    model: StateSpaceModel,
    filter_kind: str,
    cfg: TrainConfig,
    cost_fn=None,
) -> TrainResult:
    """Offline Monte Carlo actor-critic training of the parameter policy.

    cost_fn(update, action) may replace the configured step cost (used by
    tests to stub the filter's cost surface).

    Raises:
        TrainingDivergedError: if any parameter or TD error becomes
            non-finite; networks are left as-is for post-mortem.
    """
    cfg.validate()
    if cfg.action_set.kind != filter_kind:
        raise ValueError("action set kind does not match the filter kind")

    dims = [feature_dim(model), *cfg.hidden_dims]
    actor = init_mlp(dims + [len(cfg.action_set)], substream(cfg.master_seed, INIT, 0))
    critic = init_mlp(dims + [1], substream(cfg.master_seed, INIT, 1))
    target = critic.copy()

    scaler = _collect_warmup_features(model, filter_kind, cfg)
    result = TrainResult(actor=actor, critic=critic, target_critic=target, scaler=scaler)
    if cfg.n_episodes <= 0:
        return result

    actor_opt = AdamState.for_params(actor.parameters(), cfg.actor_lr)
    critic_opt = AdamState.for_params(critic.parameters(), cfg.critic_lr)
    predict_params = default_params(filter_kind, model.n_x)
    if cost_fn is None:
        cost_fn = lambda upd, action: step_cost(cfg.cost, upd, action, model.n_z)

    for ep in range(cfg.n_episodes):
        traj = simulate(model, derive_seed(cfg.master_seed, TRAIN, ep))
        filt_rng = substream(cfg.master_seed, FILTER, ep)
        act_rng = substream(cfg.master_seed, ACTIONS, ep)

        belief = GaussianBelief(model.init_mean.copy(), model.init_cov.copy())
        pred = gaf_predict(belief, model, 0, predict_params, filt_rng)
        z = traj.measurements[0]
        innov_nom = nominal_innovation(pred, model, 1, z, filter_kind, filt_rng)
        feats = build_info_state(pred, z, innov_nom, scaler)

        total_cost = 0.0
        entropy_sum = 0.0
        abs_td_sum = 0.0
        steps = model.horizon - 1
        for k in range(1, model.horizon):
            z = traj.measurements[k - 1]
            idx, probs, actor_cache = _sample_with_cache(actor, feats, act_rng)
            action = cfg.action_set[idx]
            upd = gaf_update(pred, model, z, k, action, filt_rng)
            cost = cost_fn(upd, action)

            # Look-ahead prediction doubles as the next step's prediction.
            pred_next = gaf_predict(upd.posterior, model, k, predict_params, filt_rng)
            z_next = traj.measurements[k]
            innov_next = nominal_innovation(
                pred_next, model, k + 1, z_next, filter_kind, filt_rng
            )
            feats_next = build_info_state(pred_next, z_next, innov_next, scaler)

            v_now_vec, critic_cache = forward(critic, feats)
            v_next = float(forward(target, feats_next)[0][0])
            delta = td_error(cost, cfg.gamma, v_next, float(v_now_vec[0]))
            if not math.isfinite(delta):
                raise TrainingDivergedError(
                    f"non-finite TD error at episode {ep}, step {k}"
                )

            critic_step(critic, critic_opt, critic_cache, delta)
            ent = actor_step(
                actor, actor_opt, actor_cache, idx, probs, delta, cfg.entropy_coeff
            )

            polyak_update(target.parameters(), critic.parameters(), cfg.tau)

            total_cost += cost
            entropy_sum += ent
            abs_td_sum += abs(delta)
            pred, feats = pred_next, feats_next

        _check_finite([actor, critic], ep, steps)
        gap = max(
            float(np.max(np.abs(t - c)))
            for t, c in zip(target.parameters(), critic.parameters())
        )
        result.log.append(
            EpisodeStats(
                episode=ep,
                cumulative_cost=total_cost,
                mean_entropy=entropy_sum / steps,
                mean_abs_td=abs_td_sum / steps,
                target_gap=gap,
            )
        )
    return result


def write_training_log_csv(path, log: list[EpisodeStats]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "cumulative_cost", "mean_entropy", "mean_abs_td"])
        for rec in log:
            writer.writerow(
                [
                    rec.episode,
                    repr(rec.cumulative_cost),
                    repr(rec.mean_entropy),
                    repr(rec.mean_abs_td),
                ]
            )
