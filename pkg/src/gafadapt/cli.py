"""Command-line interface: simulate trajectories, train policies, evaluate.

Configuration precedence is command-line flags, then the optional YAML
config file, then the built-in paper defaults.  Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import yaml

from .evaluation import (
    EvalConfig,
    evaluate,
    write_param_hist_csv,
    write_per_step_csv,
    write_summary_csv,
    write_tradeoff_csv,
)
from .filters import SIF, UKF
from .models import MODELS, simulate, write_trajectory_csv
from .policy import (
    AdaptivePolicy,
    DefaultPolicy,
    FixedPolicy,
    MaxLikelihoodPolicy,
    MyopicPolicy,
    PolicyCheckpoint,
    load_checkpoint,
    save_checkpoint,
)
from .rl import (
    COST_KINDS,
    CostSpec,
    TrainConfig,
    action_set_from_values,
    default_action_set,
    train,
    write_training_log_csv,
)

OUTDIR_ENV = "GAFADAPT_OUTDIR"
DEFAULT_SIF_COMPUTE_WEIGHT = 1.0 / 50.0


class UsageError(Exception):
    """Bad arguments or argument combinations (exit code 2)."""


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must contain a mapping")
    return doc


def _resolve(args, config: dict, key: str, default):
    """Flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _outdir(args, config) -> Path:
    outdir = Path(_resolve(args, config, "outdir", os.environ.get(OUTDIR_ENV, ".")))
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _build_model(name: str, horizon):
    if name not in MODELS:
        raise UsageError(f"unknown model {name!r} (choose from {sorted(MODELS)})")
    model = MODELS[name]()
    if horizon is not None:
        model = model.with_horizon(int(horizon))
    return model


def _check_filter(kind: str) -> str:
    if kind not in (UKF, SIF):
        raise UsageError(f"unknown filter {kind!r} (choose ukf or sif)")
    return kind


def _cost_spec(args, config, filter_kind: str) -> CostSpec:
    kind = _resolve(args, config, "cost", "nis")
    if kind not in COST_KINDS:
        raise UsageError(f"unknown cost {kind!r} (choose from {COST_KINDS})")
    default_w = DEFAULT_SIF_COMPUTE_WEIGHT if filter_kind == SIF else 0.0
    weight = float(_resolve(args, config, "compute_weight", default_w))
    return CostSpec(kind=kind, compute_weight=weight)


def _action_set(args, config, filter_kind: str):
    raw = _resolve(args, config, "action_set", None)
    if raw is None:
        return default_action_set(filter_kind)
    if isinstance(raw, str):
        raw = [v for v in raw.split(",") if v.strip()]
    try:
        return action_set_from_values(filter_kind, [float(v) for v in raw])
    except ValueError as exc:
        raise UsageError(f"bad action set {raw!r}: {exc}") from exc


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_baselines(text: str, filter_kind: str, action_set, model_name: str):
    """Parse the --baselines list into named policies.

    Grammar: comma-separated entries among default, myopic, optimal,
    adaptive:<checkpoint path>, fixed:<value>[,<value>...]; bare numeric
    tokens extend the preceding fixed list.
    """
    policies = []
    fixed_values: list[float] = []

    def flush_fixed():
        for value in fixed_values:
            if filter_kind == UKF:
                params = action_set_from_values(UKF, [value])[0]
            else:
                params = action_set_from_values(SIF, [value])[0]
            policies.append((f"fixed:{params.value:g}", FixedPolicy(params)))
        fixed_values.clear()

    in_fixed = False
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if in_fixed and _is_number(token):
            fixed_values.append(float(token))
            continue
        flush_fixed()
        in_fixed = False
        if token == "default":
            policies.append(("default", DefaultPolicy()))
        elif token == "myopic":
            policies.append(("myopic", MyopicPolicy(action_set)))
        elif token == "optimal":
            if filter_kind != UKF:
                raise UsageError("optimal applies only to ukf")
            policies.append(("optimal", MaxLikelihoodPolicy(action_set)))
        elif token.startswith("adaptive:"):
            path = token.split(":", 1)[1]
            ckpt = load_checkpoint(path)
            if ckpt.model != model_name or ckpt.filter_kind != filter_kind:
                raise RuntimeError(
                    f"checkpoint {path} was trained for {ckpt.model}/{ckpt.filter_kind}, "
                    f"not {model_name}/{filter_kind}"
                )
            taken = {name for name, _ in policies}
            name = "adaptive"
            serial = 2
            while name in taken:
                name = f"adaptive{serial}"
                serial += 1
            policies.append((name, ckpt.policy()))
        elif token.startswith("fixed:"):
            head = token.split(":", 1)[1]
            if not _is_number(head):
                raise UsageError(f"bad fixed baseline value {head!r}")
            fixed_values.append(float(head))
            in_fixed = True
        else:
            raise UsageError(f"unknown baseline {token!r}")
    flush_fixed()
    if not policies:
        raise UsageError("no baselines given")
    return policies


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    model = _build_model(_resolve(args, config, "model", None) or _missing("--model"),
                         _resolve(args, config, "horizon", None))
    seed = int(_resolve(args, config, "seed", 0))
    traj = simulate(model, seed)
    out = args.out or str(_outdir(args, config) / f"{model.name}_trajectory.csv")
    write_trajectory_csv(out, model, traj)
    print(f"wrote {model.horizon}-step trajectory to {out}")
    return 0


def _missing(flag: str):
    raise UsageError(f"{flag} is required")


def cmd_train(args) -> int:
    config = _load_config(args.config)
    model_name = _resolve(args, config, "model", None) or _missing("--model")
    filter_kind = _check_filter(_resolve(args, config, "filter", None) or _missing("--filter"))
    model = _build_model(model_name, _resolve(args, config, "horizon", None))
    action_set = _action_set(args, config, filter_kind)
    cost = _cost_spec(args, config, filter_kind)

    cfg = TrainConfig(
        action_set=action_set,
        cost=cost,
        gamma=float(_resolve(args, config, "gamma", 0.5)),
        n_episodes=int(_resolve(args, config, "episodes", 1000)),
        tau=float(_resolve(args, config, "tau", 0.01)),
        actor_lr=float(_resolve(args, config, "actor_lr", 1e-4)),
        critic_lr=float(_resolve(args, config, "critic_lr", 5e-4)),
        entropy_coeff=float(_resolve(args, config, "entropy_coeff", 1e-3)),
        master_seed=int(_resolve(args, config, "seed", 0)),
        normalization_warmup_episodes=int(_resolve(args, config, "warmup_episodes", 50)),
    )
    result = train(model, filter_kind, cfg)

    outdir = _outdir(args, config)
    ckpt_path = args.out or str(outdir / f"{model.name}_{filter_kind}_policy.json")
    ckpt = PolicyCheckpoint(
        actor=result.actor,
        action_set=action_set,
        scaler=result.scaler,
        model=model.name,
        filter_kind=filter_kind,
        cost=cost,
        gamma=cfg.gamma,
        seed=cfg.master_seed,
    )
    save_checkpoint(ckpt_path, ckpt)
    log_path = args.log or str(outdir / "train_log.csv")
    write_training_log_csv(log_path, result.log)
    if args.figures and result.log:
        from .figures import render_training_figure

        render_training_figure(result.log, outdir / "train_curve.png")
    print(f"wrote checkpoint to {ckpt_path} and training log to {log_path}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    model_name = _resolve(args, config, "model", None) or _missing("--model")
    filter_kind = _check_filter(_resolve(args, config, "filter", None) or _missing("--filter"))
    model = _build_model(model_name, _resolve(args, config, "horizon", None))
    action_set = _action_set(args, config, filter_kind)
    cost = _cost_spec(args, config, filter_kind)
    baselines = _resolve(args, config, "baselines", None) or _missing("--baselines")
    policies = parse_baselines(baselines, filter_kind, action_set, model.name)

    cfg = EvalConfig(
        n_runs=int(_resolve(args, config, "runs", 10000)),
        master_seed=int(_resolve(args, config, "seed", 0)),
        policies=policies,
        cost_spec=cost,
        parallel_workers=int(_resolve(args, config, "workers", 1)),
        time_avg_warmup=int(_resolve(args, config, "time_avg_warmup", 0)),
    )
    report = evaluate(model, filter_kind, cfg)

    outdir = _outdir(args, config)
    prefix = args.prefix
    normalized = bool(args.normalized_anees)
    write_per_step_csv(report, outdir / f"{prefix}per_step.csv", normalized)
    write_summary_csv(report, outdir / f"{prefix}summary.csv", normalized)
    write_tradeoff_csv(report, outdir / f"{prefix}tradeoff.csv", normalized)
    write_param_hist_csv(report, outdir / f"{prefix}param_hist.csv")
    written = [f"{prefix}per_step.csv", f"{prefix}summary.csv",
               f"{prefix}tradeoff.csv", f"{prefix}param_hist.csv"]
    if args.figures:
        from .figures import render_eval_figures

        figs = render_eval_figures(report, outdir, prefix)
        written += [fig.name for fig in figs]
    print(f"wrote {', '.join(written)} to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gafadapt",
        description="Adaptive parameter policies for Gaussian assumed filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (flags take precedence)")
    common.add_argument("--model", help="state-space model: ungm or ctm")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--horizon", type=int, help="override the model horizon T")
    common.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")

    p_sim = sub.add_parser("simulate", parents=[common], help="simulate one trajectory to CSV")
    p_sim.add_argument("--out", help="trajectory CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    filt = argparse.ArgumentParser(add_help=False)
    filt.add_argument("--filter", help="filter kind: ukf or sif")
    filt.add_argument("--cost", help="cost kind: nis, logmaxnis or stateinnov")
    filt.add_argument("--compute-weight", dest="compute_weight", type=float,
                      help="per-iteration compute penalty (SIF only; default 1/50)")
    filt.add_argument("--action-set", dest="action_set",
                      help="comma-separated parameter values")

    p_train = sub.add_parser("train", parents=[common, filt],
                             help="train the adaptive parameter policy")
    p_train.add_argument("--episodes", type=int, help="training episodes (default 1000)")
    p_train.add_argument("--gamma", type=float, help="discount factor (default 0.5)")
    p_train.add_argument("--tau", type=float, help="target critic rate (default 0.01)")
    p_train.add_argument("--actor-lr", dest="actor_lr", type=float)
    p_train.add_argument("--critic-lr", dest="critic_lr", type=float)
    p_train.add_argument("--entropy-coeff", dest="entropy_coeff", type=float)
    p_train.add_argument("--warmup-episodes", dest="warmup_episodes", type=int,
                         help="feature-normalization warm-up episodes (default 50)")
    p_train.add_argument("--out", help="checkpoint path")
    p_train.add_argument("--log", help="training-log CSV path")
    p_train.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                         help="render the training curve figure")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", parents=[common, filt],
                            help="evaluate policies with Monte Carlo runs")
    p_eval.add_argument("--baselines",
                        help="default,fixed:<v,...>,myopic,optimal,adaptive:<path>")
    p_eval.add_argument("--runs", type=int, help="Monte Carlo runs (default 10000)")
    p_eval.add_argument("--workers", type=int, help="parallel evaluation workers")
    p_eval.add_argument("--time-avg-warmup", dest="time_avg_warmup", type=int,
                        help="steps excluded from time averages (default 0)")
    p_eval.add_argument("--prefix", default="eval_", help="output filename prefix")
    p_eval.add_argument("--normalized-anees", dest="normalized_anees",
                        action="store_true", help="report ANEES / n_x")
    p_eval.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                        help="render figures next to the CSVs")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
