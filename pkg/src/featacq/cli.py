"""Command-line interface.

Every subcommand takes ``--seed`` (64-bit) and ``--config FILE``. The
config file is INI with a ``[run]`` section whose keys are option names;
values given as flags override the file, which overrides the defaults.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from pathlib import Path

import numpy as np

from .agent import Agent, AgentPolicy, PPOConfig, TrainingDiverged, group_features, train_ppo
from .core import (
    CLASSIFICATION,
    REGRESSION,
    TASK_KINDS,
    TERMINATE,
    AcquisitionTrace,
    DataError,
    Dataset,
    PartialInstance,
    candidate_features,
    dump_jsonl,
    load_csv,
    standardize_dataset,
)
from .env import AcquisitionEnv, EnvConfig
from .eval import accuracy_curve, policy_traces, rmse_curve, write_curve_csv
from .explain import (
    CLASS_PAIR,
    CLUSTER_SET,
    ClusteringModel,
    GoalController,
    fit_clustering,
    render_explanation,
    run_goal_episode,
    write_report,
)
from .greedy import GreedyPolicy, RandomPolicy, StaticPolicy, posterior_summary, prediction_of, static_order
from .ood import ScoreStatsModel, auroc, fit_dose, neg_log_marginal, ood_score
from .surrogate import GaussianMixture, MixtureSurrogate, NumericalError, fit_em, heldout_masked_objective

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
CLUSTER_FORMAT = "featacq.clustering"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# name -> (type, default); options absent from the command line fall back to the config file, then here
OPTIONS = {
    "seed": (int, 0),
    "data": (str, None),
    "out": (str, None),
    "model": (str, None),
    "agent": (str, None),
    "ood_model": (str, None),
    "ood_data": (str, None),
    "kind": (str, CLASSIFICATION),
    "ordering": (str, "none"),
    "components": (int, 3),
    "holdout": (float, 0.2),
    "masks_per_instance": (int, 2),
    "policy": (str, "greedy"),
    "budget": (int, None),
    "metrics": (str, None),
    "workers": (int, 1),
    "num_samples": (int, None),
    "groups": (int, 3),
    "updates": (int, 50),
    "rollout_steps": (int, 2048),
    "minibatch": (int, 256),
    "epochs": (int, 10),
    "lr": (float, 3e-4),
    "hidden": (str, "128,128"),
    "alpha": (float, 0.01),
    "gamma": (float, 0.99),
    "shaping": (bool, True),
    "allow_terminate": (bool, True),
    "ood_weight": (float, 1.0),
    "goal": (str, "none"),
    "clusters": (str, None),
    "n_clusters": (int, 10),
    "goal_C": (int, 5),
    "goal_T": (int, 10),
    "warm_start": (int, 0),
    "log": (str, None),
    "limit": (int, None),
}


def _to_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except configparser.Error as e:
        raise UsageError(f"{path}: {e}") from None
    if not cp.has_section("run"):
        return {}
    out = {}
    for key, raw in cp.items("run"):
        name = key.replace("-", "_")
        if name not in OPTIONS:
            raise UsageError(f"{path}: unknown key {key!r}")
        typ = OPTIONS[name][0]
        try:
            out[name] = _to_bool(raw) if typ is bool else typ(raw)
        except ValueError:
            raise UsageError(f"{path}: bad value for {key}: {raw!r}") from None
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Apply flag > file > default precedence to every option the subcommand defines."""
    file_vals = read_config(args.config) if args.config else {}
    for name, (_, default) in OPTIONS.items():
        if not hasattr(args, name):
            continue
        if getattr(args, name) is None:
            setattr(args, name, file_vals.get(name, default))
    return args


def component_seeds(seed: int, names) -> dict:
    """Independent per-component seeds spawned from one root seed."""
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {n: int(c.generate_state(1, np.uint64)[0]) for n, c in zip(names, children)}


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"missing required option --{n.replace('_', '-')}")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


# ---------------------------------------------------------------- loading

def _load_json(path, what: str):
    p = Path(path)
    if not p.exists():
        raise DataError(f"{what} file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: not valid JSON ({e})") from None


def load_surrogate(path) -> MixtureSurrogate:
    return MixtureSurrogate.from_json(_load_json(path, "model"))


def load_agent(path) -> Agent:
    return Agent.from_json(_load_json(path, "agent"))


def load_ood(path) -> ScoreStatsModel:
    return ScoreStatsModel.from_json(_load_json(path, "OOD model"))


def save_clustering(path, clustering: ClusteringModel) -> None:
    m = clustering.mixture
    data = {"format": CLUSTER_FORMAT, "means": m.means.tolist(), "covs": m.covs.tolist(),
            "log_weights": m.log_weights.tolist()}
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def load_clustering(path) -> ClusteringModel:
    data = _load_json(path, "clustering")
    if data.get("format") != CLUSTER_FORMAT:
        raise DataError(f"{path}: not a clustering file")
    return ClusteringModel(GaussianMixture(data["means"], data["covs"], data["log_weights"], normalize=False))


def load_data(path, surrogate: MixtureSurrogate) -> Dataset:
    """Read a CSV and standardize it with the surrogate's stored parameters."""
    x, y, task, names = load_csv(path, surrogate.kind, surrogate.task.ordering_constraint)
    if x.shape[1] != surrogate.d:
        raise DataError(f"{path}: {x.shape[1]} feature columns but the model expects {surrogate.d}")
    std = surrogate.standardization
    if std is not None:
        x = (x - std.mean[: surrogate.d]) / std.scale[: surrogate.d]
        if surrogate.kind == REGRESSION:
            y = (y - std.mean[-1]) / std.scale[-1]
    if surrogate.kind == CLASSIFICATION and np.any(y >= surrogate.num_classes):
        raise DataError(f"{path}: label outside the model's {surrogate.num_classes} classes")
    return Dataset(x, y, surrogate.task, names)


def _raw_prediction(surrogate: MixtureSurrogate, pred):
    std = surrogate.standardization
    if std is None or pred is None:
        return pred
    if surrogate.kind == REGRESSION:
        return float(pred) * float(std.scale[-1]) + float(std.mean[-1])
    if surrogate.kind != CLASSIFICATION:
        return (np.asarray(pred) * std.scale[: surrogate.d] + std.mean[: surrogate.d]).tolist()
    return pred


def _cap_budget(budget, d: int) -> int:
    if budget is None:
        return d
    if budget < 0:
        raise UsageError("--budget must be >= 0")
    if budget > d:
        print(f"warning: budget {budget} exceeds the {d} available features; capped at {d}", file=sys.stderr)
        return d
    return int(budget)


# ---------------------------------------------------------------- commands

def cmd_fit_surrogate(args) -> int:
    _require(args, "data", "out")
    if args.kind not in TASK_KINDS:
        raise UsageError(f"--kind must be one of {', '.join(TASK_KINDS)}")
    if not 0 <= args.holdout < 1:
        raise UsageError("--holdout must lie in [0, 1)")
    seeds = component_seeds(args.seed, ["split", "fit", "report"])
    x, y, task, names = load_csv(args.data, args.kind, args.ordering)
    ds, std = standardize_dataset(x, y, task, names)
    train, held = ds, None
    if args.holdout > 0:
        held, train = ds.split(args.holdout, np.random.default_rng(seeds["split"]))
    s = fit_em(train, args.components, seed=seeds["fit"], standardization=std)
    s.save(args.out)
    report = {"command": "fit-surrogate", "seed": args.seed, "component_seeds": seeds, "out": args.out,
              "n_train": train.n, "d": ds.d, "kind": task.kind}
    if held is not None and held.n:
        report["n_heldout"] = held.n
        report["heldout_masked_objective"] = heldout_masked_objective(s, held, np.random.default_rng(seeds["report"]))
    _emit(report)
    return EXIT_OK


def cmd_fit_ood(args) -> int:
    _require(args, "model", "data", "out")
    seeds = component_seeds(args.seed, ["stats", "eval"])
    s = load_surrogate(args.model)
    ds = load_data(args.data, s)
    model = fit_dose(s, ds, rng=np.random.default_rng(seeds["stats"]), masks_per_instance=args.masks_per_instance)
    model.save(args.out)
    report = {"command": "fit-ood", "seed": args.seed, "component_seeds": seeds, "out": args.out, "n": ds.n}
    if args.ood_data:
        out_ds = load_data(args.ood_data, s)
        rng = np.random.default_rng(seeds["eval"])
        rows_in, rows_out = [], []
        for rows, data in ((rows_in, ds), (rows_out, out_ds)):
            for xr in data.x:
                inst = PartialInstance(xr, rng.permutation(s.d)[: max(1, s.d // 2)])
                rows.append((ood_score(model, s, inst), neg_log_marginal(s, inst)))
        a, b = np.array(rows_in), np.array(rows_out)
        report["auroc_half_observed"] = auroc(a[:, 0], b[:, 0])
        report["auroc_neg_log_marginal"] = auroc(a[:, 1], b[:, 1])
    _emit(report)
    return EXIT_OK


def _hidden(text) -> tuple:
    try:
        h = tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--hidden must be comma-separated integers, got {text!r}") from None
    if len(h) != 2 or min(h) < 1:
        raise UsageError("--hidden takes two positive widths, e.g. 128,128")
    return h


def cmd_train_agent(args) -> int:
    _require(args, "model", "data", "out")
    if args.goal not in ("none", CLASS_PAIR, CLUSTER_SET):
        raise UsageError("--goal must be none, classes or clusters")
    seeds = component_seeds(args.seed, ["grouping", "init", "train", "clusters"])
    s = load_surrogate(args.model)
    ds = load_data(args.data, s)
    budget = None if args.budget is None else _cap_budget(args.budget, s.d)
    ood = load_ood(args.ood_model) if args.ood_model else None
    cfg = PPOConfig(lr=args.lr, rollout_steps=args.rollout_steps, epochs=args.epochs, minibatch=args.minibatch,
                    updates=args.updates, hidden=_hidden(args.hidden))
    env_cfg = EnvConfig(alpha=args.alpha, gamma=args.gamma, allow_terminate=args.allow_terminate, hard_budget=budget,
                        shaping=args.shaping, ood_reward=ood is not None, ood_reward_weight=args.ood_weight,
                        goal_reward=args.goal != "none")
    env = AcquisitionEnv(s, ds, env_cfg, ood_model=ood)
    grouping = group_features(s, ds, min(args.groups, s.d), args.num_samples,
                              np.random.default_rng(seeds["grouping"]))
    ctrl, clustering = None, None
    if args.goal == CLUSTER_SET:
        _require(args, "clusters")
        clustering = fit_clustering(ds, args.n_clusters, seed=seeds["clusters"])
        save_clustering(args.clusters, clustering)
    if args.goal != "none":
        ctrl = GoalController(s, args.goal, args.goal_C, args.goal_T, clustering, args.warm_start, gamma=args.gamma)
    agent = Agent.create(s, grouping, cfg, goal_dim=ctrl.goal_dim if ctrl else 0,
                         rng=np.random.default_rng(seeds["init"]))
    res = train_ppo(env, agent, cfg, np.random.default_rng(seeds["train"]), goal_controller=ctrl, log_path=args.log)
    agent.save(args.out)
    _emit({"command": "train-agent", "seed": args.seed, "component_seeds": seeds, "out": args.out,
           "groups": [list(g) for g in grouping.groups], "final_smoothed_return": float(res.smoothed[-1]),
           "final_smoothed_task_return": float(res.smoothed_task[-1]), "updates": cfg.updates})
    return EXIT_OK


def _make_policy(args, s: MixtureSurrogate, ds: Dataset, seeds: dict):
    if args.policy == "greedy":
        return GreedyPolicy(num_samples=args.num_samples)
    if args.policy == "random":
        return RandomPolicy()
    if args.policy == "static":
        return StaticPolicy(static_order(s, ds, args.num_samples, np.random.default_rng(seeds["static"])))
    if args.policy == "agent":
        _require(args, "agent")
        agent = load_agent(args.agent)
        if agent.task.get("d") != s.d:
            raise DataError("agent and model disagree on the number of features")
        return AgentPolicy(agent, allow_terminate=args.allow_terminate)
    raise UsageError("--policy must be greedy, agent, random or static")


def cmd_acquire(args) -> int:
    _require(args, "model", "data", "out")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    seeds = component_seeds(args.seed, ["policy", "static"])
    s = load_surrogate(args.model)
    ds = load_data(args.data, s)
    budget = _cap_budget(args.budget, s.d)
    policy = _make_policy(args, s, ds, seeds)
    ood = load_ood(args.ood_model) if args.ood_model else None
    traces = policy_traces(policy, s, ds, budget, np.random.default_rng(seeds["policy"]), args.workers)
    recs = []
    for j, tr in enumerate(traces):
        rec = {"instance": j, "policy": args.policy, "seed": args.seed, "acquired": tr.acquired,
               "terminated": tr.terminated, "prediction": tr.prediction,
               "prediction_raw": _raw_prediction(s, tr.prediction), "posterior": tr.meta.get("posterior")}
        if ds.y is not None:
            rec["label"] = ds.y[j].item()
        if ood is not None:
            rec["ood_score"] = ood_score(ood, s, PartialInstance(ds.x[j], tr.acquired))
        recs.append(rec)
    dump_jsonl(args.out, recs)
    budgets = list(range(budget + 1))
    if s.kind == CLASSIFICATION:
        curve, metric = accuracy_curve(policy, s, ds, budgets, traces=traces), "accuracy"
    else:
        curve, metric = rmse_curve(policy, s, ds, budgets, traces=traces), "rmse"
    if args.metrics:
        write_curve_csv(args.metrics, curve, metric)
    _emit({"command": "acquire", "seed": args.seed, "component_seeds": seeds, "policy": args.policy,
           "budget": budget, "n": ds.n, "out": args.out, metric: curve[-1].value, "stderr": curve[-1].stderr})
    return EXIT_OK


def cmd_explain(args) -> int:
    _require(args, "model", "agent", "data", "out")
    if args.goal not in (CLASS_PAIR, CLUSTER_SET):
        raise UsageError("--goal must be classes or clusters")
    seeds = component_seeds(args.seed, ["episodes"])
    s = load_surrogate(args.model)
    ds = load_data(args.data, s)
    agent = load_agent(args.agent)
    clustering = None
    if args.goal == CLUSTER_SET:
        _require(args, "clusters")
        clustering = load_clustering(args.clusters)
    budget = None if args.budget is None else _cap_budget(args.budget, s.d)
    env = AcquisitionEnv(s, ds, EnvConfig(gamma=args.gamma, hard_budget=budget, goal_reward=True,
                                          allow_terminate=args.allow_terminate))
    ctrl = GoalController(s, args.goal, args.goal_C, args.goal_T, clustering, args.warm_start, gamma=args.gamma)
    if agent.goal_dim != ctrl.goal_dim:
        raise DataError(f"agent expects a {agent.goal_dim}-wide goal, the controller gives {ctrl.goal_dim}")
    n = ds.n if args.limit is None else min(ds.n, args.limit)
    rng = np.random.default_rng(seeds["episodes"])
    traces = []
    for j in range(n):
        tr = run_goal_episode(agent, env, x=ds.x[j], y=None if ds.y is None else ds.y[j], rng=rng, controller=ctrl)
        traces.append(tr)
        print(f"instance {j}:")
        print(render_explanation(tr, ds.feature_names))
    write_report(args.out, traces, list(range(n)))
    return EXIT_OK


# ---------------------------------------------------------------- session

def _describe(s: MixtureSurrogate, inst: PartialInstance, ood) -> str:
    parts = []
    if s.kind == CLASSIFICATION:
        p = np.asarray(posterior_summary(s, inst))
        ent = -float(np.sum(p * np.log(np.where(p > 0, p, 1.0))))
        parts.append("posterior = (" + ", ".join(f"{v:.3f}" for v in p) + f"), entropy = {ent:.3f}")
    elif s.kind == REGRESSION:
        mean, var = posterior_summary(s, inst)
        pred = _raw_prediction(s, mean)
        scale = 1.0 if s.standardization is None else float(s.standardization.scale[-1])
        parts.append(f"prediction = {pred:.4f}, sd = {math.sqrt(max(var, 0.0)) * scale:.4f}")
    else:
        u = inst.unobs_idx
        if u.size:
            cond, _ = s.joint.condition(inst.obs_idx, inst.x_o)
            parts.append(f"mean imputation variance = {float(np.mean(np.diag(cond.covariance()))):.4f}")
        else:
            parts.append("all features observed")
    if ood is not None and len(inst.observed):
        parts.append(f"OOD score = {ood_score(ood, s, inst):.3f}")
    return "; ".join(parts)


def cmd_session(args, stdin=None, stdout=None) -> int:
    _require(args, "model")
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    seeds = component_seeds(args.seed, ["policy"])
    s = load_surrogate(args.model)
    budget = _cap_budget(args.budget, s.d)
    ood = load_ood(args.ood_model) if args.ood_model else None
    policy = AgentPolicy(load_agent(args.agent), allow_terminate=args.allow_terminate) if args.agent \
        else GreedyPolicy(num_samples=args.num_samples)
    std = s.standardization
    names = [f"x{i}" for i in range(s.d)]
    rng = np.random.default_rng(seeds["policy"])
    inst = PartialInstance.empty(s.d)
    trace = AcquisitionTrace(s.d)
    raw_values = {}

    def say(text):
        print(text, file=stdout, flush=True)

    say(f"seed {args.seed}; enter values as prompted, 'q' to stop")
    say("prior: " + _describe(s, inst, ood))
    while len(trace.acquired) < budget:
        cand = candidate_features(inst, s.task.chronological)
        if cand.size == 0:
            break
        i = policy.select(s, inst, cand, rng)
        if i == TERMINATE:
            trace.append(TERMINATE)
            say("the policy chose to stop")
            break
        value = None
        while value is None:
            stdout.write(f"value of {names[i]} (feature {i})> ")
            stdout.flush()
            line = stdin.readline()
            if not line or line.strip().lower() in ("q", "quit", "exit"):
                break
            try:
                v = float(line.strip())
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                say("please enter a finite number")
                continue
            value = v
        if value is None:
            say("stopped")
            break
        raw_values[i] = value
        z = value if std is None else (value - float(std.mean[i])) / float(std.scale[i])
        inst = inst.reveal(int(i), z)
        trace.append(int(i), value=value)
        say(f"after {names[i]} = {value:g}: " + _describe(s, inst, ood))
    trace.observed = inst.observed
    trace.meta.update({"seed": args.seed, "component_seeds": seeds, "raw_values": raw_values,
                       "posterior": posterior_summary(s, inst)})
    pred = prediction_of(s, inst)
    trace.prediction = pred.tolist() if isinstance(pred, np.ndarray) else pred
    say("final: " + _describe(s, inst, ood))
    if args.out:
        Path(args.out).write_text(json.dumps(trace.to_json(), indent=1, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--config", help="INI file with a [run] section of option defaults")
    p.add_argument("--seed", type=int, help="root 64-bit seed (default 0)")


def _flag_bool(p, name, help_text):
    p.add_argument(f"--{name.replace('_', '-')}", dest=name, action=argparse.BooleanOptionalAction, default=None,
                   help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="featacq", description="Active feature acquisition with a generative surrogate.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit-surrogate", help="fit the mixture surrogate to a CSV")
    _common(p)
    p.add_argument("--data", help="headered CSV; last column is the target unless --kind unsupervised")
    p.add_argument("--kind", choices=TASK_KINDS)
    p.add_argument("--ordering", choices=("none", "chronological"))
    p.add_argument("--components", type=int, help="mixture components (per class for classification)")
    p.add_argument("--holdout", type=float, help="fraction held out for the masked-objective report")
    p.add_argument("--out", help="model JSON path")
    p.set_defaults(func=cmd_fit_surrogate)

    p = sub.add_parser("fit-ood", help="fit the partially observed OOD detector")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--data", help="in-distribution CSV")
    p.add_argument("--ood-data", dest="ood_data", help="optional OOD CSV for an AUROC report")
    p.add_argument("--masks-per-instance", dest="masks_per_instance", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_ood)

    p = sub.add_parser("train-agent", help="train the hierarchical acquisition agent")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out", help="agent JSON path")
    p.add_argument("--ood-model", dest="ood_model", help="enables the robustness reward")
    p.add_argument("--ood-weight", dest="ood_weight", type=float)
    p.add_argument("--goal", choices=("none", CLASS_PAIR, CLUSTER_SET))
    p.add_argument("--clusters", help="clustering JSON written when --goal clusters")
    p.add_argument("--n-clusters", dest="n_clusters", type=int)
    p.add_argument("--goal-C", dest="goal_C", type=int)
    p.add_argument("--goal-T", dest="goal_T", type=int)
    p.add_argument("--warm-start", dest="warm_start", type=int)
    p.add_argument("--groups", type=int, help="number of feature groups K")
    p.add_argument("--num-samples", dest="num_samples", type=int)
    p.add_argument("--budget", type=int, help="hard acquisition budget")
    p.add_argument("--updates", type=int)
    p.add_argument("--rollout-steps", dest="rollout_steps", type=int)
    p.add_argument("--minibatch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", help="comma-separated layer widths")
    p.add_argument("--alpha", type=float, help="acquisition cost weight")
    p.add_argument("--gamma", type=float)
    _flag_bool(p, "shaping", "surrogate shaping reward")
    _flag_bool(p, "allow_terminate", "let the agent stop before the budget")
    p.add_argument("--log", help="per-update CSV log")
    p.set_defaults(func=cmd_train_agent)

    p = sub.add_parser("acquire", help="run a policy over a CSV and write traces and a curve")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--policy", choices=("greedy", "agent", "random", "static"))
    p.add_argument("--agent")
    p.add_argument("--ood-model", dest="ood_model")
    p.add_argument("--budget", type=int)
    p.add_argument("--data")
    p.add_argument("--out", help="JSON-lines traces")
    p.add_argument("--metrics", help="curve CSV (budget, metric, stderr)")
    p.add_argument("--num-samples", dest="num_samples", type=int)
    p.add_argument("--workers", type=int, help="parallel worker processes")
    _flag_bool(p, "allow_terminate", "let an agent policy stop early")
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("explain", help="run goal-conditioned episodes and render explanations")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--agent")
    p.add_argument("--data")
    p.add_argument("--out", help="JSON-lines segment report")
    p.add_argument("--goal", choices=(CLASS_PAIR, CLUSTER_SET))
    p.add_argument("--clusters")
    p.add_argument("--goal-C", dest="goal_C", type=int)
    p.add_argument("--goal-T", dest="goal_T", type=int)
    p.add_argument("--warm-start", dest="warm_start", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--limit", type=int, help="explain only the first N rows")
    _flag_bool(p, "allow_terminate", "let the agent stop before the budget")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("session", help="interactive acquisition from typed-in values")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--agent", help="trained agent; the greedy policy is used without one")
    p.add_argument("--ood-model", dest="ood_model")
    p.add_argument("--budget", type=int)
    p.add_argument("--num-samples", dest="num_samples", type=int)
    p.add_argument("--out", help="trace JSON path")
    _flag_bool(p, "allow_terminate", "let an agent policy stop early")
    p.set_defaults(func=cmd_session)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        resolve(args)
        return args.func(args)
    except UsageError as e:
        print(f"featacq: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, TrainingDiverged, FloatingPointError) as e:
        print(f"featacq: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, FileNotFoundError, KeyError) as e:
        print(f"featacq: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"featacq: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
