"""Hierarchical policy-gradient acquisition agent.

Features are sorted by their marginal mutual information with the target and
cut into groups of ``N = ceil(d / K)``. An action is chosen in two stages,
``p(k | s) * p(n | k, s)``, with terminate as an extra pseudo-group. The
network (:mod:`featacq.nn`) is trained with clipped policy gradients and
generalized advantage estimation.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    CLASSIFICATION,
    REGRESSION,
    TERMINATE,
    DataError,
    Dataset,
    InvalidActionError,
    PartialInstance,
)
from .env import AcquisitionEnv, EnvConfig, prediction_summary_size, side_info, valid_actions
from .nn import PARAM_ORDER, Adam, LossSpec, forward, init_params, loss_and_grads, masked_log_softmax
from .surrogate import MixtureSurrogate, NumericalError, logsumexp

FORMAT_NAME = "featacq.agent"
FORMAT_VERSION = 1
GROUPING_METHODS = ("mi", "random", "contiguous", "spectral")
TASK_REWARD_KEYS = ("cost", "prediction", "ood")


# ---------------------------------------------------------------- grouping

@dataclass(frozen=True)
class ActionGrouping:
    """Ordered partition of the features into groups of at most ``N``."""

    groups: tuple
    mi: np.ndarray
    method: str = "mi"

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ValueError("groups must be nonempty")
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(len(flat))):
            raise ValueError("groups must partition 0..d-1")
        object.__setattr__(self, "groups", groups)
        mi = np.asarray(self.mi, dtype=float)
        if mi.shape != (len(flat),):
            raise ValueError("need one MI score per feature")
        object.__setattr__(self, "mi", mi)
        gof = np.empty(len(flat), dtype=int)
        pos = np.empty(len(flat), dtype=int)
        for k, g in enumerate(groups):
            for n, i in enumerate(g):
                gof[i], pos[i] = k, n
        object.__setattr__(self, "_group_of", gof)
        object.__setattr__(self, "_pos", pos)

    @property
    def d(self) -> int:
        return int(self.mi.size)

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def N(self) -> int:
        return max(len(g) for g in self.groups)

    @property
    def sizes(self) -> tuple:
        return tuple(len(g) for g in self.groups)

    def decode(self, k: int, n: int) -> int:
        """Feature index of member ``n`` of group ``k``."""
        if not 0 <= k < self.K or not 0 <= n < len(self.groups[k]):
            raise IndexError(f"(group {k}, member {n}) out of range")
        return self.groups[k][n]

    def encode(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.d:
            raise IndexError(f"feature {i} out of range")
        return int(self._group_of[i]), int(self._pos[i])

    def split_mask(self, action_mask) -> tuple[np.ndarray, np.ndarray]:
        """Group mask ``(K+1,)`` and member mask ``(K, N)`` from a ``(d+1,)`` action mask."""
        action_mask = np.asarray(action_mask, dtype=bool)
        member = np.zeros((self.K, self.N), dtype=bool)
        member[self._group_of, self._pos] = action_mask[: self.d]
        group = np.append(member.any(1), action_mask[self.d])
        return group, member

    def to_json(self) -> dict:
        return {"groups": [list(g) for g in self.groups], "mi": self.mi.tolist(), "method": self.method}

    @classmethod
    def from_json(cls, data: dict) -> "ActionGrouping":
        return cls(tuple(tuple(g) for g in data["groups"]), np.asarray(data["mi"], dtype=float), data.get("method", "mi"))


def split_order(order, K: int) -> tuple:
    """Cut an ordering into consecutive groups of ``ceil(d / K)``; the last may be smaller."""
    order = [int(i) for i in order]
    d = len(order)
    if not 1 <= K <= d:
        raise ValueError(f"need 1 <= K <= d, got K={K}, d={d}")
    size = math.ceil(d / K)
    return tuple(tuple(order[s:s + size]) for s in range(0, d, size))


def marginal_mi(surrogate: MixtureSurrogate, data, num_samples: int | None = None,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-feature average of ``log p(y | x_i) - log p(y)`` over validation pairs.

    Unsupervised surrogates use ``log p(x) - log p(x_i) - log p(x_{-i})``,
    i.e. the information ``x_i`` carries about the other features.
    """
    x = np.asarray(data.x if isinstance(data, Dataset) else data, dtype=float)
    y = data.y if isinstance(data, Dataset) else None
    if x.shape[0] == 0:
        raise DataError("validation set is empty")
    if num_samples is not None and num_samples < x.shape[0]:
        rng = rng or np.random.default_rng()
        rows = np.sort(rng.choice(x.shape[0], num_samples, replace=False))
        x = x[rows]
        y = None if y is None else y[rows]
    d = surrogate.d
    mix = surrogate.joint
    mi = np.zeros(d)
    if surrogate.kind == CLASSIFICATION:
        if y is None:
            raise DataError("classification MI needs labels")
        yi = np.asarray(y, dtype=int)
        prior = surrogate.class_log_priors()
        onehot = mix.labels[None, :] == yi[:, None]
        for i in range(d):
            lj = mix.marginal([i]).component_logpdf(x[:, [i]]) + mix.log_weights
            num = logsumexp(np.where(onehot, lj, -np.inf), axis=1)
            mi[i] = np.mean(num - logsumexp(lj, axis=1) - prior[yi])
    elif surrogate.kind == REGRESSION:
        if y is None:
            raise DataError("regression MI needs targets")
        yv = np.asarray(y, dtype=float)[:, None]
        ly = mix.marginal([d]).logpdf(yv)
        for i in range(d):
            lxy = mix.marginal([i, d]).logpdf(np.hstack([x[:, [i]], yv]))
            mi[i] = np.mean(lxy - mix.marginal([i]).logpdf(x[:, [i]]) - ly)
    else:
        lx = mix.logpdf(x)
        for i in range(d):
            rest = [j for j in range(d) if j != i]
            if not rest:
                continue
            mi[i] = np.mean(lx - mix.marginal([i]).logpdf(x[:, [i]]) - mix.marginal(rest).logpdf(x[:, rest]))
    return mi


def _fiedler_order(x: np.ndarray) -> np.ndarray:
    """Features sorted along the Fiedler vector of the |correlation| graph."""
    d = x.shape[1]
    if d < 3:
        return np.arange(d)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.abs(np.corrcoef(x, rowvar=False))
    a = np.nan_to_num(a)
    np.fill_diagonal(a, 0.0)
    lap = np.diag(a.sum(1)) - a
    _, vecs = np.linalg.eigh(lap)
    return np.argsort(vecs[:, 1], kind="stable")


def group_features(surrogate: MixtureSurrogate, validation_set, K: int, num_samples: int | None = None,
                   rng: np.random.Generator | None = None, method: str = "mi") -> ActionGrouping:
    """Sort by marginal MI and cut into groups; alternatives for ablations.

    ``method``: ``"mi"`` (descending MI, stable), ``"random"`` (random
    permutation), ``"contiguous"`` (index blocks) or ``"spectral"``
    (correlation-graph Fiedler ordering). Whatever the method, groups are then
    ordered by descending mean MI.
    """
    if method not in GROUPING_METHODS:
        raise ValueError(f"unknown grouping method {method!r}")
    rng = rng or np.random.default_rng()
    d = surrogate.d
    if not 1 <= K <= d:
        raise ValueError(f"need 1 <= K <= d, got K={K}, d={d}")
    mi = marginal_mi(surrogate, validation_set, num_samples, rng)
    if method == "mi":
        # rounding turns float noise on exact ties back into ties
        order = np.argsort(-np.round(mi, 12), kind="stable")
    elif method == "random":
        order = rng.permutation(d)
    elif method == "contiguous":
        order = np.arange(d)
    else:
        x = validation_set.x if isinstance(validation_set, Dataset) else validation_set
        order = _fiedler_order(np.asarray(x, dtype=float))
    groups = split_order(order, K)
    rank = np.argsort([-round(float(mi[list(g)].mean()), 12) for g in groups], kind="stable")
    return ActionGrouping(tuple(groups[r] for r in rank), mi, method)


# ---------------------------------------------------------------- policy

@dataclass
class PolicyOutput:
    """Masked hierarchical action distribution plus the value estimate."""

    group_logp: np.ndarray
    member_logp: np.ndarray
    value: float
    group_mask: np.ndarray
    member_mask: np.ndarray

    def action_log_prob(self, grouping: ActionGrouping, action: int) -> float:
        if action == TERMINATE:
            return float(self.group_logp[-1])
        k, n = grouping.encode(action)
        return float(self.group_logp[k] + self.member_logp[k, n])

    def action_probs(self, grouping: ActionGrouping) -> np.ndarray:
        """Flat probabilities, length ``d + 1`` (last slot terminate)."""
        p = np.zeros(grouping.d + 1)
        with np.errstate(under="ignore"):
            for i in range(grouping.d):
                k, n = grouping.encode(i)
                p[i] = math.exp(self.group_logp[k] + self.member_logp[k, n])
            p[-1] = math.exp(self.group_logp[-1])
        return p


def build_observation(inst: PartialInstance, info, goal=None) -> np.ndarray:
    """``[values (0 where unobserved), mask, means, variances, gain, prediction, goal]``."""
    m = inst.mask()
    parts = [np.where(m, inst.values, 0.0), m.astype(float), info.means, info.variances, info.gain, info.prediction]
    if goal is not None:
        parts.append(np.asarray(goal, dtype=float))
    return np.concatenate(parts)


def observation_size(surrogate: MixtureSurrogate, goal_dim: int = 0) -> int:
    return 5 * surrogate.d + prediction_summary_size(surrogate) + goal_dim


def policy_forward(params: dict, obs: np.ndarray, action_mask, grouping: ActionGrouping) -> PolicyOutput:
    """Masked group and member distributions for one observation."""
    gm, mm = grouping.split_mask(action_mask)
    if not gm.any():
        raise InvalidActionError("no valid action: every feature is masked and terminate is disabled")
    fw = forward(params, obs)
    lg = masked_log_softmax(fw.group_logits, gm[None])[0]
    lm = masked_log_softmax(fw.member_logits, mm[None])[0]
    return PolicyOutput(lg, lm, float(fw.value[0]), gm, mm)


def _draw(logp: np.ndarray, rng: np.random.Generator) -> int:
    p = np.exp(logp - logp.max())
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), p.size - 1))


def sample_action(out: PolicyOutput, grouping: ActionGrouping, rng: np.random.Generator):
    """Draw ``(action, k, n, log_prob)``; ``action`` is a feature index or TERMINATE."""
    k = _draw(out.group_logp, rng)
    if k == grouping.K:
        return TERMINATE, k, 0, float(out.group_logp[k])
    n = _draw(out.member_logp[k], rng)
    return grouping.decode(k, n), k, n, float(out.group_logp[k] + out.member_logp[k, n])


def greedy_action(out: PolicyOutput, grouping: ActionGrouping):
    """Most probable flat action (ties to the lowest feature index, terminate last)."""
    p = out.action_probs(grouping)
    i = int(np.argmax(p))
    if i == grouping.d:
        return TERMINATE, grouping.K, 0, float(out.group_logp[-1])
    k, n = grouping.encode(i)
    return i, k, n, float(out.group_logp[k] + out.member_logp[k, n])


# ---------------------------------------------------------------- agent

@dataclass
class PPOConfig:
    lr: float = 3e-4
    clip: float = 0.2
    gae_lambda: float = 0.95
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    rollout_steps: int = 2048
    epochs: int = 10
    minibatch: int = 256
    updates: int = 50
    max_grad_norm: float = 0.5
    hidden: tuple = (128, 128)
    smoothing_window: int = 10
    normalize_advantages: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.lr < 0 or self.rollout_steps < 1 or self.epochs < 1 or self.minibatch < 1 or self.updates < 0:
            raise ValueError("invalid PPO configuration")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must lie in [0, 1]")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Agent:
    """Network parameters, the action grouping, and the observation layout."""

    params: dict
    grouping: ActionGrouping
    goal_dim: int = 0
    config: PPOConfig = field(default_factory=PPOConfig)
    task: dict = field(default_factory=dict)

    @classmethod
    def create(cls, surrogate: MixtureSurrogate, grouping: ActionGrouping, config: PPOConfig | None = None,
               goal_dim: int = 0, rng: np.random.Generator | None = None) -> "Agent":
        config = config or PPOConfig()
        if grouping.d != surrogate.d:
            raise ValueError("grouping and surrogate disagree on d")
        n_in = observation_size(surrogate, goal_dim)
        params = init_params(n_in, grouping.K, grouping.N, config.hidden, rng)
        task = {"d": surrogate.d, "kind": surrogate.kind, "num_classes": surrogate.num_classes}
        return cls(params, grouping, goal_dim, config, task)

    @property
    def n_in(self) -> int:
        return int(self.params["W1"].shape[0])

    def observe(self, surrogate: MixtureSurrogate, inst: PartialInstance, goal=None, rng=None,
                exact: bool = True, num_samples: int = 64) -> np.ndarray:
        info = side_info(surrogate, inst, num_samples, rng, exact)
        return build_observation(inst, info, goal if self.goal_dim else None)

    def policy(self, obs: np.ndarray, action_mask) -> PolicyOutput:
        return policy_forward(self.params, obs, action_mask, self.grouping)

    def act(self, obs, action_mask, rng: np.random.Generator | None = None, deterministic: bool = False):
        out = self.policy(obs, action_mask)
        if deterministic:
            return greedy_action(out, self.grouping), out
        return sample_action(out, self.grouping, rng or np.random.default_rng()), out

    # persistence
    def to_json(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "params": {k: np.asarray(self.params[k]).tolist() for k in PARAM_ORDER},
            "grouping": self.grouping.to_json(),
            "goal_dim": self.goal_dim,
            "config": asdict(self.config),
            "config_hash": self.config.digest(),
            "task": self.task,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Agent":
        if data.get("format") != FORMAT_NAME:
            raise DataError("not an agent checkpoint")
        if int(data.get("version", -1)) != FORMAT_VERSION:
            raise DataError(f"unsupported agent checkpoint version {data.get('version')}")
        config = PPOConfig(**data["config"])
        if config.digest() != data.get("config_hash"):
            raise DataError("agent checkpoint config hash mismatch")
        params = {k: np.asarray(v, dtype=float) for k, v in data["params"].items()}
        for k in ("b1", "b2", "bg", "bn", "bv"):
            params[k] = params[k].reshape(-1)
        params["Wv"] = params["Wv"].reshape(-1, 1)
        return cls(params, ActionGrouping.from_json(data["grouping"]), int(data["goal_dim"]), config, data.get("task", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Agent":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class AgentPolicy:
    """Adapter exposing a trained agent through the ``select`` interface used by evaluation.

    Returns :data:`TERMINATE` when the agent chooses to stop.
    """

    agent: Agent
    deterministic: bool = True
    allow_terminate: bool = True
    goal: np.ndarray | None = None
    name: str = "agent"

    def select(self, surrogate, inst, candidates, rng) -> int:
        mask = np.zeros(surrogate.d + 1, dtype=bool)
        mask[np.asarray(candidates, dtype=int)] = True
        mask[-1] = self.allow_terminate or not mask[:-1].any()
        goal = self.goal if self.goal is not None else (np.zeros(self.agent.goal_dim) if self.agent.goal_dim else None)
        obs = self.agent.observe(surrogate, inst, goal, rng)
        (action, *_), _ = self.agent.act(obs, mask, rng, self.deterministic)
        return action


# ---------------------------------------------------------------- training

def smooth_curve(values, window: int) -> np.ndarray:
    """Trailing moving-window average (shorter windows at the start)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    w = max(1, int(window))
    c = np.cumsum(np.insert(v, 0, 0.0))
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(idx - w, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def gae(rewards, values, dones, gamma: float, lam: float):
    """Generalized advantages and returns; an episode boundary follows every ``done``."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    adv = np.zeros_like(rewards)
    nxt_adv = 0.0
    nxt_val = 0.0
    for t in range(rewards.size - 1, -1, -1):
        if dones[t]:
            nxt_adv, nxt_val = 0.0, 0.0
        delta = rewards[t] + gamma * nxt_val - values[t]
        nxt_adv = delta + gamma * lam * nxt_adv
        adv[t] = nxt_adv
        nxt_val = values[t]
    return adv, adv + values


@dataclass
class TrainResult:
    returns: np.ndarray
    task_returns: np.ndarray
    smoothed: np.ndarray
    smoothed_task: np.ndarray
    log: list

    def write_log(self, path) -> None:
        if not self.log:
            Path(path).write_text("")
            return
        with Path(path).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.log[0]))
            w.writeheader()
            for row in self.log:
                w.writerow(row)


class TrainingDiverged(NumericalError):
    """Non-finite loss during an update; ``snapshot`` holds the offending state."""

    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


def collect_rollout(env: AcquisitionEnv, agent: Agent, steps: int, rng: np.random.Generator,
                    instances=None, goal_controller=None) -> dict:
    """Run whole episodes on random training instances until at least ``steps`` transitions."""
    if env.dataset is None:
        raise ValueError("the environment needs a training dataset")
    pool = np.arange(env.dataset.n) if instances is None else np.asarray(instances, dtype=int)
    buf = {k: [] for k in ("obs", "group_mask", "member_mask", "group", "member", "old_logp",
                           "value", "reward", "done")}
    ep_total, ep_task = [], []
    g = agent.grouping
    while len(buf["reward"]) < steps:
        env.reset(index=int(pool[rng.integers(pool.size)]))
        if goal_controller is not None:
            goal_controller.reset(env, rng)
        tot = task = 0.0
        while not env.done:
            goal = goal_controller.embedding(env, rng) if goal_controller is not None else None
            obs = build_observation(env.state, env.side_info(rng), goal)
            mask = env.action_mask()
            out = agent.policy(obs, mask)
            action, k, n, lp = sample_action(out, g, rng)
            res = env.step(action)
            if goal_controller is not None:
                goal_controller.observe(env, res)
            buf["obs"].append(obs)
            buf["group_mask"].append(out.group_mask)
            buf["member_mask"].append(out.member_mask)
            buf["group"].append(k)
            buf["member"].append(n)
            buf["old_logp"].append(lp)
            buf["value"].append(out.value)
            buf["reward"].append(res.reward)
            buf["done"].append(res.done)
            tot += res.reward
            task += sum(res.rewards[key] for key in TASK_REWARD_KEYS)
        ep_total.append(tot)
        ep_task.append(task)
    out = {k: np.asarray(v) for k, v in buf.items()}
    out["episode_returns"] = np.asarray(ep_total)
    out["episode_task_returns"] = np.asarray(ep_task)
    return out


def train_ppo(env: AcquisitionEnv, agent: Agent, config: PPOConfig | None = None,
              rng: np.random.Generator | None = None, instances=None, goal_controller=None,
              log_path=None) -> TrainResult:
    """Clipped policy-gradient training; updates ``agent.params`` in place.

    The per-update return is the mean undiscounted episode return of that
    rollout; ``task_returns`` leave out shaping and goal rewards.
    """
    config = config or agent.config
    rng = rng or np.random.default_rng()
    gamma = env.config.gamma
    spec = LossSpec(config.clip, config.vf_coef, config.ent_coef)
    opt = Adam(agent.params, config.lr, max_grad_norm=config.max_grad_norm)
    returns, task_returns, log = [], [], []
    for update in range(config.updates):
        roll = collect_rollout(env, agent, config.rollout_steps, rng, instances, goal_controller)
        adv, ret = gae(roll["reward"], roll["value"], roll["done"], gamma, config.gae_lambda)
        if config.normalize_advantages and adv.size > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        B = adv.size
        stats = []
        for _ in range(config.epochs):
            perm = rng.permutation(B)
            for s in range(0, B, config.minibatch):
                idx = perm[s:s + config.minibatch]
                batch = {k: roll[k][idx] for k in ("obs", "group_mask", "member_mask", "group", "member", "old_logp")}
                batch["adv"] = adv[idx]
                batch["ret"] = ret[idx]
                loss, grads, info = loss_and_grads(agent.params, batch, spec)
                bad = not math.isfinite(loss) or any(not np.all(np.isfinite(v)) for v in grads.values())
                if bad:
                    snap = {"update": update, "loss": loss, "info": info,
                            "params": {k: v.copy() for k, v in agent.params.items()}, "batch": batch}
                    raise TrainingDiverged(f"non-finite loss at update {update}", snap)
                opt.step(agent.params, grads)
                stats.append([loss, info["policy"], info["value"], info["entropy"], info["approx_kl"], info["clip_frac"]])
        m = np.mean(stats, axis=0)
        returns.append(float(roll["episode_returns"].mean()))
        task_returns.append(float(roll["episode_task_returns"].mean()))
        log.append({"update": update, "steps": B, "episodes": int(roll["episode_returns"].size),
                    "mean_return": returns[-1], "mean_task_return": task_returns[-1],
                    "loss": m[0], "policy_loss": m[1], "value_loss": m[2], "entropy": m[3],
                    "approx_kl": m[4], "clip_frac": m[5]})
    res = TrainResult(np.asarray(returns), np.asarray(task_returns),
                      smooth_curve(returns, config.smoothing_window),
                      smooth_curve(task_returns, config.smoothing_window), log)
    if log_path is not None:
        res.write_log(log_path)
    return res


def make_env(surrogate: MixtureSurrogate, dataset: Dataset, env_config: EnvConfig | None = None, **kw) -> AcquisitionEnv:
    return AcquisitionEnv(surrogate, dataset, env_config, **kw)


def run_episode(env: AcquisitionEnv, agent: Agent, x, y=None, rng=None, deterministic: bool = True,
                goal_controller=None):
    """One evaluation episode; returns the trace (with ``meta['posterior']`` and the prediction)."""
    from .greedy import posterior_summary, prediction_of

    rng = rng or np.random.default_rng()
    env.reset(x, y)
    if goal_controller is not None:
        goal_controller.reset(env, rng)
    while not env.done:
        goal = goal_controller.embedding(env, rng) if goal_controller is not None else None
        obs = build_observation(env.state, env.side_info(rng), goal)
        (action, *_), _ = agent.act(obs, env.action_mask(), rng, deterministic)
        res = env.step(action)
        if goal_controller is not None:
            goal_controller.observe(env, res)
    trace = env.trace
    trace.meta["posterior"] = posterior_summary(env.surrogate, env.state)
    p = prediction_of(env.surrogate, env.state)
    trace.prediction = p.tolist() if isinstance(p, np.ndarray) else p
    return trace


__all__ = [
    "ActionGrouping", "Agent", "AgentPolicy", "PPOConfig", "PolicyOutput", "TrainResult", "TrainingDiverged",
    "build_observation", "collect_rollout", "gae", "greedy_action", "group_features", "marginal_mi",
    "observation_size", "policy_forward", "run_episode", "sample_action", "smooth_curve", "split_order",
    "train_ppo", "valid_actions",
]
