"""Goal-based explanations of an acquisition episode.

Every ``T`` acquisitions a fixed high-level rule picks a sub-goal from the
current posterior: the two most probable classes, or the ``C`` most probable
clusters of a clustering fit on fully observed data. The acquisitions that
follow are rewarded for disambiguating the sub-goal, measured on the
posterior collapsed to ``[members..., rest]``; each segment then reads as
"acquired these features to tell apart those candidates".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CLASSIFICATION, TERMINATE, AcquisitionTrace, Dataset, PartialInstance, dump_jsonl
from .surrogate import EMConfig, GaussianMixture, MixtureSurrogate, categorical_entropy, condition, em_gmm, predict_posterior

CLASS_PAIR = "classes"
CLUSTER_SET = "clusters"
GOAL_KINDS = (CLASS_PAIR, CLUSTER_SET)


@dataclass
class ClusteringModel:
    """Gaussian mixture over fully observed feature vectors; clusters are its components."""

    mixture: GaussianMixture

    @property
    def n_clusters(self) -> int:
        return self.mixture.n_components

    def posterior(self, x) -> np.ndarray:
        """``p_Z(z | x)`` for full vectors, shape ``(n, |Z|)``."""
        return self.mixture.responsibilities(np.atleast_2d(np.asarray(x, dtype=float)))


def fit_clustering(dataset: Dataset | np.ndarray, n_clusters: int = 50, seed: int = 0,
                   config: EMConfig | None = None) -> ClusteringModel:
    x = dataset.x if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("clustering needs fully observed rows")
    res = em_gmm(x, n_clusters, np.random.default_rng(seed), config)
    return ClusteringModel(res.mixture)


@dataclass(frozen=True)
class SubGoal:
    kind: str
    members: tuple
    snapshot: tuple = ()

    def __post_init__(self):
        if self.kind not in GOAL_KINDS:
            raise ValueError(f"unknown sub-goal kind {self.kind!r}")
        members = tuple(int(m) for m in self.members)
        if len(members) < 2 or len(set(members)) != len(members):
            raise ValueError("a sub-goal needs at least two distinct members")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "snapshot", tuple(float(p) for p in self.snapshot))

    def embedding(self, size: int) -> np.ndarray:
        e = np.zeros(size)
        e[list(self.members)] = 1.0
        return e


def select_subgoal(posterior, kind: str = CLASS_PAIR, C: int = 2) -> SubGoal:
    """Top-``C`` categories by probability (``C = 2`` for class pairs); ties to the lowest index."""
    p = np.asarray(posterior, dtype=float)
    if kind == CLASS_PAIR:
        C = 2
    if p.size < C:
        raise ValueError(f"need at least {C} categories, got {p.size}")
    if C < 2:
        raise ValueError("C must be >= 2")
    top = np.argsort(-p, kind="stable")[:C]
    return SubGoal(kind, tuple(int(i) for i in top), tuple(p / p.sum()))


def collapse(posterior, members) -> np.ndarray:
    """``[p(m_1), ..., p(m_C), 1 - sum]``, the rest clipped at 0."""
    p = np.asarray(posterior, dtype=float)
    sel = p[list(members)]
    return np.append(sel, max(0.0, 1.0 - float(sel.sum())))


def goal_entropy(posterior, subgoal: SubGoal) -> float:
    return categorical_entropy(collapse(posterior, subgoal.members))


def goal_reward(posterior_before, posterior_after, subgoal: SubGoal, gamma: float = 0.99) -> float:
    """``H(before) - gamma * H(after)`` on the collapsed distributions."""
    return goal_entropy(posterior_before, subgoal) - gamma * goal_entropy(posterior_after, subgoal)


def cluster_posterior(surrogate: MixtureSurrogate, clustering: ClusteringModel, inst: PartialInstance,
                      num_imputations: int = 50, rng: np.random.Generator | None = None,
                      qmc: bool = True) -> np.ndarray:
    """``p_Z(z | x_o)`` averaged over imputations ``x_u ~ p(x_u | x_o)``."""
    if num_imputations < 1:
        raise ValueError("num_imputations must be >= 1")
    u = inst.unobs_idx
    if u.size == 0:
        p = clustering.posterior(inst.values)[0]
        return p / p.sum()
    rng = rng or np.random.default_rng()
    draws = condition(surrogate, inst).sample(num_imputations, rng, qmc=qmc)
    full = np.repeat(inst.values[None, :], num_imputations, axis=0)
    full[:, u] = draws
    p = clustering.posterior(full).mean(0)
    return p / p.sum()


def class_posterior(surrogate: MixtureSurrogate, inst: PartialInstance) -> np.ndarray:
    p = np.exp(predict_posterior(surrogate, inst))
    return p / p.sum()


@dataclass
class Segment:
    goal: SubGoal | None
    posterior_before: np.ndarray
    posterior_after: np.ndarray | None = None
    acquired: list = field(default_factory=list)

    @property
    def entropy_before(self) -> float | None:
        return None if self.goal is None else goal_entropy(self.posterior_before, self.goal)

    @property
    def entropy_after(self) -> float | None:
        if self.goal is None or self.posterior_after is None:
            return None
        return goal_entropy(self.posterior_after, self.goal)

    def to_record(self) -> dict:
        return {
            "goal": None if self.goal is None else list(self.goal.members),
            "kind": None if self.goal is None else self.goal.kind,
            "acquired": [int(i) for i in self.acquired],
            "posterior_before": np.asarray(self.posterior_before).tolist(),
            "posterior_after": None if self.posterior_after is None else np.asarray(self.posterior_after).tolist(),
            "entropy_before": self.entropy_before,
            "entropy_after": self.entropy_after,
        }


class GoalController:
    """Fixed high-level policy: picks sub-goals, supplies embeddings and goal rewards.

    Plugs into :func:`featacq.agent.collect_rollout` and
    :func:`featacq.agent.run_episode`; it installs itself as the
    environment's ``goal_fn``. The first ``warm_start`` acquisitions run
    with a null goal (zero embedding, no goal reward).
    """

    def __init__(self, surrogate: MixtureSurrogate, kind: str = CLASS_PAIR, C: int = 5, T: int = 10,
                 clustering: ClusteringModel | None = None, warm_start: int = 0, num_imputations: int = 50,
                 gamma: float = 0.99):
        if kind not in GOAL_KINDS:
            raise ValueError(f"unknown sub-goal kind {kind!r}")
        if kind == CLASS_PAIR and surrogate.kind != CLASSIFICATION:
            raise ValueError("class-pair sub-goals need a classification surrogate")
        if kind == CLUSTER_SET and clustering is None:
            raise ValueError("cluster sub-goals need a clustering model")
        if T < 1 or warm_start < 0:
            raise ValueError("T must be >= 1 and warm_start >= 0")
        self.surrogate = surrogate
        self.kind = kind
        self.C = 2 if kind == CLASS_PAIR else int(C)
        self.T = int(T)
        self.clustering = clustering
        self.warm_start = int(warm_start)
        self.num_imputations = num_imputations
        self.gamma = gamma
        self.segments: list[Segment] = []
        self._rng = np.random.default_rng()
        self._post = None
        self._count = 0
        self._opened_at = None

    @property
    def goal_dim(self) -> int:
        return self.surrogate.num_classes if self.kind == CLASS_PAIR else self.clustering.n_clusters

    def posterior(self, inst: PartialInstance) -> np.ndarray:
        if self.kind == CLASS_PAIR:
            return class_posterior(self.surrogate, inst)
        return cluster_posterior(self.surrogate, self.clustering, inst, self.num_imputations, self._rng)

    @property
    def current(self) -> SubGoal | None:
        return self.segments[-1].goal if self.segments else None

    def reset(self, env, rng: np.random.Generator) -> None:
        self._rng = rng
        self.segments = []
        self._count = 0
        self._opened_at = None
        self._post = self.posterior(env.state)
        env.goal_fn = self.reward
        if self.warm_start:
            self.segments.append(Segment(None, self._post))

    def _open(self) -> None:
        if self.segments and self.segments[-1].posterior_after is None:
            self.segments[-1].posterior_after = self._post
        goal = select_subgoal(self._post, self.kind, self.C)
        self.segments.append(Segment(goal, self._post))

    def embedding(self, env, rng=None) -> np.ndarray:
        """Goal embedding for the next action, opening a new segment at boundaries."""
        acquired = self._count - self.warm_start
        can_acquire = bool(env.action_mask()[:-1].any())
        if can_acquire and acquired >= 0 and acquired % self.T == 0 and self._opened_at != self._count:
            self._open()
            self._opened_at = self._count
        goal = self.current
        return np.zeros(self.goal_dim) if goal is None else goal.embedding(self.goal_dim)

    def reward(self, before: PartialInstance, after: PartialInstance) -> float:
        p_after = self.posterior(after)
        goal = self.current
        r = 0.0 if goal is None else goal_reward(self._post, p_after, goal, self.gamma)
        self._post = p_after
        return r

    def observe(self, env, result) -> None:
        step = env.trace.steps[-1]
        if step.action != TERMINATE:
            if not env.config.goal_reward:
                self._post = self.posterior(env.state)
            self._count += 1
            if self.segments:
                self.segments[-1].acquired.append(step.action)
                step.info["goal"] = None if self.current is None else list(self.current.members)
        if result.done and self.segments and self.segments[-1].posterior_after is None:
            self.segments[-1].posterior_after = self._post


def run_goal_episode(agent, env, kind: str = CLASS_PAIR, C: int = 5, T: int = 10, x=None, y=None,
                     clustering: ClusteringModel | None = None, warm_start: int = 0,
                     rng: np.random.Generator | None = None, deterministic: bool = True,
                     num_imputations: int = 50, controller: GoalController | None = None) -> AcquisitionTrace:
    """Alternate sub-goal selection and ``T`` goal-conditioned acquisitions.

    Segment records land in ``trace.meta["segments"]``.
    """
    from .agent import run_episode

    ctrl = controller or GoalController(env.surrogate, kind, C, T, clustering, warm_start, num_imputations,
                                        env.config.gamma)
    trace = run_episode(env, agent, x, y, rng, deterministic, goal_controller=ctrl)
    trace.meta["segments"] = [s.to_record() for s in ctrl.segments]
    return trace


def segment_text(record: dict, feature_names=None, class_names=None) -> str:
    def fname(i):
        return feature_names[i] if feature_names else f"x{i}"

    feats = ", ".join(fname(i) for i in record["acquired"]) or "nothing"
    if record["goal"] is None:
        return f"acquired {{{feats}}} without a sub-goal (warm start)"
    label = "class" if record["kind"] == CLASS_PAIR else "cluster"

    def mname(m):
        return class_names[m] if class_names and record["kind"] == CLASS_PAIR else f"{label} {m}"

    members = ", ".join(mname(m) for m in record["goal"])
    before = ", ".join(f"{record['posterior_before'][m]:.3f}" for m in record["goal"])
    after = "?" if record["posterior_after"] is None else ", ".join(
        f"{record['posterior_after'][m]:.3f}" for m in record["goal"])
    return f"acquired {{{feats}}} to disambiguate {{{members}}}: p = ({before}) -> ({after})"


def render_explanation(trace_or_segments, feature_names=None, class_names=None) -> str:
    """Plain-text explanation, one line per segment."""
    segs = trace_or_segments.meta["segments"] if isinstance(trace_or_segments, AcquisitionTrace) else trace_or_segments
    lines = [f"{t + 1}. {segment_text(r, feature_names, class_names)}" for t, r in enumerate(segs)]
    return "\n".join(lines)


def write_report(path, traces, instance_ids=None) -> None:
    """JSON lines, one per segment."""
    recs = []
    for j, tr in enumerate(traces):
        iid = j if instance_ids is None else instance_ids[j]
        for s, rec in enumerate(tr.meta.get("segments", [])):
            recs.append({"instance": iid, "segment": s, **rec})
    dump_jsonl(Path(path), recs)


def segment_entropy_drops(traces) -> np.ndarray:
    """Per goal segment: whether the collapsed entropy strictly decreased."""
    out = []
    for tr in traces:
        for rec in tr.meta.get("segments", []):
            if rec["goal"] is None or rec["entropy_after"] is None or not rec["acquired"]:
                continue
            out.append(rec["entropy_after"] < rec["entropy_before"])
    return np.asarray(out, dtype=bool)


__all__ = [
    "CLASS_PAIR", "CLUSTER_SET", "ClusteringModel", "GoalController", "Segment", "SubGoal",
    "class_posterior", "cluster_posterior", "collapse", "fit_clustering", "goal_entropy", "goal_reward",
    "render_explanation", "run_goal_episode", "segment_entropy_drops", "select_subgoal", "write_report",
]
