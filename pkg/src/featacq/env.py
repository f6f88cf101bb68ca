"""The acquisition MDP.

State is a :class:`PartialInstance`; an action is a feature index or
:data:`TERMINATE`. Acquisition charges ``-alpha * cost_i`` and optionally a
potential-based shaping reward; termination pays the negative prediction
loss and, in robustness mode, the OOD score of the acquired subset.

Shaping potentials:

* supervised: ``Phi(s) = -H(y | x_o)`` under the surrogate posterior;
* unsupervised: ``Phi(s) = log p(x_u | x_o) / |u|`` evaluated at the true
  unobserved values, with ``Phi = 0`` once nothing is left unobserved.

so ``r_m = gamma * Phi(s') - Phi(s)`` telescopes over an episode.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    CLASSIFICATION,
    REGRESSION,
    TERMINATE,
    UNSUPERVISED,
    AcquisitionTrace,
    CostModel,
    Dataset,
    InvalidActionError,
    PartialInstance,
    candidate_features,
)
from .ood import ood_reward
from .surrogate import (
    MixtureSurrogate,
    conditional_entropy_y,
    gaussian_entropy,
    predict_posterior,
)

REWARD_KEYS = ("cost", "shaping", "goal", "prediction", "ood")


@dataclass
class EnvConfig:
    alpha: float = 0.01
    gamma: float = 0.99
    allow_terminate: bool = True
    hard_budget: int | None = None
    shaping: bool = True
    ood_reward: bool = False
    goal_reward: bool = False
    ood_reward_weight: float = 1.0
    weighted_ce: bool = False
    exact_moments: bool = True
    side_samples: int = 64

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.allow_terminate and self.hard_budget is None:
            raise ValueError("a hard budget is required when terminate is disabled")
        if self.hard_budget is not None and self.hard_budget < 0:
            raise ValueError("hard_budget must be >= 0")


@dataclass
class StepOutcome:
    state: PartialInstance
    rewards: dict
    done: bool
    info: dict = field(default_factory=dict)

    @property
    def reward(self) -> float:
        return float(sum(self.rewards.values()))


@dataclass
class SideInfo:
    means: np.ndarray
    variances: np.ndarray
    gain: np.ndarray
    prediction: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.means, self.variances, self.gain, self.prediction])


def potential(surrogate: MixtureSurrogate, inst: PartialInstance, x_full=None) -> float:
    """Shaping potential of a state (see module docstring)."""
    if surrogate.kind == UNSUPERVISED:
        u = inst.unobs_idx
        if u.size == 0:
            return 0.0
        if x_full is None:
            raise ValueError("unsupervised potential needs the true unobserved values")
        cond, _ = surrogate.joint.condition(inst.obs_idx, inst.x_o)
        return float(cond.logpdf(np.asarray(x_full, dtype=float)[u][None])[0]) / u.size
    return -conditional_entropy_y(surrogate, inst)


def shaping_reward(surrogate: MixtureSurrogate, inst: PartialInstance, i: int, value: float,
                   gamma: float = 0.99, x_full=None) -> float:
    """``gamma * Phi(s') - Phi(s)`` for acquiring feature ``i`` with realized ``value``.

    Supervised this is ``H(y|x_o) - gamma * H(y|x_o, x_i)``; unsupervised it is
    the reduction in per-dimension negative log-likelihood of the rest.
    """
    nxt = inst.reveal(i, value)
    if x_full is not None:
        x_full = np.array(x_full, dtype=float)
        x_full[i] = value
    return gamma * potential(surrogate, nxt, x_full) - potential(surrogate, inst, x_full)


def _gauss_gain_from_cov(var_i, cov_iy, var_y):
    rho2 = np.clip(cov_iy**2 / (var_i * var_y), 0.0, 1.0 - 1e-12)
    return -0.5 * np.log1p(-rho2)


def side_info(surrogate: MixtureSurrogate, inst: PartialInstance, num_samples: int = 64,
              rng: np.random.Generator | None = None, exact: bool = True) -> SideInfo:
    """Imputation moments, Gaussian-approximate information gain, and the current prediction.

    Gain for candidate ``i`` is ``H(x_i|x_o) - E_y H(x_i|y, x_o)`` with both
    entropies Gaussian in the (exact or sampled) variances. For regression the
    pair ``(x_i, y)`` is moment-matched to a Gaussian, giving
    ``-0.5 log(1 - rho^2)``; unsupervised uses the analogous Gaussian mutual
    information between ``x_i`` and the other unobserved features.
    """
    d = surrogate.d
    means = inst.values.copy()
    variances = np.zeros(d)
    gain = np.zeros(d)
    u = inst.unobs_idx
    if u.size:
        cond, _ = surrogate.joint.condition(inst.obs_idx, inst.x_o)
        if exact:
            mu = cond.mean()
            cov = cond.covariance()
        else:
            rng = rng or np.random.default_rng()
            draws, comp = cond.sample(num_samples, rng, return_components=True)
            mu = draws.mean(0)
            cov = np.atleast_2d(np.cov(draws.T, bias=True))
        means[u] = mu[: u.size]
        variances[u] = np.maximum(np.diagonal(cov)[: u.size], 1e-12)
        if surrogate.kind == CLASSIFICATION:
            post = np.exp(cond.label_log_probs(surrogate.num_classes))
            h_cond = np.zeros(u.size)
            for c in range(surrogate.num_classes):
                if post[c] <= 0:
                    continue
                if exact:
                    sub, _ = cond.restrict(c)
                    v = sub.variance()
                else:
                    sel = cond.labels[comp] == c
                    v = draws[sel].var(0) if sel.sum() > 1 else variances[u]
                h_cond += post[c] * gaussian_entropy(np.maximum(v, 1e-12))
            gain[u] = gaussian_entropy(variances[u]) - h_cond
        elif surrogate.kind == REGRESSION:
            gain[u] = _gauss_gain_from_cov(np.diagonal(cov)[: u.size], cov[: u.size, -1], cov[-1, -1])
        elif u.size > 1:
            logdet_all = np.linalg.slogdet(cov)[1]
            for j in range(u.size):
                rest = [k for k in range(u.size) if k != j]
                gain[u[j]] = 0.5 * (np.log(cov[j, j]) + np.linalg.slogdet(cov[np.ix_(rest, rest)])[1] - logdet_all)
    return SideInfo(means, variances, gain, prediction_summary(surrogate, inst, cond if u.size else None))


def prediction_summary(surrogate: MixtureSurrogate, inst: PartialInstance, cond=None) -> np.ndarray:
    """Class posterior, or ``(mean, variance)`` of the target; unsupervised: mean imputation variance.

    ``cond`` may pass in the already-conditioned joint to save a conditioning.
    """
    u = inst.unobs_idx
    if cond is None and (u.size or surrogate.kind == REGRESSION):
        cond, _ = surrogate.joint.condition(inst.obs_idx, inst.x_o)
    if surrogate.kind == CLASSIFICATION:
        if cond is None:
            return np.exp(predict_posterior(surrogate, inst))
        return np.exp(cond.label_log_probs(surrogate.num_classes))
    if surrogate.kind == REGRESSION:
        ymix = cond.marginal([cond.dim - 1])
        return np.array([ymix.mean()[0], ymix.variance()[0]])
    if u.size == 0:
        return np.zeros(1)
    return np.array([float(cond.variance().mean())])


def prediction_summary_size(surrogate: MixtureSurrogate) -> int:
    if surrogate.kind == CLASSIFICATION:
        return surrogate.num_classes
    return 2 if surrogate.kind == REGRESSION else 1


def valid_actions(inst: PartialInstance, config: EnvConfig, chronological: bool = False,
                  num_acquired: int | None = None) -> np.ndarray:
    """Boolean mask of length ``d + 1``; the last slot is terminate."""
    d = inst.d
    mask = np.zeros(d + 1, dtype=bool)
    n_acq = len(inst.observed) if num_acquired is None else num_acquired
    cand = candidate_features(inst, chronological)
    budget_hit = config.hard_budget is not None and n_acq >= config.hard_budget
    if budget_hit or cand.size == 0:
        mask[d] = True
        return mask
    mask[cand] = True
    mask[d] = config.allow_terminate
    return mask


def class_weights_from(y, num_classes: int) -> np.ndarray:
    """Inverse class frequency, normalized to mean 1 over the classes present."""
    counts = np.bincount(np.asarray(y, dtype=int), minlength=num_classes).astype(float)
    w = np.zeros(num_classes)
    present = counts > 0
    w[present] = 1.0 / counts[present]
    return w / w[present].mean()


class AcquisitionEnv:
    """One episode at a time over instances of a dataset.

    ``ood_model`` is a fitted :class:`featacq.ood.ScoreStatsModel`; ``goal_fn``
    maps ``(state_before, state_after)`` to a goal reward and is installed by
    the explanation layer.
    """

    def __init__(self, surrogate: MixtureSurrogate, dataset: Dataset | None = None,
                 config: EnvConfig | None = None, cost: CostModel | None = None, ood_model=None,
                 goal_fn: Callable | None = None, chronological: bool | None = None):
        self.surrogate = surrogate
        self.dataset = dataset
        self.config = config or EnvConfig()
        self.cost = cost or CostModel.uniform(surrogate.d, self.config.alpha)
        self.ood_model = ood_model
        self.goal_fn = goal_fn
        if chronological is None:
            chronological = surrogate.task.chronological
        self.chronological = chronological
        self.class_weights = None
        if self.config.weighted_ce and surrogate.kind == CLASSIFICATION and dataset is not None:
            self.class_weights = class_weights_from(dataset.y, surrogate.num_classes)
        if self.config.ood_reward and ood_model is None:
            raise ValueError("ood_reward requires an OOD model")
        self._x = None
        self._y = None
        self.state = None
        self.trace = None
        self.done = True
        self._phi = None

    @property
    def d(self) -> int:
        return self.surrogate.d

    def reset(self, x=None, y=None, index: int | None = None, observed=()) -> PartialInstance:
        if index is not None:
            if self.dataset is None:
                raise ValueError("no dataset attached")
            x = self.dataset.x[index]
            y = None if self.dataset.y is None else self.dataset.y[index]
        if x is None:
            raise ValueError("reset needs an instance or an index")
        self._x = np.asarray(x, dtype=float).copy()
        self._y = y
        self.state = PartialInstance(self._x, list(observed))
        self.trace = AcquisitionTrace(self.d)
        self.done = False
        self._phi = None
        return self.state

    def action_mask(self) -> np.ndarray:
        return valid_actions(self.state, self.config, self.chronological, len(self.trace.acquired))

    def side_info(self, rng: np.random.Generator | None = None) -> SideInfo:
        return side_info(self.surrogate, self.state, self.config.side_samples, rng, self.config.exact_moments)

    def prediction_reward(self, inst: PartialInstance) -> float:
        s = self.surrogate
        if s.kind == CLASSIFICATION:
            y = int(self._y)
            lp = float(predict_posterior(s, inst)[y])
            w = 1.0 if self.class_weights is None else float(self.class_weights[y])
            return w * lp
        if s.kind == REGRESSION:
            mean, _ = predict_posterior(s, inst)
            return -float((mean - float(self._y)) ** 2)
        u = inst.unobs_idx
        if u.size == 0:
            return 0.0
        cond, _ = s.joint.condition(inst.obs_idx, inst.x_o)
        return -float(np.mean((cond.mean() - self._x[u]) ** 2))

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise InvalidActionError("episode is over; call reset()")
        action = int(action)
        mask = self.action_mask()
        slot = self.d if action == TERMINATE else action
        if not 0 <= slot <= self.d or not mask[slot]:
            raise InvalidActionError(f"action {action} is not valid in this state")
        cfg = self.config
        rewards = dict.fromkeys(REWARD_KEYS, 0.0)
        before = self.state
        if action == TERMINATE:
            rewards["prediction"] = self.prediction_reward(before)
            if cfg.ood_reward:
                rewards["ood"] = cfg.ood_reward_weight * ood_reward(self.ood_model, self.surrogate, before)
            self.done = True
            after = before
        else:
            value = float(self._x[action])
            after = before.reveal(action, value)
            rewards["cost"] = -cfg.alpha * float(self.cost.per_feature_cost[action])
            if cfg.shaping:
                x_full = self._x if self.surrogate.kind == UNSUPERVISED else None
                if self._phi is None:
                    self._phi = potential(self.surrogate, before, x_full)
                phi_next = potential(self.surrogate, after, x_full)
                rewards["shaping"] = cfg.gamma * phi_next - self._phi
                self._phi = phi_next
            if cfg.goal_reward and self.goal_fn is not None:
                rewards["goal"] = float(self.goal_fn(before, after))
        self.state = after
        self.trace.append(action, rewards)
        if self.done:
            self.trace.observed = after.observed
        return StepOutcome(after, rewards, self.done)
