"""Partially-observed OOD detection from multiscale score norms.

For a noise level ``sigma`` the smoothed marginal ``q_sigma(x_o)`` of a
Gaussian mixture is the same mixture with covariances ``Sigma_oo + sigma^2 I``,
so its score ``grad log q_sigma(x_o)`` is available exactly. The norms of the
scores at ``L`` noise levels form a low-dimensional statistic; a linear-Gaussian
autoregressive density over those norms, conditioned on a summary of the
mask, is fit on in-distribution data. The OOD score is the negative
log-density of an instance's statistics.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .core import DataError, Dataset, PartialInstance, sample_nonempty_mask
from .surrogate import LOG_2PI, MixtureSurrogate, log_marginal

FORMAT_NAME = "featacq.ood"
FORMAT_VERSION = 1
VAR_FLOOR = 1e-8


@dataclass(frozen=True)
class NoiseSchedule:
    levels: tuple

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 1 or lv.size < 1:
            raise ValueError("need at least one noise level")
        if np.any(lv <= 0) or np.any(np.diff(lv) >= 0):
            raise ValueError("noise levels must be positive and strictly decreasing")
        object.__setattr__(self, "levels", tuple(float(v) for v in lv))

    @classmethod
    def geometric(cls, high: float = 1.0, low: float = 0.01, count: int = 10) -> "NoiseSchedule":
        return cls(tuple(np.geomspace(high, low, count)))

    def __len__(self) -> int:
        return len(self.levels)


def _require_observed(inst: PartialInstance) -> None:
    if len(inst.observed) == 0:
        raise ValueError("score statistics need at least one observed feature")


def smoothed_marginal_score(surrogate: MixtureSurrogate, inst: PartialInstance, sigma: float) -> np.ndarray:
    """``grad log q_sigma(x_o)`` over the observed dimensions (features only)."""
    _require_observed(inst)
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    mix = surrogate.features.marginal(inst.obs_idx).smoothed(sigma)
    return mix.score(inst.x_o[None])[0]


def smoothed_log_marginal(surrogate: MixtureSurrogate, inst: PartialInstance, sigma: float) -> float:
    _require_observed(inst)
    mix = surrogate.features.marginal(inst.obs_idx).smoothed(sigma)
    return float(mix.logpdf(inst.x_o[None])[0])


def score_stats(surrogate: MixtureSurrogate, schedule: NoiseSchedule, inst: PartialInstance) -> np.ndarray:
    """Euclidean norms of the smoothed-marginal scores, one per noise level."""
    _require_observed(inst)
    marg = surrogate.features.marginal(inst.obs_idx)
    x = inst.x_o[None]
    return np.array([np.linalg.norm(marg.smoothed(s).score(x)[0]) for s in schedule.levels])


def mask_summary(inst: PartialInstance) -> np.ndarray:
    """``(observed fraction, log(1 + |o|))``."""
    k = len(inst.observed)
    return np.array([k / inst.d, math.log1p(k)])


@dataclass
class ScoreStatsModel:
    """Autoregressive linear-Gaussian density over score norms given a mask summary.

    Level ``l`` is ``N(w_l . [1, s_1..s_{l-1}, mask summary], v_l)``. With
    ``log_norms`` the model is over ``log s`` instead (plus the Jacobian, so
    it stays a density over the raw norms).
    """

    schedule: NoiseSchedule
    weights: list
    variances: np.ndarray
    use_mask: bool = True
    log_norms: bool = False
    fit_info: dict = field(default_factory=dict)

    def _design(self, stats: np.ndarray, summary: np.ndarray, level: int) -> np.ndarray:
        n = stats.shape[0]
        cols = [np.ones((n, 1)), stats[:, :level]]
        if self.use_mask:
            cols.append(summary)
        return np.hstack(cols)

    def _transform(self, stats):
        stats = np.atleast_2d(np.asarray(stats, dtype=float))
        if self.log_norms:
            return np.log(np.maximum(stats, 1e-300)), -np.log(np.maximum(stats, 1e-300)).sum(1)
        return stats, np.zeros(stats.shape[0])

    def log_likelihood(self, stats, summary) -> np.ndarray:
        """Per-row log-density of the statistics; sum of ``L`` conditional terms."""
        z, jac = self._transform(stats)
        summary = np.atleast_2d(np.asarray(summary, dtype=float))
        total = jac.copy()
        for level in range(len(self.schedule)):
            pred = self._design(z, summary, level) @ self.weights[level]
            v = self.variances[level]
            total += -0.5 * (LOG_2PI + math.log(v) + (z[:, level] - pred) ** 2 / v)
        return total

    def to_json(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "levels": list(self.schedule.levels),
            "weights": [np.asarray(w).tolist() for w in self.weights],
            "variances": np.asarray(self.variances).tolist(),
            "use_mask": self.use_mask,
            "log_norms": self.log_norms,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScoreStatsModel":
        if data.get("format") != FORMAT_NAME:
            raise DataError("not an OOD model file")
        if int(data.get("version", -1)) != FORMAT_VERSION:
            raise DataError(f"unsupported OOD format version {data.get('version')}")
        return cls(
            NoiseSchedule(tuple(data["levels"])),
            [np.asarray(w, dtype=float) for w in data["weights"]],
            np.asarray(data["variances"], dtype=float),
            bool(data["use_mask"]),
            bool(data["log_norms"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ScoreStatsModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def collect_stats(surrogate, dataset, schedule, mask_sampler=sample_nonempty_mask, rng=None, masks_per_instance=1):
    rng = rng or np.random.default_rng()
    x = dataset.x if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=float)
    stats, summ = [], []
    for row in x:
        for _ in range(masks_per_instance):
            inst = PartialInstance(row, mask_sampler(x.shape[1], rng))
            if len(inst.observed) == 0:
                continue
            stats.append(score_stats(surrogate, schedule, inst))
            summ.append(mask_summary(inst))
    if not stats:
        raise DataError("no statistics collected: every sampled mask was empty")
    return np.asarray(stats), np.asarray(summ)


def fit_stats_model(stats, summary, schedule: NoiseSchedule, use_mask: bool = True,
                    log_norms: bool = False) -> ScoreStatsModel:
    """Maximum-likelihood fit: per level, least squares for the mean and the residual variance."""
    model = ScoreStatsModel(schedule, [], np.zeros(len(schedule)), use_mask, log_norms)
    z, _ = model._transform(stats)
    summary = np.atleast_2d(np.asarray(summary, dtype=float))
    floored = []
    for level in range(len(schedule)):
        a = model._design(z, summary, level)
        w, *_ = np.linalg.lstsq(a, z[:, level], rcond=None)
        resid = z[:, level] - a @ w
        v = float(np.mean(resid**2))
        if not v > VAR_FLOOR:
            floored.append(level)
            v = VAR_FLOOR
        model.weights.append(w)
        model.variances[level] = v
    if floored:
        warnings.warn(f"density-of-states variance floored at {VAR_FLOOR} for levels {floored}", RuntimeWarning)
    model.fit_info = {"n": int(z.shape[0]), "floored_levels": floored}
    return model


def fit_dose(surrogate: MixtureSurrogate, dataset, schedule: NoiseSchedule | None = None,
             mask_sampler=sample_nonempty_mask, rng: np.random.Generator | None = None,
             masks_per_instance: int = 1, use_mask: bool = True, log_norms: bool = False) -> ScoreStatsModel:
    """Fit the density-of-states model on random-mask statistics of in-distribution data."""
    schedule = schedule or NoiseSchedule.geometric()
    stats, summ = collect_stats(surrogate, dataset, schedule, mask_sampler, rng, masks_per_instance)
    return fit_stats_model(stats, summ, schedule, use_mask, log_norms)


def ood_score(model: ScoreStatsModel, surrogate: MixtureSurrogate, inst: PartialInstance) -> float:
    """``-log p(s_1..s_L | mask)``; larger means more likely out-of-distribution."""
    stats = score_stats(surrogate, model.schedule, inst)
    return float(-model.log_likelihood(stats[None], mask_summary(inst)[None])[0])


def ood_reward(model: ScoreStatsModel, surrogate: MixtureSurrogate, inst: PartialInstance) -> float:
    """Terminal robustness reward: the OOD score of the acquired subset (0 if nothing was acquired)."""
    if len(inst.observed) == 0:
        return 0.0
    return ood_score(model, surrogate, inst)


def neg_log_marginal(surrogate: MixtureSurrogate, inst: PartialInstance) -> float:
    """Raw ``-log p(x_o)`` under the surrogate, the comparison baseline."""
    return -log_marginal(surrogate, inst)


def auroc(scores_in, scores_out) -> float:
    """P(random OOD score > random in-distribution score), ties counted half."""
    a = np.asarray(scores_in, dtype=float).ravel()
    b = np.asarray(scores_out, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both score lists must be nonempty")
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[a.size:].sum() - b.size * (b.size + 1) / 2.0
    return float(u / (a.size * b.size))


def write_scores_csv(path, rows) -> None:
    """Rows of ``(instance_id, num_observed, score, label)``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "num_observed", "score", "label"])
        for r in rows:
            w.writerow([r[0], int(r[1]), repr(float(r[2])), r[3]])
