"""Exact arbitrary-conditional surrogate built from Gaussian mixtures.

Every conditional ``p(x_u | x_o)``, class posterior ``P(y | x_o)``, sample,
moment and entropy the acquisition policies need is available in closed form
for a Gaussian mixture: marginalizing drops rows/columns, conditioning is a
Schur complement per component plus a reweighting of the components by their
marginal likelihood of ``x_o``.

For classification the surrogate holds one mixture per class; internally the
components are stored as a single labelled mixture whose log-weights are
``log P(y=c) + log w_{c,m}``, so that conditioning on ``x_o`` yields the class
posterior directly as the per-label sum of reweighted component masses.
For regression the target is appended as the last dimension.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .core import (
    CLASSIFICATION,
    REGRESSION,
    UNSUPERVISED,
    Dataset,
    DataError,
    PartialInstance,
    StandardizationParams,
    TaskSpec,
    sample_mask,
)

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
REG_FLOOR = 1e-4
FORMAT_NAME = "featacq.surrogate"
FORMAT_VERSION = 1


def logsumexp(a, axis=None, keepdims: bool = False):
    """``log(sum(exp(a)))`` along ``axis``; rows of all ``-inf`` give ``-inf``.

    A lean numpy version: the hot loops call this on tiny arrays, where
    per-call overhead matters more than generality.
    """
    a = np.asarray(a, dtype=float)
    top = np.max(a, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - top), axis=axis, keepdims=True)) + top
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out if out.ndim else float(out)


class NumericalError(ArithmeticError):
    """Raised when a computation produces non-finite values."""


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    covariance: np.ndarray
    log_weight: float
    label: int = -1


def standard_normals(n: int, dim: int, rng: np.random.Generator, qmc: bool = False):
    """Return ``(u, z)``: ``n`` uniforms for component choice and ``n x dim`` normals.

    With ``qmc=True`` the draws come from a scrambled Sobol sequence, which
    keeps each draw marginally exact while spreading the points evenly.
    """
    if not qmc:
        return rng.random(n), rng.standard_normal((n, dim))
    sob = stats.qmc.Sobol(d=dim + 1, scramble=True, seed=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        pts = sob.random(n)
    pts = np.clip(pts, 1e-12, 1.0 - 1e-12)
    return pts[:, 0], stats.norm.ppf(pts[:, 1:])


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _safe_cholesky(covs: np.ndarray, what: str = "covariance") -> np.ndarray:
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        warnings.warn(f"ill-conditioned {what}; adding {REG_FLOOR:g} to the diagonal", RuntimeWarning)
        eye = np.eye(covs.shape[-1])
        return np.linalg.cholesky(_sym(covs) + REG_FLOOR * eye)


class GaussianMixture:
    """Mixture of full-covariance Gaussians, stored as stacked arrays.

    ``labels`` optionally tags each component with a class index; conditioning
    and marginalization carry the labels along.
    """

    def __init__(self, means, covs, log_weights, labels=None, normalize: bool = True):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        covs = np.asarray(covs, dtype=float).reshape(means.shape[0], means.shape[1], means.shape[1])
        lw = np.asarray(log_weights, dtype=float).reshape(-1)
        if lw.size != means.shape[0]:
            raise ValueError("one log-weight per component required")
        if normalize:
            lw = lw - logsumexp(lw)
        self.means = means
        self.covs = covs
        self.log_weights = lw
        self.labels = None if labels is None else np.asarray(labels, dtype=int).reshape(-1)
        self._chol = None
        self._prec = None
        self._logdet = None

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def components(self) -> list[GaussianComponent]:
        labels = self.labels if self.labels is not None else -np.ones(self.n_components, int)
        return [
            GaussianComponent(self.means[m].copy(), self.covs[m].copy(), float(self.log_weights[m]), int(labels[m]))
            for m in range(self.n_components)
        ]

    def _factor(self):
        if self._chol is None:
            self._chol = _safe_cholesky(self.covs)
            eye = np.broadcast_to(np.eye(self.dim), self.covs.shape)
            linv = np.linalg.solve(self._chol, eye)
            self._prec = np.swapaxes(linv, -1, -2) @ linv
            self._logdet = 2.0 * np.log(np.diagonal(self._chol, axis1=-2, axis2=-1)).sum(-1)
        return self._chol, self._prec, self._logdet

    def component_logpdf(self, x: np.ndarray) -> np.ndarray:
        """Per-component log densities, shape ``(n, M)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, prec, logdet = self._factor()
        diff = x[:, None, :] - self.means[None, :, :]
        quad = np.einsum("nmi,mij,nmj->nm", diff, prec, diff)
        return -0.5 * (quad + logdet[None, :] + self.dim * LOG_2PI)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_logpdf(x) + self.log_weights[None, :], axis=1)

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        lj = self.component_logpdf(x) + self.log_weights[None, :]
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def score(self, x: np.ndarray) -> np.ndarray:
        """Gradient of ``log p`` with respect to ``x``, shape ``(n, dim)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, prec, _ = self._factor()
        resp = self.responsibilities(x)
        diff = x[:, None, :] - self.means[None, :, :]
        grads = -np.einsum("mij,nmj->nmi", prec, diff)
        return np.einsum("nm,nmi->ni", resp, grads)

    def marginal(self, idx) -> "GaussianMixture":
        idx = np.asarray(idx, dtype=int)
        return GaussianMixture(
            self.means[:, idx],
            self.covs[:, idx][:, :, idx],
            self.log_weights,
            self.labels,
            normalize=False,
        )

    def restrict(self, label: int) -> tuple["GaussianMixture", float]:
        """Components carrying ``label``, renormalized; also returns their log-mass."""
        if self.labels is None:
            raise ValueError("mixture has no labels")
        sel = self.labels == label
        if not np.any(sel):
            raise ValueError(f"no components with label {label}")
        lw = self.log_weights[sel]
        mass = float(logsumexp(lw))
        return GaussianMixture(self.means[sel], self.covs[sel], lw - mass, self.labels[sel], normalize=False), mass

    def smoothed(self, sigma: float) -> "GaussianMixture":
        """Mixture convolved with ``N(0, sigma^2 I)``."""
        return GaussianMixture(
            self.means,
            self.covs + (sigma**2) * np.eye(self.dim)[None],
            self.log_weights,
            self.labels,
            normalize=False,
        )

    def condition(self, obs_pos, x_obs) -> tuple["GaussianMixture | None", float]:
        """Condition on dimensions ``obs_pos`` taking values ``x_obs``.

        Returns the mixture over the remaining dimensions (in increasing
        order; ``None`` if nothing remains) and ``log p(x_obs)``.
        """
        obs_pos = np.asarray(obs_pos, dtype=int).reshape(-1)
        x_obs = np.asarray(x_obs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x_obs)):
            raise DataError("conditioning values must be finite")
        rest = np.setdiff1d(np.arange(self.dim), obs_pos)
        if obs_pos.size == 0:
            return self, 0.0
        s_oo = _sym(self.covs[:, obs_pos][:, :, obs_pos])
        chol = _safe_cholesky(s_oo, "observed covariance block")
        diff = x_obs[None, :] - self.means[:, obs_pos]
        # L^{-1} diff, then quad form and log det from the factor
        w = np.linalg.solve(chol, diff[..., None])[..., 0]
        quad = np.einsum("mi,mi->m", w, w)
        logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(-1)
        comp_ll = -0.5 * (quad + logdet + obs_pos.size * LOG_2PI)
        joint = self.log_weights + comp_ll
        log_marg = float(logsumexp(joint))
        if not math.isfinite(log_marg):
            raise NumericalError("marginal likelihood underflow while conditioning")
        if rest.size == 0:
            return None, log_marg
        s_uo = self.covs[:, rest][:, :, obs_pos]
        # K^T = S_oo^{-1} S_ou via two triangular-shaped solves on the factor
        a = np.linalg.solve(chol, np.swapaxes(s_uo, -1, -2))
        gain = np.swapaxes(np.linalg.solve(np.swapaxes(chol, -1, -2), a), -1, -2)
        alpha = np.linalg.solve(np.swapaxes(chol, -1, -2), w[..., None])[..., 0]
        mean_u = self.means[:, rest] + np.einsum("mij,mj->mi", s_uo, alpha)
        cov_u = _sym(self.covs[:, rest][:, :, rest] - gain @ np.swapaxes(s_uo, -1, -2))
        out = GaussianMixture(mean_u, cov_u, joint - log_marg, self.labels, normalize=False)
        return out, log_marg

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        w = self.weights
        mu = w @ self.means
        dev = self.means - mu
        return np.einsum("m,mij->ij", w, self.covs) + np.einsum("m,mi,mj->ij", w, dev, dev)

    def variance(self) -> np.ndarray:
        w = self.weights
        mu = w @ self.means
        return w @ np.diagonal(self.covs, axis1=1, axis2=2) + w @ (self.means - mu) ** 2

    def label_log_probs(self, num_labels: int) -> np.ndarray:
        out = np.full(num_labels, -np.inf)
        for c in range(num_labels):
            sel = self.labels == c
            if np.any(sel):
                out[c] = logsumexp(self.log_weights[sel])
        return out

    def sample(self, n: int, rng: np.random.Generator, qmc: bool = False, return_components: bool = False):
        """Ancestral sampling: component by weight, then a Gaussian draw."""
        if n < 1:
            raise ValueError("count must be >= 1")
        u, z = standard_normals(n, self.dim, rng, qmc=qmc)
        cdf = np.cumsum(self.weights)
        comp = np.minimum(np.searchsorted(cdf / cdf[-1], u, side="right"), self.n_components - 1)
        chol, _, _ = self._factor()
        x = self.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
        return (x, comp) if return_components else x


@dataclass
class EMConfig:
    reg_floor: float = REG_FLOOR
    max_iter: int = 300
    tol: float = 1e-9
    n_init: int = 3


@dataclass
class EMResult:
    mixture: GaussianMixture
    history: list
    n_iter: int
    # mean of log sum_k pi_k N(x; mu_k, cov_k) exp(-reg_floor / 2 * tr(cov_k^-1)), the quantity EM ascends
    objective: list = field(default_factory=list)


def kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new center drawn with probability proportional to squared distance."""
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(1))
    return np.asarray(centers)


class _EmptyComponent(Exception):
    pass


def _em_once(x, k, rng, cfg: EMConfig) -> EMResult:
    n, dim = x.shape
    eye = np.eye(dim)
    centers = kmeans_pp(x, k, rng)
    assign = ((x[:, None, :] - centers[None]) ** 2).sum(-1).argmin(1)
    glob = np.atleast_2d(np.cov(x, rowvar=False, bias=True)) if n > 1 else np.zeros((dim, dim))
    means = np.empty((k, dim))
    covs = np.empty((k, dim, dim))
    lw = np.empty(k)
    for j in range(k):
        pts = x[assign == j]
        if pts.shape[0] == 0:
            pts = centers[j : j + 1]
        means[j] = pts.mean(0)
        c = np.atleast_2d(np.cov(pts, rowvar=False, bias=True)) if pts.shape[0] > dim else glob
        covs[j] = c + cfg.reg_floor * eye
        lw[j] = math.log(max(pts.shape[0], 1) / n)
    mix = GaussianMixture(means, covs, lw)
    history, objective = [], []
    it = 0
    for it in range(1, cfg.max_iter + 1):
        lj = mix.component_logpdf(x) + mix.log_weights[None, :]
        ll = float(logsumexp(lj, axis=1).mean())
        # the floor enters as a per-component factor exp(-reg_floor / 2 * tr(cov^-1)),
        # whose exact M-step is cov = S + reg_floor * I
        _, prec, _ = mix._factor()
        lj = lj - 0.5 * cfg.reg_floor * np.trace(prec, axis1=1, axis2=2)[None, :]
        obj_rows = logsumexp(lj, axis=1)
        obj = float(obj_rows.mean())
        if not (math.isfinite(ll) and math.isfinite(obj)):
            raise NumericalError("non-finite log-likelihood in EM")
        history.append(ll)
        objective.append(obj)
        resp = np.exp(lj - obj_rows[:, None])
        nk = resp.sum(0)
        # a component owning under a thousandth of one row has collapsed
        if np.any(nk < 1e-3):
            raise _EmptyComponent()
        means = (resp.T @ x) / nk[:, None]
        diff = x[:, None, :] - means[None]
        covs = np.einsum("nm,nmi,nmj->mij", resp, diff, diff) / nk[:, None, None] + cfg.reg_floor * eye
        mix = GaussianMixture(means, _sym(covs), np.log(nk / n))
        if len(objective) > 1 and abs(objective[-1] - objective[-2]) < cfg.tol:
            break
    return EMResult(mix, history, it, objective)


def em_gmm(x: np.ndarray, k: int, rng: np.random.Generator, cfg: EMConfig | None = None) -> EMResult:
    """Fit a ``k``-component mixture by EM with k-means++ initialization.

    The best of ``cfg.n_init`` restarts (by final objective) is kept.
    A component that loses all its mass triggers a refit with one fewer
    component and a warning.
    """
    cfg = cfg or EMConfig()
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 1:
        raise DataError("cannot fit a mixture to zero rows")
    if k > x.shape[0]:
        warnings.warn(f"only {x.shape[0]} rows for {k} components; using {x.shape[0]}", RuntimeWarning)
        k = x.shape[0]
    best = None
    while best is None:
        results = []
        for _ in range(max(1, cfg.n_init if k > 1 else 1)):
            try:
                results.append(_em_once(x, k, rng, cfg))
            except _EmptyComponent:
                continue
        if results:
            best = max(results, key=lambda r: r.objective[-1])
        elif k > 1:
            warnings.warn(f"empty mixture component; refitting with {k - 1} components", RuntimeWarning)
            k -= 1
        else:
            raise NumericalError("EM failed for a single component")
    return best


@dataclass
class MixtureSurrogate:
    """Class-conditional (or joint) Gaussian-mixture surrogate.

    ``joint`` lives over the ``d`` features, plus the target as dimension
    ``d`` for regression. For classification each component carries its class
    label and the log-weights include the class log-prior.
    """

    task: TaskSpec
    joint: GaussianMixture
    reg_floor: float = REG_FLOOR
    standardization: StandardizationParams | None = None
    fit_info: dict = field(default_factory=dict)

    def __post_init__(self):
        expect = self.task.d + (1 if self.task.kind == REGRESSION else 0)
        if self.joint.dim != expect:
            raise ValueError(f"mixture dimension {self.joint.dim} != expected {expect}")
        if self.task.kind == CLASSIFICATION and self.joint.labels is None:
            raise ValueError("classification surrogate needs labelled components")
        self._features = None

    @property
    def d(self) -> int:
        return self.task.d

    @property
    def kind(self) -> str:
        return self.task.kind

    @property
    def num_classes(self) -> int:
        return self.task.num_classes

    @property
    def target_index(self) -> int:
        return self.task.d

    @property
    def features(self) -> GaussianMixture:
        """Mixture over the features only (target marginalized out)."""
        if self._features is None:
            if self.kind == REGRESSION:
                self._features = self.joint.marginal(np.arange(self.d))
            else:
                self._features = self.joint
        return self._features

    def class_log_priors(self) -> np.ndarray:
        return self.joint.label_log_probs(self.num_classes)

    def class_mixture(self, c: int) -> GaussianMixture:
        return self.joint.restrict(c)[0]

    def condition_joint(self, inst: PartialInstance) -> tuple["GaussianMixture | None", float]:
        """Condition the joint (features and, for regression, target) on ``x_o``."""
        return self.joint.condition(inst.obs_idx, inst.x_o)

    def to_json(self) -> dict:
        comps = []
        labels = self.joint.labels
        for m in range(self.joint.n_components):
            comps.append(
                {
                    "mean": self.joint.means[m].tolist(),
                    "cov": self.joint.covs[m].tolist(),
                    "log_weight": float(self.joint.log_weights[m]),
                    "label": None if labels is None else int(labels[m]),
                }
            )
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "task": {
                "kind": self.task.kind,
                "d": self.task.d,
                "num_classes": self.task.num_classes,
                "ordering_constraint": self.task.ordering_constraint,
            },
            "dim": self.joint.dim,
            "reg_floor": self.reg_floor,
            "class_log_priors": None if self.kind != CLASSIFICATION else self.class_log_priors().tolist(),
            "components": comps,
            "standardization": None if self.standardization is None else self.standardization.to_dict(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "MixtureSurrogate":
        if data.get("format") != FORMAT_NAME:
            raise DataError("not a surrogate model file")
        if int(data.get("version", -1)) != FORMAT_VERSION:
            raise DataError(f"unsupported surrogate format version {data.get('version')}")
        t = data["task"]
        task = TaskSpec(t["kind"], int(t["d"]), int(t["num_classes"]), t["ordering_constraint"])
        comps = data["components"]
        labels = None if comps[0]["label"] is None else [c["label"] for c in comps]
        mix = GaussianMixture(
            [c["mean"] for c in comps],
            [c["cov"] for c in comps],
            [c["log_weight"] for c in comps],
            labels,
            normalize=False,
        )
        std = data.get("standardization")
        return cls(task, mix, float(data["reg_floor"]), None if std is None else StandardizationParams.from_dict(std))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "MixtureSurrogate":
        return cls.from_json(json.loads(Path(path).read_text()))


def fit_em(dataset: Dataset, num_components: int, seed: int = 0, config: EMConfig | None = None,
           standardization: StandardizationParams | None = None) -> MixtureSurrogate:
    """Fit the surrogate by EM.

    Classification fits one mixture per class (priors from class
    frequencies); regression fits one mixture over ``[x, y]``; unsupervised
    fits one mixture over ``x``. Per-class log-likelihood histories land in
    ``fit_info``.
    """
    cfg = config or EMConfig()
    rng = np.random.default_rng(seed)
    task = dataset.task
    info = {"history": {}, "n_iter": {}, "num_components": {}}
    if task.kind == CLASSIFICATION:
        means, covs, lws, labels = [], [], [], []
        counts = np.bincount(dataset.y, minlength=task.num_classes)
        for c in range(task.num_classes):
            xc = dataset.x[dataset.y == c]
            if xc.shape[0] == 0:
                raise DataError(f"class {c} has no training rows")
            res = em_gmm(xc, num_components, rng, cfg)
            prior = math.log(counts[c] / counts.sum())
            means.append(res.mixture.means)
            covs.append(res.mixture.covs)
            lws.append(res.mixture.log_weights + prior)
            labels.append(np.full(res.mixture.n_components, c))
            info["history"][c] = res.history
            info["n_iter"][c] = res.n_iter
            info["num_components"][c] = res.mixture.n_components
        joint = GaussianMixture(np.concatenate(means), np.concatenate(covs), np.concatenate(lws),
                                np.concatenate(labels))
    else:
        data = dataset.x if task.kind == UNSUPERVISED else np.column_stack([dataset.x, dataset.y])
        res = em_gmm(data, num_components, rng, cfg)
        joint = res.mixture
        info["history"][0] = res.history
        info["n_iter"][0] = res.n_iter
        info["num_components"][0] = res.mixture.n_components
    return MixtureSurrogate(task, joint, cfg.reg_floor, standardization, info)


def _class_mix(surrogate: MixtureSurrogate, cls):
    if cls is None:
        return surrogate.features
    if surrogate.kind != CLASSIFICATION:
        raise ValueError("class conditioning requires a classification surrogate")
    return surrogate.class_mixture(int(cls))


def log_marginal(surrogate: MixtureSurrogate, inst: PartialInstance, cls=None) -> float:
    """``log p(x_o)`` (or ``log p(x_o | y=cls)``); 0.0 for an empty observed set."""
    if len(inst.observed) == 0:
        return 0.0
    x_o = inst.x_o
    if not np.all(np.isfinite(x_o)):
        raise DataError("non-finite observed values")
    mix = _class_mix(surrogate, cls).marginal(inst.obs_idx)
    return float(mix.logpdf(x_o[None, :])[0])


def condition(surrogate: MixtureSurrogate, inst: PartialInstance, cls=None, include_target: bool = False):
    """Conditional mixture over the unobserved features given ``x_o``.

    With ``include_target`` (regression only) the target is appended as the
    last dimension of the result.
    """
    if include_target and surrogate.kind != REGRESSION:
        raise ValueError("include_target only applies to regression")
    u = inst.unobs_idx
    if u.size == 0 and not include_target:
        raise ValueError("no unobserved features to condition")
    if cls is None:
        mix = surrogate.joint
    else:
        mix = _class_mix(surrogate, cls)
    cond, _ = mix.condition(inst.obs_idx, inst.x_o)
    if surrogate.kind == REGRESSION and not include_target and cls is None:
        cond = cond.marginal(np.arange(u.size))
    return cond


def predict_posterior(surrogate: MixtureSurrogate, inst: PartialInstance):
    """Class log-probabilities, or ``(mean, variance)`` of the target for regression."""
    if surrogate.kind == CLASSIFICATION:
        cond, _ = surrogate.joint.condition(inst.obs_idx, inst.x_o)
        if cond is None:
            # everything observed: reweighting still defined through the marginal
            lj = surrogate.joint.component_logpdf(inst.values[None, :])[0] + surrogate.joint.log_weights
            out = np.full(surrogate.num_classes, -np.inf)
            for c in range(surrogate.num_classes):
                sel = surrogate.joint.labels == c
                out[c] = logsumexp(lj[sel])
            return out - logsumexp(out)
        return cond.label_log_probs(surrogate.num_classes)
    if surrogate.kind == REGRESSION:
        cond, _ = surrogate.joint.condition(inst.obs_idx, inst.x_o)
        ymix = cond.marginal([cond.dim - 1])
        return float(ymix.mean()[0]), float(ymix.variance()[0])
    raise ValueError("predict_posterior needs a supervised surrogate")


def categorical_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def gaussian_entropy(var) -> np.ndarray:
    return 0.5 * np.log(2.0 * math.pi * math.e * np.asarray(var, dtype=float))


def conditional_entropy_y(surrogate: MixtureSurrogate, inst: PartialInstance) -> float:
    """``H(y | x_o)`` in nats: exact for classes, Gaussian in the exact variance for regression."""
    post = predict_posterior(surrogate, inst)
    if surrogate.kind == CLASSIFICATION:
        return categorical_entropy(np.exp(post))
    return float(gaussian_entropy(post[1]))


def sample_conditional(surrogate: MixtureSurrogate, inst: PartialInstance, count: int,
                       rng: np.random.Generator, cls=None, qmc: bool = False) -> np.ndarray:
    """Draw ``count`` imputations of ``x_u`` from ``p(x_u | x_o)``, shape ``(count, |u|)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return condition(surrogate, inst, cls).sample(count, rng, qmc=qmc)


def heldout_masked_objective(surrogate: MixtureSurrogate, dataset: Dataset, rng: np.random.Generator,
                             mask_sampler=sample_mask) -> float:
    """Mean of ``log p(x_u | x_o)`` (+ ``log p(y | x_o)`` when supervised) over random masks."""
    if dataset.n == 0:
        raise DataError("held-out set is empty")
    total = 0.0
    for r in range(dataset.n):
        x = dataset.x[r]
        o = mask_sampler(dataset.d, rng)
        inst = PartialInstance(x, o)
        full = PartialInstance(x, range(dataset.d))
        term = log_marginal(surrogate, full) - log_marginal(surrogate, inst)
        if surrogate.kind == CLASSIFICATION:
            term += float(predict_posterior(surrogate, inst)[int(dataset.y[r])])
        elif surrogate.kind == REGRESSION:
            cond, _ = surrogate.joint.condition(inst.obs_idx, inst.x_o)
            ymix = cond.marginal([cond.dim - 1])
            term += float(ymix.logpdf([[dataset.y[r]]])[0])
        total += term
    return total / dataset.n
