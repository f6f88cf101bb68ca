"""Synthetic generators with known structure, used by tests and demos.

All generators return raw (unstandardized) arrays; pass them through
:func:`featacq.core.standardize_dataset` before fitting a surrogate.
"""
from __future__ import annotations

from itertools import product

import numpy as np

from .core import CLASSIFICATION, TaskSpec
from .surrogate import GaussianMixture, MixtureSurrogate

GUIDING_Q = (0.35, 0.65, 0.35, 0.65, 0.35)


def guiding_feature_data(n: int, rng: np.random.Generator, q=GUIDING_Q, mode: float = 2.0, mode_sd: float = 0.5,
                         spacing: float = 2.0, cluster_sd: float = 0.1):
    """Independent features plus one guiding feature that picks which of them sets the label.

    Features ``0..m-1`` (``m = len(q)``) are bimodal at ``+-mode`` with
    ``P(x_j > 0) = q[j]``. The last feature ``g`` falls in one of ``m``
    tight clusters, chosen uniformly; if ``g`` is in cluster ``k`` the label
    is ``1[x_k > 0]``. Two acquisitions (``g`` then ``x_k``) determine the
    label exactly, while any fixed subset missing some ``x_k`` cannot.

    Uneven ``q`` makes ``g`` informative about ``y`` on its own, so a myopic
    information-gain policy reaches for it first.

    Returns ``(x, y, k)`` with ``x`` of shape ``(n, m + 1)``.
    """
    q = np.asarray(q, dtype=float)
    m = q.size
    signs = rng.random((n, m)) < q
    x = np.where(signs, mode, -mode) + mode_sd * rng.standard_normal((n, m))
    k = rng.integers(0, m, size=n)
    g = spacing * k + cluster_sd * rng.standard_normal(n)
    y = (x[np.arange(n), k] > 0).astype(int)
    return np.column_stack([x, g]), y, k


def random_covariance(dim: int, rng: np.random.Generator, ridge: float = 0.5) -> np.ndarray:
    a = rng.standard_normal((dim, dim))
    return a @ a.T + ridge * np.eye(dim)


def gaussian_regression_data(n: int, cov: np.ndarray, rng: np.random.Generator):
    """Rows of a zero-mean Gaussian over ``[x, y]``; the last coordinate is the target."""
    z = rng.multivariate_normal(np.zeros(cov.shape[0]), cov, size=n)
    return z[:, :-1], z[:, -1]


def informative_classification_data(n: int, rng: np.random.Generator, d: int = 10, strengths=None):
    """Two-class data whose features carry decreasing amounts of class signal.

    Feature ``j`` is ``N(+-strengths[j] / 2, 1)`` by class; zero strength means
    pure noise.
    """
    if strengths is None:
        strengths = np.array([2.2, 1.8, 1.5, 1.0, 0.7, 0.4, 0.0, 0.0, 0.0, 0.0][:d])
    strengths = np.asarray(strengths, dtype=float)
    y = rng.integers(0, 2, size=n)
    sign = 2 * y - 1
    x = sign[:, None] * strengths[None, :] / 2 + rng.standard_normal((n, strengths.size))
    return x, y


def ood_pair_data(n: int, rng: np.random.Generator, shift: float = 3.0, rho: float = 0.95):
    """In-distribution and out-of-distribution sets for robustness experiments.

    Ten features: 0-2 strongly class-informative, 3-4 weakly informative,
    5-6 an uninformative pair with correlation ``rho``, 7-9 independent noise.
    The OOD set breaks the 5-6 correlation by shifting them in opposite
    directions by ``shift / sqrt(2)`` each, leaving every marginal nearly
    plausible; only acquiring the pair reveals the shift.

    Returns ``(x_in, y_in, x_out, y_out)``.
    """
    def draw(count, ood):
        y = rng.integers(0, 2, size=count)
        s = (2 * y - 1)[:, None]
        x = rng.standard_normal((count, 10))
        x[:, 0:3] += s * 1.2
        x[:, 3:5] += s * 0.4
        z = rng.standard_normal(count)
        x[:, 5] = z
        x[:, 6] = rho * z + np.sqrt(1 - rho**2) * rng.standard_normal(count)
        if ood:
            x[:, 5] += shift / np.sqrt(2)
            x[:, 6] -= shift / np.sqrt(2)
        return x, y

    x_in, y_in = draw(n, False)
    x_out, y_out = draw(n, True)
    return x_in, y_in, x_out, y_out


def mixture_data(n: int, rng: np.random.Generator, d: int = 10, n_components: int = 3, spread: float = 2.0):
    """Samples from a random well-separated Gaussian mixture plus the generating means."""
    centers = spread * rng.standard_normal((n_components, d))
    comp = rng.integers(0, n_components, size=n)
    x = centers[comp] + rng.standard_normal((n, d))
    return x, comp, centers


def guiding_feature_mixture(q=GUIDING_Q, mode: float = 2.0, mode_sd: float = 0.5, spacing: float = 2.0,
                            cluster_sd: float = 0.1):
    """The exact generative mixture behind :func:`guiding_feature_data`, labelled by class.

    One component per (cluster, sign pattern); the label is the sign of the
    feature the cluster points to. Returns a classification
    :class:`~featacq.surrogate.MixtureSurrogate` on the raw scale.
    """
    q = np.asarray(q, dtype=float)
    m = q.size
    means, lws, labels = [], [], []
    for k in range(m):
        for signs in product((0, 1), repeat=m):
            s = np.asarray(signs)
            means.append(np.append(np.where(s == 1, mode, -mode), spacing * k))
            lws.append(np.log(1.0 / m) + np.sum(np.log(np.where(s == 1, q, 1 - q))))
            labels.append(int(s[k]))
    cov = np.diag(np.append(np.full(m, mode_sd**2), cluster_sd**2))
    covs = np.repeat(cov[None], len(means), axis=0)
    joint = GaussianMixture(np.asarray(means), covs, np.asarray(lws), np.asarray(labels))
    return MixtureSurrogate(TaskSpec(CLASSIFICATION, m + 1, 2), joint, reg_floor=0.0)
