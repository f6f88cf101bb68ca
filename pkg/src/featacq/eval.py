"""Performance-versus-budget curves and simple metrics.

A policy is anything with ``select(surrogate, inst, candidates, rng)``
returning a feature index (or ``TERMINATE`` to stop early). Predictions
always come from the surrogate posterior on the acquired subset.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    CLASSIFICATION,
    REGRESSION,
    TERMINATE,
    AcquisitionTrace,
    Dataset,
    PartialInstance,
    candidate_features,
)
from .greedy import posterior_summary, prediction_of
from .surrogate import MixtureSurrogate, predict_posterior

N_BOOT = 1000


@dataclass(frozen=True)
class CurvePoint:
    budget: int
    value: float
    stderr: float


def bootstrap_stderr(values, n_boot: int = N_BOOT, rng: np.random.Generator | None = None, stat=np.mean) -> float:
    """Standard deviation of ``stat`` over per-instance bootstrap resamples."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    rng = rng or np.random.default_rng(0)
    idx = rng.integers(0, v.size, size=(n_boot, v.size))
    return float(np.std([stat(v[r]) for r in idx], ddof=1))


def run_policy(policy, surrogate: MixtureSurrogate, x, budget: int, rng: np.random.Generator | None = None,
               chronological: bool | None = None) -> AcquisitionTrace:
    """Acquire up to ``budget`` features of ``x``; the trace records the posterior after each step."""
    rng = rng or np.random.default_rng()
    if chronological is None:
        chronological = surrogate.task.chronological
    x = np.asarray(x, dtype=float)
    d = surrogate.d
    inst = PartialInstance.empty(d)
    trace = AcquisitionTrace(d)
    while len(trace.acquired) < min(budget, d):
        cand = candidate_features(inst, chronological)
        if cand.size == 0:
            break
        i = policy.select(surrogate, inst, cand, rng)
        if i == TERMINATE:
            trace.append(TERMINATE)
            break
        inst = inst.reveal(int(i), float(x[int(i)]))
        trace.append(int(i))
    trace.observed = inst.observed
    trace.meta["posterior"] = posterior_summary(surrogate, inst)
    p = prediction_of(surrogate, inst)
    trace.prediction = p.tolist() if isinstance(p, np.ndarray) else p
    return trace


def _prefix_states(x, trace: AcquisitionTrace, budgets):
    acq = trace.acquired
    for b in budgets:
        yield b, PartialInstance(x, acq[: min(b, len(acq))])


def _check_budgets(budgets) -> list:
    budgets = [int(b) for b in budgets]
    if any(b < 0 for b in budgets) or budgets != sorted(budgets):
        raise ValueError("budgets must be non-negative and sorted ascending")
    return budgets


def _run_seeded(args):
    policy, surrogate, row, budget, seed = args
    return run_policy(policy, surrogate, row, budget, np.random.default_rng(seed))


def policy_traces(policy, surrogate: MixtureSurrogate, dataset: Dataset, max_budget: int,
                  rng: np.random.Generator | None = None, workers: int = 1) -> list:
    """Run ``policy`` on every row; results do not depend on ``workers``."""
    # one generator per instance, so an instance's draws depend on neither budget nor scheduling
    rng = rng or np.random.default_rng()
    seeds = rng.integers(0, 2**63, size=dataset.n)
    jobs = [(policy, surrogate, row, max_budget, int(sd)) for row, sd in zip(dataset.x, seeds)]
    if workers <= 1 or len(jobs) < 2:
        return [_run_seeded(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_seeded, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def accuracy_curve(policy, surrogate: MixtureSurrogate, dataset: Dataset, budgets,
                   rng: np.random.Generator | None = None, traces=None, n_boot: int = N_BOOT) -> list:
    """Accuracy of the surrogate's argmax class after each budget's acquisitions.

    Each instance is run once to the largest budget; the state at budget
    ``b`` is the first ``b`` acquisitions. This equals running with hard
    budget ``b`` whenever the policy's choices do not depend on the budget,
    which holds for every policy in this package.
    """
    if surrogate.kind != CLASSIFICATION:
        raise ValueError("accuracy needs a classification surrogate")
    budgets = _check_budgets(budgets)
    rng = rng or np.random.default_rng()
    if traces is None:
        traces = policy_traces(policy, surrogate, dataset, budgets[-1] if budgets else 0, rng)
    correct = np.zeros((len(budgets), dataset.n))
    for j, (row, tr) in enumerate(zip(dataset.x, traces)):
        for b_i, (_, inst) in enumerate(_prefix_states(row, tr, budgets)):
            correct[b_i, j] = float(np.argmax(predict_posterior(surrogate, inst)) == int(dataset.y[j]))
    boot = np.random.default_rng(0)
    return [CurvePoint(b, float(correct[k].mean()), bootstrap_stderr(correct[k], n_boot, boot))
            for k, b in enumerate(budgets)]


def _sq_errors(surrogate: MixtureSurrogate, inst: PartialInstance, x, y) -> float:
    if surrogate.kind == REGRESSION:
        return (float(predict_posterior(surrogate, inst)[0]) - float(y)) ** 2
    u = inst.unobs_idx
    if u.size == 0:
        return 0.0
    imputed = prediction_of(surrogate, inst)
    return float(np.mean((imputed[u] - x[u]) ** 2))


def rmse_curve(policy, surrogate: MixtureSurrogate, dataset: Dataset, budgets,
               rng: np.random.Generator | None = None, traces=None, n_boot: int = N_BOOT) -> list:
    """Root mean squared error of the target (regression) or of imputing the unacquired features."""
    if surrogate.kind == CLASSIFICATION:
        raise ValueError("use accuracy_curve for classification")
    budgets = _check_budgets(budgets)
    rng = rng or np.random.default_rng()
    if traces is None:
        traces = policy_traces(policy, surrogate, dataset, budgets[-1] if budgets else 0, rng)
    err = np.zeros((len(budgets), dataset.n))
    for j, (row, tr) in enumerate(zip(dataset.x, traces)):
        y = None if dataset.y is None else dataset.y[j]
        for b_i, (_, inst) in enumerate(_prefix_states(row, tr, budgets)):
            err[b_i, j] = _sq_errors(surrogate, inst, row, y)

    def rmse(v):
        return float(np.sqrt(np.mean(v)))

    boot = np.random.default_rng(0)
    return [CurvePoint(b, rmse(err[k]), bootstrap_stderr(err[k], n_boot, boot, rmse)) for k, b in enumerate(budgets)]


def f1_score(predictions, labels, positive_class=1) -> float:
    """Harmonic mean of precision and recall for ``positive_class``; 0 if both vanish."""
    p = np.asarray(predictions) == positive_class
    t = np.asarray(labels) == positive_class
    if p.shape != t.shape:
        raise ValueError("predictions and labels differ in length")
    tp = float(np.sum(p & t))
    fp = float(np.sum(p & ~t))
    fn = float(np.sum(~p & t))
    if tp == 0:
        return 0.0
    prec, rec = tp / (tp + fp), tp / (tp + fn)
    return 2 * prec * rec / (prec + rec)


def write_curve_csv(path, points, metric: str = "metric") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["budget", metric, "stderr"])
        for pt in points:
            w.writerow([pt.budget, repr(float(pt.value)), repr(float(pt.stderr))])


def read_curve_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return [CurvePoint(int(r[0]), float(r[1]), float(r[2])) for r in rows[1:]]


__all__ = [
    "CurvePoint", "accuracy_curve", "bootstrap_stderr", "f1_score", "policy_traces", "read_curve_csv",
    "rmse_curve", "run_policy", "write_curve_csv",
]
