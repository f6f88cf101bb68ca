"""Shared-trunk actor-critic network with hand-written gradients.

Trunk: ``input -> tanh(h1) -> tanh(h2)``. Heads on the shared embedding:

* group logits, ``K + 1`` wide (the last slot is the terminate pseudo-group);
* member logits for group ``k``: ``h @ Wn + U[k] + bn`` (weights shared
  across groups, conditioned on the group through the row ``U[k]``);
* a scalar value.

Invalid entries are masked to probability exactly 0 by excluding them from
the softmax; their logits receive zero gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wg", "bg", "Wn", "U", "bn", "Wv", "bv")


def init_params(n_in: int, n_groups: int, n_members: int, hidden=(128, 128),
                rng: np.random.Generator | None = None) -> dict:
    """Scaled-Gaussian init; small policy heads so the initial policy is near uniform."""
    rng = rng or np.random.default_rng()
    h1, h2 = hidden

    def dense(a, b, scale=1.0):
        return rng.standard_normal((a, b)) * scale / np.sqrt(a)

    return {
        "W1": dense(n_in, h1),
        "b1": np.zeros(h1),
        "W2": dense(h1, h2),
        "b2": np.zeros(h2),
        "Wg": dense(h2, n_groups + 1, 0.01),
        "bg": np.zeros(n_groups + 1),
        "Wn": dense(h2, n_members, 0.01),
        "U": np.zeros((n_groups, n_members)),
        "bn": np.zeros(n_members),
        "Wv": dense(h2, 1),
        "bv": np.zeros(1),
    }


def masked_log_softmax(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-softmax over the valid entries of the last axis; ``-inf`` elsewhere.

    Rows with no valid entry come back all ``-inf``.
    """
    zm = np.where(mask, z, -np.inf)
    top = np.max(zm, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    ez = np.where(mask, np.exp(zm - top), 0.0)
    tot = ez.sum(-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return np.where(mask, zm - top - np.log(np.where(tot > 0, tot, 1.0)), -np.inf)


@dataclass
class Forward:
    h1: np.ndarray
    h2: np.ndarray
    group_logits: np.ndarray
    member_logits: np.ndarray
    value: np.ndarray


def forward(params: dict, x: np.ndarray) -> Forward:
    x = np.atleast_2d(x)
    h1 = np.tanh(x @ params["W1"] + params["b1"])
    h2 = np.tanh(h1 @ params["W2"] + params["b2"])
    zg = h2 @ params["Wg"] + params["bg"]
    zm = (h2 @ params["Wn"])[:, None, :] + params["U"][None] + params["bn"]
    v = (h2 @ params["Wv"] + params["bv"])[:, 0]
    return Forward(h1, h2, zg, zm, v)


@dataclass
class LossSpec:
    clip: float = 0.2
    vf_coef: float = 0.5
    ent_coef: float = 0.01


def _plogp(lp):
    p = np.exp(lp)
    return p * np.where(p > 0, lp, 0.0), p


def policy_terms(fw: Forward, group_mask, member_mask):
    """Masked log-probabilities and the hierarchical entropy."""
    lg = masked_log_softmax(fw.group_logits, group_mask)
    lm = masked_log_softmax(fw.member_logits, member_mask)
    plp_g, pg = _plogp(lg)
    plp_m, pm = _plogp(lm)
    h_members = -plp_m.sum(-1)
    K = fw.member_logits.shape[1]
    ent = -plp_g.sum(-1) + (pg[:, :K] * h_members).sum(-1)
    return lg, lm, pg, pm, h_members, ent


def loss_and_grads(params: dict, batch: dict, spec: LossSpec | None = None, need_grads: bool = True):
    """Clipped policy-gradient loss with value and entropy terms, plus exact gradients.

    ``batch`` holds ``obs (B, n_in)``, ``group_mask (B, K+1)``,
    ``member_mask (B, K, N)``, ``group (B,)``, ``member (B,)`` (ignored when
    the group is terminate), ``old_logp``, ``adv`` and ``ret``.

    ``loss = -mean(min(r A, clip(r) A)) + vf_coef * 0.5 * mean((v - R)^2)
    - ent_coef * mean(H)`` with ``H = H(group) + sum_k p_k H(member | k)``.
    """
    spec = spec or LossSpec()
    x = np.atleast_2d(batch["obs"])
    B = x.shape[0]
    fw = forward(params, x)
    K = fw.member_logits.shape[1]
    gm, mm = batch["group_mask"], batch["member_mask"]
    k = np.asarray(batch["group"], dtype=int)
    n = np.asarray(batch["member"], dtype=int)
    is_member = k < K
    lg, lm, pg, pm, h_members, ent = policy_terms(fw, gm, mm)
    rows = np.arange(B)
    logp = lg[rows, k].copy()
    kk = np.where(is_member, k, 0)
    nn_ = np.where(is_member, n, 0)
    logp += np.where(is_member, lm[rows, kk, nn_], 0.0)
    if not np.all(np.isfinite(logp)):
        raise FloatingPointError("chosen action has zero probability under the mask")
    ratio = np.exp(logp - batch["old_logp"])
    adv, ret = batch["adv"], batch["ret"]
    clipped = np.clip(ratio, 1 - spec.clip, 1 + spec.clip)
    surr = np.minimum(ratio * adv, clipped * adv)
    vloss = 0.5 * np.mean((fw.value - ret) ** 2)
    loss = -surr.mean() + spec.vf_coef * vloss - spec.ent_coef * ent.mean()
    info = {"policy": float(-surr.mean()), "value": float(vloss), "entropy": float(ent.mean()),
            "clip_frac": float(np.mean(np.abs(ratio - 1) > spec.clip)), "approx_kl": float(np.mean(batch["old_logp"] - logp))}
    if not need_grads:
        return float(loss), None, info

    # d(loss)/d(logp): unclipped branch active when r A <= clip(r) A
    active = ratio * adv <= clipped * adv
    g_logp = np.where(active, -adv * ratio, 0.0) / B

    # group logits
    onehot_g = np.zeros_like(pg)
    onehot_g[rows, k] = 1.0
    dzg = g_logp[:, None] * (onehot_g - pg)
    # member logits of the chosen group
    dzm = np.zeros_like(pm)
    sel = np.flatnonzero(is_member)
    if sel.size:
        onehot = np.zeros((sel.size, pm.shape[2]))
        onehot[np.arange(sel.size), n[sel]] = 1.0
        dzm[sel, k[sel]] += g_logp[sel, None] * (onehot - pm[sel, k[sel]])

    # entropy: H = H_g + sum_k p_k H_k; gradient of -ent_coef * mean(H)
    c = -spec.ent_coef / B
    lg_safe = np.where(pg > 0, lg, 0.0)
    hk = np.zeros_like(pg)
    hk[:, :K] = h_members
    h_g = -(pg * lg_safe).sum(-1)
    mix = (pg * hk).sum(-1)
    dH_dzg = -pg * (lg_safe + h_g[:, None]) + pg * (hk - mix[:, None])
    dzg += c * dH_dzg
    lm_safe = np.where(pm > 0, lm, 0.0)
    dH_dzm = pg[:, :K, None] * (-pm * (lm_safe + h_members[..., None]))
    dzm += c * dH_dzm

    dv = spec.vf_coef * (fw.value - ret) / B

    g = {}
    g["Wg"] = fw.h2.T @ dzg
    g["bg"] = dzg.sum(0)
    dzm_sum = dzm.sum(1)
    g["Wn"] = fw.h2.T @ dzm_sum
    g["U"] = dzm.sum(0)
    g["bn"] = dzm_sum.sum(0)
    g["Wv"] = fw.h2.T @ dv[:, None]
    g["bv"] = np.array([dv.sum()])
    dh2 = dzg @ params["Wg"].T + dzm_sum @ params["Wn"].T + dv[:, None] @ params["Wv"].T
    da2 = dh2 * (1 - fw.h2**2)
    g["W2"] = fw.h1.T @ da2
    g["b2"] = da2.sum(0)
    dh1 = da2 @ params["W2"].T
    da1 = dh1 * (1 - fw.h1**2)
    g["W1"] = x.T @ da1
    g["b1"] = da1.sum(0)
    return float(loss), g, info


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(v**2)) for v in grads.values())))


class Adam:
    def __init__(self, params: dict, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 max_grad_norm: float | None = 0.5):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        if self.lr == 0:
            return
        if self.max_grad_norm is not None:
            norm = global_norm(grads)
            if norm > self.max_grad_norm:
                grads = {k: v * (self.max_grad_norm / norm) for k, v in grads.items()}
        self.t += 1
        for k in params:
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * grads[k]
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * grads[k] ** 2
            mh = self.m[k] / (1 - self.b1**self.t)
            vh = self.v[k] / (1 - self.b2**self.t)
            params[k] -= self.lr * mh / (np.sqrt(vh) + self.eps)
