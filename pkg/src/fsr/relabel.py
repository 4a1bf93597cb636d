"""Momentum pseudo-labels, MixUp and the combined training loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fsr import nn
from fsr.dictionary import SampleState
from fsr.errors import ConfigurationError


@dataclass(frozen=True)
class RelabelConfig:
    beta: float = 0.1
    p: float = 2.0
    mixup_alpha: float = 1.0
    enabled: bool = True
    mixup: bool = True

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1], got {self.beta}")
        if self.p < 0:
            raise ConfigurationError(f"pseudo-loss multiplier must be non-negative, got {self.p}")
        if self.mixup_alpha <= 0:
            raise ConfigurationError(f"mixup_alpha must be positive, got {self.mixup_alpha}")

    @property
    def pseudo_active(self) -> bool:
        return self.enabled and self.p > 0


def update_pseudo_label(state: SampleState, idx, prediction, beta: float) -> SampleState:
    """EMA of softmax predictions; the first prediction seeds the label."""
    idx = np.atleast_1d(idx)
    prediction = np.atleast_2d(prediction)
    seen = state.pseudo_seen[idx][:, None]
    state.pseudo_label[idx] = np.where(seen, beta * state.pseudo_label[idx] + (1.0 - beta) * prediction, prediction)
    state.pseudo_seen[idx] = True
    return state


@dataclass
class MixPlan:
    lam: np.ndarray  # mixing coefficient per row
    partner: np.ndarray  # row index of the second parent


def draw_mix(b: int, mixup_alpha: float, rng) -> MixPlan:
    if b < 2:
        raise ValueError("MixUp needs at least two samples")
    lam = rng.beta(mixup_alpha, mixup_alpha, size=b)
    return MixPlan(lam, rng.permutation(b))


def apply_mix(batch: nn.Batch, plan: MixPlan) -> nn.Batch:
    lam = plan.lam[:, None].astype(batch.features.dtype)
    xj, yj = batch.features[plan.partner], batch.labels[plan.partner]
    # this form returns the batch bit-exactly at lam = 1
    return nn.Batch(lam * batch.features + (1 - lam) * xj, lam * batch.labels + (1 - lam) * yj, batch.indices)


def mixup_batch(batch: nn.Batch, mixup_alpha: float, rng, lam=None) -> nn.Batch:
    """Convex-combine every sample with a shuffled partner from the same batch.

    ``lam`` pins the coefficient (scalar or per row) instead of drawing it
    from Beta(alpha, alpha); the partner permutation is still drawn.
    """
    plan = draw_mix(len(batch), mixup_alpha, rng)
    if lam is not None:
        plan.lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(batch),)).copy()
    return apply_mix(batch, plan)


def mixed_forward(params, batch: nn.Batch, mixed: nn.Batch, plan: MixPlan, extra=None) -> nn.ForwardCache:
    """Forward ``[mixed rows; original rows; extra rows]`` with a shared first layer.

    The first layer is affine, so a mixed row's first pre-activation is the
    same convex combination of its parents' pre-activations and needs no
    matmul of its own.
    """
    W, bias = params.weights[0], params.biases[0]
    own = batch.features if extra is None else np.concatenate([batch.features, extra])
    z = own @ W.T + bias
    b = len(batch)
    zi = z[:b]
    zj = zi[plan.partner]
    lam = plan.lam[:, None].astype(z.dtype)
    first = np.concatenate([zj + lam * (zi - zj), z])
    return nn.forward_cached(params, np.concatenate([mixed.features, own]), first_preact=first)


def mixed_backprop(params, cache: nn.ForwardCache, dlogits, plan: MixPlan) -> nn.GradientSet:
    """Gradients of a ``[mixed; original]`` stack, folding first-layer terms onto the parents.

    ``cache`` holds exactly the ``2b`` stacked rows. The first-layer weight
    gradient of a mixed row splits between its two parents by ``lam``, so it
    is computed from ``b`` original rows instead of ``2b``.
    """
    b = len(plan.lam)
    deltas = nn.preact_grads(params, cache, dlogits)
    gW, gb = {}, {}
    for l in range(1, params.num_layers):
        gW[l] = deltas[l].T @ cache.inputs[l]
        gb[l] = deltas[l].sum(axis=0)
    d0 = deltas[0]
    lam = plan.lam[:, None].astype(d0.dtype)
    folded = d0[b:] + lam * d0[:b]
    folded[plan.partner] += (1 - lam) * d0[:b]
    gW[0] = folded.T @ cache.inputs[0][b:]
    gb[0] = d0.sum(axis=0)
    return nn.GradientSet(gW, gb)


def stacked_loss_rows(batch, weights, pseudo_labels, cfg: RelabelConfig, plan: MixPlan | None = None):
    """Rows and per-row loss weights for both loss terms in one stacked batch.

    The weighted term runs on the (mixed) batch with each mixed row carrying
    its first parent's weight; the pseudo term runs on the untouched batch
    with weight ``p / b`` per row.
    """
    weights = np.asarray(weights, dtype=float)
    first = apply_mix(batch, plan) if plan is not None else batch
    if not cfg.pseudo_active:
        return first, weights, len(batch)
    b = len(batch)
    rows = nn.Batch(
        np.concatenate([first.features, batch.features]),
        np.concatenate([first.labels, pseudo_labels]),
        np.concatenate([batch.indices, batch.indices]),
    )
    return rows, np.concatenate([weights, np.full(b, cfg.p / b)]), b


def total_loss(params, batch, weights, pseudo_labels, cfg: RelabelConfig, rng=None, smoothing: float = 0.0, plan=None):
    """Weighted (optionally mixed) loss plus ``p`` times the mean pseudo-label loss.

    Returns ``(loss, GradientSet)``. Label smoothing only touches the
    weighted term.
    """
    if plan is None and cfg.mixup:
        plan = draw_mix(len(batch), cfg.mixup_alpha, rng)
    rows, row_w, b = stacked_loss_rows(batch, weights, pseudo_labels, cfg, plan)
    if plan is not None and len(rows) == 2 * b:
        cache = mixed_forward(params, batch, rows.subset(slice(0, b)), plan)
        loss, dlogits = row_losses(cache.logits, rows.labels, row_w, b, smoothing)
        return float(loss), mixed_backprop(params, cache, dlogits, plan)
    cache = nn.forward_cached(params, rows.features)
    loss, dlogits = row_losses(cache.logits, rows.labels, row_w, b, smoothing)
    return float(loss), nn.backprop(params, cache, dlogits)


def row_losses(logits, labels, row_w, b, smoothing):
    """Scalar loss and dlogits where only the first ``b`` rows are smoothed."""
    row_w = row_w.astype(logits.dtype)
    head = nn.softmax_xent(logits[:b], labels[:b], smoothing)
    grad = np.empty_like(logits)
    grad[:b] = nn.logit_grad(logits[:b], labels[:b], smoothing)
    loss = row_w[:b] @ head
    if len(logits) > b:
        loss += row_w[b:] @ nn.softmax_xent(logits[b:], labels[b:])
        grad[b:] = nn.logit_grad(logits[b:], labels[b:])
    return loss, row_w[:, None] * grad
