"""One-step meta re-weighting of mini-batch samples.

A sample's weight moves by how well its own loss gradient lines up with the
mean gradient of a reward batch, summed over the meta layers only. With just
the top layer in the meta set the lower layers are shared between model and
meta model, and the whole computation reduces to a few small matmuls.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fsr import nn
from fsr.errors import ConfigurationError

EVAL_POINTS = ("at_theta_t", "at_theta_t_plus_1")
NORM_MODES = ("clip", "shift")


@dataclass(frozen=True)
class MetaConfig:
    alpha: float = 1.0
    eta: float = 0.1
    meta_eval_point: str = "at_theta_t"
    weight_init: float | None = None  # None means 1/b
    smoothing: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0 or self.eta <= 0:
            raise ConfigurationError("alpha and eta must be positive")
        if self.meta_eval_point not in EVAL_POINTS:
            raise ConfigurationError(f"meta_eval_point must be one of {EVAL_POINTS}")

    def init_weight(self, b: int) -> float:
        return 1.0 / b if self.weight_init is None else float(self.weight_init)


def virtual_meta_step(
    params: nn.ModelParams, train_batch: nn.Batch, cfg: MetaConfig, cache=None, logit_grads=None
) -> nn.ModelParams:
    """Descend the meta layers once on the batch with uniform initial weights.

    The step size is ``cfg.alpha * cfg.eta``; with the default ``alpha=1``
    this is the same lookahead step the weights are differentiated through.
    Pass ``logit_grads`` when the per-sample logit gradients are already known.
    """
    if cache is None:
        cache = nn.forward_cached(params, train_batch.features)
    if logit_grads is None:
        logit_grads = nn.logit_grad(cache.logits, train_batch.labels, cfg.smoothing)
    dlogits = cfg.init_weight(len(train_batch)) * logit_grads
    grads = nn.backprop(params, cache, dlogits, layers=params.meta_layers)
    return nn.sgd_step(params, grads, cfg.alpha * cfg.eta)


def reward_gradient(params: nn.ModelParams, reward_batch: nn.Batch, smoothing: float = 0.0, cache=None) -> nn.GradientSet:
    """Mean reward-loss gradient over the meta layers of ``params``.

    ``cache`` may hold the reward rows' forward pass at ``params``.
    """
    if cache is None:
        cache = nn.forward_cached(params, reward_batch.features)
    q = len(reward_batch)
    dlogits = nn.logit_grad(cache.logits, reward_batch.labels, smoothing) / q
    return nn.backprop(params, cache, dlogits, layers=params.meta_layers)


def meta_gradient(per_sample_train_grads: nn.GradientSet, reward_grad: nn.GradientSet) -> np.ndarray:
    """Layer-summed dot products between each sample's gradient and the reward gradient."""
    if not per_sample_train_grads.per_sample:
        raise ConfigurationError("training gradients need a per-sample axis")
    if set(per_sample_train_grads.weights) != set(reward_grad.weights):
        raise ConfigurationError(
            f"train gradients cover layers {per_sample_train_grads.layers}, reward gradient {reward_grad.layers}"
        )
    dots = 0.0
    for l in per_sample_train_grads.layers:
        gW, gb = per_sample_train_grads.weights[l], per_sample_train_grads.biases[l]
        rW, rb = reward_grad.weights[l], reward_grad.biases[l]
        if gW.shape[1:] != rW.shape or gb.shape[1:] != rb.shape:
            raise ConfigurationError(f"layer {l}: gradient shapes {gW.shape[1:]} and {rW.shape} differ")
        dots = dots + np.einsum("boi,oi->b", gW, rW) + gb @ rb
    return np.asarray(dots)


def _shared_dots(params, cache, delta, reward_grad):
    """Same quantity as ``meta_gradient`` without materialising per-sample outer products.

    ``delta`` holds the per-sample logit gradients of the training rows.
    """
    meta = set(params.meta_layers)
    dots = np.zeros(len(delta), dtype=delta.dtype)
    for l in range(params.num_layers - 1, min(meta) - 1, -1):
        if l in meta:
            h = cache.inputs[l]
            dots += np.einsum("bi,bi->b", delta @ reward_grad.weights[l], h) + delta @ reward_grad.biases[l]
        if l > min(meta):
            delta = (delta @ params.weights[l]) * (cache.preacts[l - 1] > 0)
    return dots


@dataclass
class MetaResult:
    weights: np.ndarray  # unnormalised
    dots: np.ndarray
    meta_params: nn.ModelParams
    cache: nn.ForwardCache  # training batch at the current parameters


def meta_reweight(
    params, train_batch, reward_batch, cfg: MetaConfig, cache=None, meta_params=None, logit_grads=None,
    reward_cache=None,
) -> MetaResult:
    """Run the virtual step, the reward gradient and the dot products in one go.

    The optional caches and gradients let a training loop hand over work it
    has already done; ``reward_cache`` is the reward rows' forward pass at
    ``params`` and is only used when the reward gradient is taken there.
    """
    if len(reward_batch) < 1:
        raise ValueError("reward batch is empty")
    if cache is None:
        cache = nn.forward_cached(params, train_batch.features)
    if logit_grads is None:
        logit_grads = nn.logit_grad(cache.logits, train_batch.labels, cfg.smoothing)
    if meta_params is None:
        meta_params = virtual_meta_step(params, train_batch, cfg, cache, logit_grads)
    if cfg.meta_eval_point == "at_theta_t_plus_1":
        rgrad = reward_gradient(meta_params, reward_batch, cfg.smoothing)
    else:
        rgrad = reward_gradient(params, reward_batch, cfg.smoothing, reward_cache)
    dots = _shared_dots(params, cache, logit_grads, rgrad)
    weights = cfg.init_weight(len(train_batch)) + cfg.alpha * cfg.eta * dots
    return MetaResult(weights, dots, meta_params, cache)


def compute_weights(params, train_batch, reward_batch, cfg: MetaConfig) -> np.ndarray:
    """Unnormalised sample weights ``w0 + alpha * eta * dot_i``."""
    return meta_reweight(params, train_batch, reward_batch, cfg).weights


def normalize_weights(w, mode: str = "clip") -> np.ndarray:
    """Make weights non-negative (clip) or strictly positive (shift), then sum to one.

    Clipping a batch whose weights are all non-positive leaves no signal, so
    the uniform weighting is returned instead.
    """
    w = np.asarray(w, dtype=np.float64)
    b = len(w)
    if mode == "clip":
        w = np.maximum(w, 0.0)
    elif mode == "shift":
        w = w - w.min() + 1.0 / b
    else:
        raise ConfigurationError(f"unknown normalisation mode {mode!r}")
    total = w.sum()
    if not total > 0:
        return np.full(b, 1.0 / b)
    return w / total


def l2r_baseline_weights(params, train_batch, external_reward_batch, cfg: MetaConfig) -> np.ndarray:
    """Reward-set re-weighting with the initial weight reset to zero every step."""
    raw = compute_weights(params, train_batch, external_reward_batch, replace(cfg, weight_init=0.0))
    return normalize_weights(raw, "clip")


def fd_weight_oracle(params, train_batch, reward_batch, cfg: MetaConfig, i: int, eps: float = 1e-5) -> float:
    """Central-difference estimate of d(reward loss)/d(w_i) through one SGD step.

    Perturbs sample ``i``'s weight around the uniform initial weights, takes
    the weighted step on the meta layers with step size ``eta`` and measures
    the mean reward loss. Built only from aggregate gradients and forward
    passes, so it shares no code with the dot-product path.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    b = len(train_batch)
    base = np.full(b, cfg.init_weight(b))

    def reward_loss(w):
        grads = nn.backward_weighted(params, train_batch, w, cfg.smoothing)
        stepped = nn.sgd_step(params, grads, cfg.eta, params.meta_mask)
        logits, _ = nn.forward(stepped, reward_batch.features)
        return nn.softmax_xent(logits, reward_batch.labels, cfg.smoothing).mean()

    up, down = base.copy(), base.copy()
    up[i] += eps
    down[i] -= eps
    return float((reward_loss(up) - reward_loss(down)) / (2 * eps))
