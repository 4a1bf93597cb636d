"""Dense ReLU networks with analytic backprop and per-sample gradients.

Everything here is a pure function over ``ModelParams`` snapshots. Layer
weights are stored as ``[out, in]`` matrices, so a layer computes
``h @ W.T + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fsr.errors import ConfigurationError


@dataclass
class ModelParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    meta_mask: tuple[bool, ...]

    def __post_init__(self):
        self.meta_mask = tuple(bool(m) for m in self.meta_mask)
        if len(self.weights) != len(self.biases) or len(self.weights) != len(self.meta_mask):
            raise ConfigurationError("weights, biases and meta_mask must have one entry per layer")
        if not self.weights:
            raise ConfigurationError("a network needs at least one layer")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ConfigurationError(f"layer {l}: bias shape {b.shape} does not match weight {W.shape}")
            if l > 0 and W.shape[1] != self.weights[l - 1].shape[0]:
                raise ConfigurationError(
                    f"layer {l} expects {W.shape[1]} inputs but layer {l - 1} produces {self.weights[l - 1].shape[0]}"
                )
        if not any(self.meta_mask):
            raise ConfigurationError("at least one layer must be in the meta set")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def meta_layers(self) -> list[int]:
        return [l for l, m in enumerate(self.meta_mask) if m]

    @property
    def num_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self) -> "ModelParams":
        return ModelParams(
            [W.copy() for W in self.weights], [b.copy() for b in self.biases], self.meta_mask
        )

    def with_meta_mask(self, meta_mask) -> "ModelParams":
        return ModelParams(list(self.weights), list(self.biases), tuple(meta_mask))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def _replace_arrays(self, weights, biases) -> "ModelParams":
        # same-shape arrays, so the constructor checks can be skipped
        out = object.__new__(ModelParams)
        out.weights, out.biases, out.meta_mask = weights, biases, self.meta_mask
        return out


@dataclass
class Batch:
    """Features, label distributions (one-hot or soft) and dataset row ids."""

    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.indices is None:
            self.indices = np.arange(len(self.features))
        if len(self.features) < 1:
            raise ValueError("a batch needs at least one sample")
        if len(self.labels) != len(self.features) or len(self.indices) != len(self.features):
            raise ValueError("features, labels and indices must have the same length")

    def __len__(self) -> int:
        return len(self.features)

    def subset(self, rows) -> "Batch":
        return Batch(self.features[rows], self.labels[rows], self.indices[rows])


@dataclass
class GradientSet:
    """Gradients keyed by layer index.

    With ``per_sample`` set, every array carries a leading batch axis.
    """

    weights: dict[int, np.ndarray]
    biases: dict[int, np.ndarray]
    per_sample: bool = False

    @property
    def layers(self) -> list[int]:
        return sorted(self.weights)

    def mean(self) -> "GradientSet":
        if not self.per_sample:
            return self
        return GradientSet(
            {l: g.mean(axis=0) for l, g in self.weights.items()},
            {l: g.mean(axis=0) for l, g in self.biases.items()},
        )

    def restrict(self, layers) -> "GradientSet":
        return GradientSet(
            {l: self.weights[l] for l in layers},
            {l: self.biases[l] for l in layers},
            self.per_sample,
        )

    def scale(self, c: float) -> "GradientSet":
        return GradientSet(
            {l: c * g for l, g in self.weights.items()},
            {l: c * g for l, g in self.biases.items()},
            self.per_sample,
        )

    def flat(self) -> np.ndarray:
        parts = []
        for l in self.layers:
            W, b = self.weights[l], self.biases[l]
            if self.per_sample:
                parts += [W.reshape(len(W), -1), b]
            else:
                parts += [W.ravel(), b]
        return np.concatenate(parts, axis=-1)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer; inputs[0] is the feature matrix
    preacts: list[np.ndarray]  # pre-activation of each hidden layer
    logits: np.ndarray

    def tail(self, n: int) -> "ForwardCache":
        """View of the last ``n`` rows."""
        return self.rows(slice(-n, None))

    def rows(self, sl: slice) -> "ForwardCache":
        """View of a contiguous block of rows."""
        return ForwardCache([a[sl] for a in self.inputs], [a[sl] for a in self.preacts], self.logits[sl])


def init_mlp(sizes, seed=0, meta_layers="fc", dtype=np.float64) -> ModelParams:
    """He-initialised MLP. ``sizes`` runs from input width to class count."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append((rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return ModelParams(weights, biases, meta_mask_for(meta_layers, len(weights)))


def meta_mask_for(selection, num_layers: int) -> tuple[bool, ...]:
    """Parse a meta-layer selection: ``"fc"``, ``"all"``, ``"last_k:<k>"`` or an explicit mask."""
    if not isinstance(selection, str):
        mask = tuple(bool(m) for m in selection)
        if len(mask) != num_layers:
            raise ConfigurationError(f"meta mask has {len(mask)} entries for {num_layers} layers")
        return mask
    if selection == "fc":
        k = 1
    elif selection == "all":
        k = num_layers
    elif selection.startswith("last_k:"):
        try:
            k = int(selection.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad meta-layer selection {selection!r}") from None
        if not 1 <= k <= num_layers:
            raise ConfigurationError(f"last_k must be in [1, {num_layers}], got {k}")
    else:
        raise ConfigurationError(f"unknown meta-layer selection {selection!r}")
    return tuple(l >= num_layers - k for l in range(num_layers))


def forward_cached(params: ModelParams, features: np.ndarray, first_preact=None) -> ForwardCache:
    """Full forward pass keeping every layer input.

    ``first_preact`` supplies the first layer's output when the caller already
    has it, skipping that matmul.
    """
    if features.ndim != 2 or features.shape[1] != params.input_dim:
        raise ConfigurationError(
            f"features of shape {features.shape} do not match network input width {params.input_dim}"
        )
    inputs, preacts = [features], []
    h = features
    last = params.num_layers - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = first_preact if l == 0 and first_preact is not None else h @ W.T + b
        if l == last:
            return ForwardCache(inputs, preacts, z)
        preacts.append(z)
        h = np.maximum(z, 0.0)
        inputs.append(h)


def forward_from(params: ModelParams, cache: ForwardCache, layer: int) -> np.ndarray:
    """Logits of ``params`` reusing the cached input of ``layer``; lower layers are shared."""
    h = cache.inputs[layer]
    last = params.num_layers - 1
    for l in range(layer, params.num_layers):
        z = h @ params.weights[l].T + params.biases[l]
        if l == last:
            return z
        h = np.maximum(z, 0.0)


def forward(params: ModelParams, features: np.ndarray):
    """Return ``(logits, cache)``."""
    cache = forward_cached(params, features)
    return cache.logits, cache


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def smooth_labels(labels: np.ndarray, smoothing: float) -> np.ndarray:
    if smoothing == 0.0:
        return labels
    return (1.0 - smoothing) * labels + smoothing / labels.shape[1]


def softmax_xent(logits: np.ndarray, labels: np.ndarray, smoothing: float = 0.0) -> np.ndarray:
    """Per-sample softmax cross-entropy against label distributions."""
    if logits.shape != labels.shape:
        raise ConfigurationError(f"logits {logits.shape} and labels {labels.shape} differ in shape")
    if not 0.0 <= smoothing < 1.0:
        raise ConfigurationError(f"smoothing must lie in [0, 1), got {smoothing}")
    return -(smooth_labels(labels, smoothing) * log_softmax(logits)).sum(axis=1)


def one_hot(classes, num_classes: int, dtype=np.float64) -> np.ndarray:
    classes = np.asarray(classes)
    out = np.zeros((len(classes), num_classes), dtype=dtype)
    out[np.arange(len(classes)), classes] = 1.0
    return out


def logit_grad(logits: np.ndarray, labels: np.ndarray, smoothing: float = 0.0) -> np.ndarray:
    """d loss_i / d logits_i for each row."""
    return softmax(logits) - smooth_labels(labels, smoothing)


def xent_and_grad(logits: np.ndarray, labels: np.ndarray, smoothing: float = 0.0):
    """Per-sample cross-entropy and its logit gradient from one log-softmax."""
    if logits.shape != labels.shape:
        raise ConfigurationError(f"logits {logits.shape} and labels {labels.shape} differ in shape")
    target = smooth_labels(labels, smoothing)
    logp = log_softmax(logits)
    return -(target * logp).sum(axis=1), np.exp(logp) - target


def backprop(params: ModelParams, cache: ForwardCache, dlogits: np.ndarray, layers=None, per_sample=False):
    """Push ``dlogits`` down the network and collect layer gradients.

    Only ``layers`` are returned (default: all). Backprop stops at the lowest
    requested layer, so asking for the top layer alone costs one outer product.
    """
    if layers is None:
        layers = range(params.num_layers)
    wanted = set(layers)
    deltas = preact_grads(params, cache, dlogits, min(wanted))
    gW, gb = {}, {}
    for l in wanted:
        delta, h = deltas[l], cache.inputs[l]
        if per_sample:
            gW[l] = delta[:, :, None] * h[:, None, :]
            gb[l] = delta
        else:
            gW[l] = delta.T @ h
            gb[l] = delta.sum(axis=0)
    return GradientSet(gW, gb, per_sample)


def preact_grads(params: ModelParams, cache: ForwardCache, dlogits: np.ndarray, lowest: int = 0) -> dict:
    """Gradient with respect to each layer's output (pre-activation), from the top down to ``lowest``."""
    deltas = {params.num_layers - 1: dlogits}
    delta = dlogits
    for l in range(params.num_layers - 1, lowest, -1):
        delta = (delta @ params.weights[l]) * (cache.preacts[l - 1] > 0)
        deltas[l - 1] = delta
    return deltas


def backward_weighted(params: ModelParams, batch: Batch, weights, smoothing: float = 0.0) -> GradientSet:
    """Gradient of ``sum_i w_i * loss_i`` with respect to every layer."""
    weights = np.asarray(weights, dtype=params.weights[0].dtype)
    cache = forward_cached(params, batch.features)
    dlogits = weights[:, None] * logit_grad(cache.logits, batch.labels, smoothing)
    return backprop(params, cache, dlogits)


def per_sample_grad_meta(params: ModelParams, batch: Batch, smoothing: float = 0.0, cache=None) -> GradientSet:
    """Per-sample loss gradients for the meta layers only.

    The top layer uses the closed form ``(softmax(z) - y) outer h``; lower
    meta layers are reached by carrying per-sample deltas down.
    """
    if cache is None:
        cache = forward_cached(params, batch.features)
    dlogits = logit_grad(cache.logits, batch.labels, smoothing)
    meta = params.meta_layers
    top = params.num_layers - 1
    if meta == [top]:
        h = cache.inputs[top]
        return GradientSet({top: dlogits[:, :, None] * h[:, None, :]}, {top: dlogits}, per_sample=True)
    return backprop(params, cache, dlogits, layers=meta, per_sample=True)


def sgd_step(params: ModelParams, grads: GradientSet, lr: float, mask=None) -> ModelParams:
    """Plain SGD. Layers outside ``mask`` (or without a gradient) are passed through untouched."""
    if lr < 0:
        raise ConfigurationError(f"learning rate must be non-negative, got {lr}")
    weights, biases = list(params.weights), list(params.biases)
    for l in grads.layers:
        if mask is not None and not mask[l]:
            continue
        weights[l] = params.weights[l] - lr * grads.weights[l]
        biases[l] = params.biases[l] - lr * grads.biases[l]
    return params._replace_arrays(weights, biases)


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
