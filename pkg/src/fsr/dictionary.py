"""Per-sample scoring state and the class-balanced proxy reward dictionary."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from fsr.errors import ConfigurationError

logger = logging.getLogger(__name__)

PUSHERS = ("meta_margin", "negative_loss", "max_margin", "forgetting_event", "aum")


class SampleState:
    """Column store of everything tracked per training sample.

    Operations take an index array and update only those rows, so the same
    code serves a single sample in a test and a whole batch in training.
    """

    def __init__(self, n: int, num_classes: int):
        self.momentum_score = np.zeros(n)
        self.raw_score_seen = np.zeros(n, dtype=bool)
        self.pseudo_label = np.zeros((n, num_classes))
        self.pseudo_seen = np.zeros(n, dtype=bool)
        self.prev_correct = np.zeros(n, dtype=bool)
        self.forget_count = np.zeros(n, dtype=np.int64)
        self.aum_sum = np.zeros(n)
        self.aum_count = np.zeros(n, dtype=np.int64)

    def __len__(self):
        return len(self.momentum_score)

    @property
    def num_classes(self) -> int:
        return self.pseudo_label.shape[1]


def meta_margin(loss_before, loss_after):
    """Loss drop from the current model to the one-step meta model."""
    return np.subtract(loss_before, loss_after)


def label_margin(logits: np.ndarray, labels) -> np.ndarray:
    """Assigned-class logit minus the largest other logit."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    rows = np.arange(len(labels))
    own = logits[rows, labels]
    others = logits.copy()
    others[rows, labels] = -np.inf
    return own - others.max(axis=1)


def update_forgetting(state: SampleState, idx, correct_now) -> SampleState:
    """Count correct-to-incorrect transitions since the previous scoring pass."""
    idx = np.atleast_1d(idx)
    correct_now = np.atleast_1d(np.asarray(correct_now, dtype=bool))
    state.forget_count[idx] += state.prev_correct[idx] & ~correct_now
    state.prev_correct[idx] = correct_now
    return state


def update_aum(state: SampleState, idx, logits, labels) -> SampleState:
    idx = np.atleast_1d(idx)
    state.aum_sum[idx] += label_margin(logits, labels)
    state.aum_count[idx] += 1
    return state


def alt_pusher(kind: str, state: SampleState, idx, logits, labels, loss):
    """Score samples with one of the baseline valuation functions.

    Forgetting and AUM read the accumulators in ``state``; keep them current
    with ``update_forgetting`` / ``update_aum`` before scoring.
    """
    idx = np.atleast_1d(idx)
    if kind == "negative_loss":
        return -np.atleast_1d(loss)
    if kind == "max_margin":
        return label_margin(logits, labels)
    if kind == "forgetting_event":
        return -state.forget_count[idx].astype(float)
    if kind == "aum":
        return state.aum_sum[idx] / np.maximum(1, state.aum_count[idx])
    raise ConfigurationError(f"unknown pusher {kind!r}; expected one of {PUSHERS[1:]}")


def update_momentum_score(state: SampleState, idx, raw_score, lam: float) -> SampleState:
    """Exponential moving average of the pusher score; the first score seeds it."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigurationError(f"momentum must lie in [0, 1], got {lam}")
    idx = np.atleast_1d(idx)
    raw = np.atleast_1d(raw_score).astype(float)
    seen = state.raw_score_seen[idx]
    state.momentum_score[idx] = np.where(seen, lam * state.momentum_score[idx] + (1.0 - lam) * raw, raw)
    state.raw_score_seen[idx] = True
    return state


@dataclass
class ProxyDictionary:
    capacity: int
    entries: list[np.ndarray]  # dataset indices per observed class
    warnings: list[str] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return len(self.entries)

    @cached_property
    def indices(self) -> np.ndarray:
        return np.concatenate(self.entries) if self.entries else np.zeros(0, dtype=np.int64)

    @cached_property
    def owner(self) -> np.ndarray:
        """Class of every position in ``indices``."""
        return np.repeat(np.arange(self.num_classes), self.class_counts())

    def __len__(self) -> int:
        return sum(len(e) for e in self.entries)

    def class_counts(self) -> list[int]:
        return [len(e) for e in self.entries]


def class_quotas(total: int, num_classes: int) -> np.ndarray:
    """Split ``total`` evenly; the remainder goes to the lowest class ids."""
    quotas = np.full(num_classes, total // num_classes)
    quotas[: total % num_classes] += 1
    return quotas


def init_dictionary(observed_labels, capacity: int, num_classes: int, rng) -> ProxyDictionary:
    """Uniform random class-balanced draw from the training set."""
    if capacity < num_classes:
        raise ConfigurationError(f"dictionary capacity {capacity} is below the class count {num_classes}")
    observed_labels = np.asarray(observed_labels)
    entries, warns = [], []
    for c, quota in enumerate(class_quotas(capacity, num_classes)):
        members = np.flatnonzero(observed_labels == c)
        if len(members) < quota:
            warns.append(f"class {c} has {len(members)} samples for a quota of {quota}")
        take = min(quota, len(members))
        entries.append(np.sort(rng.choice(members, size=take, replace=False)))
    for w in warns:
        logger.warning(w)
    return ProxyDictionary(capacity, entries, warns)


def rebuild_dictionary(state: SampleState, observed_labels, capacity: int, num_classes: int) -> ProxyDictionary:
    """Top momentum-scored samples per observed class, ties to the lower index."""
    if capacity < num_classes:
        raise ConfigurationError(f"dictionary capacity {capacity} is below the class count {num_classes}")
    observed_labels = np.asarray(observed_labels)
    entries, warns = [], []
    for c, quota in enumerate(class_quotas(capacity, num_classes)):
        members = np.flatnonzero((observed_labels == c) & state.raw_score_seen)
        if len(members) == 0:
            warns.append(f"class {c} has no scored samples; its quota stays empty")
        elif len(members) < quota:
            warns.append(f"class {c} has {len(members)} scored samples for a quota of {quota}")
        order = np.lexsort((members, -state.momentum_score[members]))
        entries.append(members[order[:quota]])
    # rebuilt every epoch, so the same shortfall would repeat; init_dictionary warns once
    for w in warns:
        logger.debug(w)
    return ProxyDictionary(capacity, entries, warns)


def fetch_balanced_batch(dictionary: ProxyDictionary, q: int, rng) -> np.ndarray:
    """Draw ``q`` dictionary indices, an equal share per class.

    A class with fewer entries than its share is sampled with replacement.
    """
    if len(dictionary) == 0:
        raise ValueError("cannot fetch from an empty dictionary")
    sizes = np.array(dictionary.class_counts())
    quotas = class_quotas(q, dictionary.num_classes)
    quotas[sizes == 0] = 0
    owner = dictionary.owner
    # random order inside each class block; the block head is a draw without replacement
    order = np.argsort(owner + rng.random(len(owner)))
    starts = np.cumsum(sizes) - sizes
    if np.all(sizes >= quotas):
        head = np.arange(len(owner)) - starts[owner] < quotas[owner]
        return dictionary.indices[order[head]]
    parts = []
    for c in np.flatnonzero(quotas):
        if sizes[c] >= quotas[c]:
            parts.append(order[starts[c] : starts[c] + quotas[c]])
        else:
            parts.append(starts[c] + rng.integers(0, sizes[c], size=quotas[c]))
    return dictionary.indices[np.concatenate(parts)]
