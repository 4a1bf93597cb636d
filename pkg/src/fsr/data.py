"""Synthetic datasets, label corruption, long-tail subsampling and CSV I/O.

A ``BiasedDataset`` keeps the clean labels next to the observed ones so the
harness can measure corruption-aware diagnostics. Training code only ever
receives ``observed_labels``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from fsr import nn
from fsr.errors import ConfigurationError

SPLITS = ("train", "test", "reward")


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BiasedDataset:
    features: np.ndarray
    clean_labels: np.ndarray
    observed_labels: np.ndarray
    num_classes: int
    split: np.ndarray  # one of SPLITS per row

    def __post_init__(self):
        n = len(self.features)
        if not (len(self.clean_labels) == len(self.observed_labels) == len(self.split) == n):
            raise ConfigurationError("features, labels and split must have one entry per row")
        for name in ("clean_labels", "observed_labels"):
            labels = getattr(self, name)
            if n and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ConfigurationError(f"{name} must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def rows(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split == split)

    def part(self, split: str) -> "BiasedDataset":
        r = self.rows(split)
        return BiasedDataset(
            self.features[r], self.clean_labels[r], self.observed_labels[r], self.num_classes, self.split[r]
        )

    def class_counts(self, split: str = "train", observed: bool = False) -> np.ndarray:
        labels = (self.observed_labels if observed else self.clean_labels)[self.split == split]
        return np.bincount(labels, minlength=self.num_classes)

    def noise_rate(self, split: str = "train") -> float:
        r = self.rows(split)
        return float(np.mean(self.observed_labels[r] != self.clean_labels[r])) if len(r) else 0.0


@dataclass(frozen=True)
class BiasSpec:
    noise_kind: str = "none"  # none | uniform | asymmetric
    noise_ratio: float = 0.0
    imbalance_ratio: float = 1.0
    confusion_map: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.noise_kind not in ("none", "uniform", "asymmetric"):
            raise ConfigurationError(f"unknown noise kind {self.noise_kind!r}")
        if not 0.0 <= self.noise_ratio < 1.0:
            raise ConfigurationError(f"noise ratio must lie in [0, 1), got {self.noise_ratio}")
        if self.imbalance_ratio < 1.0:
            raise ConfigurationError(f"imbalance ratio must be >= 1, got {self.imbalance_ratio}")


def class_centers(num_classes: int, d: int, radius: float = 1.0) -> np.ndarray:
    """Class means at distance ``radius`` from the origin.

    With ``d >= num_classes`` the means sit on the scaled coordinate axes (a
    regular simplex); otherwise they are evenly spaced on a ring in the first
    two coordinates. Remaining coordinates carry no class signal.
    """
    centers = np.zeros((num_classes, d))
    angles = 2 * np.pi * np.arange(num_classes) / num_classes
    if d >= num_classes and d > 2:
        centers[np.arange(num_classes), np.arange(num_classes)] = radius
    elif d == 1:
        centers[:, 0] = radius * np.linspace(-1, 1, num_classes)
    else:
        centers[:, 0] = radius * np.cos(angles)
        centers[:, 1] = radius * np.sin(angles)
    return centers


def make_gaussian_clusters(num_classes, per_class, d=2, spread=0.3, seed=0, test_per_class=None, reward_per_class=0):
    """Isotropic Gaussian blobs around ring centres, with train/test(/reward) splits."""
    if num_classes < 2 or per_class < 1:
        raise ConfigurationError("need at least two classes and one sample per class")
    if test_per_class is None:
        test_per_class = max(1, per_class // 5)
    rng = np.random.default_rng(seed)
    centers = class_centers(num_classes, d)
    feats, labels, split = [], [], []
    for name, count in (("train", per_class), ("test", test_per_class), ("reward", reward_per_class)):
        if count == 0:
            continue
        y = np.repeat(np.arange(num_classes), count)
        feats.append(centers[y] + spread * rng.standard_normal((len(y), d)))
        labels.append(y)
        split.append(np.full(len(y), name))
    y = np.concatenate(labels)
    return BiasedDataset(np.concatenate(feats), y, y.copy(), num_classes, np.concatenate(split))


def _corrupt(ds: BiasedDataset, rows: np.ndarray, new_labels: np.ndarray) -> BiasedDataset:
    observed = ds.observed_labels.copy()
    observed[rows] = new_labels
    return replace(ds, observed_labels=observed)


def inject_uniform_noise(ds: BiasedDataset, ratio: float, seed=0) -> BiasedDataset:
    """Relabel exactly floor(ratio * N_train) training rows to a different class, uniformly."""
    if not 0.0 <= ratio < 1.0:
        raise ConfigurationError(f"noise ratio must lie in [0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train = ds.rows("train")
    k = math.floor(ratio * len(train))
    rows = rng.choice(train, size=k, replace=False)
    shift = rng.integers(1, ds.num_classes, size=k)
    return _corrupt(ds, rows, (ds.clean_labels[rows] + shift) % ds.num_classes)


def cyclic_map(num_classes: int) -> tuple[int, ...]:
    return tuple((c + 1) % num_classes for c in range(num_classes))


def inject_asymmetric_noise(ds: BiasedDataset, ratio: float, confusion_map=None, seed=0) -> BiasedDataset:
    """Send floor(ratio * N_train) training rows to their class's confusion partner.

    Rows are allotted to classes in proportion to class size (largest
    remainders first), so a balanced set loses the same share of every class.
    """
    if not 0.0 <= ratio < 1.0:
        raise ConfigurationError(f"noise ratio must lie in [0, 1), got {ratio}")
    if confusion_map is None:
        confusion_map = cyclic_map(ds.num_classes)
    if isinstance(confusion_map, dict):
        missing = [c for c in range(ds.num_classes) if c not in confusion_map]
        if missing:
            raise ConfigurationError(f"confusion map has no entry for classes {missing}")
        confusion_map = [confusion_map[c] for c in range(ds.num_classes)]
    cmap = np.asarray(confusion_map)
    if len(cmap) != ds.num_classes:
        raise ConfigurationError(f"confusion map has {len(cmap)} entries for {ds.num_classes} classes")
    if cmap.min() < 0 or cmap.max() >= ds.num_classes:
        raise ConfigurationError("confusion map targets must be valid classes")

    rng = np.random.default_rng(seed)
    train = ds.rows("train")
    clean = ds.clean_labels[train]
    sizes = np.bincount(clean, minlength=ds.num_classes)
    total = math.floor(ratio * len(train))
    exact = ratio * sizes
    alloc = np.floor(exact).astype(int)
    order = np.argsort(-(exact - alloc), kind="stable")
    alloc[order[: total - alloc.sum()]] += 1
    rows = np.concatenate(
        [rng.choice(train[clean == c], size=alloc[c], replace=False) for c in range(ds.num_classes)]
    )
    return _corrupt(ds, rows, cmap[ds.clean_labels[rows]])


def long_tail_counts(n_max: int, num_classes: int, mu: float) -> np.ndarray:
    """Exponential class-size profile n_c = round(n_max * mu^(-c/(C-1)))."""
    c = np.arange(num_classes)
    return np.floor(n_max * mu ** (-c / (num_classes - 1)) + 0.5).astype(int)


def make_long_tailed(ds: BiasedDataset, mu: float, seed=0) -> BiasedDataset:
    """Subsample training rows to an exponential class profile; other splits are kept."""
    if mu < 1:
        raise ConfigurationError(f"imbalance ratio must be >= 1, got {mu}")
    if mu == 1:
        return ds
    sizes = ds.class_counts("train")
    counts = long_tail_counts(int(sizes.max()), ds.num_classes, mu)
    if counts.min() < 1:
        raise ConfigurationError(f"imbalance ratio {mu} leaves a class with no samples")
    if np.any(counts > sizes):
        raise ConfigurationError("make_long_tailed expects a class-balanced training split")
    rng = np.random.default_rng(seed)
    train = ds.rows("train")
    keep = [np.flatnonzero(ds.split != "train")]
    for c, n_c in enumerate(counts):
        keep.append(rng.choice(train[ds.clean_labels[train] == c], size=n_c, replace=False))
    keep = np.sort(np.concatenate(keep))
    return BiasedDataset(
        ds.features[keep], ds.clean_labels[keep], ds.observed_labels[keep], ds.num_classes, ds.split[keep]
    )


def apply_bias(ds: BiasedDataset, spec: BiasSpec) -> BiasedDataset:
    """Long tail first, then label noise; the order used for the mixed setting."""
    if spec.imbalance_ratio > 1:
        ds = make_long_tailed(ds, spec.imbalance_ratio, spec.seed)
    if spec.noise_kind == "uniform":
        ds = inject_uniform_noise(ds, spec.noise_ratio, spec.seed + 1)
    elif spec.noise_kind == "asymmetric":
        ds = inject_asymmetric_noise(ds, spec.noise_ratio, spec.confusion_map, spec.seed + 1)
    return ds


class EpochSampler:
    """Sequential mini-batches over a fresh permutation each epoch."""

    def __init__(self, n: int, batch_size: int, rng):
        if not 1 <= batch_size <= n:
            raise ConfigurationError(f"batch size {batch_size} must lie in [1, {n}]")
        self.n = n
        self.batch_size = batch_size
        self.rng = rng

    @property
    def steps_per_epoch(self) -> int:
        return -(-self.n // self.batch_size)

    def epoch(self):
        order = self.rng.permutation(self.n)
        for start in range(0, self.n, self.batch_size):
            yield order[start : start + self.batch_size]


def sample_batch(ds: BiasedDataset, rows, num_classes=None, dtype=np.float64) -> nn.Batch:
    """Training batch with one-hot observed labels; ``rows`` index into ``ds``."""
    rows = np.asarray(rows)
    return nn.Batch(
        ds.features[rows].astype(dtype, copy=False),
        nn.one_hot(ds.observed_labels[rows], num_classes or ds.num_classes, dtype),
        rows,
    )


def _header(d: int) -> list[str]:
    return [f"f{k}" for k in range(d)] + ["clean_label", "observed_label", "split"]


def save_csv(ds: BiasedDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(ds.dim))
        for x, c, o, s in zip(ds.features, ds.clean_labels, ds.observed_labels, ds.split):
            writer.writerow([repr(float(v)) for v in x] + [int(c), int(o), s])


def load_csv(path, num_classes: int | None = None) -> BiasedDataset:
    """Parse ``f0..f{d-1},clean_label,observed_label,split`` rows.

    The class count defaults to one more than the largest label seen.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(f"{path}: file is empty")
        for col in ("clean_label", "observed_label", "split"):
            if col not in header:
                raise CsvFormatError(f"{path}: missing column {col!r}")
        d = len(header) - 3
        if header != _header(d):
            raise CsvFormatError(f"{path}: header must be {','.join(_header(d))}")
        feats, clean, observed, split = [], [], [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 3:
                raise CsvFormatError(f"{path}:{line}: expected {d + 3} fields, got {len(row)}")
            try:
                feats.append([float(v) for v in row[:d]])
                clean.append(int(row[d]))
                observed.append(int(row[d + 1]))
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{line}: {exc}") from None
            if row[d + 2] not in SPLITS:
                raise CsvFormatError(f"{path}:{line}: split must be one of {SPLITS}, got {row[d + 2]!r}")
            split.append(row[d + 2])
    if not feats:
        raise CsvFormatError(f"{path}: no data rows")
    clean, observed = np.array(clean), np.array(observed)
    if min(clean.min(), observed.min()) < 0:
        raise ConfigurationError(f"{path}: negative class label")
    if num_classes is None:
        num_classes = int(max(clean.max(), observed.max())) + 1
    return BiasedDataset(np.array(feats, dtype=float).reshape(len(feats), d), clean, observed, num_classes, np.array(split))
