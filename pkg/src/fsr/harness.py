"""Experiment driver: the re-weighted training loop, diagnostics and run outputs.

``Trainer`` executes one training step at a time in the order
meta re-weighting -> model update -> pusher scoring -> (epoch end)
dictionary rebuild. ``run_experiment`` wraps it with data construction,
evaluation, structured logs and model export.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fsr import data as fdata
from fsr import dictionary as fdict
from fsr import nn, relabel, reweight
from fsr.errors import ConfigurationError, NumericalAbort

logger = logging.getLogger(__name__)

MODES = ("vanilla", "fsr", "fsr_raw", "l2r")
PHASES = ("forward", "backward", "meta_step", "meta_gradient", "dict_update", "other")
ZERO_TOL = 1e-12
ZERO_WINDOW = 50


@dataclass
class ExperimentConfig:
    mode: str = "fsr"
    epochs: int = 60
    warm_up: int = 5
    batch: int = 100
    reward_batch: int = 200
    dict_size: int = 2000
    lam: float = 0.9
    eta: float = 0.1
    alpha: float = 1.0
    beta: float = 0.1
    pseudo_mult: float = 2.0
    smoothing: float = 0.0
    mixup_alpha: float = 1.0
    mixup: bool = True
    pusher: str = "meta_margin"
    meta_layers: str = "fc"
    norm: str = "clip"
    meta_eval_point: str = "at_theta_t"
    noise: str = "none"
    noise_ratio: float = 0.0
    imbalance: float = 1.0
    deferred: bool = False
    seed: int = 0
    seeds: int = 1
    data: str = "synthetic"
    hidden: tuple[int, ...] = (64, 64)
    lr: float | None = None  # base learning rate; defaults to eta
    momentum: float = 0.0
    reward_per_class: int = 10  # size of the clean held-out reward set used by l2r
    dtype: str = "float64"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def base_lr(self) -> float:
        return self.eta if self.lr is None else self.lr

    @property
    def effective_warm_up(self) -> int:
        """Deferred runs switch re-weighting on at the 160/200 point of the schedule."""
        return int(round(0.8 * self.epochs)) if self.deferred else self.warm_up

    def validate(self) -> list[str]:
        """Raise on invalid settings; return non-fatal warnings."""
        def need(cond, msg):
            if not cond:
                raise ConfigurationError(msg)

        need(self.mode in MODES, f"mode must be one of {MODES}, got {self.mode!r}")
        need(self.epochs >= 0, "epochs must be non-negative")
        need(self.warm_up >= 0, "warm-up must be non-negative")
        need(self.batch >= 1 and self.reward_batch >= 1, "batch sizes must be positive")
        need(self.dict_size >= 1, "dictionary size must be positive")
        need(0.0 <= self.lam <= 1.0, "lambda must lie in [0, 1]")
        need(self.eta > 0 and self.alpha > 0, "eta and alpha must be positive")
        need(self.base_lr > 0, "learning rate must be positive")
        need(0.0 <= self.beta <= 1.0, "beta must lie in [0, 1]")
        need(self.pseudo_mult >= 0, "pseudo-loss multiplier must be non-negative")
        need(0.0 <= self.smoothing < 1.0, "smoothing must lie in [0, 1)")
        need(self.mixup_alpha > 0, "mixup alpha must be positive")
        need(self.pusher in fdict.PUSHERS, f"pusher must be one of {fdict.PUSHERS}")
        need(self.norm in reweight.NORM_MODES, f"norm must be one of {reweight.NORM_MODES}")
        need(self.meta_eval_point in reweight.EVAL_POINTS, f"meta_eval_point must be one of {reweight.EVAL_POINTS}")
        need(self.noise in ("none", "uniform", "asymmetric"), f"unknown noise kind {self.noise!r}")
        need(0.0 <= self.noise_ratio < 1.0, "noise ratio must lie in [0, 1)")
        need(self.imbalance >= 1.0, "imbalance ratio must be >= 1")
        need(self.seeds >= 1, "seeds must be >= 1")
        need(0.0 <= self.momentum < 1.0, "momentum must lie in [0, 1)")
        need(self.dtype in ("float64", "float32"), "dtype must be float64 or float32")
        need(len(self.hidden) >= 0 and all(h >= 1 for h in self.hidden), "hidden widths must be positive")
        nn.meta_mask_for(self.meta_layers, len(self.hidden) + 1)
        if self.mode != "vanilla" and self.epochs > 0:
            need(self.effective_warm_up < self.epochs, "warm-up must end before the last epoch")
        warns = []
        if self.reward_batch > self.dict_size and self.mode in ("fsr", "fsr_raw"):
            warns.append(f"reward batch {self.reward_batch} exceeds dictionary size {self.dict_size}")
        if self.mode == "l2r" and self.reward_per_class < 1:
            raise ConfigurationError("l2r mode needs a held-out reward set (reward_per_class >= 1)")
        return warns

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ExecutionPlan:
    """Which parts of the step a mode runs; the mode lattice is defined here."""

    reweight: bool
    reward_source: str | None  # "dictionary" | "external" | None
    score: bool
    pseudo: bool
    mixup: bool
    weight_init: float | None
    norm: str

    @classmethod
    def for_config(cls, cfg: ExperimentConfig) -> "ExecutionPlan":
        if cfg.mode == "vanilla":
            return cls(False, None, False, False, False, None, cfg.norm)
        if cfg.mode == "l2r":
            return cls(True, "external", False, False, False, 0.0, "clip")
        raw = cfg.mode == "fsr_raw"
        return cls(
            reweight=True,
            reward_source="dictionary",
            score=True,
            pseudo=not raw and cfg.pseudo_mult > 0,
            mixup=not raw and cfg.mixup,
            weight_init=None,
            norm=cfg.norm,
        )


class PhaseTimer:
    def __init__(self):
        self.totals = dict.fromkeys(PHASES, 0.0)
        self._mark = None

    def start(self):
        self._mark = time.perf_counter()
        self._t0 = self._mark

    def lap(self, phase: str):
        now = time.perf_counter()
        self.totals[phase] += now - self._mark
        self._mark = now

    def stop(self) -> float:
        """Close the step; unattributed time goes to ``other``. Returns the step time."""
        now = time.perf_counter()
        self.totals["other"] += now - self._mark
        return now - self._t0


def evaluate(params: nn.ModelParams, features, labels) -> float:
    """Argmax accuracy; ``np.argmax`` breaks ties toward the lowest class id."""
    if len(labels) == 0:
        return float("nan")
    logits, _ = nn.forward(params, np.asarray(features, dtype=params.weights[0].dtype))
    return float(np.mean(logits.argmax(axis=1) == np.asarray(labels)))


def zero_weight_ratio(weights_history, mode: str = "clip") -> float:
    """Mean fraction of (near-)zero weights over the trailing window.

    Shift normalisation never produces zeros; it reports 0.
    """
    if mode == "shift":
        return 0.0
    recent = list(weights_history)[-ZERO_WINDOW:]
    if not recent:
        return 0.0
    return float(np.mean([np.mean(np.asarray(w) <= ZERO_TOL) for w in recent]))


def dictionary_purity(dictionary: fdict.ProxyDictionary, observed, clean) -> float:
    idx = dictionary.indices
    if len(idx) == 0:
        return float("nan")
    return float(np.mean(observed[idx] == clean[idx]))


def write_dictionary_csv(path, dictionary, observed, clean, momentum) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset_index", "observed_label", "clean_label", "momentum_score"])
        for i in np.sort(dictionary.indices):
            w.writerow([int(i), int(observed[i]), int(clean[i]), repr(float(momentum[i]))])


class Trainer:
    """Single training loop over a fixed training split.

    ``observed_labels`` are the only labels the trainer sees. ``reward_set``
    (features, labels) is the clean held-out set used by l2r mode.
    """

    def __init__(self, cfg: ExperimentConfig, features, observed_labels, num_classes, reward_set=None):
        self.cfg = cfg
        self.plan = ExecutionPlan.for_config(cfg)
        self.dtype = np.dtype(cfg.dtype)
        self.features = np.asarray(features, dtype=self.dtype)
        self.observed = np.asarray(observed_labels)
        self.num_classes = num_classes
        self.targets = nn.one_hot(self.observed, num_classes, self.dtype)
        self.n = len(self.observed)

        ss = np.random.SeedSequence(cfg.seed)
        init_ss, sample_ss, dict_ss, mix_ss = ss.spawn(4)
        sizes = [self.features.shape[1], *cfg.hidden, num_classes]
        self.params = nn.init_mlp(sizes, init_ss, cfg.meta_layers, self.dtype)
        self.velocity = None
        self.sampler = fdata.EpochSampler(self.n, min(cfg.batch, self.n), np.random.default_rng(sample_ss))
        self.dict_rng = np.random.default_rng(dict_ss)
        self.mix_rng = np.random.default_rng(mix_ss)

        self.meta_cfg = reweight.MetaConfig(
            alpha=cfg.alpha,
            eta=cfg.eta,
            meta_eval_point=cfg.meta_eval_point,
            weight_init=self.plan.weight_init,
            smoothing=cfg.smoothing,
        )
        self.state = fdict.SampleState(self.n, num_classes)
        self.dictionary = None
        if self.plan.reward_source == "dictionary":
            self.dictionary = fdict.init_dictionary(self.observed, cfg.dict_size, num_classes, self.dict_rng)
        self.reward = None
        if self.plan.reward_source == "external":
            if reward_set is None or len(reward_set[1]) == 0:
                raise ConfigurationError("l2r mode needs an external reward set")
            rx, ry = reward_set
            ry = np.asarray(ry)
            self.reward = (np.asarray(rx, dtype=self.dtype), nn.one_hot(ry, num_classes, self.dtype))
            self.reward_pool = fdict.ProxyDictionary(
                len(ry), [np.flatnonzero(ry == c) for c in range(num_classes)]
            )

        self.warm_up = cfg.effective_warm_up
        self.total_steps = max(1, cfg.epochs * self.sampler.steps_per_epoch)
        self.step_count = 0
        self.epoch = 0
        self.weight_history = deque(maxlen=ZERO_WINDOW)
        self.timer = PhaseTimer()
        self.step_times = []
        self.last_weights = None
        self.last_dots = None

    # -- pieces -------------------------------------------------------------

    def _reward_batch(self) -> nn.Batch:
        if self.plan.reward_source == "dictionary":
            idx = fdict.fetch_balanced_batch(self.dictionary, self.cfg.reward_batch, self.dict_rng)
            return nn.Batch(self.features[idx], self.targets[idx], idx)
        idx = fdict.fetch_balanced_batch(self.reward_pool, self.cfg.reward_batch, self.dict_rng)
        return nn.Batch(self.reward[0][idx], self.reward[1][idx], idx)

    def _apply_update(self, grads: nn.GradientSet, lr: float):
        if self.cfg.momentum == 0.0:
            self.params = nn.sgd_step(self.params, grads, lr)
            return
        if self.velocity is None:
            self.velocity = nn.GradientSet(
                {l: np.zeros_like(g) for l, g in grads.weights.items()},
                {l: np.zeros_like(g) for l, g in grads.biases.items()},
            )
        m = self.cfg.momentum
        for l in grads.layers:
            self.velocity.weights[l] = m * self.velocity.weights[l] + grads.weights[l]
            self.velocity.biases[l] = m * self.velocity.biases[l] + grads.biases[l]
        self.params = nn.sgd_step(self.params, self.velocity, lr)

    def _scores(self, rows, orig, meta_logits, loss_before):
        labels = self.observed[rows]
        kind = self.cfg.pusher
        if kind == "meta_margin":
            loss_after = nn.softmax_xent(meta_logits, self.targets[rows], self.cfg.smoothing)
            return fdict.meta_margin(loss_before, loss_after)
        if kind == "forgetting_event":
            fdict.update_forgetting(self.state, rows, orig.logits.argmax(axis=1) == labels)
        elif kind == "aum":
            fdict.update_aum(self.state, rows, orig.logits, labels)
        return fdict.alt_pusher(kind, self.state, rows, orig.logits, labels, loss_before)

    # -- one step -----------------------------------------------------------

    def step(self, rows) -> float:
        """One training step on dataset rows ``rows``; returns the training loss."""
        cfg, plan, timer = self.cfg, self.plan, self.timer
        timer.start()
        rows = np.asarray(rows)
        b = len(rows)
        batch = nn.Batch(self.features[rows], self.targets[rows], rows)
        meta_on = plan.reweight and self.epoch >= self.warm_up

        mix = relabel.draw_mix(b, cfg.mixup_alpha, self.mix_rng) if plan.mixup and b >= 2 else None
        first = relabel.apply_mix(batch, mix) if mix is not None else batch
        reward = self._reward_batch() if meta_on else None
        # mixed rows, original rows and reward rows share one forward pass
        extra = reward.features if reward is not None else None
        n_train = 2 * b if mix is not None else b
        timer.lap("other")

        if mix is not None:
            full = relabel.mixed_forward(self.params, batch, first, mix, extra)
        else:
            full = nn.forward_cached(self.params, batch.features if extra is None else np.concatenate([batch.features, extra]))
        cache = full.rows(slice(0, n_train)) if reward is not None else full
        orig = cache.tail(b) if mix is not None else cache
        # one log-softmax of the original rows serves every loss term below
        logp = nn.log_softmax(orig.logits)
        probs = np.exp(logp)
        target = nn.smooth_labels(batch.labels, cfg.smoothing)
        orig_loss = -(target * logp).sum(axis=1)
        orig_grad = probs - target
        timer.lap("forward")

        meta_params = meta_logits = None
        need_meta_model = meta_on or (plan.score and cfg.pusher == "meta_margin")
        if need_meta_model:
            meta_params = reweight.virtual_meta_step(self.params, batch, self.meta_cfg, orig, orig_grad)
            if plan.score and cfg.pusher == "meta_margin":
                meta_logits = nn.forward_from(meta_params, orig, min(self.params.meta_layers))
            timer.lap("meta_step")

        if meta_on:
            result = reweight.meta_reweight(
                self.params, batch, reward, self.meta_cfg, cache=orig, meta_params=meta_params,
                logit_grads=orig_grad, reward_cache=full.rows(slice(n_train, None)),
            )
            weights = reweight.normalize_weights(result.weights, plan.norm)
            self.last_dots = result.dots
            timer.lap("meta_gradient")
        else:
            weights = np.full(b, 1.0 / b)
        self.last_weights = weights
        self.weight_history.append(weights)

        if plan.pseudo:
            seen = self.state.pseudo_seen[rows][:, None]
            pseudo_targets = np.where(seen, self.state.pseudo_label[rows], probs).astype(self.dtype)
            relabel.update_pseudo_label(self.state, rows, probs, cfg.beta)
        use_pseudo = plan.pseudo and self.epoch >= self.warm_up

        # weighted term on the (mixed) rows, pseudo term on the original rows
        w = weights.astype(self.dtype)
        if mix is not None:
            head, head_grad = nn.xent_and_grad(cache.logits[:b], first.labels, cfg.smoothing)
            dlogits = np.zeros_like(cache.logits)
            dlogits[:b] = w[:, None] * head_grad
        else:
            head = orig_loss
            dlogits = w[:, None] * orig_grad
        loss = float(w @ head)
        if use_pseudo:
            pw = cfg.pseudo_mult / b
            loss -= pw * float((pseudo_targets * logp).sum())
            dlogits[-b:] += pw * (probs - pseudo_targets)
        if not math.isfinite(loss):
            raise NumericalAbort(
                f"non-finite training loss at step {self.step_count} (epoch {self.epoch})",
                {"kind": "abort", "step": self.step_count, "epoch": self.epoch, "loss": loss, "config": cfg.to_dict()},
            )
        if mix is not None:
            grads = relabel.mixed_backprop(self.params, cache, dlogits, mix)
        else:
            grads = nn.backprop(self.params, cache, dlogits)
        lr = nn.cosine_lr(min(self.step_count, self.total_steps - 1), self.total_steps, cfg.base_lr)
        self._apply_update(grads, lr)
        timer.lap("backward")

        if plan.score:
            raw = self._scores(rows, orig, meta_logits, orig_loss)
            fdict.update_momentum_score(self.state, rows, raw, cfg.lam)
            timer.lap("dict_update")

        self.step_times.append(timer.stop())
        self.step_count += 1
        return loss

    def end_epoch(self):
        if self.plan.reward_source == "dictionary":
            t = time.perf_counter()
            self.dictionary = fdict.rebuild_dictionary(self.state, self.observed, self.cfg.dict_size, self.num_classes)
            self.timer.totals["dict_update"] += time.perf_counter() - t
        self.epoch += 1

    def run_epoch(self) -> float:
        losses = [self.step(rows) for rows in self.sampler.epoch()]
        self.end_epoch()
        return float(np.mean(losses))


@dataclass
class RunResult:
    records: list[dict]
    summary: dict
    params: nn.ModelParams
    trainer: Trainer = field(repr=False)


def parse_data_spec(spec: str) -> dict:
    """``synthetic`` or ``synthetic:C=6,per_class=1000,d=2,spread=0.3,test_per_class=200``."""
    opts = {"C": 6, "per_class": 1000, "d": 2, "spread": 0.3, "test_per_class": 200}
    if spec == "synthetic":
        return opts
    if not spec.startswith("synthetic:"):
        raise ConfigurationError(f"not a synthetic data spec: {spec!r}")
    for part in spec.split(":", 1)[1].split(","):
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep or key not in opts:
            raise ConfigurationError(f"bad synthetic option {part!r}; known keys {sorted(opts)}")
        opts[key] = float(value) if key == "spread" else int(value)
    return opts


def build_dataset(cfg: ExperimentConfig) -> fdata.BiasedDataset:
    reward_pc = cfg.reward_per_class if cfg.mode == "l2r" else 0
    if cfg.data.startswith("synthetic"):
        o = parse_data_spec(cfg.data)
        ds = fdata.make_gaussian_clusters(
            o["C"], o["per_class"], o["d"], o["spread"], seed=cfg.seed,
            test_per_class=o["test_per_class"], reward_per_class=reward_pc,
        )
    else:
        ds = fdata.load_csv(cfg.data)
    spec = fdata.BiasSpec(cfg.noise, cfg.noise_ratio, cfg.imbalance, seed=cfg.seed + 1000)
    return fdata.apply_bias(ds, spec)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class MetricsWriter:
    """Line-delimited JSON records with a CSV mirror of the scalar fields."""

    CSV_FIELDS = ["kind", "step", "epoch", "train_loss", "test_accuracy", "dict_purity", "zero_weight_ratio", "lr"]
    CSV_FIELDS += [f"time_{p}" for p in PHASES]

    def __init__(self, out_dir: Path | None):
        self.out_dir = out_dir
        self._jsonl = self._csv = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            self._jsonl = open(out_dir / "metrics.jsonl", "w")
            self._csv_fh = open(out_dir / "metrics.csv", "w", newline="")
            self._csv = csv.DictWriter(self._csv_fh, self.CSV_FIELDS, extrasaction="ignore")
            self._csv.writeheader()

    def write(self, record: dict):
        if self._jsonl is None:
            return
        clean = {k: _jsonable(v) for k, v in record.items()}
        self._jsonl.write(json.dumps(clean, sort_keys=True) + "\n")
        flat = dict(clean)
        for p, t in record.get("phase_times", {}).items():
            flat[f"time_{p}"] = t
        self._csv.writerow(flat)

    def close(self):
        if self._jsonl is not None:
            self._jsonl.close()
            self._csv_fh.close()


def save_model(params: nn.ModelParams, path) -> None:
    arrays = {}
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{l}"] = W
        arrays[f"b{l}"] = b
    np.savez(path, meta_mask=np.array(params.meta_mask), **arrays)


def load_model(path) -> nn.ModelParams:
    with np.load(path) as f:
        mask = tuple(bool(m) for m in f["meta_mask"])
        return nn.ModelParams([f[f"W{l}"] for l in range(len(mask))], [f[f"b{l}"] for l in range(len(mask))], mask)


def run_experiment(cfg: ExperimentConfig, out_dir=None, dataset: fdata.BiasedDataset | None = None) -> RunResult:
    """Train one model and emit per-epoch records plus a summary.

    With ``out_dir`` set, writes ``metrics.jsonl``, ``metrics.csv``,
    ``summary.json``, ``model.npz`` and (when a dictionary exists)
    ``dictionary.csv``.
    """
    for w in cfg.validate():
        logger.warning(w)
    out_dir = Path(out_dir) if out_dir is not None else None
    ds = dataset if dataset is not None else build_dataset(cfg)
    train, test = ds.rows("train"), ds.rows("test")
    reward = ds.rows("reward")
    if len(train) == 0:
        raise ConfigurationError("dataset has no training rows")
    trainer = Trainer(
        cfg, ds.features[train], ds.observed_labels[train], ds.num_classes,
        reward_set=(ds.features[reward], ds.observed_labels[reward]),
    )
    clean_train = ds.clean_labels[train]  # diagnostics only
    test_x, test_y = ds.features[test], ds.clean_labels[test]

    writer = MetricsWriter(out_dir)
    records, purities = [], []
    t_start = time.perf_counter()
    try:
        for epoch in range(cfg.epochs):
            before = dict(trainer.timer.totals)
            n_before = trainer.step_count
            train_loss = trainer.run_epoch()
            steps = max(1, trainer.step_count - n_before)
            purity = (
                dictionary_purity(trainer.dictionary, trainer.observed, clean_train)
                if trainer.dictionary is not None else float("nan")
            )
            purities.append(purity)
            rec = {
                "kind": "epoch",
                "epoch": epoch,
                "step": trainer.step_count,
                "train_loss": train_loss,
                "test_accuracy": evaluate(trainer.params, test_x, test_y),
                "dict_purity": purity,
                "zero_weight_ratio": zero_weight_ratio(trainer.weight_history, trainer.plan.norm),
                "zero_weight_defined": trainer.plan.norm == "clip",
                "lr": nn.cosine_lr(min(trainer.step_count, trainer.total_steps - 1), trainer.total_steps, cfg.base_lr),
                "phase_times": {p: (trainer.timer.totals[p] - before[p]) / steps for p in PHASES},
            }
            records.append(rec)
            writer.write(rec)
    except NumericalAbort as exc:
        writer.write(exc.record)
        writer.close()
        raise

    last = [p for p in purities[-10:] if not math.isnan(p)]
    summary = {
        "kind": "summary",
        "mode": cfg.mode,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "steps": trainer.step_count,
        "final_accuracy": evaluate(trainer.params, test_x, test_y),
        "mean_purity_last10": float(np.mean(last)) if last else float("nan"),
        "zero_weight_ratio": zero_weight_ratio(trainer.weight_history, trainer.plan.norm),
        "mean_zero_weight_ratio": (
            float(np.mean([r["zero_weight_ratio"] for r in records])) if records else 0.0
        ),
        "train_noise_rate": ds.noise_rate("train"),
        "mean_step_time": float(np.mean(trainer.step_times)) if trainer.step_times else 0.0,
        "phase_times": {p: trainer.timer.totals[p] / max(1, trainer.step_count) for p in PHASES},
        "total_time": time.perf_counter() - t_start,
        "config": cfg.to_dict(),
    }
    writer.write(summary)
    writer.close()
    if out_dir is not None:
        (out_dir / "summary.json").write_text(json.dumps({k: _jsonable(v) for k, v in summary.items()}, indent=2))
        save_model(trainer.params, out_dir / "model.npz")
        if trainer.dictionary is not None:
            write_dictionary_csv(
                out_dir / "dictionary.csv", trainer.dictionary, trainer.observed, clean_train,
                trainer.state.momentum_score,
            )
    return RunResult(records, summary, trainer.params, trainer)


def run_sweep(cfg: ExperimentConfig, out_dir=None, n_seeds: int | None = None) -> dict:
    """Run ``n_seeds`` consecutive seeds and aggregate mean and std."""
    n_seeds = n_seeds or cfg.seeds
    out_dir = Path(out_dir) if out_dir is not None else None
    results = []
    for k in range(n_seeds):
        run_cfg = dataclasses.replace(cfg, seed=cfg.seed + k, seeds=1)
        sub = out_dir / f"seed_{run_cfg.seed}" if out_dir is not None else None
        results.append(run_experiment(run_cfg, sub).summary)
    agg = {"kind": "sweep", "seeds": [r["seed"] for r in results]}
    for key in ("final_accuracy", "mean_purity_last10", "zero_weight_ratio", "mean_step_time", "total_time"):
        vals = np.array([r[key] for r in results], dtype=float)
        agg[key] = {"mean": _jsonable(float(np.mean(vals))), "std": _jsonable(float(np.std(vals))), "values": [_jsonable(v) for v in vals.tolist()]}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep_summary.json").write_text(json.dumps(agg, indent=2))
    return agg
