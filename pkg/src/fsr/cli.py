"""Command-line entry point: ``fsr`` or ``python -m fsr``.

Settings come from the defaults, then an optional JSON config file
(``--config``), then explicit flags. Exit status is 0 on success, 2 on an
invalid configuration or unreadable data and 3 when training hits a
non-finite loss.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from fsr.data import CsvFormatError
from fsr.dictionary import PUSHERS
from fsr.errors import ConfigurationError, NumericalAbort
from fsr.harness import MODES, ExperimentConfig, run_experiment, run_sweep
from fsr.reweight import EVAL_POINTS, NORM_MODES

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsr", description="Train with proxy-dictionary sample re-weighting.")
    p.add_argument("--config", type=Path, help="JSON file of config fields; flags override it")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--warm-up", type=int, dest="warm_up")
    p.add_argument("--batch", type=int)
    p.add_argument("--reward-batch", type=int, dest="reward_batch")
    p.add_argument("--dict-size", type=int, dest="dict_size")
    p.add_argument("--lambda", type=float, dest="lam", help="momentum of the pusher score")
    p.add_argument("--eta", type=float, help="inner step size (also the base learning rate unless --lr)")
    p.add_argument("--alpha", type=float, help="weight step size")
    p.add_argument("--beta", type=float, help="pseudo-label moving-average decay")
    p.add_argument("--pseudo-mult", type=float, dest="pseudo_mult", help="pseudo-label loss multiplier p")
    p.add_argument("--smoothing", type=float)
    p.add_argument("--mixup-alpha", type=float, dest="mixup_alpha")
    p.add_argument("--no-mixup", action="store_const", const=False, dest="mixup")
    p.add_argument("--pusher", choices=PUSHERS)
    p.add_argument("--meta-layers", dest="meta_layers", help="fc | last_k:<k> | all")
    p.add_argument("--meta-eval-point", choices=EVAL_POINTS, dest="meta_eval_point")
    p.add_argument("--norm", choices=NORM_MODES)
    p.add_argument("--noise", choices=("none", "uniform", "asymmetric"))
    p.add_argument("--noise-ratio", type=float, dest="noise_ratio")
    p.add_argument("--imbalance", type=float)
    p.add_argument("--deferred", action="store_const", const=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="run this many consecutive seeds and aggregate")
    p.add_argument("--data", help="CSV path or synthetic[:C=..,per_class=..,d=..,spread=..,test_per_class=..]")
    p.add_argument("--hidden", help="comma-separated hidden widths, e.g. 64,64")
    p.add_argument("--lr", type=float, help="base learning rate of the cosine schedule")
    p.add_argument("--momentum", type=float, help="SGD momentum")
    p.add_argument("--reward-per-class", type=int, dest="reward_per_class", help="held-out reward set size for l2r")
    p.add_argument("--dtype", choices=("float64", "float32"))
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config is not None:
        try:
            values = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigurationError(f"config file {args.config} must hold a JSON object")
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in vars(args).items():
        if key in fields and value is not None:
            values[key] = value
    if isinstance(values.get("hidden"), str):
        try:
            values["hidden"] = [int(h) for h in values["hidden"].split(",") if h]
        except ValueError:
            raise ConfigurationError(f"bad --hidden value {values['hidden']!r}") from None
    return ExperimentConfig.from_dict(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        cfg.validate()
        if cfg.seeds > 1:
            agg = run_sweep(cfg, args.out)
            acc = agg["final_accuracy"]
            print(f"{cfg.mode}: accuracy {acc['mean']:.4f} +- {acc['std']:.4f} over {cfg.seeds} seeds")
        else:
            s = run_experiment(cfg, args.out).summary
            print(
                f"{cfg.mode}: accuracy {s['final_accuracy']:.4f}  purity(last10) {s['mean_purity_last10']:.3f}  "
                f"zero-weight {s['zero_weight_ratio']:.3f}  step {1e3 * s['mean_step_time']:.3f} ms"
            )
    except (ConfigurationError, CsvFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
