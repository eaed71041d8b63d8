"""Command-line interface.

Subcommands: train, eval, export-masks, energy-report, grad-check.

Exit codes: 0 success, 1 check failed, 2 missing data or environment
problem, 3 numeric divergence, 64 usage error.
"""

from __future__ import annotations

import argparse
import datetime
import sys
import time
from pathlib import Path

import numpy as np

from . import backend
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .energy import energy_report
from .grad import grad_check
from .manifest import ManifestError, git_blob_sha1, read_manifest, write_manifest
from .mnist import (
    DATA_DIR_ENV,
    MissingDataError,
    MnistError,
    load_dataset_dir,
    resolve_data_dir,
)
from .train import (
    CSV_HEADER,
    DataError,
    TrainConfig,
    TrainingDivergedError,
    evaluate_confusion,
    fit,
    init_model,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64

_BACKEND_CHOICES = ("auto", "compiled", "python")


class UsageError(Exception):
    """Bad flag values discovered after argparse."""


class EnvironmentFailure(Exception):
    """Usable flags, unusable surroundings (exit 2)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract says 64
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _select_backend(name: str) -> None:
    try:
        backend.set_backend(name)
    except ValueError as exc:  # known name, not built in this installation
        raise EnvironmentFailure(str(exc)) from None


def _require_pow2(value: int, minimum: int, what: str) -> None:
    if value < minimum or value & (value - 1):
        raise UsageError(f"{what} must be a power of two >= {minimum}, got {value}")


# train settings: flag name -> (converter, default).  The config file uses
# the same names (dashes or underscores) and is overridden by explicit flags.
_TRAIN_SETTINGS: dict[str, tuple] = {
    "grid": (int, 64),
    "layers": (int, 1),
    "epochs": (int, 10),
    "seed": (int, 0),
    "lr": (float, 0.01),
    "batch-size": (int, 32),
    "shift": (float, 0.01),
    "limit-train": (int, 0),
    "limit-val": (int, 0),
    "data-dir": (str, ""),
    "checkpoint": (str, "model.ckpt"),
    "metrics": (str, "metrics.csv"),
    "backend": (str, "auto"),
    "threads": (int, 1),
}

_TRAIN_HELP = {
    "grid": "simulation grid size N (power of two >= 32)",
    "layers": "number of optical layers",
    "epochs": "training epochs",
    "seed": "RNG seed for init and shuffling",
    "lr": "SGD learning rate",
    "batch-size": "mini-batch size",
    "shift": "activation shift s (modulus threshold)",
    "limit-train": "use only the first K training samples (0 = all)",
    "limit-val": "use only the first K validation samples (0 = all)",
    "data-dir": f"MNIST IDX directory (default: ${DATA_DIR_ENV})",
    "checkpoint": "final checkpoint path; best model goes to <path>.best",
    "metrics": "per-epoch metrics CSV path",
    "backend": "kernel backend",
    "threads": "worker threads (only 1, the deterministic mode, is implemented)",
}


def _load_config_file(path: str) -> dict[str, str]:
    try:
        raw = read_manifest(path)
    except OSError as exc:
        raise EnvironmentFailure(f"cannot read config file: {exc}") from None
    except ManifestError as exc:
        raise UsageError(str(exc)) from None
    return raw


def _merge_train_settings(args: argparse.Namespace) -> dict:
    settings = {name.replace("-", "_"): dflt for name, (_, dflt) in _TRAIN_SETTINGS.items()}
    config_path = getattr(args, "config", None)
    if config_path:
        for key, text in _load_config_file(config_path).items():
            dest = key.replace("-", "_")
            if dest not in settings:
                raise UsageError(f"unknown config key {key!r} in {config_path}")
            conv = _TRAIN_SETTINGS[dest.replace("_", "-")][0]
            try:
                settings[dest] = conv(text)
            except ValueError:
                raise UsageError(
                    f"config key {key!r}: cannot parse {text!r} as {conv.__name__}"
                ) from None
    for dest, value in vars(args).items():  # explicit flags win over the file
        if dest in settings:
            settings[dest] = value
    return settings


def _validate_train(s: dict) -> None:
    _require_pow2(s["grid"], 32, "--grid")
    if s["layers"] < 1:
        raise UsageError("--layers must be >= 1")
    if s["epochs"] < 1:
        raise UsageError("--epochs must be >= 1")
    if s["lr"] <= 0:
        raise UsageError("--lr must be > 0")
    if s["batch_size"] < 1:
        raise UsageError("--batch-size must be >= 1")
    if s["shift"] < 0:
        raise UsageError("--shift must be >= 0")
    if s["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if s["limit_train"] < 0 or s["limit_val"] < 0:
        raise UsageError("--limit-train/--limit-val must be >= 0")
    if s["backend"] not in _BACKEND_CHOICES:
        raise UsageError(
            f"--backend must be one of {', '.join(_BACKEND_CHOICES)}, got {s['backend']!r}"
        )


def cmd_train(args: argparse.Namespace) -> int:
    s = _merge_train_settings(args)
    _validate_train(s)
    _select_backend(s["backend"])
    if s["threads"] != 1:
        print(
            "note: multi-threaded training is not implemented; running "
            "single-threaded (deterministic)",
            file=sys.stderr,
        )
    data_dir = resolve_data_dir(s["data_dir"] or None)
    train_data, val_data, _ = load_dataset_dir(data_dir, s["grid"])
    if s["limit_train"]:
        train_data = train_data.subset(min(s["limit_train"], len(train_data)))
    if s["limit_val"]:
        val_data = val_data.subset(min(s["limit_val"], len(val_data)))

    config = TrainConfig(
        learning_rate=s["lr"],
        batch_size=s["batch_size"],
        epochs=s["epochs"],
        seed=s["seed"],
        grid_size=s["grid"],
        layers=s["layers"],
        activation_shift=s["shift"],
        checkpoint_path=s["checkpoint"],
        metrics_path=s["metrics"],
    )
    rng = np.random.default_rng(config.seed)
    model = init_model(config.grid_size, config.layers, config.activation_shift, rng)

    started = datetime.datetime.now(datetime.timezone.utc)
    t0 = time.perf_counter()
    metrics_path = Path(config.metrics_path)
    checkpoint_path = Path(config.checkpoint_path)
    best_path = checkpoint_path.with_name(checkpoint_path.name + ".best")
    with open(metrics_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")

        def on_epoch(rec):
            fh.write(rec.to_csv_row() + "\n")
            fh.flush()
            print(
                f"epoch {rec.epoch}: train_loss={rec.train_loss:.4f} "
                f"train_acc={rec.train_accuracy:.4f} val_loss={rec.val_loss:.4f} "
                f"val_acc={rec.val_accuracy:.4f} ({rec.wall_seconds:.1f}s)"
            )

        result = fit(model, train_data, val_data, config, rng, on_epoch)

    save_checkpoint(result.model, checkpoint_path)
    save_checkpoint(result.best_model, best_path)
    ended = datetime.datetime.now(datetime.timezone.utc)

    last = result.records[-1]
    manifest = {name.replace("-", "_"): s[name.replace("-", "_")] for name in _TRAIN_SETTINGS}
    manifest.update(
        data_dir=str(data_dir),
        backend_used=backend.name(),
        train_samples=len(train_data),
        val_samples=len(val_data),
        started=started.isoformat(),
        ended=ended.isoformat(),
        wall_seconds=repr(time.perf_counter() - t0),
        final_train_loss=repr(last.train_loss),
        final_train_acc=repr(last.train_accuracy),
        final_val_loss=repr(last.val_loss),
        final_val_acc=repr(last.val_accuracy),
        best_epoch=result.best_epoch,
        best_val_acc=repr(max(r.val_accuracy for r in result.records)),
        checkpoint_sha1=git_blob_sha1(checkpoint_path),
        best_checkpoint_sha1=git_blob_sha1(best_path),
    )
    write_manifest(checkpoint_path.with_name(checkpoint_path.name + ".manifest"), manifest)
    print(f"checkpoint: {checkpoint_path}")
    print(f"best checkpoint: {best_path} (epoch {result.best_epoch})")
    print(f"metrics: {metrics_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if args.backend:
        _select_backend(args.backend)
    model = load_checkpoint(args.checkpoint)
    data_dir = resolve_data_dir(args.data_dir or None)
    splits = dict(
        zip(("train", "validation", "test"), load_dataset_dir(data_dir, model.grid_size))
    )
    dataset = splits[args.split]
    if args.limit:
        dataset = dataset.subset(min(args.limit, len(dataset)))
    loss, acc, confusion = evaluate_confusion(model, dataset, args.batch_size)
    if args.format == "csv":
        # one summary row, then one row per confusion cell:
        #   summary,<mean_loss>,<accuracy>,<samples>
        #   confusion,<true>,<predicted>,<count>
        print("kind,a,b,c")
        print(f"summary,{loss!r},{acc!r},{len(dataset)}")
        for i in range(10):
            for j in range(10):
                print(f"confusion,{i},{j},{confusion[i, j]}")
    else:
        print(f"samples: {len(dataset)}")
        print(f"mean_loss: {loss:.6f}")
        print(f"accuracy: {acc:.4f}")
        print("confusion (rows: true label, cols: predicted):")
        width = max(len(str(int(confusion.max()))), 3)
        header = "    " + " ".join(f"{j:>{width}}" for j in range(10))
        print(header)
        for i in range(10):
            row = " ".join(f"{int(confusion[i, j]):>{width}}" for j in range(10))
            print(f"  {i} {row}")
    return EXIT_OK


def cmd_export_masks(args: argparse.Namespace) -> int:
    from .masks import export_masks

    model = load_checkpoint(args.checkpoint)
    try:
        written = export_masks(model, args.out_dir)
    except OSError as exc:
        raise EnvironmentFailure(f"cannot write masks: {exc}") from None
    print(f"wrote {len(written)} files to {args.out_dir}")
    return EXIT_OK


def cmd_energy_report(args: argparse.Namespace) -> int:
    try:
        report = energy_report(
            layers=args.layers,
            grid_size=args.grid,
            clock_rate=args.clock,
            total_power=args.power,
            total_nodes=args.nodes,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for line in report.lines():
        print(line)
    return EXIT_OK


def cmd_grad_check(args: argparse.Namespace) -> int:
    if args.grid > 16:
        raise UsageError(
            f"--grid {args.grid}: the checker runs O(parameters) full forward "
            "passes; grids above 16 are refused"
        )
    _require_pow2(args.grid, 8, "--grid")
    if args.layers < 1:
        raise UsageError("--layers must be >= 1")
    if args.step <= 0:
        raise UsageError("--step must be > 0")
    if args.shift < 0:
        raise UsageError("--shift must be >= 0")
    _select_backend(args.backend)
    rng = np.random.default_rng(args.seed)
    model = init_model(args.grid, args.layers, args.shift, rng)
    x = rng.random((args.grid, args.grid))
    label = int(rng.integers(0, 10))
    err = grad_check(model, x, label, args.step)
    print(f"max_rel_error={err!r}")
    return EXIT_OK if err < 1e-5 else EXIT_CHECK_FAILED


def build_parser() -> _Parser:
    parser = _Parser(prog="onn4f", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p_train = sub.add_parser("train", help="train a model on MNIST")
    for name, (conv, _) in _TRAIN_SETTINGS.items():
        extra = {"choices": _BACKEND_CHOICES} if name == "backend" else {}
        p_train.add_argument(
            f"--{name}",
            type=conv,
            default=argparse.SUPPRESS,
            help=_TRAIN_HELP[name],
            **extra,
        )
    p_train.add_argument(
        "--config",
        default=None,
        help="key=value settings file; explicit flags override it",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data-dir", default="", help=f"default: ${DATA_DIR_ENV}")
    p_eval.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p_eval.add_argument("--format", choices=("text", "csv"), default="text")
    p_eval.add_argument("--limit", type=int, default=0, help="evaluate only the first K samples")
    p_eval.add_argument("--batch-size", type=int, default=128)
    p_eval.add_argument("--backend", choices=_BACKEND_CHOICES, default="auto")
    p_eval.set_defaults(func=cmd_eval)

    p_masks = sub.add_parser("export-masks", help="dump W/B/theta rasters + previews")
    p_masks.add_argument("--checkpoint", required=True)
    p_masks.add_argument("--out-dir", default="masks")
    p_masks.set_defaults(func=cmd_export_masks)

    p_energy = sub.add_parser("energy-report", help="throughput and FLOPs/J figures")
    p_energy.add_argument("--layers", type=int, default=3)
    p_energy.add_argument("--grid", type=int, default=512)
    p_energy.add_argument("--clock", type=float, default=1e7, help="modulation rate in Hz")
    p_energy.add_argument("--power", type=float, default=0.1, help="total drive power in W")
    p_energy.add_argument(
        "--nodes", type=float, default=None, help="override total node count L*N^2"
    )
    p_energy.set_defaults(func=cmd_energy_report)

    p_check = sub.add_parser("grad-check", help="finite-difference gradient check")
    p_check.add_argument("--grid", type=int, default=8, help="power of two, at most 16")
    p_check.add_argument("--layers", type=int, default=1)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--step", type=float, default=1e-5)
    p_check.add_argument("--shift", type=float, default=0.01)
    p_check.add_argument("--backend", choices=_BACKEND_CHOICES, default="auto")
    p_check.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (EnvironmentFailure, MissingDataError, MnistError, CheckpointError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
