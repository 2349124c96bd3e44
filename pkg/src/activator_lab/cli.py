"""Command-line interface: train / eval / gradcheck / params / report.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""

import argparse
import json
import os
import sys

from . import checkpoint as ckpt_mod
from . import data as data_mod
from . import gradcheck as gc_mod
from . import params as params_mod
from . import report as report_mod
from .data import DataError
from .layers import ConfigError
from .models import ARCHS, ModelConfig, build
from .optim import TrainingError, evaluate, train

PAPER_PRESET = dict(ps=4, d_model=256, n_blocks=4, d_mlp=512, heads=4,
                    epochs=100, batch_size=128, lr=0.001)


class CliError(Exception):
    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


def _add_model_flags(p, default_arch="vit"):
    p.add_argument("--arch", choices=ARCHS, default=default_arch)
    p.add_argument("--ps", type=int, default=4)
    p.add_argument("--d-model", type=int, default=256)
    p.add_argument("--n-blocks", type=int, default=4)
    p.add_argument("--d-mlp", type=int, default=512)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--no-pos-embed", action="store_true")
    p.add_argument("--no-stream-norm", action="store_true")
    p.add_argument("--no-final-norm", action="store_true")


def _add_data_flags(p):
    p.add_argument("--dataset", choices=("cifar10", "cifar100"),
                   default="cifar10")
    p.add_argument("--data-dir",
                   default=os.environ.get("ACTIVATOR_DATA_DIR"))


def _resolve_data_dir(args):
    if not args.data_dir:
        raise CliError("no data directory: pass --data-dir or set "
                       "ACTIVATOR_DATA_DIR")
    return args.data_dir


def _model_config(args, n_classes):
    return ModelConfig(
        arch=args.arch, ps=args.ps, d_model=args.d_model,
        n_blocks=args.n_blocks, d_mlp=args.d_mlp, heads=args.heads,
        n_classes=n_classes, pos_embed=not args.no_pos_embed,
        stream_norm=not args.no_stream_norm,
        final_norm=not args.no_final_norm, seed=args.seed)


def cmd_train(args):
    if args.config:
        with open(args.config) as f:
            saved = json.load(f)
        for key, value in saved.items():
            setattr(args, key, value)
    if args.preset == "paper":
        for key, value in PAPER_PRESET.items():
            setattr(args, key, value)
    data_dir = _resolve_data_dir(args)
    train_ds, test_ds = data_mod.load_dataset(args.dataset, data_dir)
    if args.limit:
        train_ds = train_ds.subset(args.limit)
    config = _model_config(args, train_ds.n_classes)
    model = build(config)

    out_dir = args.output_dir
    os.makedirs(out_dir, exist_ok=True)
    echo = {k: getattr(args, k) for k in (
        "arch", "ps", "d_model", "n_blocks", "d_mlp", "heads",
        "no_pos_embed", "no_stream_norm", "no_final_norm", "dataset",
        "data_dir", "epochs", "batch_size", "lr", "seed",
        "checkpoint_interval", "limit")}
    with open(f"{out_dir}/config.json", "w") as f:
        json.dump(echo, f, indent=2, sort_keys=True)
        f.write("\n")

    log = None if args.quiet else print
    train(model, train_ds, test_ds, epochs=args.epochs,
          batch_size=args.batch_size, lr=args.lr, seed=args.seed,
          out_dir=out_dir, checkpoint_interval=args.checkpoint_interval,
          log=log)
    if not args.no_figures:
        report_mod.render_curves(f"{out_dir}/metrics.csv", out_dir,
                                 title=f"{args.arch} / {args.dataset}")
    return 0


def cmd_eval(args):
    data_dir = _resolve_data_dir(args)
    model = ckpt_mod.restore_model(args.checkpoint)
    if args.arch and args.arch != model.config.arch:
        raise CliError(f"checkpoint holds arch {model.config.arch!r}, "
                       f"--arch says {args.arch!r}")
    train_ds, test_ds = data_mod.load_dataset(args.dataset, data_dir)
    ds = train_ds if args.split == "train" else test_ds
    if ds.n_classes != model.config.n_classes:
        raise CliError(f"checkpoint expects {model.config.n_classes} "
                       f"classes, {args.dataset} has {ds.n_classes}")
    loss, acc = evaluate(model, ds, batch_size=args.batch_size)
    print(f"{args.dataset} {args.split}: loss={loss:.6f} acc={acc:.4f}%")
    return 0


def cmd_gradcheck(args):
    archs = [args.arch] if args.arch else list(ARCHS)
    all_ok = True
    for arch in archs:
        passed, lines = gc_mod.gradcheck_report(arch, seed=args.seed)
        all_ok &= passed
        print(f"== {arch}: {'PASS' if passed else 'FAIL'}")
        for line in lines:
            print("  " + line)
    return 0 if all_ok else 1


def cmd_params(args):
    archs = [args.arch] if args.arch else list(ARCHS)
    for arch in archs:
        try:
            config = _model_config(
                argparse.Namespace(**{**vars(args), "arch": arch}),
                args.n_classes)
        except ConfigError as e:
            raise CliError(str(e))
        counts = params_mod.module_counts(config)
        print(f"== {arch}")
        for name, n in counts.items():
            print(f"  {name:20s} {n:>12,d}")
        print(f"  {'total':20s} {sum(counts.values()):>12,d}")
    return 0


def cmd_report(args):
    os.makedirs(args.output_dir, exist_ok=True)
    outputs = report_mod.render_curves(args.metrics, args.output_dir,
                                       prefix=args.prefix, title=args.title)
    for out in outputs:
        print(out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="activator-lab",
        description="GLU-based transformer blocks and baselines on CIFAR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and emit metrics/figures")
    _add_model_flags(p)
    _add_data_flags(p)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default="runs/out")
    p.add_argument("--checkpoint-interval", type=int, default=0)
    p.add_argument("--preset", choices=("paper",),
                   help="pin all reported-run hyperparameters")
    p.add_argument("--limit", type=int, default=0,
                   help="train on only the first N samples (smoke tests)")
    p.add_argument("--config", help="load flags from a config.json echo")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    _add_data_flags(p)
    p.add_argument("--arch", choices=ARCHS,
                   help="assert the checkpoint architecture")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--batch-size", type=int, default=256)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check at miniature scale")
    p.add_argument("--arch", choices=ARCHS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("params", help="closed-form parameter counts")
    _add_model_flags(p, default_arch=None)   # None -> print all archs
    p.add_argument("--n-classes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("report", help="render curve figures from metrics.csv")
    p.add_argument("--metrics", required=True)
    p.add_argument("--output-dir", default=".")
    p.add_argument("--prefix", default="")
    p.add_argument("--title")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (DataError, ConfigError, ckpt_mod.CheckpointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TrainingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
