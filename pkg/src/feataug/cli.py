"""Command-line entry point: ``feataug <subcommand> --config cfg.yaml``.

Exit codes: 0 success, 2 bad config or arguments, 3 file system error,
4 malformed input data or checkpoint, 5 experiment failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import experiments as ex
from .checkpoint import CheckpointError
from .config import ConfigError, ExperimentConfig, config_from_dict, config_to_yaml, load_config
from .datasets import CsvParseError

EXIT_CONFIG, EXIT_IO, EXIT_DATA, EXIT_EXPERIMENT = 2, 3, 4, 5


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", help="override the config output directory")
    common.add_argument("--threads", type=int, help="worker processes for independent runs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="feataug", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train-sa", parents=[common], help="train the sequence autoencoder")
    sw = sub.add_parser("sweep", parents=[common], help="decode an operator sweep between two samples")
    sw.add_argument("--checkpoint", required=True)
    sw.add_argument("--pair", type=int, nargs=2, metavar=("J", "K"))
    sw.add_argument("--operator", choices=["interpolate", "extrapolate", "noise"])
    sw.add_argument("--lambdas", type=float, nargs="+")
    cl = sub.add_parser("classify", parents=[common], help="baseline vs. augmented classifiers")
    cl.add_argument("--checkpoint", help="reuse a trained autoencoder instead of training one")
    rt = sub.add_parser("roundtrip", parents=[common], help="reconstruction error report")
    rt.add_argument("--checkpoint", required=True)
    rt.add_argument("--split", choices=["train", "test"], default="test")
    sub.add_parser("gen-data", parents=[common], help="write the configured dataset as CSV")
    sub.add_parser("show-config", parents=[common], help="print the resolved config")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out_dir is not None:
        cfg = replace(cfg, out_dir=args.out_dir)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    return cfg.validate()


def run(args) -> int:
    cfg = resolve_config(args)
    out = cfg.out_dir
    if args.command == "train-sa":
        res = ex.cmd_train_sa(cfg, out)
        last = res["history"][-1]
        print(f"wrote {res['checkpoint']} after {res['updates']} updates; final val_loss {last.val_loss:.6g}")
    elif args.command == "sweep":
        res = ex.cmd_sweep(cfg, args.checkpoint, out, args.pair, args.operator, args.lambdas)
        print(f"wrote {len(res['csv'])} curves and {res['svg']}")
    elif args.command == "classify":
        res = ex.cmd_classify(cfg, out, args.checkpoint)
        for v, r in res["results"].items():
            print(f"{v:22s} {r.mean:7.3f} +/- {r.std:.3f} % over {r.runs} runs")
    elif args.command == "roundtrip":
        res = ex.cmd_roundtrip(cfg, args.checkpoint, out, args.split)
        print(f"aggregate reconstruction MSE {res['aggregate']:.6g} over {len(res['rows'])} samples")
    elif args.command == "gen-data":
        for name, path in ex.cmd_gen_data(cfg, out).items():
            print(f"{name}: {path}")
    elif args.command == "show-config":
        print(config_to_yaml(cfg), end="")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CsvParseError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ex.ExperimentError, ValueError) as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT


if __name__ == "__main__":
    sys.exit(main())
