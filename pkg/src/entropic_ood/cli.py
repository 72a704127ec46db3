"""``entropic-ood`` command line.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical abort.
"""

import argparse
import json
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError, ContractError, DataFormatError, NumericalError, UnsupportedError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = ("generate", "train", "eval", "calibrate", "ablate-es", "plot", "sweep", "run")


def build_parser():
    p = argparse.ArgumentParser(prog="entropic-ood", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="run directory")
    p.add_argument("--loss", choices=("softmax", "isomax", "isomax_plus", "dismax"))
    p.add_argument("--entropic-scale", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--scores", help="comma-separated score list, e.g. mps,es,mds")
    p.add_argument("--es-values", help="comma-separated entropic scales for ablate-es")
    p.add_argument("--seeds", help="comma-separated seeds for sweep")
    p.add_argument("--no-baseline", action="store_true", help="skip the SoftMax baseline head")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def overrides_from(args):
    o = {}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.out is not None:
        o["out"] = args.out
    loss = {k: v for k, v in (("kind", args.loss), ("entropic_scale", args.entropic_scale),
                              ("alpha", args.alpha)) if v is not None}
    if loss:
        o["loss"] = loss
    if args.epochs is not None:
        o["optim"] = {"epochs": args.epochs}
    ev = {}
    if args.scores:
        ev["scores"] = args.scores.split(",")
    if args.no_baseline:
        ev["baseline"] = False
    if ev:
        o["eval"] = ev
    if args.es_values:
        o["ablation"] = {"entropic_scales": [float(v) for v in args.es_values.split(",")]}
    if args.seeds:
        o["sweep"] = {"seeds": [int(v) for v in args.seeds.split(",")]}
    return o


def dispatch(command, cfg):
    if command == "generate":
        for path in pipeline.generate(cfg).values():
            print(path)
    elif command == "train":
        pipeline.train_run(cfg)
    elif command == "calibrate":
        for head, r in pipeline.calibrate_run(cfg).items():
            print(f"{head}: T*={r.temperature:.6g}  ECE {r.ece_before:.4f} -> {r.ece_after:.4f}")
    elif command == "eval":
        print(pipeline.eval_run(cfg).to_text(), end="")
    elif command == "ablate-es":
        pipeline.ablate_es(cfg)
        print((pipeline.run_dir(cfg) / "ablation_es.txt").read_text(), end="")
    elif command == "plot":
        for path in pipeline.plot_run(cfg):
            print(path)
    elif command == "sweep":
        pipeline.sweep(cfg)
        print(pipeline.run_dir(cfg) / "summary.csv")
    elif command == "run":
        print(pipeline.pipeline(cfg).to_text(), end="")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, overrides_from(args))
    except (ConfigError, ContractError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        dispatch(args.command, cfg)
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, ContractError, UnsupportedError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
