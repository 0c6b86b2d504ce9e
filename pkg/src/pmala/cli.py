"""Command-line entry point: ``pmala {run,verify,tune,make-synthetic}``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import BadConfig, InsufficientSamples, InvalidRun, MissingDataset
from .harness import ExperimentConfig, cmd_run, cmd_tune, cmd_verify, load_config, write_fhn_csv
from .models import generate_fhn_dataset, synthetic_logistic, write_logistic_csv

EXIT_FAIL = 1
EXIT_ERROR = 2


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON experiment configuration")
    p.add_argument("--threads", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--seed", type=int, help="base seed; replicate r uses seed + r")
    p.add_argument("--out", help="output directory")
    p.add_argument("--save-traces", action="store_true", default=None,
                   help="write raw chains as little-endian float64 with JSON sidecars")
    p.add_argument("--no-intercept", action="store_true",
                   help="do not append an intercept column to logistic designs")
    p.add_argument("--fhn-literal-bT", dest="fhn_literal_bt", action="store_true",
                   help="use -(W - a + b t)/c for dR/dt instead of -(W - a + b R)/c")


def build_parser():
    parser = argparse.ArgumentParser(prog="pmala", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run replicated chains and write ESS tables"),
                       ("verify", "run the invariant-density verification suite"),
                       ("tune", "tune step sizes only")):
        _add_common(sub.add_parser(name, help=text))
    mk = sub.add_parser("make-synthetic", help="write synthetic datasets as CSV")
    mk.add_argument("kind", choices=("logistic", "fhn"))
    mk.add_argument("--out", type=Path, required=True, help="CSV file to write")
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--n", type=int, default=500, help="logistic: observations")
    mk.add_argument("--d", type=int, default=5, help="logistic: parameters incl. intercept")
    return parser


def _merged_config(args):
    raw = load_config(args.config) if args.config else {}
    if args.command == "verify":
        raw.setdefault("model", {"kind": "example"})
        raw.setdefault("samplers", [])
    raw.setdefault("samplers", ["pmala", "mmala"])
    if args.threads is not None:
        raw["threads"] = args.threads
    if args.seed is not None:
        raw["base_seed"] = args.seed
    if args.out is not None:
        raw["out"] = args.out
    if args.save_traces:
        raw["save_traces"] = True
    model = raw.get("model")
    if isinstance(model, dict):
        if args.no_intercept:
            model["intercept"] = False
        if args.fhn_literal_bt and model.get("kind") == "fhn":
            model["literal_bt"] = True
    if args.command == "verify" and args.seed is not None:
        raw.setdefault("verify", {})["seed"] = args.seed
    return ExperimentConfig.from_dict(raw)


def _make_synthetic(args):
    args.out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "logistic":
        data = synthetic_logistic(args.seed, n=args.n, d=args.d)
        write_logistic_csv(data, args.out)
        meta = {"true_beta": data.true_beta.tolist(), "seed": args.seed}
    else:
        data = generate_fhn_dataset(args.seed)
        write_fhn_csv(data, args.out)
        meta = {"true_theta": list(data.true_theta), "noise_sd": data.noise_sd, "seed": args.seed}
    args.out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "make-synthetic":
            return _make_synthetic(args)
        cfg = _merged_config(args)
        handler = {"run": cmd_run, "verify": cmd_verify, "tune": cmd_tune}[args.command]
        return handler(cfg)
    except (BadConfig, MissingDataset, InsufficientSamples, InvalidRun) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: BadConfig: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
