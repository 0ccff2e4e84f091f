"""Command-line entry point: ``beastal <subcommand> [flags]``.

Configuration precedence is command-line flag, then ``--config`` JSON file,
then built-in defaults. Exit status is 0 on success, 1 on a runtime failure
and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .experiments import DEFAULTS, RUNNERS, UsageError
from .rules import Rule

RULE_NAMES = [r.value for r in Rule]


def _seed_list(text: str) -> list[int]:
    """``"0-7"`` or ``"0,3,5"`` or a mix."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _rule_list(text: str) -> list[str]:
    if text == "all":
        return RULE_NAMES
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in RULE_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown rule(s) {bad}; choose from {RULE_NAMES} or 'all'")
    return names


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", type=Path, help="JSON file with default values for any flag")
    common.add_argument("--out", type=Path, help="output directory (created if missing)")
    common.add_argument("--inputs", type=_positive_int)
    common.add_argument("--outputs", type=_positive_int)
    common.add_argument("--rule", choices=RULE_NAMES)
    common.add_argument("--alpha", type=float, help="learning rate (initial value when annealing)")
    common.add_argument("--beta", type=float, help="annealing exponent")
    common.add_argument("--gamma", type=float, help="rule rate constant")
    common.add_argument("--r-min", dest="r_min", type=float, help="resistance floor")
    common.add_argument("--steps", type=_positive_int)
    common.add_argument("--seed", type=int)
    common.add_argument("--seeds", type=_seed_list, help="e.g. 0-7 or 1,4,9")
    common.add_argument("--anneal", action=argparse.BooleanOptionalAction)
    common.add_argument("--anneal-norm", dest="anneal_norm", choices=["edge", "node"])
    common.add_argument("--hidden", action="store_true")
    common.add_argument("--jobs", type=_positive_int, help="parallel worker processes")
    common.add_argument("--iris-path", dest="iris_path", type=Path)

    parser = argparse.ArgumentParser(prog="beastal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("train-regression", parents=[common], help="train on a linear regression task")
    p.add_argument("--M", dest="M", default=S, help='task matrix, rows separated by ";" e.g. "0.15,0.2"')
    p.add_argument("--task-seed", dest="task_seed", type=int, default=S)

    p = sub.add_parser("train-classification", parents=[common], help="Iris classification")
    p.add_argument("--rules", type=_rule_list, default=S, help="comma list or 'all'")
    p.add_argument("--stratified", action="store_true", default=S)
    p.add_argument("--n-train", dest="n_train", type=_positive_int, default=S)
    p.add_argument("--target-source", dest="target_source", choices=["all", "train"], default=S)
    p.add_argument("--refresh", type=_positive_int, default=S, help="target refresh period in steps")

    p = sub.add_parser("sweep-grid", parents=[common], help="final loss over an inputs x outputs grid")
    p.add_argument("--rules", type=_rule_list, default=S)
    p.add_argument("--window", type=_positive_int, default=S)

    p = sub.add_parser("baselines", parents=[common], help="GD, cosine and one-shot comparisons")
    p.add_argument("--gd-alpha", dest="gd_alpha", type=float, default=S)

    p = sub.add_parser("hidden-compare", parents=[common], help="with vs without a hidden layer")
    p.add_argument("--rules", type=_rule_list, default=S)
    p.add_argument("--window", type=_positive_int, default=S)
    return parser


def merge_config(command: str, flags: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    path = flags.pop("config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    cfg.update(flags)
    if "rule" in flags and "rules" not in flags and "rules" in cfg:
        cfg["rules"] = [flags["rule"]]
    if "seed" in flags and "seeds" not in flags and command == "train-classification":
        cfg["seeds"] = [flags["seed"]]
    for k, v in list(cfg.items()):
        if isinstance(v, Path):
            cfg[k] = str(v)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(args)
    command = flags.pop("command")
    try:
        cfg = merge_config(command, flags)
        out = Path(cfg.pop("out", None) or f"runs/{command}")
        out.mkdir(parents=True, exist_ok=True)
        RUNNERS[command](cfg, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"beastal {command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"beastal {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote results to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
