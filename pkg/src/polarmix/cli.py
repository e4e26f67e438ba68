"""Command-line front end.

Every subcommand reads its inputs, calls one library routine and writes
JSON (structured results) or CSV (tables).  Failures print one JSON line
``{"error": ..., "message": ..., "exit": ...}`` on stderr.

Exit codes: 0 ok, 2 usage/validation, 3 I/O, 4 parse, 5 budget,
6 kernel search exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import channel as ch
from . import construct, converse, sim
from .codec import encode, hard_llrs, sc_decode
from .construct import SelectorParams
from .errors import BudgetError, PlanError, SearchExhaustedError
from .kernel import SearchPolicy, format_kernel, kernel_search

EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_BUDGET, EXIT_SEARCH = 2, 3, 4, 5, 6


class ParseError(Exception):
    """Malformed input file."""


class UsageError(Exception):
    """Bad flag combination or value."""


# --- I/O helpers ----------------------------------------------------------

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _load_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def _load_channel(path: str) -> ch.BmsChannel:
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: channel document must be a JSON object")
    return ch.channel_from_dict(doc)


def _load_plan(path: str) -> construct.ConstructionPlan:
    doc = _load_json(path)
    try:
        return construct.plan_from_dict(doc)
    except (PlanError, ValueError, AttributeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _read_words(path: str, kind=float) -> list[np.ndarray]:
    """One whitespace-separated word per non-empty line."""
    words = []
    for n, line in enumerate(_read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            words.append(np.array([kind(v) for v in line.split()]))
        except ValueError as exc:
            raise ParseError(f"{path}:{n}: {exc}") from exc
    return words


def _read_bits(path: str) -> list[np.ndarray]:
    words = _read_words(path, int)
    for w in words:
        if np.any((w != 0) & (w != 1)):
            raise ParseError(f"{path}: bit words may only contain 0 and 1")
    return words


def _format_words(rows) -> str:
    return "".join(" ".join(str(int(b)) for b in r) + "\n" for r in rows)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int.from_bytes(os.urandom(8), "little")
    print(json.dumps({"seed": seed}), file=sys.stderr)
    return seed


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + m.replace("_", "-")
                                                                  for m in missing))


def _selector(args) -> SelectorParams:
    return SelectorParams(strategy=args.selector, theta=args.theta, dimension=args.dimension)


# --- subcommands ----------------------------------------------------------

def cmd_channel_info(args) -> int:
    _require(args, "channel")
    W = _load_channel(args.channel)
    out = {
        "entropy": ch.entropy(W),
        "bhattacharyya": ch.bhattacharyya(W),
        "capacity": ch.capacity(W),
        "outputs": len(W),
        "mixture": ch.channel_to_dict(W)["mixture"],
    }
    _write_text(args.out, json.dumps(out, sort_keys=True) + "\n")
    return 0


def cmd_construct(args) -> int:
    _require(args, "channel", "ell", "t")
    W = _load_channel(args.channel)
    seed = _seed(args)
    policy = SearchPolicy(mode=args.mode, max_candidates=args.max_candidates)
    plan = construct.build_plan(W, args.ell, args.t, Q=args.Q, policy=policy,
                                selector=_selector(args), seed=seed, threads=args.threads)
    _write_text(args.out, construct.dumps(plan) + "\n")
    return 0


def cmd_encode(args) -> int:
    _require(args, "plan", "input")
    plan = _load_plan(args.plan)
    msgs = _read_bits(args.input)
    rows = [encode(plan, m) for m in msgs]
    _write_text(args.out, _format_words(rows))
    return 0


def cmd_decode(args) -> int:
    _require(args, "plan", "input")
    plan = _load_plan(args.plan)
    if args.bits:
        llrs = [hard_llrs(w) for w in _read_bits(args.input)]
    else:
        llrs = _read_words(args.input)
    rows = [sc_decode(plan, L)[0] for L in llrs]
    _write_text(args.out, _format_words(rows))
    return 0


def cmd_simulate(args) -> int:
    _require(args, "plan", "channel", "trials")
    plan = _load_plan(args.plan)
    W = _load_channel(args.channel)
    cfg = sim.SimConfig(plan, W, args.trials, seed=_seed(args), message_mode=args.message_mode,
                        max_frame_errors=args.max_frame_errors, tie_break=args.tie_break)
    report = sim.simulate(cfg)
    if args.csv:
        sim.append_csv(report, args.csv)
    _write_text(args.out, report.to_json() + "\n")
    return 0


def cmd_kernel_search(args) -> int:
    _require(args, "channel", "ell")
    W = _load_channel(args.channel)
    if args.Q is not None:
        W = ch.degrade_bin(W, args.Q)
    policy = SearchPolicy(mode=args.mode, max_candidates=args.max_candidates,
                          seed=_seed(args), theta=args.theta)
    delta = args.delta if args.delta is not None else 0.0
    K, rep = kernel_search(W, delta, args.ell, policy, bin_Q=args.Q)
    out = {
        "kernel": K.to_strings(),
        "branch": rep.branch,
        "candidates_tried": rep.candidates_tried,
        "entropies": list(rep.entropies),
        "unpolarized": rep.unpolarized,
    }
    _write_text(args.out, json.dumps(out, sort_keys=True) + "\n")
    if args.kernel_out:
        _write_text(args.kernel_out, format_kernel(K))
    return 0


def cmd_converse_scan(args) -> int:
    _require(args, "channel", "ell")
    W = _load_channel(args.channel)
    k_max = args.k_max if args.k_max is not None else args.ell
    scan = converse.sharp_transition_scan(W, args.ell, range(args.k_min, k_max + 1),
                                          args.samples, _seed(args))
    _write_text(args.out, scan.to_csv())
    if args.meta:
        _write_text(args.meta, scan.to_json() + "\n")
    return 0


def cmd_trace(args) -> int:
    _require(args, "plan")
    plan = _load_plan(args.plan)
    vals = construct.potential_trace(plan, args.alpha)
    text = "level,value\n" + "".join(f"{j},{float(v)!r}\n" for j, v in enumerate(vals))
    _write_text(args.out, text)
    return 0


# --- parser ---------------------------------------------------------------

def _positive(kind):
    def conv(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", metavar="FILE", help="channel JSON file")
    common.add_argument("--ell", type=_positive(int), help="kernel size (power of 2)")
    common.add_argument("--t", type=_positive(int), help="tree depth")
    common.add_argument("--Q", type=_positive(int), help="bin count")
    common.add_argument("--theta", type=float, help="entropy threshold")
    common.add_argument("--selector", choices=["entropy_threshold", "staged"],
                        default="entropy_threshold")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="64-bit master seed")
    common.add_argument("--trials", type=_positive(int))
    common.add_argument("--out", metavar="FILE", help="output file (default stdout)")
    common.add_argument("--threads", type=_positive(int), default=os.cpu_count() or 1)
    common.add_argument("--config", metavar="FILE",
                        help="JSON object of flag defaults; explicit flags win")

    p = argparse.ArgumentParser(prog="polarmix", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    add("channel-info", cmd_channel_info, "entropy, Bhattacharyya and mixture of a channel")
    sp = add("construct", cmd_construct, "build a code plan")
    sp.add_argument("--dimension", type=int, help="select this many most reliable indices")
    sp.add_argument("--mode", choices=["best_effort", "exhaustive", "randomized"],
                    default="best_effort")
    sp.add_argument("--max-candidates", type=_positive(int), default=256)
    for name, func, what in (("encode", cmd_encode, "message"), ("decode", cmd_decode, "LLR")):
        sp = add(name, func, f"{name} words with a plan")
        sp.add_argument("--plan", metavar="FILE")
        sp.add_argument("--in", dest="input", metavar="FILE",
                        help=f"{what} words, one per line")
        if name == "decode":
            sp.add_argument("--bits", action="store_true",
                            help="input lines are noiseless codeword bits")
    sp = add("simulate", cmd_simulate, "Monte Carlo frame error rate")
    sp.add_argument("--plan", metavar="FILE")
    sp.add_argument("--message-mode", choices=["random", "all_zero"], default="random")
    sp.add_argument("--max-frame-errors", type=_positive(int))
    sp.add_argument("--tie-break", choices=["zero", "random"], default="zero",
                    help="how information bits with a tied LLR are decided")
    sp.add_argument("--csv", metavar="FILE", help="append a summary row here")
    sp = add("kernel-search", cmd_kernel_search, "search a kernel for one channel")
    sp.add_argument("--mode", choices=["best_effort", "exhaustive", "randomized"],
                    default="best_effort")
    sp.add_argument("--max-candidates", type=_positive(int), default=256)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--kernel-out", metavar="FILE", help="also write the kernel as text")
    sp = add("converse-scan", cmd_converse_scan, "random-code bit entropy versus dimension")
    sp.add_argument("--k-min", type=_positive(int), default=1)
    sp.add_argument("--k-max", type=_positive(int))
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--meta", metavar="FILE", help="write JSON metadata here")
    sp = add("trace", cmd_trace, "per-level potential of a plan as CSV")
    sp.add_argument("--plan", metavar="FILE")
    sp.add_argument("--alpha", type=float, default=0.1)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]):
    args = parser.parse_args(argv)
    if args.config:
        doc = _load_json(args.config)
        if not isinstance(doc, dict):
            raise ParseError(f"{args.config}: config must be a JSON object")
        known = vars(args)
        unknown = [k for k in doc if k.replace("-", "_") not in known]
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in doc.items()})
        args = parser.parse_args(argv)
    return args


def _fail(kind: str, msg: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": msg, "exit": code}), file=sys.stderr)
    return code


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    except ParseError as exc:
        return _fail("parse", str(exc), EXIT_PARSE)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except ParseError as exc:
        return _fail("parse", str(exc), EXIT_PARSE)
    except BudgetError as exc:
        return _fail("budget", str(exc), EXIT_BUDGET)
    except SearchExhaustedError as exc:
        return _fail("search_exhausted", str(exc), EXIT_SEARCH)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except (ValueError, IndexError) as exc:
        return _fail("validation", str(exc), EXIT_USAGE)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
