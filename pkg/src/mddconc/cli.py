"""Command-line front end: ``mddconc {test,simulate,mc,interpolate}``.

Exit codes: 0 success, 2 usage or invalid input, 3 I/O, 4 parse or missing
data, 5 degenerate data, 6 internal error. Reports go to ``--output`` or
standard output; progress and errors go to standard error.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import MULTIPLIER_MODES, STATISTICS
from .data import load_dataset, save_long_csv, save_wide_csv, spline_fill
from .errors import DegenerateDataError, InputError, MissingDataError, ParseError
from .inference import CORRECTIONS, global_test, partial_tests
from .simulate import ScenarioConfig, TestConfig, default_grid, generate, run_monte_carlo

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 2, 3, 4, 5, 6


class UsageError(Exception):
    pass


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ParseError, MissingDataError)):
        return EXIT_PARSE
    if isinstance(exc, DegenerateDataError):
        return EXIT_DEGENERATE
    if isinstance(exc, (InputError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def resolve_seed(seed: int) -> int:
    """Seed 0 means draw a fresh nonzero 63-bit seed."""
    if seed < 0 or seed >= 2 ** 64:
        raise UsageError(f"seed must lie in [0, 2^64), got {seed}")
    while seed == 0:
        seed = secrets.randbits(63)
    return seed


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _effects(text):
    parts = text.split(",")
    if len(parts) != 2 or any(p.strip() not in ("0", "1") for p in parts):
        raise argparse.ArgumentTypeError(f"expected two 0/1 flags like '1,0', got {text!r}")
    return tuple(p.strip() == "1" for p in parts)


def _alphas(text):
    try:
        values = tuple(float(a) for a in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated levels, got {text!r}")
    if not values or any(not 0 < a < 1 for a in values):
        raise argparse.ArgumentTypeError(f"levels must lie in (0, 1), got {text!r}")
    return values


def _add_bootstrap_args(p):
    p.add_argument("--B", type=_positive, default=1000, help="bootstrap replicates (default 1000)")
    p.add_argument("--seed", type=int, default=0,
                   help="master seed; 0 draws one from entropy and echoes it (default 0)")
    p.add_argument("--correction", choices=CORRECTIONS, default="bonferroni")
    p.add_argument("--multiplier-mode", choices=MULTIPLIER_MODES, default="shared")
    p.add_argument("--statistic", choices=STATISTICS, default="td",
                   help="decision statistic: td (ratio of integrals) or e (integral of ratios)")
    p.add_argument("--partial", action="store_true", help="one test per covariate")
    p.add_argument("--threads", type=_positive, default=1,
                   help="worker cap; never changes results (default 1)")
    p.add_argument("--output", type=Path, help="report path (default: standard output)")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--quiet", action="store_true", help="no progress on standard error")


def _add_scenario_args(p):
    p.add_argument("--scenario", choices=("A", "B"), default="A")
    p.add_argument("--n", type=int, default=40, help="curves per dataset (default 40)")
    p.add_argument("--grid", type=int, default=25, help="equispaced grid points on [0, 1]")
    p.add_argument("--effects", type=_effects, default=(True, True),
                   help="effect flags for covariates 1 and 2, e.g. '0,1' (default 1,1)")
    p.add_argument("--noise-scale", type=float, default=None,
                   help="GP error scale (default 0.1 for A, 0.02 for B)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mddconc",
        description="MDD significance tests for additive functional concurrent regression.")
    parser.add_argument("--version", action="version", version=f"mddconc {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("test", help="test covariate significance on a dataset")
    p.add_argument("--data", type=Path, required=True,
                   help="long-format CSV file or wide-format directory")
    p.add_argument("--response", default="Y", help="response variable name (default Y)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--covariates", choices=("all",), help="test every covariate jointly")
    group.add_argument("--subset", action="append", metavar="NAME",
                       help="covariate to include; repeat for several")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--fill", action="store_true", help="spline-fill missing cells first")
    p.add_argument("--extrapolate", action="store_true",
                   help="with --fill, allow linear extrapolation at curve ends")
    _add_bootstrap_args(p)

    p = sub.add_parser("simulate", help="write a simulated scenario dataset")
    _add_scenario_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, required=True, help="output directory")
    p.add_argument("--layout", choices=("wide", "long"), default="wide")

    p = sub.add_parser("mc", help="Monte Carlo size or power study")
    _add_scenario_args(p)
    p.add_argument("--null", action="store_true", help="shorthand for --effects 0,0")
    p.add_argument("--M", type=int, default=500, help="Monte Carlo replicates (default 500)")
    p.add_argument("--alpha-levels", type=_alphas, default=(0.01, 0.05, 0.10))
    p.add_argument("--subset", action="append", metavar="NAME",
                   help="covariate to include in a global test (X1 or X2)")
    _add_bootstrap_args(p)

    p = sub.add_parser("interpolate", help="spline-fill missing cells of a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--response", default="Y")
    p.add_argument("--output", type=Path, required=True,
                   help="output file (long) or directory (wide); defaults to the input layout")
    p.add_argument("--layout", choices=("wide", "long"), default=None)
    p.add_argument("--extrapolate", action="store_true")
    return parser


def _progress(args):
    if getattr(args, "quiet", False):
        return None

    def emit(message):
        print(message, file=sys.stderr, flush=True)
    return emit


def _config_echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key == "quiet":
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def _document(args, payload, started) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "mddconc", "version": __version__},
        "config": _config_echo(args),
        "result": payload,
        "timing": {"wall_seconds": time.perf_counter() - started},
    }


def _render_text(doc) -> str:
    cfg, res = doc["config"], doc["result"]
    lines = [f"mddconc {doc['tool']['version']} {cfg['subcommand']}  seed={cfg.get('seed')}"]
    if res.get("kind") in ("global", "partial"):
        lines.append(f"kind={res['kind']}  n={res['n']} p={res['p']} T={res['T']}  "
                     f"B={res['B']}  mode={res['multiplier_mode']}  "
                     f"statistic={res['decision_statistic']}")
        lines.append(f"covariates: {', '.join(res['subset_names'])}")
        lines.append(f"T_D = {res['statistic_td']:.6g}   E_D = {res['statistic_e']}")
        lines.append(f"p-value = {res['p_value']:.6g}   "
                     f"(asymptotic, diagnostic only: {res['asymptotic_p_value']:.3g})")
        for c in res["per_covariate"]:
            lines.append(f"  {c['name']}: raw p = {c['p_value_raw']:.6g}  "
                         f"adjusted p = {c['p_value_adjusted']:.6g}  "
                         f"reject = {c['reject']}")
    elif "rejection_rates" in res:
        lines.append(f"M={res['M']}  levels={res['alpha_levels']}")
        for label, rates in res["rejection_rates"].items():
            flags = res["within_ci"][label]
            cells = "  ".join(f"{a:g}: {r:.3f}{'' if ok else ' *'}"
                              for a, r, ok in zip(res["alpha_levels"], rates, flags))
            lines.append(f"  {label}: {cells}")
        lines.append("  (* outside the 95% Monte Carlo band)")
    lines.append(f"wall time {doc['timing']['wall_seconds']:.2f}s")
    return "\n".join(lines) + "\n"


def _emit(args, doc):
    text = (json.dumps(doc, indent=2, allow_nan=False) + "\n" if args.format == "json"
            else _render_text(doc))
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="utf-8")


def cmd_test(args) -> int:
    started = time.perf_counter()
    args.seed = resolve_seed(args.seed)
    if not 0 < args.alpha < 1:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    dataset = load_dataset(args.data, args.response)
    if args.fill:
        dataset = spline_fill(dataset, extrapolate=args.extrapolate)
    elif not dataset.is_complete:
        raise MissingDataError(
            f"{args.data}: {int(dataset.missing.sum())} missing cell(s); rerun with --fill")
    subset = args.subset if args.subset else None
    if args.partial:
        if args.subset:
            raise UsageError("--partial tests every covariate; drop --subset")
        emit = _progress(args)
        hook = None
        if emit:
            def hook(info):
                emit(f"[partial] {info['name']}: raw p = {info['p_value_raw']:.6g}")
        report = partial_tests(dataset, args.B, args.seed, args.correction, args.alpha,
                               args.multiplier_mode, args.statistic, workers=args.threads,
                               progress=hook)
    else:
        report = global_test(dataset, subset, args.B, args.seed, args.multiplier_mode,
                             args.statistic, workers=args.threads)
    payload = report.to_dict()
    payload["alpha"] = args.alpha
    payload["reject"] = report.reject(args.alpha)
    payload["provenance"] = _jsonable(dataset.provenance)
    _emit(args, _document(args, payload, started))
    return EXIT_OK


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _scenario(args) -> ScenarioConfig:
    if args.n < 4:
        raise InputError(f"--n must be at least 4, got {args.n}")
    if args.grid < 2:
        raise InputError(f"--grid must be at least 2, got {args.grid}")
    effects = (False, False) if getattr(args, "null", False) else args.effects
    return ScenarioConfig(args.scenario, args.n, default_grid(args.grid), effects, args.seed,
                          args.noise_scale)


def cmd_simulate(args) -> int:
    args.seed = resolve_seed(args.seed)
    config = _scenario(args)
    dataset = generate(config)
    args.output.mkdir(parents=True, exist_ok=True)
    if args.layout == "wide":
        save_wide_csv(dataset, args.output)
    else:
        save_long_csv(dataset, args.output / "data.csv")
    provenance = {"schema_version": SCHEMA_VERSION,
                  "tool": {"name": "mddconc", "version": __version__},
                  "config": _config_echo(args),
                  "scenario": _jsonable(config.to_dict())}
    (args.output / "provenance.json").write_text(
        json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_mc(args) -> int:
    started = time.perf_counter()
    if args.M < 1:
        raise InputError(f"--M must be at least 1, got {args.M}")
    args.seed = resolve_seed(args.seed)
    scenario = _scenario(args)
    subset = None
    if args.subset:
        names = ("X1", "X2")
        bad = [s for s in args.subset if s not in names]
        if bad:
            raise InputError(f"unknown covariate(s) {bad}; scenario covariates are {names}")
        subset = tuple(sorted({names.index(s) for s in args.subset}))
    if args.partial and subset is not None:
        raise UsageError("--partial tests every covariate; drop --subset")
    test = TestConfig("partial" if args.partial else "global", subset, args.B,
                      args.multiplier_mode, args.statistic, args.correction)
    emit = _progress(args)
    step = max(1, args.M // 20)
    hook = None
    if emit:
        def hook(done, total):
            if done % step == 0 or done == total:
                emit(f"[mc] {done}/{total}")
    result = run_monte_carlo(scenario, test, args.M, args.alpha_levels, workers=args.threads,
                             progress=hook)
    payload = result.to_dict()
    payload["scenario"] = _jsonable(scenario.to_dict())
    payload["test"] = test.to_dict()
    _emit(args, _document(args, payload, started))
    return EXIT_OK


def cmd_interpolate(args) -> int:
    dataset = load_dataset(args.data, args.response)
    layout = args.layout or ("wide" if args.data.is_dir() else "long")
    filled = spline_fill(dataset, extrapolate=args.extrapolate)
    if layout == "wide":
        save_wide_csv(filled, args.output)
    else:
        save_long_csv(filled, args.output)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "mc": cmd_mc,
            "interpolate": cmd_interpolate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.subcommand](args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _exit_code(exc)
        error = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
        print(json.dumps(error), file=sys.stderr)
        if code == EXIT_INTERNAL:
            traceback.print_exc(file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
