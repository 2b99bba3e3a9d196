"""Command-line interface.

Usage:
    gwit analyze --input state.json [--targets all] [--seed 0] [--out report.json]
    gwit synth vacuum --modes 6 --out vac.json
    gwit synth tms --r 0.5 --delta-c 1e-3 --out tms.json
    gwit synth spopo-like --seed 7 --delta-c 1e-3 --out spopo.json
    gwit synth mixture --modes 3 --r 1 --mixture "1/3*tms:1,2;1/3*tms:1,3;1/3*tms:2,3"
    gwit validate --input state.json
    gwit report-check a.json b.json --tolerance 1e-9

Exit codes: 0 success, 1 input error, 2 internal numerical failure,
3 report-check found differences beyond tolerance.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from gwit import io as gio
from gwit import optimizer, report, synth
from gwit.model import (
    ConvexK,
    GwitError,
    InadmissibleOperatorError,
    Individual,
    InputError,
    NumericalError,
    validate,
)
from gwit.partitions import MAX_EXHAUSTIVE_MODES, enumerate_partitions, parse_partition
from gwit.symplectic import physicality_margin, purity

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_DIFF = 0, 1, 2, 3
DEFAULT_PARTITION_SWEEP_MAX = 8

_TARGET_TOKEN = re.compile(r"\s*(all|convex|partitions|K=\d+|partition=[0-9,:\s]+?)\s*(?:,(?=\s*(?:all|convex|partitions|K=|partition=))|$)")


def parse_targets(spec: str, n: int, allow_large: bool = False) -> list:
    """Expand a target list such as ``"K=2,partition=1,2:3,K=3"``.

    ``all`` means every ConvexK plus every individual partition (the latter
    only for N <= 8 unless ``allow_large``); ``convex`` and ``partitions``
    select one of the two groups.
    """
    targets: list = []
    pos = 0
    spec = spec.strip()
    if not spec:
        raise InputError("empty target list")
    while pos < len(spec):
        m = _TARGET_TOKEN.match(spec, pos)
        if not m:
            raise InputError(f"cannot parse targets at {spec[pos:]!r}")
        tok = m.group(1).strip()
        pos = m.end()
        if tok in ("all", "convex"):
            targets += [ConvexK(k) for k in range(1, n + 1)]
        if tok in ("all", "partitions"):
            if n > MAX_EXHAUSTIVE_MODES:
                raise InputError(f"individual-partition sweeps are capped at N={MAX_EXHAUSTIVE_MODES}")
            if n > DEFAULT_PARTITION_SWEEP_MAX and not allow_large:
                if tok == "partitions":
                    raise InputError(
                        f"N={n} > {DEFAULT_PARTITION_SWEEP_MAX}: pass --all-partitions "
                        "to sweep every individual partition")
            else:
                targets += [Individual(p) for p in enumerate_partitions(n)]
        elif tok.startswith("K="):
            k = int(tok[2:])
            if not 1 <= k <= n:
                raise InputError(f"K={k} out of range 1..{n}")
            targets.append(ConvexK(k))
        elif tok.startswith("partition="):
            targets.append(Individual(parse_partition(tok[len("partition="):], n)))
    seen = set()
    unique = []
    for t in targets:
        if t not in seen:
            seen.add(t)
            unique.append(t)
    return unique


def _workers() -> int:
    raw = os.environ.get("GWIT_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"GWIT_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(value, os.cpu_count() or 1))


def _ga_config(args) -> optimizer.GaConfig:
    base = optimizer.load_config(args.ga_config) if args.ga_config else {}
    return optimizer.config_from_mapping(
        base,
        rng_seed=args.seed,
        population_size=args.ga_population,
        generations=args.ga_generations,
        tournament_size=args.ga_tournament,
        crossover_rate=args.ga_crossover,
        blend_alpha=args.ga_blend_alpha,
        mutation_rate=args.ga_mutation_rate,
        mutation_sigma=args.ga_mutation_sigma,
        elite_count=args.ga_elite,
        restarts=args.ga_restarts,
    )


def _write(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_analyze(args) -> int:
    state = gio.load_state(args.input)
    config = _ga_config(args)
    targets = parse_targets(args.targets, state.n_modes, args.all_partitions)
    results = optimizer.sweep(state, targets, config, workers=_workers())
    rep = report.build_report(state, results, config, source=Path(args.input).name,
                              include_witness=args.include_witness,
                              timestamp=not args.no_timestamp)
    text = report.to_csv(rep) if args.format == "csv" else report.dumps(rep)
    _write(text, args.out)
    if args.out not in (None, "-"):
        for row in rep["convex"]:
            print(f"{row['target']:>6}  sigma={row['sigma']}")
        if rep["partitions"]:
            n_det = sum(r["detected"] for r in rep["partitions"])
            print(f"individual partitions: {len(rep['partitions'])} probed, {n_det} entangled")
    return EXIT_OK


def _parse_mixture(spec: str, n: int, r: float):
    parts = []
    for raw in spec.split(";"):
        raw = raw.strip()
        if not raw:
            continue
        weight_txt, star, body = raw.partition("*")
        if not star:
            raise InputError(f"mixture part {raw!r} must look like WEIGHT*KIND[:ARGS]")
        try:
            weight = float(Fraction(weight_txt.strip()))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad mixture weight {weight_txt!r}") from None
        kind, _, arg = body.strip().partition(":")
        if kind == "tms":
            modes = [int(x) - 1 for x in arg.split(",")]
            if len(modes) != 2:
                raise InputError(f"tms part needs two modes, got {arg!r}")
            if min(modes) < 0 or max(modes) >= n:
                raise InputError(f"tms modes {arg!r} out of range 1..{n}")
            state = synth.tms(r, n, tuple(modes))
        elif kind == "vacuum":
            state = synth.vacuum(n)
        elif kind == "thermal":
            state = synth.thermal(n, float(arg))
        else:
            raise InputError(f"unknown mixture part kind {kind!r} (tms, vacuum, thermal)")
        parts.append((weight, state))
    return synth.mixture_covariance(parts)


def cmd_synth(args) -> int:
    kind = args.kind
    if kind == "vacuum":
        state = synth.vacuum(args.modes)
    elif kind == "squeezed":
        if not args.db:
            raise InputError("synth squeezed needs --db")
        state = synth.squeezed_supermodes(_floats(args.db))
    elif kind == "tms":
        pair = tuple(int(x) - 1 for x in args.pair.split(","))
        state = synth.tms(args.r, args.modes, pair)
    elif kind == "spopo-like":
        db = _floats(args.db) if args.db else None
        state = synth.spopo_like(args.modes, db, args.seed, args.impurity, args.delta_c)
    elif kind == "mixture":
        state = _parse_mixture(args.mixture, args.modes, args.r)
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(f"unknown synth kind {kind}")
    if kind != "spopo-like" and args.delta_c:
        state = state.with_uncertainty(args.delta_c)
    if args.label:
        state = state.with_label(args.label)
    errors = [d for d in validate(state) if d.level == "error"]
    if errors:
        raise InputError("; ".join(d.message for d in errors))
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    text = gio.state_to_csv(state) if fmt == "csv" else gio.state_to_json(state)
    _write(text, args.out)
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from None


def cmd_validate(args) -> int:
    state = gio.load_state(args.input)
    diags = validate(state)
    print(f"modes: {state.n_modes}")
    print(f"purity: {purity(state):.6g}")
    print(f"physicality margin: {physicality_margin(state):.6g}")
    for d in diags:
        print(d)
    return EXIT_INPUT if any(d.level == "error" for d in diags) else EXIT_OK


def cmd_report_check(args) -> int:
    a = report.load_report(args.report_a)
    b = report.load_report(args.report_b)
    diffs = report.compare_reports(a, b, args.tolerance)
    for line in diffs:
        print(line)
    if diffs:
        print(f"{len(diffs)} difference(s) beyond tolerance {args.tolerance:g}")
        return EXIT_DIFF
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwit", description="Gaussian multipartite entanglement witnesses")
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="optimize witnesses for a covariance file")
    an.add_argument("--input", "-i", required=True, help="covariance file (.json or .csv)")
    an.add_argument("--targets", default="all",
                    help="comma list: all, convex, partitions, K=3, partition=1,2:3")
    an.add_argument("--seed", type=int, default=0)
    an.add_argument("--out", "-o", help="output file (default stdout)")
    an.add_argument("--format", choices=("json", "csv"), default="json")
    an.add_argument("--all-partitions", action="store_true",
                    help=f"allow the individual-partition sweep for N > {DEFAULT_PARTITION_SWEEP_MAX}")
    an.add_argument("--include-witness", action="store_true",
                    help="add the optimal matrix M of each target to the report")
    an.add_argument("--no-timestamp", action="store_true")
    an.add_argument("--ga-config", help="JSON file with GA settings")
    an.add_argument("--ga-population", type=int)
    an.add_argument("--ga-generations", type=int)
    an.add_argument("--ga-tournament", type=int)
    an.add_argument("--ga-crossover", type=float)
    an.add_argument("--ga-blend-alpha", type=float)
    an.add_argument("--ga-mutation-rate", type=float)
    an.add_argument("--ga-mutation-sigma", type=float)
    an.add_argument("--ga-elite", type=int)
    an.add_argument("--ga-restarts", type=int)
    an.set_defaults(func=cmd_analyze)

    sy = sub.add_parser("synth", help="write a synthetic covariance file")
    sy.add_argument("kind", choices=("vacuum", "squeezed", "tms", "spopo-like", "mixture"))
    sy.add_argument("--modes", type=int, default=None)
    sy.add_argument("--db", help="comma-separated squeezing levels in dB (negative squeezes x)")
    sy.add_argument("--r", type=float, default=0.5, help="two-mode squeezing parameter")
    sy.add_argument("--pair", default="1,2", help="modes of the two-mode squeezer")
    sy.add_argument("--seed", type=int, default=0, help="passive mixing seed (spopo-like)")
    sy.add_argument("--impurity", type=float, default=1.0)
    sy.add_argument("--delta-c", type=float, default=0.0, help="uniform element uncertainty")
    sy.add_argument("--mixture", default="", help='e.g. "1/2*tms:1,2;1/2*tms:2,3"')
    sy.add_argument("--label")
    sy.add_argument("--out", "-o")
    sy.add_argument("--format", choices=("json", "csv"))
    sy.set_defaults(func=cmd_synth)

    va = sub.add_parser("validate", help="check a covariance file")
    va.add_argument("--input", "-i", required=True)
    va.set_defaults(func=cmd_validate)

    rc = sub.add_parser("report-check", help="compare two analysis reports")
    rc.add_argument("report_a")
    rc.add_argument("report_b")
    rc.add_argument("--tolerance", type=float, default=1e-9)
    rc.set_defaults(func=cmd_report_check)
    return parser


_DEFAULT_MODES = {"vacuum": 1, "squeezed": None, "tms": 2, "spopo-like": 6, "mixture": 3}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means numerical failure
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "command", None) == "synth" and args.modes is None:
        args.modes = _DEFAULT_MODES[args.kind]
    try:
        return args.func(args)
    except (NumericalError, InadmissibleOperatorError, np.linalg.LinAlgError) as exc:
        print(f"gwit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GwitError, ValueError, OSError) as exc:
        print(f"gwit: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
