"""Analysis reports (JSON/CSV) and report comparison."""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone

from gwit.model import ConvexK, CovarianceState, Individual, InputError, validate
from gwit.symplectic import physicality_margin, purity

SCHEMA = "gwit.report"
SCHEMA_VERSION = 1
VOLATILE_KEYS = frozenset({"generated_at"})

ROW_FIELDS = ("target", "k", "partition", "sigma", "detected", "expectation", "bound",
              "error", "argmin_partition", "seed", "generations", "restarts", "evaluations")


def _float(x: float):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _row(target, result, include_witness: bool) -> dict:
    v = result.best_verdict
    cfg = result.config
    row = {
        "target": str(target),
        "k": target.k,
        "partition": str(target.partition) if isinstance(target, Individual) else None,
        "sigma": _float(v.sigma),
        "detected": bool(v.sigma < 0),
        "expectation": _float(v.expectation),
        "bound": _float(v.bound),
        "error": _float(v.error),
        "argmin_partition": str(v.argmin_partition),
        "seed": cfg.rng_seed,
        "generations": cfg.generations,
        "restarts": cfg.restarts,
        "evaluations": int(result.evaluations),
    }
    if include_witness:
        row["witness"] = [[float(x) for x in r] for r in result.best_m.matrix]
    return row


def _sort_key(row):
    return float(row["sigma"])  # also parses "inf"/"-inf"


def build_report(state: CovarianceState, results: dict, config, source: str = "",
                 include_witness: bool = False, timestamp: bool = True) -> dict:
    """Assemble the report for ``results`` (``{target: GaResult}``).

    ConvexK rows are ordered by K; individual-partition rows by ascending
    sigma (ties in enumeration order), as in sorted inset plots.
    """
    convex = sorted((t for t in results if isinstance(t, ConvexK)), key=lambda t: t.k)
    individual = [t for t in results if isinstance(t, Individual)]
    part_rows = [_row(t, results[t], include_witness) for t in individual]
    order = sorted(range(len(part_rows)),
                   key=lambda i: (part_rows[i]["k"], _sort_key(part_rows[i]), i))
    part_rows = [part_rows[i] for i in order]
    counts: dict[str, int] = {}
    for row in part_rows:
        counts[str(row["k"])] = counts.get(str(row["k"]), 0) + 1
    report = {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
    }
    if timestamp:
        report["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    report.update({
        "input": {"source": source, "label": state.label, "n_modes": state.n_modes},
        "state": {
            "purity": _float(purity(state)),
            "physicality_margin": _float(physicality_margin(state)),
            "diagnostics": [str(d) for d in validate(state)],
        },
        "ga": config.hyperparameters(),
        "convex": [_row(t, results[t], include_witness) for t in convex],
        "partitions": part_rows,
        "partition_counts": counts,
    })
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in report["convex"] + report["partitions"]:
        writer.writerow(["" if row[f] is None else row[f] for f in ROW_FIELDS])
    return buf.getvalue()


def load_report(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from None
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise InputError(f"{path} is not a {SCHEMA} file")
    return data


def strip_volatile(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in VOLATILE_KEYS}


def _as_number(x):
    if isinstance(x, bool):
        return None
    if isinstance(x, (int, float)):
        return float(x)
    if x in ("inf", "-inf", "nan"):
        return float(x)
    return None


def compare_reports(a: dict, b: dict, tolerance: float) -> list[str]:
    """Differences between two reports beyond relative ``tolerance``.

    Raises :class:`InputError` when the two do not share a schema or shape.
    """
    if (a.get("schema"), a.get("schema_version")) != (b.get("schema"), b.get("schema_version")):
        raise InputError("reports have different schemas")
    diffs: list[str] = []

    def walk(x, y, path):
        if isinstance(x, dict) and isinstance(y, dict):
            keys_x = set(x) - VOLATILE_KEYS
            keys_y = set(y) - VOLATILE_KEYS
            if keys_x != keys_y:
                raise InputError(f"schema mismatch at {path or '/'}: "
                                 f"keys {sorted(keys_x ^ keys_y)} differ")
            for k in sorted(keys_x):
                walk(x[k], y[k], f"{path}/{k}")
            return
        if isinstance(x, list) and isinstance(y, list):
            if x and y and all(isinstance(r, dict) and "target" in r for r in x + y):
                # result rows: sort order depends on sigma, so match by target
                x, y = ({r["target"]: r for r in x}, {r["target"]: r for r in y})
                if set(x) != set(y):
                    raise InputError(f"schema mismatch at {path}: different targets")
                for t in sorted(x):
                    walk(x[t], y[t], f"{path}[{t}]")
                return
            if len(x) != len(y):
                raise InputError(f"schema mismatch at {path}: lengths {len(x)} != {len(y)}")
            for i, (u, v) in enumerate(zip(x, y)):
                walk(u, v, f"{path}[{i}]")
            return
        nx, ny = _as_number(x), _as_number(y)
        if nx is not None and ny is not None:
            if nx == ny or (math.isnan(nx) and math.isnan(ny)):
                return
            scale = max(abs(nx), abs(ny))
            rel = abs(nx - ny) / scale if math.isfinite(scale) and scale > 0 else math.inf
            if rel > tolerance:
                diffs.append(f"{path}: {x!r} -> {y!r} (rel {rel:.3g})")
            return
        if type(x) is not type(y) and not (x is None or y is None):
            raise InputError(f"schema mismatch at {path}: {type(x).__name__} vs {type(y).__name__}")
        if x != y:
            diffs.append(f"{path}: {x!r} -> {y!r}")

    walk(a, b, "")
    return diffs
