"""Covariance file formats.

JSON::

    {"label": str, "n_modes": N, "units": "vacuum_1" | "vacuum_half",
     "matrix": [[...]], "uncertainty": [[...]]}

CSV: ``#``-prefixed header lines (``# label: ...``, ``# n_modes: N``,
``# units: ...``), then the 2N x 2N matrix, a blank line, and the 2N x 2N
uncertainty block.  Rows are ordered x_1..x_N, p_1..p_N.  Numbers are
written with 17 significant digits so that a write/read cycle is exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from gwit.model import CovarianceState, InputError, normalize_state, normalize_units

PathLike = Union[str, Path]


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _json_matrix(a: np.ndarray, indent: str = "    ") -> str:
    rows = [indent + "[" + ", ".join(_num(v) for v in row) + "]" for row in a]
    return "[\n" + ",\n".join(rows) + "\n  ]"


def state_to_json(state: CovarianceState) -> str:
    state = normalize_state(state)
    return (
        "{\n"
        f'  "label": {json.dumps(state.label)},\n'
        f'  "n_modes": {state.n_modes},\n'
        '  "units": "vacuum_half",\n'
        f'  "matrix": {_json_matrix(state.matrix)},\n'
        f'  "uncertainty": {_json_matrix(state.uncertainty)}\n'
        "}\n"
    )


def state_from_json(text: str) -> CovarianceState:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("covariance JSON must be an object")
    for key in ("n_modes", "units", "matrix"):
        if key not in data:
            raise InputError(f"covariance JSON is missing {key!r}")
    return _build(data.get("label", ""), data["n_modes"], data["units"],
                  data["matrix"], data.get("uncertainty"))


def _build(label, n_modes, units, matrix, uncertainty) -> CovarianceState:
    try:
        n = int(n_modes)
        c = np.array(matrix, dtype=float)
        dc = None if uncertainty is None else np.array(uncertainty, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed covariance data: {exc}") from None
    if c.shape != (2 * n, 2 * n):
        raise InputError(f"n_modes={n} needs a {2 * n}x{2 * n} matrix, got {c.shape}")
    return normalize_units(c, dc, str(units), str(label))


def state_to_csv(state: CovarianceState) -> str:
    state = normalize_state(state)
    lines = [
        f"# label: {state.label}",
        f"# n_modes: {state.n_modes}",
        "# units: vacuum_half",
    ]
    lines += [",".join(_num(v) for v in row) for row in state.matrix]
    lines.append("")
    lines += [",".join(_num(v) for v in row) for row in state.uncertainty]
    return "\n".join(lines) + "\n"


def state_from_csv(text: str) -> CovarianceState:
    header = {}
    blocks: list[list[list[float]]] = [[]]
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                header[key.strip()] = value.strip()
            continue
        if not stripped:
            if blocks[-1]:
                blocks.append([])
            continue
        try:
            blocks[-1].append([float(tok) for tok in stripped.split(",")])
        except ValueError:
            raise InputError(f"line {lineno}: non-numeric CSV entry") from None
    blocks = [b for b in blocks if b]
    if len(blocks) not in (1, 2):
        raise InputError(f"CSV must hold one or two matrix blocks, found {len(blocks)}")
    units = header.get("units")
    if units is None:
        raise InputError("CSV header must declare '# units: vacuum_1|vacuum_half'")
    dim = len(blocks[0])
    n = int(header.get("n_modes", dim // 2))
    unc = blocks[1] if len(blocks) == 2 else None
    return _build(header.get("label", ""), n, units, blocks[0], unc)


def _format_for(path: Path, fmt: str | None) -> str:
    if fmt:
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "json"


def load_state(path: PathLike, fmt: str | None = None) -> CovarianceState:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if _format_for(path, fmt) == "csv":
        return state_from_csv(text)
    return state_from_json(text)


def save_state(state: CovarianceState, path: PathLike, fmt: str | None = None) -> None:
    path = Path(path)
    text = state_to_csv(state) if _format_for(path, fmt) == "csv" else state_to_json(state)
    path.write_text(text)
