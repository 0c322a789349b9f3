"""JSON and CSV serialization for maps, value functions and run records."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from somxfer.agent import TaskValueFunction
from somxfer.gsom import SomGrid

FORMAT_VERSION = 1


class FormatError(ValueError):
    """A persisted document is malformed or has an unsupported version."""


def _read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be an object")
    return doc


def _write_json(path: str | Path, doc: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # json writes floats via repr, which round-trips binary64 exactly
    path.write_text(json.dumps(doc, allow_nan=False) + "\n", encoding="utf-8")


def _field(doc: dict, name: str, path):
    if name not in doc:
        raise FormatError(f"{path}: missing field {name!r}")
    return doc[name]


def _check_version(doc: dict, path) -> None:
    version = _field(doc, "format_version", path)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {version!r} (expected {FORMAT_VERSION})")


def _float_array(value, name: str, path, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: field {name!r} is not numeric") from exc
    if arr.ndim != ndim:
        raise FormatError(f"{path}: field {name!r} must be {ndim}-dimensional")
    return arr


def som_to_dict(grid: SomGrid) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "side": grid.side,
        "dim": grid.dim,
        "growth_threshold": grid.growth_threshold,
        "total_error_prev": grid.total_error_prev,
        "nodes": grid.nodes.tolist(),
        "error": grid.error.tolist(),
    }


def som_from_dict(doc: dict, path="<document>") -> SomGrid:
    _check_version(doc, path)
    side = _field(doc, "side", path)
    dim = _field(doc, "dim", path)
    if not isinstance(side, int) or side < 1:
        raise FormatError(f"{path}: field 'side' must be a positive integer")
    if not isinstance(dim, int) or dim < 1:
        raise FormatError(f"{path}: field 'dim' must be a positive integer")
    nodes = _float_array(_field(doc, "nodes", path), "nodes", path, 2)
    if nodes.shape != (side * side, dim):
        raise FormatError(f"{path}: field 'nodes' has shape {nodes.shape}, expected {(side * side, dim)}")
    error = _float_array(_field(doc, "error", path), "error", path, 1)
    if error.shape != (side * side,):
        raise FormatError(f"{path}: field 'error' has length {error.shape[0]}, expected {side * side}")
    gt = _field(doc, "growth_threshold", path)
    if not isinstance(gt, (int, float)) or not gt > 0:
        raise FormatError(f"{path}: field 'growth_threshold' must be a positive number")
    prev = doc.get("total_error_prev", 0.0)
    try:
        return SomGrid(nodes, error, float(gt), float(prev))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_som(grid: SomGrid, path: str | Path) -> None:
    _write_json(path, som_to_dict(grid))


def load_som(path: str | Path) -> SomGrid:
    return som_from_dict(_read_json(path), path)


def save_value_function(vf: TaskValueFunction, path: str | Path) -> None:
    _write_json(path, {
        "format_version": FORMAT_VERSION,
        "n_actions": vf.n_actions,
        "n_features": vf.n_features,
        "weights": vf.weights.tolist(),
    })


def load_value_function(path: str | Path) -> TaskValueFunction:
    doc = _read_json(path)
    _check_version(doc, path)
    n_actions = _field(doc, "n_actions", path)
    n_features = _field(doc, "n_features", path)
    w = _float_array(_field(doc, "weights", path), "weights", path, 1)
    if w.shape[0] != n_actions * n_features:
        raise FormatError(f"{path}: field 'weights' has length {w.shape[0]}, "
                          f"expected {n_actions * n_features}")
    return TaskValueFunction(w, int(n_actions), int(n_features))


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path: str | Path, header, rows) -> Path:
    """Write a UTF-8, LF-terminated CSV with a header row. Floats keep full precision."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV file; values stay strings."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
