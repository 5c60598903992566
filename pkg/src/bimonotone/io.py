"""File formats: matrix/observation CSV, binary PGM, JSON manifests.

All writers are atomic (write to a temporary file in the target
directory, then rename), and all numeric text uses 17 significant
digits so that write/read round trips are bit exact.

Matrix CSV: first line "rows,cols", then one line per row with comma
-separated values in row-major order; an empty field marks a missing
cell.  Observation CSV: one line per observation "i,j,z" or "i,j,z,w"
with 1-based integer cell indices.  PGM: binary (P5), maxval 255, with
an affine value-to-gray mapping chosen by the caller.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "format_value",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_observations_csv",
    "read_observations_csv",
    "write_pgm",
    "write_json",
    "config_hash",
    "write_manifest",
    "InputFormatError",
]


class InputFormatError(ValueError):
    """Malformed input file; message carries file/line/column context."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def format_value(x: float) -> str:
    return f"{float(x):.17g}"


def write_matrix_csv(path, matrix, observed=None) -> None:
    """Write a matrix; cells where ``observed`` is False become empty fields."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-d array")
    r, s = matrix.shape
    if observed is None:
        observed = np.ones(matrix.shape, dtype=bool)
    else:
        observed = np.asarray(observed, dtype=bool)
        if observed.shape != matrix.shape:
            raise ValueError("observed mask must match matrix shape")
    lines = [f"{r},{s}"]
    for i in range(r):
        lines.append(",".join(
            format_value(matrix[i, j]) if observed[i, j] else "" for j in range(s)
        ))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_csv(path):
    """Read a matrix CSV; returns (matrix, observed) with zeros where missing."""
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as handle:
        raw = handle.read()
    lines = raw.splitlines()
    if not lines:
        raise InputFormatError(f"{path}: empty file")
    head = lines[0].split(",")
    if len(head) != 2:
        raise InputFormatError(
            f"{path}:1: expected header 'rows,cols', got {lines[0]!r}"
        )
    try:
        r, s = int(head[0]), int(head[1])
    except ValueError:
        raise InputFormatError(
            f"{path}:1: expected integer dimensions, got {lines[0]!r}"
        ) from None
    if r < 1 or s < 1:
        raise InputFormatError(f"{path}:1: dimensions must be positive")
    body = [ln for ln in lines[1:] if ln.strip() != ""]
    if len(body) != r:
        raise InputFormatError(
            f"{path}: expected {r} data rows, found {len(body)}"
        )
    matrix = np.zeros((r, s))
    observed = np.zeros((r, s), dtype=bool)
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != s:
            raise InputFormatError(
                f"{path}:{i + 2}: expected {s} fields, found {len(fields)}"
            )
        for j, field in enumerate(fields):
            field = field.strip()
            if field == "":
                continue
            try:
                matrix[i, j] = float(field)
            except ValueError:
                raise InputFormatError(
                    f"{path}:{i + 2}: column {j + 1}: not a number: {field!r}"
                ) from None
            observed[i, j] = True
    if not np.isfinite(matrix[observed]).all():
        raise InputFormatError(f"{path}: non-finite value in matrix")
    return matrix, observed


def write_observations_csv(path, rows, cols, values, weights=None) -> None:
    """Write observation triples (1-based indices) or quadruples with weights."""
    rows = np.asarray(rows, dtype=np.intp).ravel()
    cols = np.asarray(cols, dtype=np.intp).ravel()
    values = np.asarray(values, dtype=float).ravel()
    lines = []
    if weights is None:
        for i, j, z in zip(rows, cols, values):
            lines.append(f"{i + 1},{j + 1},{format_value(z)}")
    else:
        weights = np.asarray(weights, dtype=float).ravel()
        for i, j, z, w in zip(rows, cols, values, weights):
            lines.append(f"{i + 1},{j + 1},{format_value(z)},{format_value(w)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_observations_csv(path):
    """Read observation lines "i,j,z[,w]"; returns 0-based index arrays.

    Returns (rows, cols, values, weights); weights is None unless some
    line carries a fourth field (then every line must).
    """
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    rows, cols, values, weights = [], [], [], []
    n_fields = None
    for k, line in enumerate(lines):
        if line.strip() == "":
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) not in (3, 4):
            raise InputFormatError(
                f"{path}:{k + 1}: expected 'i,j,z' or 'i,j,z,w', found {len(fields)} fields"
            )
        if n_fields is None:
            n_fields = len(fields)
        elif len(fields) != n_fields:
            raise InputFormatError(
                f"{path}:{k + 1}: inconsistent field count (expected {n_fields})"
            )
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise InputFormatError(
                f"{path}:{k + 1}: cell indices must be integers: {line!r}"
            ) from None
        if i < 1 or j < 1:
            raise InputFormatError(f"{path}:{k + 1}: cell indices are 1-based")
        try:
            z = float(fields[2])
        except ValueError:
            raise InputFormatError(
                f"{path}:{k + 1}: column 3: not a number: {fields[2]!r}"
            ) from None
        if len(fields) == 4:
            try:
                w = float(fields[3])
            except ValueError:
                raise InputFormatError(
                    f"{path}:{k + 1}: column 4: not a number: {fields[3]!r}"
                ) from None
            if w <= 0 or not np.isfinite(w):
                raise InputFormatError(f"{path}:{k + 1}: weight must be positive")
            weights.append(w)
        if not np.isfinite(z):
            raise InputFormatError(f"{path}:{k + 1}: non-finite value")
        rows.append(i - 1)
        cols.append(j - 1)
        values.append(z)
    if not rows:
        raise InputFormatError(f"{path}: no observations")
    return (
        np.array(rows, dtype=np.intp),
        np.array(cols, dtype=np.intp),
        np.array(values),
        np.array(weights) if weights else None,
    )


def write_pgm(path, matrix, lo: float, hi: float) -> None:
    """Render a matrix to binary PGM, mapping [lo, hi] to gray 0..255."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-d array")
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ValueError("need finite lo < hi for the gray mapping")
    r, s = matrix.shape
    scaled = np.clip((matrix - lo) / (hi - lo), 0.0, 1.0)
    gray = np.rint(255.0 * scaled).astype(np.uint8)
    header = f"P5\n{s} {r}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + gray.tobytes())


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def config_hash(config: dict) -> str:
    """Stable sha256 of a JSON-serializable configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(directory, command: str, config: dict, seed=None, extra=None) -> dict:
    """Write manifest.json into ``directory``; returns the manifest dict.

    The manifest echoes the resolved configuration, its hash, the seed
    and the library version; rerunning a command from a manifest's
    configuration reproduces all outputs byte for byte.
    """
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    write_json(os.path.join(os.fspath(directory), "manifest.json"), manifest)
    return manifest
