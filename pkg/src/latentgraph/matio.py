"""Headerless CSV ingestion and export for matrices and signals.

The matrix format is plain comma-separated numeric rows with LF line
endings and no header. Values are written with 17 significant digits, which
round-trips IEEE doubles exactly, and the byte output is deterministic for
a given matrix.
"""

from __future__ import annotations

import os

import numpy as np

from .graphs import symmetrize


class MatrixParseError(ValueError):
    """Malformed matrix file; the message carries the offending location."""


def load_matrix(path, expected_shape=None, kind: str = "generic") -> np.ndarray:
    """Parse a headerless numeric CSV into a dense float matrix.

    ``kind`` is a hint: "gso" and "covariance" inputs must be square and are
    symmetrized under the same tolerance rule as constructed operators
    (rejected when genuinely asymmetric). Ragged rows, non-numeric tokens
    and non-finite values raise MatrixParseError with their row/column.
    """
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for row_idx, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            tokens = line.split(",")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise MatrixParseError(
                    f"{path}: row {row_idx} has {len(tokens)} fields, expected {width}"
                )
            values = []
            for col_idx, tok in enumerate(tokens):
                try:
                    val = float(tok)
                except ValueError:
                    raise MatrixParseError(
                        f"{path}: non-numeric token {tok!r} at row {row_idx}, column {col_idx}"
                    ) from None
                if not np.isfinite(val):
                    raise MatrixParseError(
                        f"{path}: non-finite value at row {row_idx}, column {col_idx}"
                    )
                values.append(val)
            rows.append(values)
    if not rows:
        raise MatrixParseError(f"{path}: empty matrix file")
    matrix = np.asarray(rows, dtype=float)
    if expected_shape is not None and matrix.shape != tuple(expected_shape):
        raise MatrixParseError(
            f"{path}: shape {matrix.shape} does not match expected {tuple(expected_shape)}"
        )
    if kind in ("gso", "covariance"):
        if matrix.shape[0] != matrix.shape[1]:
            raise MatrixParseError(f"{path}: {kind} matrix must be square, got {matrix.shape}")
        matrix = symmetrize(matrix)
    return matrix


def save_matrix(matrix: np.ndarray, path) -> None:
    """Write a matrix as headerless CSV with 17-significant-digit values."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = []
    for row in m:
        lines.append(",".join(f"{v:.17g}" for v in row))
    payload = "\n".join(lines) + "\n"
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(payload)


def load_vector(path) -> np.ndarray:
    """Single-column (or single-row) CSV as a 1-D vector."""
    m = load_matrix(path)
    if 1 not in m.shape:
        raise MatrixParseError(f"{path}: expected a single row or column, got {m.shape}")
    return m.ravel()


def altitude_graph(altitudes, cutoff: float):
    """Unit-weight graph connecting stations whose altitude gap is below cutoff."""
    from .graphs import Gso, GsoKind, InvalidInputError

    alt = np.asarray(altitudes, dtype=float).ravel()
    if alt.size < 2:
        raise InvalidInputError("need at least two stations")
    if cutoff <= 0.0:
        raise InvalidInputError("cutoff must be positive")
    diff = np.abs(alt[:, None] - alt[None, :])
    adj = (diff < cutoff).astype(float)
    np.fill_diagonal(adj, 0.0)
    return Gso(adj, GsoKind.ADJACENCY)
