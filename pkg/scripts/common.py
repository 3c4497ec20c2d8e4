"""
Common Utilities for Matrix Special Functions

This module provides shared functionality for the hypermat scripts.
It includes utilities for:
- The exception family raised across the library
- Relative residuals used as the pass/fail metric
- Encoding and decoding matrices in the shared JSON format
- Reading and writing JSON documents
- Reading the thread-count environment setting
"""

import json
import math
import os
import pathlib
import sys

import numpy as np


class HypermatError(Exception):
    """Base class for all library errors."""
    pass


class DomainError(HypermatError):
    """Raised when an argument lies outside the domain of a function."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfluenceError(HypermatError):
    """Raised when a clustered eigenvalue block cannot be resolved."""
    pass


class PreconditionError(HypermatError):
    """Raised when commutation, stability or margin requirements fail."""
    pass


class NumericalFailureError(HypermatError):
    """Raised when a decomposition does not converge or a postcondition fails."""
    pass


class GenerationError(HypermatError):
    """Raised when a commuting family cannot be generated."""
    pass


class AccuracyError(HypermatError):
    """Raised when quadrature does not reach the requested tolerance."""

    def __init__(self, message, residual=None, history=()):
        super().__init__(message)
        self.residual = residual
        self.history = tuple(history)


class InputFormatError(HypermatError):
    """Raised when a JSON document does not have the expected shape."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


LIBRARY_ERRORS = (
    DomainError,
    ConfluenceError,
    PreconditionError,
    NumericalFailureError,
    GenerationError,
    AccuracyError,
)


def relative_residual(x, y):
    """Relative two-norm distance ‖X−Y‖₂ / (1 + max(‖X‖₂, ‖Y‖₂))."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.ndim < 2:
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
    scale = 1.0 + max(np.linalg.norm(x, 2), np.linalg.norm(y, 2))
    return float(np.linalg.norm(x - y, 2) / scale)


def commutator_norm(a, b):
    """Two-norm of AB − BA."""
    return float(np.linalg.norm(a @ b - b @ a, 2))


def encode_complex(value):
    """Encode a complex number as a [re, im] pair."""
    value = complex(value)
    return [float(value.real), float(value.imag)]


def decode_complex(obj, path="$"):
    """Decode a number or a [re, im] pair into a finite complex.

    Raises:
        InputFormatError: If the value is not a number or pair, or is not finite.
    """
    if isinstance(obj, bool):
        raise InputFormatError("expected a number or [re, im] pair", path)
    if isinstance(obj, (int, float)):
        value = complex(obj)
    elif isinstance(obj, (list, tuple)) and len(obj) == 2:
        parts = []
        for i, part in enumerate(obj):
            if isinstance(part, bool) or not isinstance(part, (int, float)):
                raise InputFormatError("expected a real number", f"{path}[{i}]")
            parts.append(float(part))
        value = complex(parts[0], parts[1])
    else:
        raise InputFormatError("expected a number or [re, im] pair", path)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise InputFormatError("non-finite value", path)
    return value


def encode_matrix(matrix):
    """Encode a square complex matrix as {"dim", "entries"} (row-major [re, im] pairs)."""
    matrix = np.asarray(matrix, dtype=complex)
    return {
        "dim": int(matrix.shape[0]),
        "entries": [[encode_complex(v) for v in row] for row in matrix],
    }


def decode_matrix(obj, path="$", dim=None):
    """Decode the shared matrix JSON encoding.

    A bare number or [re, im] pair is the scalar shorthand c·I, sized by
    ``dim`` (1 when not given).

    Args:
        obj: Parsed JSON value
        path: JSON path of ``obj`` used in error messages
        dim: Expected dimension, or None to accept any

    Returns:
        numpy.ndarray: complex128 array of shape (dim, dim)

    Raises:
        InputFormatError: On ragged rows, wrong dimension or non-finite entries.
    """
    if not isinstance(obj, dict):
        value = decode_complex(obj, path)
        return value * np.eye(dim or 1, dtype=complex)

    if "entries" not in obj:
        raise InputFormatError("missing 'entries'", path)
    rows = obj["entries"]
    if not isinstance(rows, list) or not rows:
        raise InputFormatError("expected a non-empty list of rows", f"{path}.entries")
    size = len(rows)
    declared = obj.get("dim", size)
    if isinstance(declared, bool) or not isinstance(declared, int) or declared != size:
        raise InputFormatError(f"'dim' does not match {size} rows", f"{path}.dim")
    if dim is not None and size != dim:
        raise InputFormatError(f"expected dimension {dim}, got {size}", path)

    matrix = np.empty((size, size), dtype=complex)
    for i, row in enumerate(rows):
        row_path = f"{path}.entries[{i}]"
        if not isinstance(row, list) or len(row) != size:
            raise InputFormatError(f"ragged row, expected {size} entries", row_path)
        for j, entry in enumerate(row):
            matrix[i, j] = decode_complex(entry, f"{row_path}[{j}]")
    return matrix


def load_json(path=None):
    """Load a JSON document from a file, or from stdin when no path is given.

    Raises:
        OSError: If the file cannot be read.
        InputFormatError: If the text is not valid JSON.
    """
    if path is None or path == "-":
        text = sys.stdin.read()
    else:
        text = pathlib.Path(path).expanduser().read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"invalid JSON ({e.msg} at line {e.lineno})", "$")


def write_output(text, path=None):
    """Write text to a file, or to stdout when no path is given."""
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        pathlib.Path(path).expanduser().write_text(text if text.endswith("\n") else text + "\n")


def get_thread_count():
    """Worker count from HYPERMAT_THREADS (0 or unset means one per CPU).

    Raises:
        InputFormatError: If the variable is not a non-negative integer.
    """
    raw = os.getenv("HYPERMAT_THREADS", "0").strip() or "0"
    try:
        threads = int(raw)
    except ValueError:
        raise InputFormatError(f"HYPERMAT_THREADS must be an integer, got {raw!r}", "$env.HYPERMAT_THREADS")
    if threads < 0:
        raise InputFormatError("HYPERMAT_THREADS must be >= 0", "$env.HYPERMAT_THREADS")
    return threads or (os.cpu_count() or 1)
