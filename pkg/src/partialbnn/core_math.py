"""Dense linear algebra and seeded random number helpers.

Everything in the package works on float64 ``numpy`` arrays. Random streams
come from ``numpy.random.Generator`` (PCG64), so any function that takes an
``rng`` is a pure function of its inputs and the seed that built the rng.
"""

from __future__ import annotations

import numpy as np

SeededRng = np.random.Generator


class ShapeError(ValueError):
    """Raised when array shapes are incompatible."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised by :func:`cholesky` when a pivot is not strictly positive."""


def seeded_rng(seed: int) -> SeededRng:
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(a, name: str = "array") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matmul produced non-finite entries")
    return out


def sample_std_normal(rng: SeededRng, rows: int, cols: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    return rng.standard_normal((rows, cols))


def cholesky(a) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == a``.

    No jitter is added here; callers regularise their own matrices.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"cholesky needs a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12):
        raise ValueError("cholesky needs a symmetric matrix")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
