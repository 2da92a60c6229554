"""Dense linear algebra and similarity kernels shared by the other modules.

Matrices are plain 2-D float64 numpy arrays, row-major. ``matmul`` is the
reference product with a fixed summation order (sequential over the inner
dimension) so repeated runs are bit-identical; faster numpy paths elsewhere
in the package are required by tests to agree with it to 1e-9 relative.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalDegeneracyError

_ZERO_NORM_FLOOR = 1e-300


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and verify all entries are finite."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalDegeneracyError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with deterministic, sequential accumulation.

    The inner sum for every output entry is accumulated in ascending index
    order, so the result is bit-reproducible across runs and platforms with
    IEEE float64 arithmetic.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: a is {a.shape[0]}x{a.shape[1]}, "
            f"b is {b.shape[0]}x{b.shape[1]}"
        )
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k]
    return out


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    uu = float(np.dot(u, u))
    vv = float(np.dot(v, v))
    # a single square root of the product loses less precision than the
    # product of two roots; exact for small-integer vectors
    denom = float(np.sqrt(uu * vv))
    if denom < _ZERO_NORM_FLOOR:
        raise NumericalDegeneracyError("cosine similarity of a zero vector")
    return float(np.clip(np.dot(u, v) / denom, -1.0, 1.0))


def pairwise_cosine(a, b) -> np.ndarray:
    """N x M matrix of cosine similarities between rows of a and rows of b."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"dimension mismatch on d: {a.shape[1]} vs {b.shape[1]}"
        )
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    for name, norms in (("a", na), ("b", nb)):
        bad = np.nonzero(norms < _ZERO_NORM_FLOOR)[0]
        if bad.size:
            raise NumericalDegeneracyError(
                f"zero row {int(bad[0])} in {name}"
            )
    sims = (a / na[:, None]) @ (b / nb[:, None]).T
    return np.clip(sims, -1.0, 1.0)
