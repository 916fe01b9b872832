"""Dense linear algebra kernel: factorizations, projector pairs, extreme
singular values, seeded Gaussian ensembles.

All routines work on plain float64 ndarrays, validate their inputs at the
call boundary, and are pure functions of their arguments (the random ones
are pure functions of the generator state).  Projectors are never
materialized as p x p matrices; they are applied through a thin orthonormal
factor Q at O(p*d) cost per application.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, RankDeficient

# Relative threshold on |diag(R)| below which a design is declared rank
# deficient.  Gaussian ensembles are full rank almost surely; this guards
# pathological user input only.
RANK_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a 2-D float64 array with finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Validate and return `v` as a 1-D float64 array with finite entries."""
    out = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def gaussian_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. standard normal (rows, cols) matrix drawn from `rng`.

    Identical (rows, cols, generator state) yields an identical matrix.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return rng.standard_normal((rows, cols))


def _qr_full_rank(a: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with the relative rank check on |diag(R)|."""
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= RANK_RTOL * diag.max():
        raise RankDeficient(
            f"{name} is numerically rank deficient "
            f"(min |diag R| = {diag.min() if diag.size else 0.0:.3e})"
        )
    return q, r


def qr_least_squares(a, b) -> np.ndarray:
    """Least-squares solution of a full-column-rank overdetermined system.

    Returns argmin_x ||a x - b||_2, i.e. the pseudo-inverse applied to b.
    Raises RankDeficient when the triangular factor fails the relative
    rank threshold.
    """
    a = as_matrix(a, "design")
    b = as_vector(b, "rhs")
    n, c = a.shape
    if n < c:
        raise ValueError(f"need rows >= cols, got {n}x{c}")
    if b.shape[0] != n:
        raise ValueError(f"rhs length {b.shape[0]} != row count {n}")
    q, r = _qr_full_rank(a, "design")
    return np.linalg.solve(r, q.T @ b)


@dataclass(frozen=True)
class OrthoProjectorPair:
    """Orthogonal projector onto a column space and onto its complement.

    Both maps are applied through the thin orthonormal basis `q`; the
    projector matrices themselves are never formed.
    """

    q: np.ndarray  # (p, rank), orthonormal columns
    rank: int

    def range_part(self, v: np.ndarray) -> np.ndarray:
        """Project v onto the column space."""
        return self.q @ (self.q.T @ v)

    def complement_part(self, v: np.ndarray) -> np.ndarray:
        """Project v onto the orthogonal complement of the column space."""
        return v - self.range_part(v)


def projector_pair(a2) -> OrthoProjectorPair:
    """Projector pair for the column space of a tall full-rank matrix."""
    a2 = as_matrix(a2, "a2")
    p, d = a2.shape
    if p <= d:
        raise ValueError(f"need strictly more rows than columns, got {p}x{d}")
    q, _ = _qr_full_rank(a2, "a2")
    q = q.copy()
    q.setflags(write=False)
    return OrthoProjectorPair(q=q, rank=d)


def extreme_singular_values(a) -> tuple[float, float]:
    """(sigma_max, sigma_min) of a tall matrix.

    Backed by the LAPACK bidiagonalization SVD; NoConvergence is raised if
    the iterative scheme fails to converge.
    """
    a = as_matrix(a, "matrix")
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"need rows >= cols, got {a.shape[0]}x{a.shape[1]}")
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"singular value iteration did not converge: {exc}") from exc
    return float(s[0]), float(s[-1])


def min_norm_least_squares(a, b) -> np.ndarray:
    """Minimum-norm least-squares solution (underdetermined designs allowed)."""
    a = as_matrix(a, "design")
    b = as_vector(b, "rhs")
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol


def dump_matrix(a) -> str:
    """Debug text dump: row-major, space-separated, one row per line."""
    a = as_matrix(a, "matrix")
    return "\n".join(" ".join(f"{x:.17g}" for x in row) for row in a)
