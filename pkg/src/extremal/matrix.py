"""Symmetric-matrix primitives.

Every covariance-like quantity in the package is a plain ``float64`` numpy
array that has been passed through :func:`sym`.  The helpers here provide
the PSD tests, Loewner comparisons and factorizations the solver and the
checks are built on, plus the rank-deficient constraint reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import linalg as sla

from .errors import DimensionError, InputError, PreconditionError, SingularMatrixError

if TYPE_CHECKING:
    from .instance import ExtremalInstance

LOG_2PIE = math.log(2.0 * math.pi * math.e)

# eigenvalues below RANK_RTOL * largest eigenvalue count as zero
RANK_RTOL = 1e-10
JSON_SYMMETRY_TOL = 1e-9


def sym(m: Any) -> np.ndarray:
    """Return ``m`` as a symmetric float array, symmetrizing ``(M + M^T)/2``.

    Scalars and 1x1 inputs are promoted to ``(1, 1)`` arrays.
    """
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def eigvalsh(m: Any) -> np.ndarray:
    return np.linalg.eigvalsh(sym(m))


def min_eig(m: Any) -> float:
    return float(eigvalsh(m)[0])


def is_psd(m: Any, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of ``m`` is at least ``-tol``."""
    return min_eig(m) >= -tol


def is_pd(m: Any, rtol: float = 1e-12) -> bool:
    a = sym(m)
    w = np.linalg.eigvalsh(a)
    return w[0] > rtol * max(np.trace(a) / a.shape[0], 0.0) and w[0] > 0


def loewner_leq(a: Any, b: Any, tol: float = 0.0) -> bool:
    """``a <= b`` in the positive semidefinite order, within ``tol``."""
    a, b = sym(a), sym(b)
    _same_dim(a, b)
    return is_psd(b - a, tol)


def loewner_margin(a: Any, b: Any) -> float:
    """Smallest eigenvalue of ``b - a``; nonnegative iff ``a <= b``."""
    a, b = sym(a), sym(b)
    _same_dim(a, b)
    return min_eig(b - a)


def cholesky(m: Any) -> np.ndarray:
    a = sym(m)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"matrix is not positive definite (min eig {np.linalg.eigvalsh(a)[0]:.3e})"
        ) from exc


def logdet(m: Any) -> float:
    """Natural log-determinant of a positive definite matrix via Cholesky."""
    c = cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def inv_pd(m: Any) -> np.ndarray:
    """Inverse of a positive definite matrix, symmetrized."""
    c = cholesky(m)
    n = c.shape[0]
    ci = sla.solve_triangular(c, np.eye(n), lower=True)
    return sym(ci.T @ ci)


def sqrtm_psd(m: Any) -> np.ndarray:
    """Symmetric square root, negative eigenvalues clipped to zero."""
    w, v = np.linalg.eigh(sym(m))
    return sym((v * np.sqrt(np.clip(w, 0.0, None))) @ v.T)


def inv_sqrtm_pd(m: Any) -> np.ndarray:
    w, v = np.linalg.eigh(sym(m))
    if w[0] <= 0:
        raise SingularMatrixError(f"matrix is not positive definite (min eig {w[0]:.3e})")
    return sym((v / np.sqrt(w)) @ v.T)


def clip_psd(m: Any, floor: float = 0.0) -> np.ndarray:
    """Replace eigenvalues below ``floor`` by ``floor``."""
    w, v = np.linalg.eigh(sym(m))
    return sym((v * np.clip(w, floor, None)) @ v.T)


def numerical_rank(m: Any, rtol: float = RANK_RTOL) -> int:
    w = eigvalsh(m)
    top = w[-1]
    if top <= 0:
        return 0
    return int(np.sum(w > rtol * top))


def to_json(m: Any) -> dict:
    a = sym(m)
    return {"dim": int(a.shape[0]), "rows": a.tolist()}


def from_json(obj: Any, tol: float = JSON_SYMMETRY_TOL) -> np.ndarray:
    """Parse ``{"dim": n, "rows": [[...]]}`` (or a bare number / nested list).

    Unlike :func:`sym`, ingestion is strict: an asymmetry larger than ``tol``
    is an input error rather than something to average away.
    """
    rows = obj
    dim = None
    if isinstance(obj, dict):
        if "rows" not in obj:
            raise InputError("matrix object needs a 'rows' field")
        rows = obj["rows"]
        dim = obj.get("dim")
    try:
        a = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"matrix rows are not numeric: {exc}") from exc
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix rows must form a square array, got shape {a.shape}")
    if dim is not None and int(dim) != a.shape[0]:
        raise DimensionError(f"'dim' is {dim} but rows give {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > tol:
        raise InputError(f"matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})")
    return sym(a)


@dataclass(frozen=True)
class RankReduction:
    """Equivalent full-rank problem for a rank-deficient constraint ``S``.

    ``basis`` is the orthogonal eigenbasis ``Q_S`` with the ``reduced_dim``
    positive directions first.  ``decorrelators[i]`` block-diagonalizes
    ``Q_S^T K_Zi Q_S``, and ``entropy_offsets[i]`` is the (nats) entropy of the
    noise component that lives in the null space of ``S``.
    """

    reduced_dim: int
    basis: np.ndarray
    decorrelators: tuple[np.ndarray, np.ndarray]
    entropy_offsets: tuple[float, float]
    reduced: "ExtremalInstance"

    def lift(self, kx_reduced: Any) -> np.ndarray:
        """Map an ``r x r`` covariance back to the original coordinates."""
        n = self.basis.shape[0]
        r = self.reduced_dim
        full = np.zeros((n, n))
        if r:
            full[:r, :r] = sym(kx_reduced)
        return sym(self.basis @ full @ self.basis.T)

    def restrict(self, kx: Any) -> np.ndarray:
        """Top-left ``r x r`` block of ``Q_S^T K Q_S``."""
        r = self.reduced_dim
        return sym((self.basis.T @ sym(kx) @ self.basis)[:r, :r])

    def offset(self, mu: float) -> float:
        return self.entropy_offsets[0] - mu * self.entropy_offsets[1]


def reduce_rank_deficient(inst: "ExtremalInstance") -> RankReduction:
    """Reduce a problem with singular ``S`` to one with a diagonal PD bound."""
    from .instance import ExtremalInstance

    n = inst.dim
    r = numerical_rank(inst.s)
    if r == n:
        raise PreconditionError("S has full rank; nothing to reduce")
    w, q = np.linalg.eigh(inst.s)
    order = np.argsort(w)[::-1]
    w, q = w[order], q[:, order]
    lam = np.clip(w[:r], 0.0, None)

    decorrelators = []
    noises = []
    offsets = []
    for kz in (inst.kz1, inst.kz2):
        rot = q.T @ kz @ q
        a_blk, b_blk, c_blk = rot[:r, :r], rot[r:, :r], rot[r:, r:]
        try:
            c_inv = inv_pd(c_blk)
        except SingularMatrixError as exc:
            raise SingularMatrixError("noise block on the null space of S is singular") from exc
        d = np.eye(n)
        d[:r, r:] = -b_blk.T @ c_inv
        decorrelators.append(d)
        noises.append(sym(a_blk - b_blk.T @ c_inv @ b_blk) if r else np.zeros((0, 0)))
        offsets.append(0.5 * ((n - r) * LOG_2PIE + logdet(c_blk)))

    reduced = None
    if r:
        reduced = ExtremalInstance(noises[0], noises[1], np.diag(lam), inst.mu)
    return RankReduction(
        reduced_dim=r,
        basis=q,
        decorrelators=(decorrelators[0], decorrelators[1]),
        entropy_offsets=(offsets[0], offsets[1]),
        reduced=reduced,
    )
