"""Deterministic quadrature for smooth integrands on boxes.

* 1-D: adaptive Simpson, vectorized over all active panels at once.  Each
  panel is accepted when its Simpson/half-Simpson discrepancy is below its
  share of the absolute tolerance; accepted values carry the Richardson
  correction.
* 2-D: tensor-product composite Gauss-Legendre on a uniform panel grid,
  doubling the panel count until two successive grids agree to ``tol``.

Integrands are vectorized: ``fn(x)`` receives an array of points and returns
an array whose last axis runs over the points (extra leading axes integrate
several quantities in one pass).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError


@dataclass(frozen=True)
class QuadResult:
    value: np.ndarray | float
    error: float
    evaluations: int


def integrate_1d(fn, a: float, b: float, tol: float = 1e-9, initial_panels: int = 64,
                 max_panels: int = 400_000) -> QuadResult:
    """Adaptive Simpson of ``fn`` over ``[a, b]`` to absolute tolerance ``tol``."""
    if not b > a:
        raise ValueError("integration interval must have b > a")
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    total = None
    err_total = 0.0
    evals = 0
    length = b - a
    while len(lo):
        h = hi - lo
        pts = np.stack([lo, lo + 0.25 * h, lo + 0.5 * h, lo + 0.75 * h, hi], axis=-1)
        vals = np.asarray(fn(pts.ravel()), dtype=float)
        evals += pts.size
        vals = vals.reshape(vals.shape[:-1] + pts.shape)
        f0, f1, f2, f3, f4 = (vals[..., j] for j in range(5))
        s1 = h / 6.0 * (f0 + 4.0 * f2 + f4)
        s2 = h / 12.0 * (f0 + 4.0 * f1 + 2.0 * f2 + 4.0 * f3 + f4)
        est = np.abs(s2 - s1) / 15.0
        if est.ndim > 1:
            est = est.reshape(-1, est.shape[-1]).max(axis=0)
        ok = est <= tol * h / length
        # panels that cannot be split further in floating point are accepted as-is
        ok |= h <= 64 * np.finfo(float).eps * max(abs(a), abs(b), 1.0)
        acc = s2[..., ok] + (s2[..., ok] - s1[..., ok]) / 15.0
        part = acc.sum(axis=-1)
        total = part if total is None else total + part
        err_total += float(est[ok].sum())
        lo, hi = lo[~ok], hi[~ok]
        if len(lo):
            mid = 0.5 * (lo + hi)
            lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
            order = np.argsort(lo, kind="stable")
            lo, hi = lo[order], hi[order]
            if len(lo) > max_panels:
                raise QuadratureError(
                    f"adaptive Simpson exceeded {max_panels} active panels on [{a}, {b}]"
                )
    return QuadResult(total, err_total, evals)


_GL_ORDER = 10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


def _tensor_rule(lo, hi, panels):
    nodes, weights = [], []
    for a, b in zip(lo, hi):
        e = np.linspace(a, b, panels + 1)
        half = 0.5 * (e[1:] - e[:-1])
        mid = 0.5 * (e[1:] + e[:-1])
        nodes.append((mid[:, None] + half[:, None] * _GL_X[None, :]).ravel())
        weights.append((half[:, None] * _GL_W[None, :]).ravel())
    return nodes, weights


def integrate_2d(fn, lo, hi, tol: float = 1e-7, initial_panels: int = 8,
                 max_panels: int = 512, row_block: int = 64) -> QuadResult:
    """Composite tensor Gauss-Legendre on ``[lo0, hi0] x [lo1, hi1]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    prev = None
    panels = initial_panels
    evals = 0
    while True:
        (x0, x1), (w0, w1) = _tensor_rule(lo, hi, panels)
        acc = None
        # evaluate in row blocks to bound memory
        step = row_block * _GL_ORDER
        for s in range(0, len(x0), step):
            xa = x0[s:s + step]
            pts = np.column_stack([np.repeat(xa, len(x1)), np.tile(x1, len(xa))])
            vals = np.asarray(fn(pts), dtype=float)
            evals += len(pts)
            vals = vals.reshape(vals.shape[:-1] + (len(xa), len(x1)))
            part = np.einsum("...ij,i,j->...", vals, w0[s:s + step], w1)
            acc = part if acc is None else acc + part
        if prev is not None:
            err = float(np.max(np.abs(acc - prev)))
            if err <= tol:
                return QuadResult(acc, err, evals)
        if panels * 2 > max_panels:
            raise QuadratureError(f"2-D Gauss-Legendre did not reach tol {tol} with {panels} panels per axis")
        prev = acc
        panels *= 2
