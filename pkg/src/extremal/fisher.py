"""Scores and Fisher information matrices of Gaussian mixtures, with checks of
Cramer-Rao, the matrix Fisher information inequality, the Stein identity,
score behavior under convolution and the de Bruijn identity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import matrix as mx
from .config import EstimatorConfig
from .entropy import mixture_entropy
from .errors import PreconditionError
from .mixture import GaussianMixture
from .montecarlo import stratified_mean
from .quadrature import integrate_1d, integrate_2d
from .report import INCONCLUSIVE, PASS, CheckReport, status_of


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    j: np.ndarray
    method: str
    stderr: np.ndarray | None = None

    @property
    def stderr_norm(self) -> float:
        """Frobenius norm of the entrywise error; bounds the error of every eigenvalue."""
        return 0.0 if self.stderr is None else float(np.linalg.norm(self.stderr))

    def to_json(self) -> dict:
        out = {"j": mx.to_json(self.j), "method": self.method}
        if self.stderr is not None:
            out["stderr"] = self.stderr.tolist()
        return out


def score(m: GaussianMixture, x: Any) -> np.ndarray:
    """``grad log f(x)``; raises when the density underflows at ``x``."""
    return m.score(x)


def _pairs(n):
    return [(a, b) for a in range(n) for b in range(a, n)]


def _unpack(vec, n):
    out = np.zeros((n, n))
    for v, (a, b) in zip(vec, _pairs(n)):
        out[a, b] = out[b, a] = v
    return out


def expectation(m: GaussianMixture, stat, q: int, cfg: EstimatorConfig) -> tuple[np.ndarray, np.ndarray]:
    """``E[stat(X, score)]`` (``q`` outputs) by quadrature (n <= 2) or stratified MC."""
    n = m.dim
    if cfg.use_quadrature(n):
        def fn(x):
            pts = x.reshape(-1, n)
            lp, sc = m.logpdf_score(pts)
            return np.exp(lp)[None, :] * stat(pts, sc)
        lo, hi = m.bounding_box(cfg.window)
        if n == 1:
            res = integrate_1d(fn, lo[0], hi[0], cfg.quad_tol_1d)
            tol = cfg.quad_tol_1d
        else:
            res = integrate_2d(fn, lo, hi, cfg.quad_tol_2d)
            tol = cfg.quad_tol_2d
        val = np.asarray(res.value, dtype=float).reshape(q)
        return val, np.full(q, max(res.error, tol))
    est, se = stratified_mean(m, lambda x, lp, sc: stat(x, sc), cfg, want_score=True)
    return np.asarray(est).reshape(q), np.asarray(se).reshape(q)


def fisher_matrix(m: GaussianMixture, cfg: EstimatorConfig | None = None) -> FisherMatrix:
    """``J = E[rho rho^T]``; exactly ``K^-1`` for a single component."""
    cfg = cfg or EstimatorConfig()
    if m.is_gaussian:
        return FisherMatrix(mx.inv_pd(m.covs[0]), "analytic-gaussian", None)
    n = m.dim
    pairs = _pairs(n)

    def stat(_, sc):
        return np.stack([sc[:, a] * sc[:, b] for a, b in pairs])

    val, se = expectation(m, stat, len(pairs), cfg)
    method = "quadrature" if cfg.use_quadrature(n) else "monte-carlo"
    return FisherMatrix(_unpack(val, n), method, _unpack(se, n))


def cramer_rao_check(m: GaussianMixture, cfg: EstimatorConfig | None = None) -> CheckReport:
    """``J(U) >= Cov(U)^-1``: smallest eigenvalue of the difference."""
    cfg = cfg or EstimatorConfig()
    cov = m.cov()
    if not mx.is_pd(cov):
        raise PreconditionError("mixture covariance must be positive definite")
    fm = fisher_matrix(m, cfg)
    diff = fm.j - mx.inv_pd(cov)
    margin = mx.min_eig(diff)
    if m.is_gaussian:
        margin = 0.0 if abs(margin) < 1e-12 * max(1.0, float(np.max(np.abs(fm.j)))) else margin
    se = fm.stderr_norm
    return CheckReport(
        "cramer-rao", status_of(margin >= -3.0 * se - 1e-9), margin, se, "fisher",
        {"j": fm.j, "cov_inverse": mx.inv_pd(cov), "method": fm.method,
         "strict": bool(margin > 3.0 * se)},
    )


def fii_check(u: GaussianMixture, v: GaussianMixture, a: Any, cfg: EstimatorConfig | None = None) -> CheckReport:
    """``J(U+V) <= A J(U) A^T + (I-A) J(V) (I-A)^T`` for the supplied ``A``."""
    cfg = cfg or EstimatorConfig()
    if u.dim != v.dim:
        raise PreconditionError("U and V must have the same dimension")
    n = u.dim
    a = np.asarray(a, dtype=float)
    a = a * np.eye(n) if a.ndim == 0 else a
    if a.shape != (n, n):
        raise PreconditionError(f"A must be {n}x{n}")
    ju, jv = fisher_matrix(u, cfg), fisher_matrix(v, cfg)
    jw = fisher_matrix(u.convolve(v), cfg)
    b = np.eye(n) - a
    rhs = a @ ju.j @ a.T + b @ jv.j @ b.T
    margin = mx.min_eig(rhs - jw.j)
    se = math.sqrt(
        (np.linalg.norm(a, 2) ** 2 * ju.stderr_norm) ** 2
        + (np.linalg.norm(b, 2) ** 2 * jv.stderr_norm) ** 2
        + jw.stderr_norm ** 2
    )
    return CheckReport(
        "matrix-fii", status_of(margin >= -3.0 * se - 1e-9), margin, se, "fisher",
        {"lhs": jw.j, "rhs": rhs, "a": a},
    )


def stam_optimal_a(ju: Any, jv: Any) -> np.ndarray:
    """``A = J(U)^-1 (J(U)^-1 + J(V)^-1)^-1``, the choice that is tight for Gaussians."""
    iu, iv = mx.inv_pd(ju), mx.inv_pd(jv)
    return iu @ np.linalg.inv(iu + iv)


def stein_check(m: GaussianMixture, cfg: EstimatorConfig | None = None, tol: float = 1e-6) -> CheckReport:
    """``E[rho(U)] = 0`` and ``E[U rho(U)^T] = -I``."""
    cfg = cfg or EstimatorConfig()
    n = m.dim
    if m.is_gaussian:
        # rho = -K^-1 (u - m): both identities hold in closed form
        return CheckReport("stein", PASS, 0.0, 0.0, "frobenius",
                           {"mean_score_norm": 0.0, "cross_moment_defect": 0.0, "method": "analytic-gaussian"})

    def stat(x, sc):
        rows = [sc[:, a] for a in range(n)]
        rows += [x[:, a] * sc[:, b] for a in range(n) for b in range(n)]
        return np.stack(rows)

    val, se = expectation(m, stat, n + n * n, cfg)
    e_rho = val[:n]
    cross = val[n:].reshape(n, n)
    d1 = float(np.linalg.norm(e_rho))
    d2 = float(np.linalg.norm(cross + np.eye(n)))
    s1 = float(np.linalg.norm(se[:n]))
    s2 = float(np.linalg.norm(se[n:]))
    lim1, lim2 = max(tol, 3.0 * s1), max(tol, 3.0 * s2)
    ok = d1 <= lim1 and d2 <= lim2
    return CheckReport(
        "stein", status_of(ok), min(lim1 - d1, lim2 - d2), max(s1, s2), "frobenius",
        {"mean_score": e_rho, "cross_moment": cross, "mean_score_norm": d1,
         "cross_moment_defect": d2},
    )


def _fd_weights(t, delta):
    # 5-point central stencil for the first derivative
    nodes = t + delta * np.array([-2.0, -1.0, 1.0, 2.0])
    w = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * delta)
    return nodes, w


def debruijn_check(x: GaussianMixture, kz: Any, t: float, cfg: EstimatorConfig | None = None,
                   delta: float | None = None) -> CheckReport:
    """``d/dt h(X + sqrt(t) Z) = 1/2 Tr(K_Z J(X + sqrt(t) Z))``.

    The left side is a 5-point central difference of the entropy in ``t``.
    """
    cfg = cfg or EstimatorConfig()
    kz = mx.sym(kz)
    if not t > 0:
        raise PreconditionError("t must be positive")
    if delta is None:
        delta = 1e-3 if x.is_gaussian else 1e-2
    delta = min(delta, 0.25 * t)
    nodes, w = _fd_weights(t, delta)
    hs = [mixture_entropy(x.add_gaussian(s * kz), cfg) for s in nodes]
    lhs = float(np.dot(w, [h.value for h in hs]))
    fd_se = float(math.sqrt(sum((wi * h.stderr) ** 2 for wi, h in zip(w, hs))))
    # truncation of the stencil is O(delta^4); bound it by the spread of a coarser stencil
    if not x.is_gaussian:
        n2, w2 = _fd_weights(t, 2.0 * delta)
        hs2 = [mixture_entropy(x.add_gaussian(s * kz), cfg) for s in n2]
        coarse = float(np.dot(w2, [h.value for h in hs2]))
        fd_se = math.sqrt(fd_se ** 2 + (abs(coarse - lhs) / 15.0) ** 2)
    jm = fisher_matrix(x.add_gaussian(t * kz), cfg)
    rhs = 0.5 * float(np.trace(kz @ jm.j))
    rhs_se = 0.5 * float(np.linalg.norm(kz)) * jm.stderr_norm
    se = math.sqrt(fd_se ** 2 + rhs_se ** 2)
    gap = abs(lhs - rhs)
    if x.is_gaussian:
        closed = 0.5 * float(np.trace(np.linalg.solve(x.covs[0] + t * kz, kz)))
        details = {"closed_form_nats": closed}
    else:
        details = {}
    if fd_se > 1e-2 * max(abs(rhs), 1e-12):
        status = INCONCLUSIVE
    else:
        status = status_of(gap <= max(3.0 * se, 1e-10))
    details.update({"lhs_nats": lhs, "rhs_nats": rhs, "delta": delta, "gap_nats": gap})
    return CheckReport("de-bruijn", status, max(3.0 * se, 1e-10) - gap, se, "nats", details)


def conditional_score(u: GaussianMixture, v: GaussianMixture, w: Any, cfg: EstimatorConfig | None = None) -> np.ndarray:
    """``E[rho_U(U) | U + V = w]`` by quadrature over ``u`` (n <= 2)."""
    cfg = cfg or EstimatorConfig()
    n = u.dim
    if n > 2:
        raise PreconditionError("conditional score by quadrature needs dimension <= 2")
    w = np.asarray(w, dtype=float).reshape(n)
    ulo, uhi = u.bounding_box(cfg.window)
    vlo, vhi = v.bounding_box(cfg.window)
    lo, hi = np.maximum(ulo, w - vhi), np.minimum(uhi, w - vlo)
    if np.any(hi <= lo):
        raise PreconditionError("w lies outside the effective support of U + V")
    fw = float(u.convolve(v).pdf(w.reshape(1, n))[0])

    def fn(x):
        pts = x.reshape(-1, n)
        lpu, su = u.logpdf_score(pts)
        dens = np.exp(lpu + v.logpdf(w - pts))
        return np.vstack([dens[None, :] * su.T, dens[None, :]])

    if n == 1:
        res = integrate_1d(fn, lo[0], hi[0], 1e-2 * cfg.quad_tol_1d * max(fw, 1e-300))
    else:
        res = integrate_2d(fn, lo, hi, 1e-2 * cfg.quad_tol_2d * max(fw, 1e-300))
    val = np.asarray(res.value)
    return val[:n] / val[n]


def convolution_score_check(u: GaussianMixture, v: GaussianMixture, cfg: EstimatorConfig | None = None,
                            points: Any = None, tol: float = 1e-6) -> CheckReport:
    """Score of ``W = U + V`` equals ``E[rho_U(U) | W = w]`` at a set of ``w``."""
    cfg = cfg or EstimatorConfig()
    if u.dim != v.dim:
        raise PreconditionError("U and V must have the same dimension")
    wm = u.convolve(v)
    n = u.dim
    if points is None:
        c = wm.mean()
        sd = np.sqrt(np.diag(wm.cov()))
        pts = [c + k * sd * e for e in np.eye(n) for k in (-2.0, -1.0, 1.0, 2.0)] + [c]
    else:
        pts = [np.asarray(p, dtype=float).reshape(n) for p in np.atleast_2d(points)]
    gaps, rows = [], []
    for p in pts:
        direct = wm.score(p)
        cond = conditional_score(u, v, p, cfg)
        g = float(np.max(np.abs(direct - cond)))
        gaps.append(g)
        rows.append({"w": p, "direct": direct, "conditional": cond, "gap": g})
    worst = max(gaps)
    return CheckReport("convolution-score", status_of(worst <= tol), tol - worst, None, "score",
                       {"max_gap": worst, "points": rows})
