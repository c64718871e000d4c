"""Differential entropy (nats): exact Gaussian, quadrature, Monte Carlo and kNN."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special
from scipy.spatial import cKDTree

from . import matrix as mx
from .config import EstimatorConfig
from .errors import InputError, PreconditionError
from .matrix import LOG_2PIE
from .mixture import GaussianMixture, UniformCandidate
from .montecarlo import stratified_mean
from .quadrature import integrate_1d, integrate_2d


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    stderr: float
    method: str
    flags: tuple = field(default=())

    def __add__(self, other: "EntropyEstimate") -> "EntropyEstimate":
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "EntropyEstimate") -> "EntropyEstimate":
        return combine([(1.0, self), (-1.0, other)])

    def to_json(self, units: str = "nats") -> dict:
        scale = 1.0 if units == "nats" else 1.0 / math.log(2.0)
        out = {f"value_{units}": self.value * scale, f"stderr_{units}": self.stderr * scale,
               "method": self.method}
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def combine(terms) -> EntropyEstimate:
    """Linear combination ``sum c_i h_i`` with independent-error propagation."""
    value = sum(c * e.value for c, e in terms)
    stderr = math.sqrt(sum((c * e.stderr) ** 2 for c, e in terms))
    methods = sorted({e.method for _, e in terms})
    flags = tuple(sorted({f for _, e in terms for f in e.flags}))
    return EntropyEstimate(value, stderr, methods[0] if len(methods) == 1 else "+".join(methods), flags)


def exact(value: float) -> EntropyEstimate:
    return EntropyEstimate(float(value), 0.0, "exact-gaussian")


def gaussian_entropy(k: Any) -> float:
    """``1/2 (n ln(2 pi e) + ln|K|)``."""
    k = mx.sym(k)
    return 0.5 * (k.shape[0] * LOG_2PIE + mx.logdet(k))


def _neg_f_log_f(m: GaussianMixture):
    def fn(x):
        lp = m.logpdf(x)
        return -np.exp(lp) * lp
    return fn


def mixture_entropy(m: GaussianMixture, cfg: EstimatorConfig | None = None) -> EntropyEstimate:
    """``-E log f`` for a Gaussian mixture.

    Single components are exact.  Otherwise quadrature over the hull of the
    component windows (n <= 2) or stratified Monte Carlo whose statistic is
    ``log(g/f)`` for the moment-matched Gaussian ``g``, so that
    ``h(f) = h(g) - KL(f || g)`` and only the (small) divergence is sampled.
    """
    cfg = cfg or EstimatorConfig()
    if m.is_gaussian:
        return exact(gaussian_entropy(m.covs[0]))
    if cfg.use_quadrature(m.dim):
        lo, hi = m.bounding_box(cfg.window)
        if m.dim == 1:
            res = integrate_1d(lambda x: _neg_f_log_f(m)(x.reshape(-1, 1)), lo[0], hi[0], cfg.quad_tol_1d)
            return EntropyEstimate(float(res.value), max(res.error, cfg.quad_tol_1d), "quadrature")
        res = integrate_2d(_neg_f_log_f(m), lo, hi, cfg.quad_tol_2d)
        return EntropyEstimate(float(res.value), max(res.error, cfg.quad_tol_2d), "quadrature")
    return _mc_entropy(m, cfg)


def _mc_entropy(m: GaussianMixture, cfg: EstimatorConfig) -> EntropyEstimate:
    cov = m.cov()
    mean = m.mean()
    ref = GaussianMixture.gaussian(cov, mean)
    hg = gaussian_entropy(cov)

    def stat(x, lp, _):
        return (ref.logpdf(x) - lp)[None, :]

    est, se = stratified_mean(m, stat, cfg)
    return EntropyEstimate(hg + float(est[0]), float(se[0]), "monte-carlo")


def _log_uniform_gauss_density(y, a, sigma):
    # f(y) = (Phi((y+a)/s) - Phi((y-a)/s)) / 2a, evaluated through |y| in log space
    t = np.abs(y)
    lu = special.log_ndtr((a - t) / sigma)
    lv = special.log_ndtr((-a - t) / sigma)
    return lu + np.log(-np.expm1(lv - lu)) - math.log(2.0 * a)


def uniform_plus_gaussian_entropy(half_width: float, sigma2: float,
                                  cfg: EstimatorConfig | None = None) -> EntropyEstimate:
    """Entropy of ``U[-a, a] + N(0, sigma2)`` by quadrature of the closed-form density."""
    cfg = cfg or EstimatorConfig()
    a = float(half_width)
    if not (a > 0 and sigma2 > 0):
        raise PreconditionError("half-width and sigma2 must be positive")
    sigma = math.sqrt(sigma2)

    def fn(y):
        lf = _log_uniform_gauss_density(y, a, sigma)
        return -2.0 * np.exp(lf) * lf  # symmetric density: integrate over y >= 0 and double

    edge = a + cfg.window * sigma
    tol = 0.5 * cfg.quad_tol_1d
    r1 = integrate_1d(fn, 0.0, a, tol)
    r2 = integrate_1d(fn, a, edge, tol)
    return EntropyEstimate(float(r1.value + r2.value), max(r1.error + r2.error, cfg.quad_tol_1d), "quadrature")


def candidate_entropy_with_noise(x, kz: Any, cfg: EstimatorConfig | None = None) -> EntropyEstimate:
    """``h(X + Z)`` for independent ``Z ~ N(0, kz)``; ``X`` a mixture or scalar uniform."""
    cfg = cfg or EstimatorConfig()
    kz = mx.sym(kz)
    if isinstance(x, UniformCandidate):
        if kz.shape != (1, 1):
            raise PreconditionError("the uniform candidate is scalar")
        return uniform_plus_gaussian_entropy(x.half_width, float(kz[0, 0]), cfg)
    return mixture_entropy(x.add_gaussian(kz), cfg)


def knn_entropy(samples: Any, k: int = 4, folds: int = 10, seed: int = 0) -> EntropyEstimate:
    """Kozachenko-Leonenko estimate with the digamma bias correction.

    The standard error comes from the spread of the estimator over ``folds``
    disjoint subsamples.  Coincident points get a 1e-12 relative jitter and
    the estimate is flagged.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < 100:
        raise InputError("knn_entropy needs at least 100 samples")
    if k < 1:
        raise InputError("k must be at least 1")
    flags = []
    rng = np.random.default_rng(seed)
    h, dup = _kl_estimate(x, k)
    if dup:
        scale = float(np.max(np.std(x, axis=0))) or 1.0
        x = x + 1e-12 * scale * rng.standard_normal(x.shape)
        flags.append("duplicates-jittered")
        h, _ = _kl_estimate(x, k)
    perm = rng.permutation(len(x))
    parts = np.array_split(perm, folds)
    sub = [_kl_estimate(x[p], k)[0] for p in parts if len(p) > k + 1]
    stderr = float(np.std(sub, ddof=1) / math.sqrt(len(sub))) if len(sub) > 1 else math.nan
    return EntropyEstimate(h, stderr, "knn", tuple(flags))


def _kl_estimate(x: np.ndarray, k: int) -> tuple[float, bool]:
    n_pts, n = x.shape
    tree = cKDTree(x)
    dist, _ = tree.query(x, k=k + 1)
    eps = dist[:, k]
    if np.any(dist[:, 1] <= 0):
        return math.nan, True
    log_vol = 0.5 * n * math.log(math.pi) - special.gammaln(0.5 * n + 1.0)
    h = special.digamma(n_pts) - special.digamma(k) + log_vol + n * float(np.mean(np.log(eps)))
    return float(h), False


def entropy_of(x, cfg: EstimatorConfig | None = None) -> EntropyEstimate:
    """``h(X)`` for a mixture or a uniform candidate."""
    if isinstance(x, UniformCandidate):
        return EntropyEstimate(math.log(2.0 * x.half_width), 0.0, "exact")
    return mixture_entropy(x, cfg)


def mutual_info_additive(x, kz: Any, cfg: EstimatorConfig | None = None) -> EntropyEstimate:
    """``I(Z; Z + X) = h(X + Z) - h(X)`` for ``Z ~ N(0, kz)`` independent of ``X``."""
    kz = mx.sym(kz)
    if not mx.is_pd(kz):
        raise PreconditionError("kz must be strictly positive definite")
    if isinstance(x, np.ndarray) or not isinstance(x, (GaussianMixture, UniformCandidate)):
        x = GaussianMixture.gaussian(x)
    return candidate_entropy_with_noise(x, kz, cfg) - entropy_of(x, cfg)
