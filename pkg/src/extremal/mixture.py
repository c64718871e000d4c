"""Finite Gaussian mixtures and the scalar uniform candidate.

Mixtures are closed under the operations the verification needs: affine
maps, independent sums with Gaussians or other mixtures (pairwise component
convolution), and independent concatenation.  Density and score evaluation
goes through :mod:`extremal.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from . import kernels
from . import matrix as mx
from .errors import DimensionError, InputError, PreconditionError


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            # list of scalar means
            means = means.reshape(-1, 1)
        covs = np.asarray(self.covs, dtype=float)
        k = len(w)
        if k == 0:
            raise InputError("mixture needs at least one component")
        if covs.ndim == 1:
            covs = covs.reshape(-1, 1, 1)
        if means.shape[0] != k or covs.shape[0] != k:
            raise DimensionError(
                f"{k} weights but {means.shape[0]} means and {covs.shape[0]} covariances"
            )
        n = means.shape[1]
        if covs.shape[1:] != (n, n):
            raise DimensionError(f"component covariances must be {n}x{n}, got {covs.shape[1:]}")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise InputError("mixture weights must be finite and positive")
        if abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise InputError(f"mixture weights sum to {np.sum(w)!r}, not 1")
        covs = np.array([mx.sym(c) for c in covs])
        for i, c in enumerate(covs):
            if not mx.is_pd(c):
                raise InputError(f"component {i} covariance is not positive definite")
        if not np.all(np.isfinite(means)):
            raise InputError("mixture means must be finite")
        object.__setattr__(self, "weights", w / np.sum(w))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    # construction helpers

    @classmethod
    def gaussian(cls, cov: Any, mean: Any = None) -> "GaussianMixture":
        cov = mx.sym(cov)
        n = cov.shape[0]
        m = np.zeros(n) if mean is None else np.asarray(mean, dtype=float).reshape(n)
        return cls(np.ones(1), m.reshape(1, n), cov.reshape(1, n, n))

    @classmethod
    def symmetric_pair(cls, m: float, v: float) -> "GaussianMixture":
        """Scalar ``1/2 N(-m, v) + 1/2 N(m, v)``."""
        return cls(np.array([0.5, 0.5]), np.array([[-m], [m]]), np.array([[[v]], [[v]]]))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def is_gaussian(self) -> bool:
        return self.n_components == 1

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        mu = self.mean()
        d = self.means - mu
        within = np.einsum("k,kab->ab", self.weights, self.covs)
        between = np.einsum("k,ka,kb->ab", self.weights, d, d)
        return mx.sym(within + between)

    # closure operations

    def affine(self, a: Any, b: Any = None) -> "GaussianMixture":
        """Law of ``A X + b``; ``A`` may be a scalar."""
        a = np.asarray(a, dtype=float)
        n = self.dim
        if a.ndim == 0:
            a = a * np.eye(n)
        if a.shape != (n, n):
            raise DimensionError(f"affine map must be {n}x{n}")
        shift = np.zeros(n) if b is None else np.asarray(b, dtype=float).reshape(n)
        means = self.means @ a.T + shift
        covs = np.einsum("ab,kbc,dc->kad", a, self.covs, a)
        return GaussianMixture(self.weights, means, covs)

    def shift(self, b: Any) -> "GaussianMixture":
        return self.affine(1.0, b)

    def scale(self, c: float) -> "GaussianMixture":
        return self.affine(float(c))

    def convolve(self, other: "GaussianMixture") -> "GaussianMixture":
        """Law of ``X + Y`` for independent mixtures: pairwise means add, covariances add."""
        if other.dim != self.dim:
            raise DimensionError(f"cannot add a {other.dim}-dim mixture to a {self.dim}-dim one")
        w = np.outer(self.weights, other.weights).ravel()
        means = (self.means[:, None, :] + other.means[None, :, :]).reshape(-1, self.dim)
        covs = (self.covs[:, None] + other.covs[None, :]).reshape(-1, self.dim, self.dim)
        return GaussianMixture(w / w.sum(), means, covs)

    def add_gaussian(self, k: Any) -> "GaussianMixture":
        k = mx.sym(k)
        if k.shape != (self.dim, self.dim):
            raise DimensionError(f"noise covariance must be {self.dim}x{self.dim}")
        return GaussianMixture(self.weights, self.means, self.covs + k[None])

    def product(self, other: "GaussianMixture") -> "GaussianMixture":
        """Law of ``(X, Y)`` for independent ``X`` and ``Y``."""
        n1, n2 = self.dim, other.dim
        w = np.outer(self.weights, other.weights).ravel()
        means = np.concatenate(
            [np.repeat(self.means, other.n_components, axis=0),
             np.tile(other.means, (self.n_components, 1))], axis=1)
        covs = np.zeros((len(w), n1 + n2, n1 + n2))
        covs[:, :n1, :n1] = np.repeat(self.covs, other.n_components, axis=0)
        covs[:, n1:, n1:] = np.tile(other.covs, (self.n_components, 1, 1))
        return GaussianMixture(w / w.sum(), means, covs)

    # evaluation

    @cached_property
    def _prepared(self):
        return kernels.prepare(self.weights, self.means, self.covs)

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, self.dim) if self.dim > 1 else x.reshape(-1, 1)
        if x.shape[1] != self.dim:
            raise DimensionError(f"points must have {self.dim} coordinates")
        return x

    def logpdf(self, x) -> np.ndarray:
        lp, _ = kernels.logpdf_score(self._points(x), self._prepared, want_score=False)
        return lp

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def logpdf_score(self, x):
        return kernels.logpdf_score(self._points(x), self._prepared, want_score=True)

    def score(self, x) -> np.ndarray:
        """``grad log f`` at a single point (vector) or at the rows of a batch."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 0 or (arr.ndim == 1 and (self.dim > 1 or arr.size == 1))
        pts = self._points(arr if not single else arr.reshape(1, self.dim))
        lp, sc = kernels.logpdf_score(pts, self._prepared, want_score=True)
        bad = ~np.isfinite(lp) | ~np.all(np.isfinite(sc), axis=1)
        if np.any(bad):
            p = pts[np.argmax(bad)]
            with np.errstate(over="ignore"):
                dist = min(
                    float(np.sqrt((p - m) @ np.linalg.solve(c, p - m)))
                    for m, c in zip(self.means, self.covs)
                )
            raise PreconditionError(
                f"density underflows at {p.tolist()} (Mahalanobis distance {dist:.1f} to the nearest component)"
            )
        return sc[0] if single else sc

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.n_components, size=size, p=self.weights)
        out = np.empty((size, self.dim))
        for i in range(self.n_components):
            idx = np.nonzero(comp == i)[0]
            if len(idx):
                out[idx] = rng.multivariate_normal(self.means[i], self.covs[i], size=len(idx),
                                                   method="cholesky")
        return out

    def bounding_box(self, width: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate hull of the component ``mean +/- width * sigma`` windows."""
        sd = np.sqrt(np.einsum("kaa->ka", self.covs))
        return np.min(self.means - width * sd, axis=0), np.max(self.means + width * sd, axis=0)

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covs": [mx.to_json(c) for c in self.covs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GaussianMixture":
        missing = [k for k in ("weights", "means", "covs") if k not in obj]
        if missing:
            raise InputError(f"mixture is missing field(s): {', '.join(missing)}")
        covs = [mx.from_json(c) for c in obj["covs"]]
        means = np.asarray(obj["means"], dtype=float)
        if means.ndim == 1:
            means = means.reshape(len(covs), -1)
        return cls(np.asarray(obj["weights"], dtype=float), means, np.array(covs))


@dataclass(frozen=True)
class UniformCandidate:
    """Scalar ``X ~ U[-a, a] + c`` (only entropy-based operations accept it)."""

    half_width: float
    center: float = 0.0

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise InputError("uniform half-width must be positive and finite")

    @property
    def dim(self) -> int:
        return 1

    def mean(self) -> np.ndarray:
        return np.array([self.center])

    def cov(self) -> np.ndarray:
        return np.array([[self.half_width ** 2 / 3.0]])

    def to_json(self) -> dict:
        return {"uniform_half_width": self.half_width, "center": self.center}


def candidate_from_json(obj: dict):
    if "uniform_half_width" in obj:
        return UniformCandidate(float(obj["uniform_half_width"]), float(obj.get("center", 0.0)))
    return GaussianMixture.from_json(obj)
