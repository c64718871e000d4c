"""Rate computations built on the Gaussian extremal solver: weighted sum rates
and the capacity region of the two-user vector Gaussian broadcast channel,
and the weighted-rate bound for distributed coding of two Gaussian sources
with one quadratic distortion constraint.  Rates are in nats per use."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import matrix as mx
from .config import ordered_map
from .entropy import gaussian_entropy
from .errors import DimensionError, InputError, PreconditionError, SingularMatrixError, SolverError
from .instance import ExtremalInstance
from .solver import LogdetTerm, SolverConfig, gaussian_objective, maximize_logdet_terms, solve


def _half_logdet_ratio(a, b) -> float:
    """``1/2 log|A B^-1|``."""
    return 0.5 * (mx.logdet(a) - mx.logdet(b))


@dataclass(frozen=True, eq=False)
class BcInstance:
    kz1: np.ndarray
    kz2: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        kz1, kz2, s = mx.sym(self.kz1), mx.sym(self.kz2), mx.sym(self.s)
        if not (kz1.shape == kz2.shape == s.shape):
            raise DimensionError(f"dimension mismatch: kz1 {kz1.shape}, kz2 {kz2.shape}, s {s.shape}")
        for name, k in (("kz1", kz1), ("kz2", kz2)):
            if not mx.is_pd(k):
                raise SingularMatrixError(f"{name} must be strictly positive definite")
        if not mx.is_psd(s, 1e-12 * max(1.0, float(np.trace(s)))):
            raise InputError("s must be positive semidefinite")
        object.__setattr__(self, "kz1", kz1)
        object.__setattr__(self, "kz2", kz2)
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return self.s.shape[0]

    def single_user_capacities(self) -> tuple[float, float]:
        return (_half_logdet_ratio(self.s + self.kz1, self.kz1), _half_logdet_ratio(self.s + self.kz2, self.kz2))

    def to_json(self) -> dict:
        return {"kz1": mx.to_json(self.kz1), "kz2": mx.to_json(self.kz2), "s": mx.to_json(self.s)}

    @classmethod
    def from_json(cls, obj: dict) -> "BcInstance":
        missing = [k for k in ("kz1", "kz2", "s") if k not in obj]
        if missing:
            raise InputError(f"broadcast instance is missing field(s): {', '.join(missing)}")
        return cls(mx.from_json(obj["kz1"]), mx.from_json(obj["kz2"]), mx.from_json(obj["s"]))


@dataclass(frozen=True, eq=False)
class RatePoint:
    r1: float
    r2: float
    kx: np.ndarray
    weights: tuple[float, float]
    bound: float = math.nan
    details: dict = field(default_factory=dict)

    @property
    def weighted_sum(self) -> float:
        return self.weights[0] * self.r1 + self.weights[1] * self.r2

    def to_json(self, units: str = "nats") -> dict:
        scale = 1.0 if units == "nats" else 1.0 / math.log(2.0)
        out = {
            "mu1": self.weights[0],
            "mu2": self.weights[1],
            f"r1_{units}": self.r1 * scale,
            f"r2_{units}": self.r2 * scale,
            f"bound_{units}": self.bound * scale,
            "kx": mx.to_json(self.kx),
        }
        out.update(self.details)
        return out


def _check_weights(mu1: float, mu2: float) -> None:
    if not (mu1 >= 0 and mu2 >= 0) or not (math.isfinite(mu1) and math.isfinite(mu2)):
        raise InputError("weights must be finite and nonnegative")
    if mu1 == 0 and mu2 == 0:
        raise InputError("weights must not both be zero")


def bc_weighted_sum(inst: BcInstance, mu1: float, mu2: float, cfg: SolverConfig | None = None) -> RatePoint:
    """Maximum of ``mu1 R1 + mu2 R2`` and the dirty-paper rate pair that achieves it.

    For ``mu2 >= mu1`` user 1 is encoded last with covariance ``K`` and
    ``R1 = 1/2 log|(K+K1) K1^-1|``, ``R2 = 1/2 log|(S+K2)(K+K2)^-1|``; the
    optimal ``K`` solves the extremal problem with ``mu = mu2/mu1``.  For
    ``mu1 > mu2`` the users swap roles.  ``bound`` is the optimal value
    computed from the solver objective, independently of the rate formulas.
    """
    mu1, mu2 = float(mu1), float(mu2)
    _check_weights(mu1, mu2)
    s = inst.s
    n = inst.dim
    if mu2 >= mu1:
        # user 1 decoded interference-free
        if mu1 == 0.0:
            kx = np.zeros((n, n))
            obj = None
        else:
            kx, obj = _solve_or_raise(ExtremalInstance(inst.kz1, inst.kz2, s, mu2 / mu1), cfg)
        r1 = _half_logdet_ratio(kx + inst.kz1, inst.kz1)
        r2 = _half_logdet_ratio(s + inst.kz2, kx + inst.kz2)
        if obj is None:
            bound = mu2 * r2
        else:
            bound = mu1 * (obj - gaussian_entropy(inst.kz1)) + mu2 * gaussian_entropy(s + inst.kz2)
        order = "user1-last"
    else:
        if mu2 == 0.0:
            kx = np.zeros((n, n))
            obj = None
        else:
            kx, obj = _solve_or_raise(ExtremalInstance(inst.kz2, inst.kz1, s, mu1 / mu2), cfg)
        r2 = _half_logdet_ratio(kx + inst.kz2, inst.kz2)
        r1 = _half_logdet_ratio(s + inst.kz1, kx + inst.kz1)
        if obj is None:
            bound = mu1 * r1
        else:
            bound = mu2 * (obj - gaussian_entropy(inst.kz2)) + mu1 * gaussian_entropy(s + inst.kz1)
        order = "user2-last"
    return RatePoint(r1, r2, kx, (mu1, mu2), bound, {"encoding_order": order})


def _solve_or_raise(inst: ExtremalInstance, cfg) -> tuple[np.ndarray, float]:
    """Optimal ``K`` and objective; a singular ``S`` is handled on its range."""
    if mx.numerical_rank(inst.s) < inst.dim:
        red = mx.reduce_rank_deficient(inst)
        if red.reduced_dim == 0:
            kx = np.zeros_like(inst.s)
        else:
            kx = red.lift(_solve_or_raise(red.reduced, cfg)[0])
        return kx, gaussian_objective(kx, inst)
    sol = solve(inst, cfg)
    if not sol.certified:
        raise SolverError(f"weighted-sum optimum not certified (residual {sol.residual:.3e})")
    return sol.kx, sol.objective


def sweep_weights(num_points: int) -> list[tuple[float, float, float]]:
    """``(theta, cos theta, sin theta)`` on a uniform grid over ``[0, pi/2]`` with exact endpoints."""
    if num_points < 3:
        raise InputError("need at least 3 sweep points")
    out = []
    for i in range(num_points):
        th = 0.5 * math.pi * i / (num_points - 1)
        if i == 0:
            out.append((th, 1.0, 0.0))
        elif i == num_points - 1:
            out.append((th, 0.0, 1.0))
        else:
            out.append((th, math.cos(th), math.sin(th)))
    return out


def bc_region_sweep(inst: BcInstance, num_points: int, cfg: SolverConfig | None = None,
                    parallelism: int | str = 1) -> list[RatePoint]:
    """Boundary points of the capacity region, sorted by ``R1``."""
    grid = sweep_weights(num_points)

    def run(item):
        th, mu1, mu2 = item
        p = bc_weighted_sum(inst, mu1, mu2, cfg)
        return RatePoint(p.r1, p.r2, p.kx, p.weights, p.bound, {**p.details, "theta": th})

    points = ordered_map(run, grid, parallelism)
    return sorted(points, key=lambda p: (p.r1, -p.r2))


def classical_degraded_r2(inst: BcInstance, r1: float) -> float:
    """Largest ``R2`` paired with ``R1`` in the scalar degraded region (user 1 the stronger).

    Power split ``alpha``: ``R1 = 1/2 ln(1 + alpha S/N1)``,
    ``R2 = 1/2 ln(1 + (1-alpha) S / (alpha S + N2))``.
    """
    if inst.dim != 1:
        raise PreconditionError("the classical region oracle is scalar")
    s, n1, n2 = float(inst.s[0, 0]), float(inst.kz1[0, 0]), float(inst.kz2[0, 0])
    if n1 > n2:
        raise PreconditionError("oracle expects user 1 to be the stronger (N1 <= N2)")
    if s == 0.0:
        return 0.0
    alpha = min(max(math.expm1(2.0 * r1) * n1 / s, 0.0), 1.0)
    return 0.5 * math.log1p((1.0 - alpha) * s / (alpha * s + n2))


# --------------------------------------------------------------------------
# distributed source coding


@dataclass(frozen=True, eq=False)
class DscInstance:
    """Sources with covariances ``K_Y1, K_Y2``; ``Y1`` must be a degraded version of ``Y2``.

    After the relabeling that absorbs the linear map, ``Y1 = Y2 + Z`` with
    ``K_Z = K_Y1 - K_Y2`` positive semidefinite.
    """

    ky1: np.ndarray
    ky2: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        ky1, ky2, d = mx.sym(self.ky1), mx.sym(self.ky2), mx.sym(self.d)
        if not (ky1.shape == ky2.shape == d.shape):
            raise DimensionError(f"dimension mismatch: ky1 {ky1.shape}, ky2 {ky2.shape}, d {d.shape}")
        for name, k in (("ky1", ky1), ("ky2", ky2), ("d", d)):
            if not mx.is_pd(k):
                raise SingularMatrixError(f"{name} must be strictly positive definite")
        if mx.min_eig(ky1 - ky2) < -1e-12 * max(1.0, float(np.max(np.abs(ky1)))):
            raise PreconditionError("K_Y1 - K_Y2 must be PSD (apply the degraded relabeling first)")
        object.__setattr__(self, "ky1", ky1)
        object.__setattr__(self, "ky2", ky2)
        object.__setattr__(self, "d", d)

    @property
    def kz(self) -> np.ndarray:
        return mx.clip_psd(self.ky1 - self.ky2)

    @property
    def dim(self) -> int:
        return self.d.shape[0]

    def to_json(self) -> dict:
        return {"ky1": mx.to_json(self.ky1), "ky2": mx.to_json(self.ky2), "d": mx.to_json(self.d)}

    @classmethod
    def from_json(cls, obj: dict) -> "DscInstance":
        missing = [k for k in ("ky1", "ky2", "d") if k not in obj]
        if missing:
            raise InputError(f"source-coding instance is missing field(s): {', '.join(missing)}")
        return cls(mx.from_json(obj["ky1"]), mx.from_json(obj["ky2"]), mx.from_json(obj["d"]))


@dataclass(frozen=True, eq=False)
class DscBound:
    value: float
    k: np.ndarray
    bite: bool
    weights: tuple[float, float]

    def to_json(self, units: str = "nats") -> dict:
        scale = 1.0 if units == "nats" else 1.0 / math.log(2.0)
        return {f"value_{units}": self.value * scale, "k": mx.to_json(self.k), "bite_flag": self.bite,
                "mu1": self.weights[0], "mu2": self.weights[1]}


def dsc_bound_value(inst: DscInstance, k: Any, mu1: float, mu2: float) -> float:
    """``mu1/2 log|(K + K_Z) D^-1| + mu2/2 log|K_Y2 K^-1|``."""
    k = mx.sym(k)
    return mu1 * _half_logdet_ratio(k + inst.kz, inst.d) + mu2 * _half_logdet_ratio(inst.ky2, k)


def dsc_weighted_bound(inst: DscInstance, mu1: float, mu2: float, cfg: SolverConfig | None = None) -> DscBound:
    """Minimum over ``0 <= K <= K_Y2`` of the Gaussian weighted-rate expression.

    ``bite`` is set when ``K* + K_Z >= D`` fails, i.e. the distortion
    constraint on the conditional covariance is active and the bound need not
    be achievable.
    """
    mu1, mu2 = float(mu1), float(mu2)
    if not (mu1 > 0 and mu2 > 0):
        raise InputError("both weights must be positive")
    n = inst.dim
    kz = inst.kz
    if mu1 > mu2 and mx.numerical_rank(kz) < n:
        raise PreconditionError("bound is unbounded below: K_Z is singular and mu1 > mu2")
    # minimizing the bound = maximizing mu2/2 logdet K - mu1/2 logdet(K + K_Z)
    terms = [LogdetTerm(mu2, np.zeros((n, n))), LogdetTerm(-mu1, kz)]
    points = maximize_logdet_terms(terms, inst.ky2, cfg)
    best = points[0]
    if not best.certified:
        raise SolverError(f"distortion-bound optimum not certified (residual {best.residual:.3e})")
    k = best.kx
    value = dsc_bound_value(inst, k, mu1, mu2)
    bite = not mx.loewner_leq(inst.d, k + kz, 1e-9 * max(1.0, float(np.max(np.abs(inst.d)))))
    return DscBound(value, k, bite, (mu1, mu2))


def dsc_separation_rates(inst: DscInstance, k: Any, weights: tuple[float, float] = (1.0, 1.0)) -> RatePoint:
    """Rates of Gaussian quantization with test-channel covariance ``K`` plus Slepian-Wolf binning."""
    k = mx.sym(k)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(inst.ky2))))
    if mx.min_eig(k) <= 0 or mx.loewner_margin(k, inst.ky2) < -tol:
        raise PreconditionError("k must satisfy 0 < K <= K_Y2")
    r2 = max(_half_logdet_ratio(inst.ky2, k), 0.0)
    r1 = max(_half_logdet_ratio(k + inst.kz, inst.d), 0.0)
    mu1, mu2 = weights
    return RatePoint(r1, r2, k, (float(mu1), float(mu2)), mu1 * r1 + mu2 * r2)
