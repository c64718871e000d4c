"""Enhanced noise covariances built from a KKT point, and the identities that
make the enhanced problem solvable by the classical entropy-power inequality.

Given an optimum ``K*`` with multipliers ``M1, M2``, the enhanced covariances
absorb the multipliers:

    (K* + Kt1)^-1 = (K* + K1)^-1 + 2 M1
    (K* + Kt2)^-1 = (K* + K2)^-1 + (2/mu) M2

so that ``K* + Kt1`` and ``Kt2 - Kt1`` become proportional.  All quantities
here are Gaussian, so every check is exact arithmetic rather than
estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import matrix as mx
from .entropy import gaussian_entropy
from .errors import PreconditionError, SingularMatrixError
from .instance import ExtremalInstance
from .report import CheckReport, aggregate, status_of
from .solver import KktSolution, SolverConfig, gaussian_objective, with_residuals

CLIP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EnhancedInstance:
    ktz1: np.ndarray
    ktz2: np.ndarray
    f: float
    base: ExtremalInstance
    sol: KktSolution

    @property
    def kx(self) -> np.ndarray:
        return self.sol.kx

    def objective(self, kx: Any) -> float:
        """Enhanced objective ``h(X+Zt1) - mu h(X+Zt2) + F`` for Gaussian ``X``."""
        kx = mx.sym(kx)
        return (gaussian_entropy(kx + self.ktz1) - self.base.mu * gaussian_entropy(kx + self.ktz2)
                + self.f)

    def to_json(self) -> dict:
        return {"ktz1": mx.to_json(self.ktz1), "ktz2": mx.to_json(self.ktz2), "f_nats": self.f}


def _clip_small_negative(k: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(k)
    w = np.where((w < 0) & (w > -CLIP_TOL), 0.0, w)
    return mx.sym((v * w) @ v.T)


def enhance(inst: ExtremalInstance, sol: KktSolution, cfg: SolverConfig | None = None) -> EnhancedInstance:
    """Solve the multiplier-absorbing equations for ``Kt1`` and ``Kt2`` and form ``F``."""
    cfg = cfg or SolverConfig()
    if inst.mu < 1.0:
        raise PreconditionError("enhancement is defined for mu >= 1")
    checked = with_residuals(sol, inst, cfg)
    if not checked.certified:
        raise PreconditionError(
            f"solution is not a certified KKT point (residual {checked.residual:.3e})"
        )
    kx = mx.sym(sol.kx)
    try:
        a1 = mx.inv_pd(kx + inst.kz1) + 2.0 * mx.sym(sol.m1)
        a2 = mx.inv_pd(kx + inst.kz2) + (2.0 / inst.mu) * mx.sym(sol.m2)
        ktz1 = _clip_small_negative(mx.inv_pd(a1) - kx)
        ktz2 = _clip_small_negative(mx.inv_pd(a2) - kx)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"enhancement equations are inconsistent with the multipliers: {exc}") from exc
    f = (gaussian_entropy(inst.kz1) - _entropy_psd(ktz1)
         + inst.mu * (gaussian_entropy(inst.s + ktz2) - gaussian_entropy(inst.s + inst.kz2)))
    return EnhancedInstance(ktz1, ktz2, f, inst, checked)


def _entropy_psd(k: np.ndarray) -> float:
    """Gaussian entropy that is ``-inf`` for a singular covariance."""
    try:
        return gaussian_entropy(k)
    except SingularMatrixError:
        return -math.inf


def check_orderings(e: EnhancedInstance, tol: float = 1e-8) -> CheckReport:
    """``0 <= Kt1 <= K1`` and ``Kt1 <= Kt2 <= K2`` via minimum-eigenvalue margins."""
    b = e.base
    pairs = {
        "ktz1_psd": e.ktz1,
        "kz1_minus_ktz1": b.kz1 - e.ktz1,
        "ktz2_minus_ktz1": e.ktz2 - e.ktz1,
        "kz2_minus_ktz2": b.kz2 - e.ktz2,
    }
    items = [CheckReport(name, status_of(mx.min_eig(m) >= -tol), mx.min_eig(m), None, "eig")
             for name, m in pairs.items()]
    return aggregate("enhancement-orderings", items, units="eig")


def check_proportionality(e: EnhancedInstance, tol: float = 1e-7) -> CheckReport:
    """``K* + Kt1 = (mu-1)^-1 (Kt2 - Kt1)`` and the matching entropy identity."""
    b = e.base
    if b.mu <= 1.0:
        raise PreconditionError("proportionality needs mu > 1 (for mu = 1 the enhanced objective is constant)")
    kx = e.kx
    kt = e.ktz2 - e.ktz1
    lhs = kx + e.ktz1
    res = float(np.linalg.norm(lhs - kt / (b.mu - 1.0)))
    inv_res = float(np.linalg.norm(mx.inv_pd(lhs) - b.mu * mx.inv_pd(kx + e.ktz2)))
    n = b.dim
    h_lhs = gaussian_entropy(lhs)
    h_rhs = _entropy_psd(kt) - 0.5 * n * math.log(b.mu - 1.0)
    ent_res = abs(h_lhs - h_rhs)
    items = [
        CheckReport("covariance-proportionality", status_of(res <= tol), tol - res, None, "frobenius",
                    {"residual": res}),
        CheckReport("inverse-proportionality", status_of(inv_res <= tol), tol - inv_res, None, "frobenius",
                    {"residual": inv_res}),
        CheckReport("entropy-identity", status_of(ent_res <= tol), tol - ent_res, None, "nats",
                    {"h_enhanced_output_nats": h_lhs, "h_difference_noise_shifted_nats": h_rhs}),
    ]
    return aggregate("enhancement-proportionality", items, units="mixed")


def check_value_equality(e: EnhancedInstance, tol: float = 1e-8) -> CheckReport:
    """The two matrix identities and equality of the original and enhanced objectives at ``K*``."""
    b = e.base
    kx = e.kx
    r1 = float(np.linalg.norm(mx.inv_pd(kx + e.ktz1) @ e.ktz1 - mx.inv_pd(kx + b.kz1) @ b.kz1))
    r2 = float(np.linalg.norm(mx.inv_pd(kx + e.ktz2) @ (b.s + e.ktz2)
                              - mx.inv_pd(kx + b.kz2) @ (b.s + b.kz2)))
    orig = gaussian_objective(kx, b)
    enh = e.objective(kx)
    r3 = abs(orig - enh)
    items = [
        CheckReport("identity-noise-1", status_of(r1 <= tol), tol - r1, None, "frobenius", {"residual": r1}),
        CheckReport("identity-noise-2", status_of(r2 <= tol), tol - r2, None, "frobenius", {"residual": r2}),
        CheckReport("objective-equality", status_of(r3 <= tol), tol - r3, None, "nats",
                    {"original_nats": orig, "enhanced_nats": enh}),
    ]
    return aggregate("enhancement-value-equality", items, units="mixed")


def check_epi_tightness(e: EnhancedInstance, rtol: float = 1e-9) -> CheckReport:
    """Entropy-power equality for ``(X* + Zt1) + Zt`` with ``K_Zt = Kt2 - Kt1`` (mu > 1)."""
    b = e.base
    if b.mu <= 1.0:
        raise PreconditionError("EPI tightness is only claimed for mu > 1")
    n = b.dim
    kx = e.kx
    lhs = math.exp(2.0 * gaussian_entropy(kx + e.ktz2) / n)
    rhs = math.exp(2.0 * gaussian_entropy(kx + e.ktz1) / n) + math.exp(2.0 * _entropy_psd(e.ktz2 - e.ktz1) / n)
    rel = abs(lhs - rhs) / lhs
    return CheckReport("epi-tightness", status_of(rel <= rtol), rtol - rel, None, "relative",
                       {"entropy_power_sum": lhs, "sum_of_entropy_powers": rhs})


def direct_proof_chain(e: EnhancedInstance, covariances: Sequence[Any], tol: float = 1e-7) -> CheckReport:
    """For Gaussian ``X`` with ``Cov(X) <= S``: obj_P(X) <= obj_enh(X) <= obj_enh(X*) = obj_P(X*)."""
    b = e.base
    top_enh = e.objective(e.kx)
    top_orig = gaussian_objective(e.kx, b)
    items = []
    for i, k in enumerate(covariances):
        k = mx.sym(k)
        if mx.loewner_margin(k, b.s) < -1e-9 or mx.min_eig(k) < -1e-9:
            raise PreconditionError(f"covariance {i} violates 0 <= K <= S")
        p = gaussian_objective(k, b)
        pt = e.objective(k)
        m1 = pt - p
        m2 = top_enh - pt
        m3 = -abs(top_enh - top_orig)
        margin = min(m1, m2, m3)
        items.append(CheckReport(f"candidate-{i}", status_of(margin >= -tol), margin, None, "nats",
                                 {"original_nats": p, "enhanced_nats": pt}))
    return aggregate("direct-proof-chain", items, optimum_original_nats=top_orig, optimum_enhanced_nats=top_enh)


def all_checks(e: EnhancedInstance) -> CheckReport:
    items = [check_orderings(e), check_value_equality(e)]
    if e.base.mu > 1.0:
        items += [check_proportionality(e), check_epi_tightness(e)]
    return aggregate("enhancement", items, units="mixed")
