from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import matrix as mx
from .errors import DimensionError, InputError, SingularMatrixError


@dataclass(frozen=True, eq=False)
class ExtremalInstance:
    """Data of ``max h(X+Z1) - mu h(X+Z2)`` subject to ``Cov(X) <= S``.

    ``mu >= 1`` is the regime where a Gaussian ``X`` is optimal; the type
    itself accepts any real ``mu`` so the degraded-case corollaries can reuse
    it.
    """

    kz1: np.ndarray
    kz2: np.ndarray
    s: np.ndarray
    mu: float

    def __post_init__(self):
        kz1, kz2, s = mx.sym(self.kz1), mx.sym(self.kz2), mx.sym(self.s)
        if not (kz1.shape == kz2.shape == s.shape):
            raise DimensionError(
                f"dimension mismatch: kz1 {kz1.shape}, kz2 {kz2.shape}, s {s.shape}"
            )
        for name, k in (("kz1", kz1), ("kz2", kz2)):
            if not mx.is_pd(k):
                raise SingularMatrixError(f"{name} must be strictly positive definite")
        if not mx.is_psd(s, 1e-12 * max(1.0, float(np.trace(s)))):
            raise InputError("s must be positive semidefinite")
        if not np.isfinite(self.mu):
            raise InputError("mu must be finite")
        object.__setattr__(self, "kz1", kz1)
        object.__setattr__(self, "kz2", kz2)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def dim(self) -> int:
        return self.s.shape[0]

    def with_s(self, s: Any) -> "ExtremalInstance":
        return ExtremalInstance(self.kz1, self.kz2, s, self.mu)

    def to_json(self) -> dict:
        return {
            "kz1": mx.to_json(self.kz1),
            "kz2": mx.to_json(self.kz2),
            "s": mx.to_json(self.s),
            "mu": self.mu,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExtremalInstance":
        missing = [k for k in ("kz1", "kz2", "s", "mu") if k not in obj]
        if missing:
            raise InputError(f"instance is missing field(s): {', '.join(missing)}")
        try:
            mu = float(obj["mu"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"field 'mu' is not a number: {obj['mu']!r}") from exc
        return cls(mx.from_json(obj["kz1"]), mx.from_json(obj["kz2"]), mx.from_json(obj["s"]), mu)
