"""Estimator settings shared by the entropy, Fisher and verification modules."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class EstimatorConfig:
    """``method`` is ``auto`` (quadrature for n <= 2, Monte Carlo above), ``quad`` or ``mc``."""

    method: str = "auto"
    quad_tol_1d: float = 1e-9
    quad_tol_2d: float = 1e-7
    window: float = 10.0
    mc_samples: int = 400_000
    mc_chunk: int = 1 << 15
    seed: int = 0
    parallelism: int | str = 1

    def with_(self, **kw) -> "EstimatorConfig":
        return replace(self, **kw)

    def use_quadrature(self, dim: int) -> bool:
        if self.method == "quad":
            if dim > 2:
                raise ValueError("quadrature is only available for dimension <= 2")
            return True
        if self.method == "mc":
            return False
        return dim <= 2


def resolve_workers(parallelism: int | str | None) -> int:
    if parallelism in (None, "auto", 0):
        return max(1, min(8, os.cpu_count() or 1))
    return max(1, int(parallelism))


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], parallelism: int | str = 1) -> list[R]:
    """``[fn(x) for x in items]``, possibly on a thread pool; results keep input order."""
    items = list(items)
    workers = resolve_workers(parallelism)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
