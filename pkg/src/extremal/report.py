"""Uniform pass/fail record returned by every numerical check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

_LN2 = math.log(2.0)


@dataclass
class CheckReport:
    """Outcome of one check.

    ``margin`` is oriented so that nonnegative means the claim holds;
    ``units`` names what margin and stderr are measured in (``nats`` for
    entropy-valued quantities, otherwise a plain descriptive tag) and is
    appended to their JSON field names.
    """

    name: str
    status: str
    margin: float | None = None
    stderr: float | None = None
    units: str = "nats"
    details: dict = field(default_factory=dict)
    items: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @property
    def failed(self) -> bool:
        return self.status == FAIL or any(i.failed for i in self.items)

    def to_json(self, bits: bool = False) -> dict:
        units = self.units
        scale = 1.0
        if bits and units == "nats":
            units, scale = "bits", 1.0 / _LN2
        out: dict[str, Any] = {"check": self.name, "status": self.status}
        if self.margin is not None:
            out[f"margin_{units}"] = _plain(self.margin * scale)
        if self.stderr is not None:
            out[f"stderr_{units}"] = _plain(self.stderr * scale)
        if self.details:
            out["details"] = _convert(self.details, bits)
        if self.items:
            out["items"] = [i.to_json(bits) for i in self.items]
        return out


def status_of(ok: bool) -> str:
    return PASS if ok else FAIL


def aggregate(name: str, items: list[CheckReport], units: str = "nats", **details) -> CheckReport:
    """Parent report whose margin is the worst child margin."""
    margins = [i.margin for i in items if i.margin is not None]
    status = FAIL if any(i.failed for i in items) else (
        INCONCLUSIVE if any(i.status == INCONCLUSIVE for i in items) else PASS)
    return CheckReport(name, status, min(margins) if margins else None, None, units, dict(details), items)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _convert(obj, bits: bool):
    """JSON-ready copy; keys ending in ``_nats`` are rescaled when ``bits`` is set."""
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if bits and isinstance(k, str) and k.endswith("_nats"):
                out[k[:-5] + "_bits"] = _convert(_scale(v, 1.0 / _LN2), False)
            else:
                out[k] = _convert(v, bits)
        return out
    if isinstance(obj, (list, tuple)):
        return [_convert(v, bits) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return _plain(obj)


def _scale(v, c):
    if isinstance(v, (list, tuple)):
        return [_scale(x, c) for x in v]
    if isinstance(v, np.ndarray):
        return v * c
    if isinstance(v, (int, float, np.floating)) and v is not None:
        return float(v) * c
    return v
