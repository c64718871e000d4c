"""Hot loops: Gaussian-mixture log-density and score on batches of points.

Quadrature grids and Monte Carlo batches evaluate a k-component mixture at
10^5 to 10^7 points, which dominates the runtime of the entropy and Fisher
estimators.  Two interchangeable backends compute the same thing:

* ``numba``: an ``@njit`` point loop with a streaming log-sum-exp, no
  temporaries of size ``k * N * n``;
* ``numpy``: broadcasting over components, the reference path.

The numba path is used when numba imports and the environment variable
``EXTREMAL_DISABLE_JIT`` is unset (or ``0``).  :func:`set_backend` switches at
runtime, which the tests and ``benchmarks/bench_kernels.py`` use.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

LOG_2PI = math.log(2.0 * math.pi)
# numpy path works on blocks of points to bound the (k, N, n) temporaries
_CHUNK = 1 << 15


def _env_disabled() -> bool:
    return os.environ.get("EXTREMAL_DISABLE_JIT", "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    prev, _backend = _backend, name
    return prev


def prepare(weights, means, covs):
    """Precompute per-component inverse Cholesky factors and log-normalizers."""
    weights = np.asarray(weights, dtype=float)
    means = np.ascontiguousarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    k, n = means.shape
    chol_inv = np.empty((k, n, n))
    log_c = np.empty(k)
    for i in range(k):
        c = np.linalg.cholesky(covs[i])
        chol_inv[i] = np.linalg.solve(c, np.eye(n))
        log_c[i] = math.log(weights[i]) - 0.5 * n * LOG_2PI - float(np.sum(np.log(np.diag(c))))
    return means, np.ascontiguousarray(chol_inv), log_c


def _logpdf_score_numpy(x, means, chol_inv, log_c, want_score):
    # z[i] = L_i^{-1} (x - m_i), shape (k, N, n)
    diff = x[None, :, :] - means[:, None, :]
    z = np.einsum("kab,knb->kna", chol_inv, diff)
    logs = log_c[:, None] - 0.5 * np.einsum("kna,kna->kn", z, z)
    top = np.max(logs, axis=0)
    e = np.exp(logs - top)
    tot = np.sum(e, axis=0)
    lp = top + np.log(tot)
    if not want_score:
        return lp, None
    resp = e / tot
    # K_i^{-1}(x - m_i) = L_i^{-T} z
    kinv_d = np.einsum("kba,knb->kna", chol_inv, z)
    score = -np.einsum("kn,kna->na", resp, kinv_d)
    return lp, score


if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _logpdf_score_numba(x, means, chol_inv, log_c, want_score):
        npts, n = x.shape
        k = means.shape[0]
        lp = np.empty(npts)
        score = np.zeros((npts, n)) if want_score else np.zeros((0, n))
        logs = np.empty(k)
        z = np.empty((k, n))
        d = np.empty(n)
        for p in range(npts):
            top = -np.inf
            for i in range(k):
                for a in range(n):
                    d[a] = x[p, a] - means[i, a]
                q = 0.0
                for a in range(n):
                    s = 0.0
                    for b in range(a + 1):
                        s += chol_inv[i, a, b] * d[b]
                    z[i, a] = s
                    q += s * s
                logs[i] = log_c[i] - 0.5 * q
                if logs[i] > top:
                    top = logs[i]
            tot = 0.0
            for i in range(k):
                logs[i] = math.exp(logs[i] - top)
                tot += logs[i]
            lp[p] = top + math.log(tot)
            if want_score:
                for i in range(k):
                    r = logs[i] / tot
                    for a in range(n):
                        s = 0.0
                        for b in range(a, n):
                            s += chol_inv[i, b, a] * z[i, b]
                        score[p, a] -= r * s
        return lp, score


def logpdf_score(x, prepared, want_score: bool = True):
    """Mixture log-density (and score) at the rows of ``x`` (shape ``(N, n)``)."""
    means, chol_inv, log_c = prepared
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, means.shape[1])
    if _backend == "numba":
        lp, score = _logpdf_score_numba(x, means, chol_inv, log_c, want_score)
        return lp, (score if want_score else None)
    if len(x) <= _CHUNK:
        return _logpdf_score_numpy(x, means, chol_inv, log_c, want_score)
    parts = [
        _logpdf_score_numpy(x[i:i + _CHUNK], means, chol_inv, log_c, want_score)
        for i in range(0, len(x), _CHUNK)
    ]
    lp = np.concatenate([p[0] for p in parts])
    return lp, (np.concatenate([p[1] for p in parts]) if want_score else None)
