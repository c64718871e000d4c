"""Stratified, counter-seeded Monte Carlo expectations under a Gaussian mixture.

Sample sizes are allocated to components in proportion to their weights,
and every (component, chunk) pair draws from its own generator seeded by
``SeedSequence([seed, component, chunk])``.  Chunk statistics are merged in
index order, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import numpy as np

from .config import EstimatorConfig, ordered_map
from .mixture import GaussianMixture

_SEED_MASK = (1 << 64) - 1


def allocate(weights: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder proportional allocation, at least two draws per component."""
    raw = weights * total
    base = np.floor(raw).astype(int)
    rem = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:rem]] += 1
    return np.maximum(base, 2)


def stratified_mean(m: GaussianMixture, stat, cfg: EstimatorConfig, want_score: bool = False):
    """Estimate ``E[stat(X)]`` with its standard error.

    ``stat(x, logpdf, score)`` maps a batch of ``N`` points to an array of
    shape ``(q, N)``.  Returns ``(mean, stderr)`` each of shape ``(q,)``.
    """
    counts = allocate(m.weights, int(cfg.mc_samples))
    chols = [np.linalg.cholesky(c) for c in m.covs]
    seed = int(cfg.seed) & _SEED_MASK
    tasks = []
    for i, cnt in enumerate(counts):
        for j, start in enumerate(range(0, cnt, cfg.mc_chunk)):
            tasks.append((i, j, min(cfg.mc_chunk, cnt - start)))

    def run(task):
        i, j, size = task
        rng = np.random.default_rng(np.random.SeedSequence([seed, i, j]))
        x = m.means[i] + rng.standard_normal((size, m.dim)) @ chols[i].T
        if want_score:
            lp, sc = m.logpdf_score(x)
        else:
            lp, sc = m.logpdf(x), None
        vals = np.atleast_2d(np.asarray(stat(x, lp, sc), dtype=float))
        mean = vals.mean(axis=1)
        m2 = ((vals - mean[:, None]) ** 2).sum(axis=1)
        return i, size, mean, m2

    per = {}
    for i, size, mean, m2 in ordered_map(run, tasks, cfg.parallelism):
        if i not in per:
            per[i] = (size, mean, m2)
            continue
        n_a, mean_a, m2_a = per[i]
        n = n_a + size
        delta = mean - mean_a
        per[i] = (n, mean_a + delta * size / n, m2_a + m2 + delta ** 2 * n_a * size / n)

    est = 0.0
    var = 0.0
    for i, w in enumerate(m.weights):
        n, mean, m2 = per[i]
        est = est + w * mean
        var = var + w ** 2 * (m2 / (n - 1)) / n
    return np.asarray(est), np.sqrt(np.asarray(var))
