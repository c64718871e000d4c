"""The thirteen acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line, printed in the terminal
summary (and immediately, when output capture is off).
"""

import json
import math
import time

import numpy as np
import pytest

from extremal import matrix as mx
from extremal.capacity import (BcInstance, DscInstance, bc_region_sweep, classical_degraded_r2,
                               dsc_separation_rates, dsc_weighted_bound)
from extremal.cli import main
from extremal.enhancement import check_orderings, check_proportionality, check_value_equality, enhance
from extremal.fisher import (cramer_rao_check, debruijn_check, fii_check, fisher_matrix, stam_optimal_a)
from extremal.instance import ExtremalInstance
from extremal.matrix import LOG_2PIE
from extremal.mixture import GaussianMixture
from extremal.solver import concavity_check, solve
from extremal.verify import (CounterexampleSpec, corollary_lv_threshold, counterexample_construct, path_check,
                             path_endpoint, skewed_full_instance, skewed_limit_value, skewed_objective,
                             standard_battery, theorem1_harness, trace_path)

import conftest
from conftest import random_pd, scalar


def record(num, ok, detail):
    line = f"acceptance {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES[num] = line
    print(line)
    assert ok, line


def grid_optimum(kz1, kz2, s, mu, step=1e-5):
    k = np.append(np.arange(0.0, s, step), s)
    v = 0.5 * np.log(k + kz1) - 0.5 * mu * np.log(k + kz2)
    i = int(np.argmax(v))
    return k[i], float(v[i]) + 0.5 * (1.0 - mu) * LOG_2PIE


def random_scalar_instances(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        kz1, kz2, s = rng.uniform(0.1, 10.0, 3)
        out.append((kz1, kz2, s, rng.uniform(1.0, 10.0)))
    return out


@pytest.fixture(scope="module")
def scalar_runs():
    """Solver results for the 100 random scalar instances, with wall time."""
    cases = random_scalar_instances(100, 2024)
    t0 = time.perf_counter()
    sols = [solve(scalar(*c)) for c in cases]
    return cases, sols, time.perf_counter() - t0


def test_01_solver_matches_grid_oracle(scalar_runs):
    cases, sols, elapsed = scalar_runs
    worst = 0.0
    for c, sol in zip(cases, sols):
        _, val = grid_optimum(*c)
        worst = max(worst, abs(sol.objective - val))
    ok = worst <= 1e-8 and elapsed < 10.0
    record(1, ok, f"100 scalar instances, max |solve - grid| = {worst:.2e} (tol 1e-8), "
                  f"solver time {elapsed:.2f} s (limit 10 s)")


def test_02_kkt_certification(scalar_runs):
    worked = [((1, 4, 3, 2), (2.0, 0.0, 0.0)), ((1, 4, 1, 2), (1.0, 0.0, 0.05)),
              ((1, 2, 1, 3), (0.0, 0.25, 0.0))]
    worst = 0.0
    for args, expect in worked:
        sol = solve(scalar(*args))
        got = (sol.kx[0, 0], sol.m1[0, 0], sol.m2[0, 0])
        worst = max(worst, max(abs(a - b) for a, b in zip(got, expect)))
    _, sols, _ = scalar_runs
    rng = np.random.default_rng(5)
    multi = [solve(ExtremalInstance(random_pd(rng, n), random_pd(rng, n), random_pd(rng, n, 0.1, 5),
                                    rng.uniform(1.0, 10.0))) for n in (2, 3, 4, 5) for _ in range(5)]
    residual = max(s.residual for s in sols + multi)
    certified = all(s.certified for s in sols + multi)
    ok = worst <= 1e-10 and residual < 1e-8 and certified
    record(2, ok, f"worked cases max error {worst:.1e} (tol 1e-10); {len(sols) + len(multi)} random "
                  f"instances max residual {residual:.1e} (tol 1e-8)")


def test_03_enhancement_identities():
    rng = np.random.default_rng(33)
    order_m, prop_r, lemma_r = math.inf, 0.0, 0.0
    for i in range(100):
        n = 1 + i % 5
        inst = ExtremalInstance(random_pd(rng, n), random_pd(rng, n), random_pd(rng, n, 0.1, 5),
                                rng.uniform(1.01, 10.0))
        e = enhance(inst, solve(inst))
        order_m = min(order_m, check_orderings(e).margin)
        prop = check_proportionality(e, tol=1e-7)
        prop_r = max(prop_r, prop.items[0].details["residual"])
        val = check_value_equality(e, tol=1e-8)
        lemma_r = max(lemma_r, val.items[0].details["residual"], val.items[1].details["residual"])
    e1 = enhance(scalar(1, 4, 1, 2), solve(scalar(1, 4, 1, 2)))
    e2 = enhance(scalar(1, 2, 1, 3), solve(scalar(1, 2, 1, 3)))
    worked = max(abs(e1.ktz1[0, 0] - 1), abs(e1.ktz2[0, 0] - 3), abs(e2.ktz1[0, 0] - 2 / 3), abs(e2.ktz2[0, 0] - 2))
    ok = order_m >= -1e-8 and prop_r <= 1e-7 and lemma_r <= 1e-8 and worked <= 1e-10
    record(3, ok, f"min ordering margin {order_m:.1e}, proportionality {prop_r:.1e}, "
                  f"value identities {lemma_r:.1e}, worked cases {worked:.1e}")


def test_04_theorem1_battery():
    rng = np.random.default_rng(44)
    t0 = time.perf_counter()
    reports = []
    for i in range(4):
        inst = scalar(*random_scalar_instances(1, 400 + i)[0])
        reports.append((1, theorem1_harness(inst, standard_battery(inst, seed=i))))
    for i in range(8):
        inst = ExtremalInstance(random_pd(rng, 2), random_pd(rng, 2), random_pd(rng, 2, 0.2, 4),
                                rng.uniform(1.0, 6.0))
        reports.append((2, theorem1_harness(inst, standard_battery(inst, seed=100 + i))))
    elapsed = time.perf_counter() - t0
    items = [(n, it) for n, rep in reports for it in rep.items]
    violations = [it for _, it in items if it.margin < -3.0 * it.stderr]
    se_1d = max(it.stderr for n, it in items if n == 1)
    ok = len(items) == 100 and not violations and se_1d <= 1e-4 and elapsed < 300
    worst = min(it.margin for _, it in items)
    record(4, ok, f"{len(items)} pairs, {len(violations)} violations, min margin {worst:.2e}, "
                  f"max 1-D stderr {se_1d:.1e}, {elapsed:.1f} s")


def test_05_perturbation_path():
    inst = scalar(1, 4, 3, 2)
    pts = trace_path(GaussianMixture.symmetric_pair(1.0, 0.5), inst)
    rep = path_check(pts, path_endpoint(inst))
    by = {it.name: it for it in rep.items}
    ok = len(pts) == 11 and by["monotone"].passed and by["derivative"].passed
    record(5, ok, f"11-point grid: monotone margin {by['monotone'].margin:.2e}, "
                  f"derivative agreement margin {by['derivative'].margin:.2e}, status {rep.status}")


def _random_scalar_mixture(rng):
    k = int(rng.integers(1, 4))
    return GaussianMixture(rng.dirichlet(np.ones(k)), rng.normal(0, 1.5, (k, 1)), rng.uniform(0.2, 2.0, (k, 1, 1)))


def test_06_fisher_suite():
    k = np.array([[2.0, 0.4], [0.4, 1.0]])
    exact_err = float(np.max(np.abs(fisher_matrix(GaussianMixture.gaussian(k)).j - np.linalg.inv(k))))
    rng = np.random.default_rng(66)
    mixtures = [_random_scalar_mixture(rng) for _ in range(10)]
    mixtures.append(GaussianMixture.symmetric_pair(0.7, 0.5).product(GaussianMixture.symmetric_pair(1.0, 1.0)))
    crb_min = min(cramer_rao_check(m).margin for m in mixtures)
    strict = cramer_rao_check(GaussianMixture.symmetric_pair(1.0, 1.0))
    fii_min = math.inf
    for i in range(50):
        u, v = _random_scalar_mixture(rng), _random_scalar_mixture(rng)
        fii_min = min(fii_min, fii_check(u, v, rng.uniform(-1.0, 2.0)).margin)
    gu, gv = GaussianMixture.gaussian([[1.0]]), GaussianMixture.gaussian([[3.0]])
    a = stam_optimal_a([[1.0]], [[1 / 3]])
    stam = fii_check(gu, gv, a)
    ok = (exact_err < 1e-12 and crb_min >= -1e-9 and strict.margin > 3 * strict.stderr
          and fii_min >= -1e-9 and abs(stam.margin) < 1e-9 and abs(a[0, 0] - 0.25) < 1e-15)
    record(6, ok, f"Gaussian J error {exact_err:.1e}; CR min margin {crb_min:.2e}; +-1 mixture margin "
                  f"{strict.margin:.3f} > 3se {3 * strict.stderr:.1e}; FII min margin {fii_min:.2e} over 50 "
                  f"triples; Stam gap {abs(stam.margin):.1e}")


def test_07_de_bruijn():
    g = debruijn_check(GaussianMixture.gaussian([[1.0]]), [[1.0]], 1.0)
    gerr = max(abs(g.details["lhs_nats"] - 0.25), abs(g.details["rhs_nats"] - 0.25))
    m = debruijn_check(GaussianMixture.symmetric_pair(1.0, 0.5), [[1.0]], 0.5)
    mgap = m.details["gap_nats"]
    ok = gerr <= 1e-10 and g.passed and m.passed and mgap <= 3 * m.stderr + 1e-10
    record(7, ok, f"Gaussian both sides 0.25 within {gerr:.1e}; mixture gap {mgap:.1e} "
                  f"(3se = {3 * m.stderr:.1e})")


def test_08_counterexample():
    t0 = time.perf_counter()
    rep = counterexample_construct(CounterexampleSpec([[1.0]], [[1.0]], [[1.0]], 0.6))
    elapsed = time.perf_counter() - t0
    w = rep.details["witness"]
    ok = (rep.passed and abs(w["match_error_nats"]) < 1e-4 and w["gap_nats"] > 3 * w["gap_stderr_nats"]
          and elapsed < 120)
    record(8, ok, f"witness m={w['m']}, v={w['v']:.6f}: match {w['match_error_nats']:.1e}, gap "
                  f"{w['gap_nats']:.3e} > 3se {3 * w['gap_stderr_nats']:.1e}, {elapsed:.2f} s")


def test_09_broadcast_region():
    deg = BcInstance([[1.0]], [[3.0]], [[5.0]])
    pts = bc_region_sweep(deg, 33)
    region_err = max(abs(p.r2 - classical_degraded_r2(deg, p.r1)) for p in pts)
    eq = BcInstance([[2.0]], [[2.0]], [[3.0]])
    eq_pts = bc_region_sweep(eq, 33)
    sum_err = max(abs(p.r1 + p.r2 - 0.5 * math.log(1 + 3.0 / 2.0)) for p in eq_pts)
    ach_err = max(abs(p.weighted_sum - p.bound) for p in pts + eq_pts)
    ok = len(pts) == 33 and region_err <= 1e-6 and sum_err <= 1e-9 and ach_err <= 1e-9
    record(9, ok, f"33 points vs classical region {region_err:.1e} (tol 1e-6); equal-noise sum rate "
                  f"{sum_err:.1e}; achievability vs bound {ach_err:.1e} (tol 1e-9)")


def test_10_distributed_source_coding():
    inst = DscInstance([[3.0]], [[2.0]], [[0.5]])
    b = dsc_weighted_bound(inst, 1.0, 1.0)
    rates = dsc_separation_rates(inst, b.k)
    err = abs(b.value - 0.5 * math.log(6.0))
    meet = abs(rates.weighted_sum - b.value)
    bite = dsc_weighted_bound(DscInstance([[3.0]], [[2.0]], [[4.0]]), 1.0, 1.0).bite
    ok = err <= 1e-9 and not b.bite and meet <= 1e-9 and bite
    record(10, ok, f"bound {b.value:.9f} (error {err:.1e}), no bite; separation rates meet bound within "
                   f"{meet:.1e}; D=4 bite flag {bite}")


def test_11_concavity_in_s():
    worked = concavity_check([[1.0]], [[4.0]], 2.0, [[1.0]], [[3.0]], 0.5)
    rng = np.random.default_rng(111)
    slacks = [worked.slack]
    for _ in range(25):
        kz1, kz2, s1, s2 = rng.uniform(0.1, 10.0, 4)
        slacks.append(concavity_check([[kz1]], [[kz2]], rng.uniform(1, 10), [[s1]], [[s2]], 0.5).slack)
    for _ in range(25):
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        rot = lambda v: (q * v) @ q.T
        rep = concavity_check(rot(rng.uniform(0.1, 5, 2)), rot(rng.uniform(0.1, 5, 2)), rng.uniform(1, 6),
                              rot(rng.uniform(0.1, 5, 2)), rot(rng.uniform(0.1, 5, 2)), 0.5)
        slacks.append(rep.slack)
    ok = min(slacks) >= -1e-7 and abs(worked.g_mid + 2.661392) < 1e-6 and \
        abs(0.5 * (worked.g1 + worked.g2) + 2.671598) < 1e-6 and worked.holds
    record(11, ok, f"{len(slacks) - 1} random triples + worked triple ({worked.g_mid:.6f} >= "
                   f"{0.5 * (worked.g1 + worked.g2):.6f}); min slack {min(slacks):.2e}")


def test_12_skewed_limit_and_threshold():
    value, _ = skewed_objective([1, 0], [0, 1], 1.0, 1.0, 2.0, np.eye(2))
    full = skewed_limit_value(skewed_full_instance([1, 0], [0, 1], 1.0, 1.0, 2.0, np.eye(2), 1e6))
    thr = corollary_lv_threshold(0.0, 1.0)
    ok = abs(full - value) <= 1e-3 and abs(value - 0.5 * math.log(2)) < 1e-9 and abs(thr - 1.765512) <= 1e-6 \
        and abs(thr - 0.5 * math.log(4 * math.pi * math.e)) <= 1e-9
    record(12, ok, f"skewed value {value:.9f}, full L=1e6 value {full:.9f} (gap {abs(full - value):.1e}); "
                   f"threshold {thr:.9f}")


def test_13_determinism(tmp_path):
    inst2 = {"kz1": mx.to_json(np.array([[1.0, 0.3], [0.3, 0.8]])), "kz2": mx.to_json(np.diag([3.0, 2.5])),
             "s": mx.to_json(np.array([[2.0, 0.2], [0.2, 1.0]])), "mu": 2.5}
    files = {
        "inst": inst2,
        "deg": {"kz1": 1, "kz2": 3, "s": 5},
        "pair": {"weights": [0.3, 0.7], "means": [[-1.0], [0.8]], "covs": [[[0.5]], [[1.2]]]},
    }
    for name, obj in files.items():
        (tmp_path / f"{name}.json").write_text(json.dumps(obj))
    p = lambda name: str(tmp_path / f"{name}.json")
    commands = {
        "solve": ["solve", "--instance", p("inst")],
        "verify": ["verify-extremal", "--instance", p("inst"), "--battery", "std"],
        "bc": ["bc-region", "--instance", p("deg"), "--points", "9"],
        "mc": ["entropy-est", "--dist", p("pair"), "--kz", "1", "--method", "mc", "--samples", "100000"],
        "crb": ["crb-check", "--dist", p("pair"), "--method", "mc", "--samples", "50000"],
        "knn": ["entropy-est", "--dist", p("pair"), "--method", "knn", "--samples", "5000"],
    }
    mismatched = []
    for key, argv in commands.items():
        outputs = []
        for par in ("1", "4", "auto", "1"):
            out = tmp_path / f"{key}-{par}-{len(outputs)}.out"
            main(argv + ["--seed", "12345", "--parallelism", par, "--out", str(out)])
            outputs.append(out.read_bytes())
        if any(o != outputs[0] for o in outputs) or not outputs[0]:
            mismatched.append(key)
    ok = not mismatched
    record(13, ok, f"{len(commands)} commands x parallelism (1, 4, auto, 1 again): "
                   f"{'bit-identical' if ok else 'differ: ' + ', '.join(mismatched)}")
