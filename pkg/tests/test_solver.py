import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal import matrix as mx
from extremal.errors import PreconditionError
from extremal.instance import ExtremalInstance
from extremal.matrix import LOG_2PIE
from extremal.solver import (KktSolution, SolverConfig, concavity_check, gaussian_gradient,
                             gaussian_objective, kkt_residual, optimal_value, project_feasible,
                             recover_multipliers, solve)

from conftest import random_instance, random_pd, scalar


def scalar_grid(kz1, kz2, s, mu, step=1e-5):
    k = np.append(np.arange(0.0, s, step), s)
    v = 0.5 * np.log(k + kz1) - 0.5 * mu * np.log(k + kz2) + 0.5 * (1 - mu) * LOG_2PIE
    i = int(np.argmax(v))
    return k[i], v[i]


def test_objective_example():
    assert gaussian_objective([[2.0]], scalar(1, 4, 3, 2)) == pytest.approx(-2.661392, abs=1e-6)
    inst = scalar(1, 4, 3, 2)
    zero = gaussian_objective([[0.0]], inst)
    assert zero == pytest.approx(0.5 * (LOG_2PIE + 0.0) - (LOG_2PIE + math.log(4.0)), abs=1e-14)


def test_objective_identical_noise_is_zero():
    inst = ExtremalInstance(np.eye(2), np.eye(2), np.eye(2), 1.0)
    assert gaussian_objective(0.3 * np.eye(2), inst) == pytest.approx(0.0, abs=1e-14)


def test_gradient_examples():
    assert gaussian_gradient([[2.0]], scalar(1, 4, 3, 2))[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert gaussian_gradient([[1.0]], scalar(1, 4, 3, 2))[0, 0] == pytest.approx(0.05, abs=1e-15)
    inst = ExtremalInstance(np.eye(2), np.eye(2), np.eye(2), 1.0)
    assert np.allclose(gaussian_gradient(0.5 * np.eye(2), inst), 0.0)


@pytest.mark.parametrize("case", [
    ((1, 4, 3, 2), 2.0, 0.0, 0.0),
    ((1, 4, 1, 2), 1.0, 0.0, 0.05),
    ((1, 2, 1, 3), 0.0, 0.25, 0.0),
])
def test_worked_solutions(case):
    args, kx, m1, m2 = case
    sol = solve(scalar(*args))
    assert sol.certified
    assert sol.kx[0, 0] == pytest.approx(kx, abs=1e-10)
    assert sol.m1[0, 0] == pytest.approx(m1, abs=1e-10)
    assert sol.m2[0, 0] == pytest.approx(m2, abs=1e-10)
    assert sol.residual < 1e-10
    assert sol.objective == pytest.approx(gaussian_objective(sol.kx, scalar(*args)), abs=1e-14)


def test_recover_multipliers_examples():
    m1, m2 = recover_multipliers([[2.0]], scalar(1, 4, 3, 2))
    assert np.allclose(m1, 0) and np.allclose(m2, 0)
    m1, m2 = recover_multipliers([[1.0]], scalar(1, 4, 1, 2))
    assert m1[0, 0] == pytest.approx(0.0) and m2[0, 0] == pytest.approx(0.05)
    m1, m2 = recover_multipliers([[0.0]], scalar(1, 2, 1, 3))
    assert m1[0, 0] == pytest.approx(0.25) and m2[0, 0] == pytest.approx(0.0)


def _sol(kx, m1, m2):
    a = lambda v: np.array([[float(v)]])
    return KktSolution(a(kx), a(m1), a(m2), 0.0, 0.0, 0.0, 0.0)


def test_kkt_residual_examples():
    assert kkt_residual(_sol(2.0, 0, 0), scalar(1, 4, 3, 2)) < 1e-12
    assert kkt_residual(_sol(2.1, 0, 0), scalar(1, 4, 3, 2)) == pytest.approx(
        abs(0.5 / 3.1 - 1 / 6.1), abs=1e-12)
    assert kkt_residual(_sol(2.1, 0, 0), scalar(1, 4, 3, 2)) == pytest.approx(0.00264, abs=1e-5)
    assert kkt_residual(_sol(1.0, 0.05, 0.0), scalar(1, 4, 1, 2)) == pytest.approx(0.10, abs=1e-12)


def test_project_feasible_idempotent():
    rng = np.random.default_rng(3)
    s = random_pd(rng, 3)
    k = project_feasible(random_pd(rng, 3, 0.1, 10.0), s)
    assert mx.min_eig(k) >= -1e-12 and mx.loewner_margin(k, s) >= -1e-12
    assert np.allclose(project_feasible(k, s), k, atol=1e-12)


def test_constant_objective_tie_break():
    inst = ExtremalInstance(np.eye(2), np.eye(2), np.diag([1.0, 2.0]), 1.0)
    sol = solve(inst)
    assert np.allclose(sol.kx, inst.s)


def test_rank_deficient_s_requires_reduction():
    inst = ExtremalInstance(np.eye(2), 2 * np.eye(2), np.diag([1.0, 0.0]), 2.0)
    with pytest.raises(PreconditionError):
        solve(inst)


def test_matches_scalar_grid(oracle):
    for key, args in (("grid_inst_1_4_2_s1", (1, 4, 1, 2)), ("grid_inst_1_4_2_s3", (1, 4, 3, 2)),
                      ("grid_inst_1_2_3_s1", (1, 2, 1, 3))):
        kx, val = oracle[key]
        sol = solve(scalar(*args))
        assert sol.kx[0, 0] == pytest.approx(kx, abs=1e-4)
        assert sol.objective == pytest.approx(val, abs=1e-8)


def test_random_scalar_vs_grid():
    rng = np.random.default_rng(11)
    for _ in range(20):
        kz1, kz2, s = rng.uniform(0.1, 10, 3)
        mu = rng.uniform(1, 10)
        kx, val = scalar_grid(kz1, kz2, s, mu)
        sol = solve(scalar(kz1, kz2, s, mu))
        assert sol.certified
        assert abs(sol.kx[0, 0] - kx) < 1e-4
        assert sol.objective >= val - 1e-8
        assert sol.objective <= val + 1e-8


def test_commuting_2d_vs_grid():
    rng = np.random.default_rng(5)
    g = np.linspace(0.0, 1.0, 401)
    for _ in range(5):
        a1, a2, d = rng.uniform(0.2, 3, 2), rng.uniform(0.2, 3, 2), rng.uniform(0.2, 3, 2)
        mu = rng.uniform(1.1, 5)
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        rot = lambda v: (q * v) @ q.T
        inst = ExtremalInstance(rot(a1), rot(a2), rot(d), mu)
        best = 0.0
        for i in range(2):
            k = g * d[i]
            best += float(np.max(0.5 * np.log(k + a1[i]) - 0.5 * mu * np.log(k + a2[i])))
        best += (1 - mu) * LOG_2PIE
        sol = solve(inst)
        assert sol.certified
        assert sol.objective == pytest.approx(best, abs=1e-3)
        assert sol.objective >= best - 1e-10


def test_random_instances_certify_with_psd_multipliers():
    rng = np.random.default_rng(21)
    for n in (2, 3, 4, 5):
        for _ in range(3):
            inst = random_instance(rng, n)
            sol = solve(inst)
            assert sol.certified, sol.residual
            assert sol.residual < 1e-8
            assert mx.min_eig(sol.m1) >= -1e-9 and mx.min_eig(sol.m2) >= -1e-9
            assert mx.min_eig(sol.kx) >= -1e-9 and mx.loewner_margin(sol.kx, inst.s) >= -1e-9


def test_solve_deterministic_across_parallelism():
    inst = random_instance(np.random.default_rng(2), 3)
    a = solve(inst, SolverConfig(parallelism=1))
    b = solve(inst, SolverConfig(parallelism=4))
    assert np.array_equal(a.kx, b.kx) and a.objective == b.objective


def test_monotone_in_mu():
    rng = np.random.default_rng(9)
    for _ in range(5):
        base = random_instance(rng, 2)
        vals = [optimal_value(ExtremalInstance(base.kz1, base.kz2, base.s, mu))[0]
                for mu in (1.0, 1.5, 2.0, 4.0)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_concavity_worked_triple():
    rep = concavity_check([[1.0]], [[4.0]], 2.0, [[1.0]], [[3.0]], 0.5)
    assert rep.g_mid == pytest.approx(-2.661392, abs=1e-6)
    assert 0.5 * (rep.g1 + rep.g2) == pytest.approx(-2.671598, abs=1e-6)
    assert rep.holds


def test_concavity_endpoints_are_equalities():
    for t in (0.0, 1.0):
        rep = concavity_check([[1.0]], [[4.0]], 2.0, [[1.0]], [[3.0]], t)
        assert abs(rep.slack) < 1e-12
    rep = concavity_check([[1.0]], [[4.0]], 2.0, [[2.0]], [[2.0]], 0.3)
    assert abs(rep.slack) < 1e-12


def test_concavity_rejects_bad_args():
    with pytest.raises(PreconditionError):
        concavity_check([[1.0]], [[4.0]], 2.0, [[1.0]], [[3.0]], 1.5)
    with pytest.raises(PreconditionError):
        concavity_check([[1.0]], [[4.0]], 0.5, [[1.0]], [[3.0]], 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=1, max_value=5))
def test_gradient_matches_finite_differences(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n)
    k = random_pd(rng, n, 0.1, 2.0)
    g = gaussian_gradient(k, inst)
    h = 1e-5
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            fd = (gaussian_objective(k + h * e, inst) - gaussian_objective(k - h * e, inst)) / (2 * h)
            an = g[i, j] * (1.0 if i == j else 2.0)
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-9)
