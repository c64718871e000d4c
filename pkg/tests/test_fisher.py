import numpy as np
import pytest

from extremal.config import EstimatorConfig
from extremal.errors import PreconditionError
from extremal.fisher import (conditional_score, convolution_score_check, cramer_rao_check, debruijn_check,
                             fii_check, fisher_matrix, score, stam_optimal_a, stein_check)
from extremal.mixture import GaussianMixture

from conftest import random_pd
from test_mixture import random_mixture

PAIR = GaussianMixture.symmetric_pair(1.0, 1.0)
G = GaussianMixture.gaussian


def test_score_oracle(oracle):
    assert score(PAIR, 1.0)[0] == pytest.approx(oracle["score_pair_1_1_at_1"], abs=1e-14)


def test_gaussian_fisher_is_inverse_covariance():
    fm = fisher_matrix(G(np.diag([2.0, 4.0])))
    assert fm.method == "analytic-gaussian"
    assert np.allclose(fm.j, np.diag([0.5, 0.25]), rtol=0, atol=1e-15)


def test_pair_fisher_oracle(oracle):
    fm = fisher_matrix(PAIR)
    assert 0.5 < fm.j[0, 0] < 1.0
    assert fm.j[0, 0] == pytest.approx(oracle["j_pair_1_1"], abs=1e-8)


def test_pair_fisher_monte_carlo_agrees(oracle):
    fm = fisher_matrix(PAIR, EstimatorConfig(method="mc", mc_samples=200_000, seed=3))
    assert fm.method == "monte-carlo"
    assert abs(fm.j[0, 0] - oracle["j_pair_1_1"]) < 4 * fm.stderr_norm


def test_small_separation_tends_to_gaussian():
    fm = fisher_matrix(GaussianMixture.symmetric_pair(1e-4, 1.0))
    assert fm.j[0, 0] == pytest.approx(1.0, abs=1e-7)


def test_cramer_rao():
    assert cramer_rao_check(G([[2.0]])).margin == 0.0
    rep = cramer_rao_check(PAIR)
    assert rep.passed and rep.details["strict"]
    prod = PAIR.product(G([[1.0]]))
    rep2 = cramer_rao_check(prod)
    assert rep2.passed
    assert rep2.margin == pytest.approx(0.0, abs=1e-6)
    assert rep.margin > 0.05


@pytest.mark.parametrize("a,margin", [(0.25, 0.0), (0.0, 1 / 3 - 0.25), (1.0, 0.75)])
def test_fii_gaussian_examples(a, margin):
    rep = fii_check(G([[1.0]]), G([[3.0]]), a)
    assert rep.passed
    assert rep.margin == pytest.approx(margin, abs=1e-12)


def test_stam_optimal_a():
    assert stam_optimal_a([[1.0]], [[1 / 3]])[0, 0] == pytest.approx(0.25)


def test_fii_random_mixtures():
    rng = np.random.default_rng(8)
    for _ in range(5):
        u, v = random_mixture(rng, 1, 2), random_mixture(rng, 1, 2)
        a = rng.uniform(-0.5, 1.5)
        assert fii_check(u, v, a).passed
        # A = I: Fisher information cannot grow under independent addition
        assert fii_check(u, v, 1.0).margin >= -1e-9


def test_stein():
    assert stein_check(G(random_pd(np.random.default_rng(0), 2))).passed
    assert stein_check(PAIR).passed
    shifted = GaussianMixture([0.3, 0.7], [[2.0], [3.5]], [[[0.5]], [[1.2]]])
    rep = stein_check(shifted)
    assert rep.passed and rep.details["mean_score_norm"] < 1e-6


def test_stein_2d():
    assert stein_check(PAIR.product(GaussianMixture.symmetric_pair(0.5, 0.7))).passed


def test_debruijn_gaussian_exact():
    rep = debruijn_check(G([[1.0]]), [[1.0]], 1.0)
    assert rep.passed
    assert rep.details["rhs_nats"] == pytest.approx(0.25, abs=1e-12)
    assert abs(rep.details["lhs_nats"] - 0.25) < 1e-10
    rep = debruijn_check(G([[2.0]]), [[1.0]], 0.7)
    assert rep.details["rhs_nats"] == pytest.approx(1 / (2 * 2.7), abs=1e-12)


def test_debruijn_mixture(oracle):
    x = GaussianMixture.symmetric_pair(1.0, 0.5)
    rep = debruijn_check(x, [[1.0]], 0.5)
    assert rep.passed
    assert rep.details["rhs_nats"] == pytest.approx(oracle["debruijn_pair_1_05_t05_rhs"], abs=1e-8)


def test_debruijn_rejects_t_zero():
    with pytest.raises(PreconditionError):
        debruijn_check(PAIR, [[1.0]], 0.0)


def test_convolution_score():
    u, v = G([[1.0]]), G([[2.0]])
    assert np.allclose(conditional_score(u, v, [1.5]), [-0.5], atol=1e-9)
    assert conditional_score(PAIR, G([[1.0]]), [0.0])[0] == pytest.approx(0.0, abs=1e-12)
    assert convolution_score_check(PAIR, G([[1.0]]), points=[[1.0]]).passed
    assert convolution_score_check(PAIR, G([[1.0]])).passed


def test_conditional_score_rejects_high_dim():
    m = G(np.eye(3))
    with pytest.raises(PreconditionError):
        conditional_score(m, m, np.zeros(3))
