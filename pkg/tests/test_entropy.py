import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal.config import EstimatorConfig
from extremal.entropy import (candidate_entropy_with_noise, combine, exact, gaussian_entropy, knn_entropy,
                              mixture_entropy, mutual_info_additive, uniform_plus_gaussian_entropy)
from extremal.errors import InputError, PreconditionError, SingularMatrixError
from extremal.mixture import GaussianMixture, UniformCandidate

H1 = 0.5 * math.log(2 * math.pi * math.e)


def test_gaussian_entropy_examples():
    assert gaussian_entropy([[1.0]]) == pytest.approx(1.418939, abs=1e-6)
    assert gaussian_entropy([[2.0]]) == pytest.approx(1.765512, abs=1e-6)
    assert gaussian_entropy(np.eye(2)) == pytest.approx(2.837877, abs=1e-6)
    with pytest.raises(SingularMatrixError):
        gaussian_entropy(np.zeros((2, 2)))


def test_combine_propagates_stderr():
    a = mixture_entropy(GaussianMixture.symmetric_pair(1.0, 1.0))
    e = combine([(1.0, exact(1.0)), (-2.0, a)])
    assert e.stderr == pytest.approx(2 * a.stderr)
    assert (exact(1.0) - exact(0.25)).value == 0.75


def test_mixture_entropy_examples(oracle):
    assert mixture_entropy(GaussianMixture.gaussian([[1.0]])).value == pytest.approx(H1, abs=1e-15)
    assert mixture_entropy(GaussianMixture.symmetric_pair(1e-4, 1.0)).value == pytest.approx(H1, abs=1e-7)
    far = mixture_entropy(GaussianMixture.symmetric_pair(10.0, 1.0))
    assert far.value == pytest.approx(2.112086, abs=1e-6)
    assert far.value == pytest.approx(oracle["h_pair_10_1"], abs=1e-8)
    pair = mixture_entropy(GaussianMixture.symmetric_pair(1.0, 1.0))
    assert pair.method == "quadrature" and pair.stderr <= 1e-4
    assert pair.value == pytest.approx(oracle["h_pair_1_1"], abs=1e-8)


def test_mixture_entropy_monte_carlo(oracle):
    cfg = EstimatorConfig(method="mc", mc_samples=1_000_000, seed=5)
    e = mixture_entropy(GaussianMixture.symmetric_pair(1.0, 1.0), cfg)
    assert e.method == "monte-carlo"
    assert abs(e.value - oracle["h_pair_1_1"]) < 3 * e.stderr + 1e-9


def test_mixture_entropy_2d_quadrature_vs_product():
    a = GaussianMixture.symmetric_pair(1.0, 1.0)
    b = GaussianMixture.gaussian([[2.0]])
    h = mixture_entropy(a.product(b))
    assert h.value == pytest.approx(mixture_entropy(a).value + gaussian_entropy([[2.0]]), abs=1e-6)


def test_monte_carlo_reproducible():
    cfg = EstimatorConfig(method="mc", mc_samples=50_000, seed=9)
    m = GaussianMixture.symmetric_pair(1.0, 1.0)
    assert mixture_entropy(m, cfg) == mixture_entropy(m, cfg)
    assert mixture_entropy(m, cfg) == mixture_entropy(m, cfg.with_(parallelism=4))


def test_uniform_plus_gaussian(oracle):
    e = uniform_plus_gaussian_entropy(3.0, 1.0, EstimatorConfig(quad_tol_1d=1e-10))
    assert e.value == pytest.approx(oracle["h_uniform3_noise1"], abs=1e-8)
    # entropy-power lower bound and the Gaussian (same variance) upper bound
    assert oracle["epi_lower_uniform3_noise1"] < e.value < gaussian_entropy([[4.0]])
    assert e.value > math.log(6.0)


def test_uniform_plus_gaussian_limits():
    assert uniform_plus_gaussian_entropy(1e-4, 1.0).value == pytest.approx(H1, abs=1e-8)
    assert uniform_plus_gaussian_entropy(0.5, 1e-8).value == pytest.approx(0.0, abs=1e-3)
    with pytest.raises(PreconditionError):
        uniform_plus_gaussian_entropy(-1.0, 1.0)


def test_candidate_with_noise_uniform_requires_scalar():
    with pytest.raises(PreconditionError):
        candidate_entropy_with_noise(UniformCandidate(1.0), np.eye(2))


def test_knn_examples():
    rng = np.random.default_rng(0)
    g = rng.standard_normal(100_000)
    e = knn_entropy(g)
    assert e.method == "knn" and abs(e.value - H1) < 0.02
    u = rng.uniform(0, 1, 100_000)
    assert abs(knn_entropy(u).value) < 0.02
    assert knn_entropy(2 * g).value - e.value == pytest.approx(math.log(2.0), abs=1e-9)


def test_knn_validation_and_duplicates():
    with pytest.raises(InputError):
        knn_entropy(np.zeros(10))
    x = np.repeat(np.random.default_rng(1).standard_normal(200), 2)
    assert "duplicates-jittered" in knn_entropy(x).flags


def test_mutual_information(oracle):
    mi = mutual_info_additive([[1.0]], [[1.0]])
    assert mi.value == pytest.approx(0.5 * math.log(2.0), abs=1e-14)
    pair = GaussianMixture.symmetric_pair(0.8, 0.36)
    mi_pair = mutual_info_additive(pair, [[1.0]])
    assert mi_pair.value == pytest.approx(oracle["mi_pair_08_036_noise1"], abs=1e-8)
    assert mi_pair.value >= 0.5 * math.log(2.0) - 3 * mi_pair.stderr


def test_mutual_information_needs_pd_noise():
    with pytest.raises(PreconditionError):
        mutual_info_additive([[1.0]], [[0.0]])


def test_estimator_cross_validation():
    rng = np.random.default_rng(12)
    for _ in range(3):
        m = GaussianMixture(rng.dirichlet(np.ones(3)), rng.normal(0, 1.5, (3, 1)),
                            rng.uniform(0.3, 2.0, (3, 1, 1)))
        q = mixture_entropy(m)
        mc = mixture_entropy(m, EstimatorConfig(method="mc", mc_samples=1_000_000, seed=1))
        kn = knn_entropy(m.sample(100_000, rng))
        assert abs(q.value - mc.value) < 3 * math.hypot(q.stderr, mc.stderr) + 1e-9
        assert abs(q.value - kn.value) < 3 * math.hypot(q.stderr, kn.stderr) + 0.01


scalar_mixtures = st.tuples(
    st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.1, 3))


def _mix(p):
    w, m1, m2, v1, v2 = p
    return GaussianMixture([w, 1 - w], [[m1], [m2]], [[[v1]], [[v2]]])


@settings(max_examples=20, deadline=None)
@given(scalar_mixtures, st.floats(-5, 5))
def test_max_entropy_and_translation(p, c):
    m = _mix(p)
    h = mixture_entropy(m)
    assert h.value <= gaussian_entropy(m.cov()) + 1e-9 + 3 * h.stderr
    assert abs(mixture_entropy(m.shift([c])).value - h.value) < 1e-8


@settings(max_examples=15, deadline=None)
@given(scalar_mixtures, st.floats(0.1, 3))
def test_entropy_power_inequality(p, kz):
    m = _mix(p)
    hx = mixture_entropy(m)
    hy = mixture_entropy(m.add_gaussian([[kz]]))
    lhs = math.exp(2 * hy.value)
    rhs = math.exp(2 * hx.value) + 2 * math.pi * math.e * kz
    assert lhs >= rhs * (1 - 6 * (hx.stderr + hy.stderr)) - 1e-9


def test_mutual_information_beats_matched_gaussian():
    x = GaussianMixture.symmetric_pair(1.0, 0.5)
    mi = mutual_info_additive(x, [[1.0]])
    matched = mutual_info_additive(x.cov(), [[1.0]])
    assert matched.value == pytest.approx(0.5 * math.log(2.5 / 1.5), abs=1e-14)
    assert mi.value >= matched.value - 3 * mi.stderr
