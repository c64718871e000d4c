import math

import numpy as np
import pytest

from extremal.errors import QuadratureError
from extremal.quadrature import integrate_1d, integrate_2d


def test_1d_gaussian_mass():
    r = integrate_1d(lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), -12, 12, 1e-12)
    assert float(r.value) == pytest.approx(1.0, abs=1e-11)


def test_1d_vector_valued():
    r = integrate_1d(lambda x: np.vstack([x, x * x]), 0.0, 1.0, 1e-12)
    assert np.allclose(r.value, [0.5, 1 / 3], atol=1e-12)


def test_1d_bad_interval():
    with pytest.raises(ValueError):
        integrate_1d(np.sin, 1.0, 1.0)


def test_1d_refinement_cap():
    with pytest.raises(QuadratureError):
        integrate_1d(lambda x: np.sin(1e4 * x), 0.0, 1.0, 1e-14, max_panels=200)


def test_2d_gaussian_mass():
    def f(p):
        return np.exp(-0.5 * (p[:, 0] ** 2 + 2 * p[:, 1] ** 2)) * math.sqrt(2) / (2 * math.pi)

    r = integrate_2d(f, [-10, -8], [10, 8], 1e-10)
    assert float(r.value) == pytest.approx(1.0, abs=1e-9)
