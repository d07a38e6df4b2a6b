import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlrspeckle.errors import AllZeroImage, NonPositivePixel
from nlrspeckle.image import NoiseSpec, apply_gamma_noise, clip_positive, from_log, gamma_noise, to_log

positive_images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                         elements=st.floats(1e-6, 1e6))


def test_to_log_examples():
    assert np.all(to_log(np.ones((3, 3))) == 0.0)
    assert np.allclose(to_log(np.full((2, 2), math.e)), 1.0, rtol=0, atol=1e-15)
    assert np.allclose(to_log([[2.0, 0.5]]), [[math.log(2), -math.log(2)]])


def test_to_log_rejects_nonpositive():
    with pytest.raises(NonPositivePixel, match=r"\(1, 0\)"):
        to_log([[1.0, 2.0], [0.0, 3.0]])


def test_from_log_examples():
    assert np.all(from_log(np.zeros((2, 3))) == 1.0)
    assert np.allclose(from_log(np.full((2, 2), math.log(255))), 255.0, rtol=0, atol=1e-10)


@given(positive_images)
def test_log_roundtrip(v):
    assert np.allclose(from_log(to_log(v)), v, rtol=1e-12, atol=0)


def test_clip_positive():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(clip_positive(a), a)
    b = np.array([[0.0, 255.0], [10.0, 0.0]])
    out = clip_positive(b, 1e-6)
    assert out[0, 0] == pytest.approx(255e-6, rel=1e-15) and out[1, 1] == out[0, 0] and out[1, 0] == 10.0
    with pytest.raises(AllZeroImage):
        clip_positive(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        clip_positive(a, 0.0)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(0)
    with pytest.raises(ValueError):
        NoiseSpec(2, -1)


def test_noise_is_deterministic():
    u = np.full((16, 16), 7.0)
    a = apply_gamma_noise(u, NoiseSpec(3, 99))
    b = apply_gamma_noise(u, NoiseSpec(3, 99))
    c = apply_gamma_noise(u, NoiseSpec(3, 100))
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_noise_is_sum_of_exponentials():
    # same stream, summed by hand
    spec = NoiseSpec(4, 5)
    rng = np.random.Generator(np.random.Philox(5))
    ref = sum(rng.standard_exponential(size=(8, 8)) for _ in range(4)) / 4
    assert np.allclose(gamma_noise((8, 8), spec), ref, rtol=1e-15)


def test_large_looks_mean():
    eta = gamma_noise((1000, 1000), NoiseSpec(10**6, 1))
    assert abs(eta.mean() - 1.0) < 0.01


def test_single_look_variance():
    eta = gamma_noise((1000, 1000), NoiseSpec(1, 2))
    assert abs(eta.var() - 1.0) < 0.02


@pytest.mark.parametrize("L", [1, 3, 5])
def test_scaled_mean(L):
    v = apply_gamma_noise(np.full((1000, 1000), 5.0), NoiseSpec(L, 3))
    assert abs(v.mean() - 5.0) < 3 * (5 / math.sqrt(L)) / 1e3
