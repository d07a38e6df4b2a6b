"""Intensity/log-domain transforms and L-look speckle synthesis.

Images are plain 2-D ``float64`` numpy arrays in row-major order. Intensity
images must be strictly positive before entering the log domain; use
:func:`clip_positive` on noisy data first.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroImage, NonPositivePixel

#: Looks above this use numpy's gamma sampler instead of summing exponentials.
EXACT_SUM_MAX_LOOKS = 64

#: Floor used on noisy inputs before the log transform.
DEFAULT_FLOOR_RATIO = 1e-6


@dataclass(frozen=True)
class NoiseSpec:
    """Number of looks ``L`` and the PRNG seed for speckle synthesis."""

    looks: int
    seed: int = 0

    def __post_init__(self):
        if int(self.looks) != self.looks or self.looks < 1:
            raise ValueError(f"looks must be a positive integer, got {self.looks}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def as_image(img):
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {a.shape}")
    return a


def to_log(img):
    """Componentwise natural log of a strictly positive intensity image."""
    a = as_image(img)
    if not np.all(a > 0):
        bad = tuple(int(i) for i in np.argwhere(~(a > 0))[0])
        raise NonPositivePixel(f"pixel {bad} is not strictly positive")
    return np.log(a)


def from_log(x):
    """Map a log-domain image back to intensities."""
    return np.exp(as_image(x))


def clip_positive(img, floor_ratio=DEFAULT_FLOOR_RATIO):
    """Raise every pixel to at least ``floor_ratio * max(img)``."""
    if floor_ratio <= 0:
        raise ValueError("floor_ratio must be positive")
    a = as_image(img)
    top = a.max()
    if top <= 0:
        raise AllZeroImage("image has no positive pixel")
    return np.maximum(a, floor_ratio * top)


def make_rng(seed):
    """The library's PRNG: numpy's Philox4x64 counter-based generator.

    Philox output depends only on (key, counter), so streams are identical on
    every platform numpy supports.
    """
    return np.random.Generator(np.random.Philox(int(seed)))


def gamma_noise(shape, spec):
    """Draw a field of Gamma(L, 1/L) variates (mean 1, variance 1/L).

    For ``L <= EXACT_SUM_MAX_LOOKS`` each variate is the mean of ``L``
    independent unit exponentials, accumulated one look at a time so that the
    result does not depend on memory layout.
    """
    rng = make_rng(spec.seed)
    L = int(spec.looks)
    if L > EXACT_SUM_MAX_LOOKS:
        return rng.standard_gamma(float(L), size=shape) / L
    total = np.zeros(shape)
    for _ in range(L):
        total += rng.standard_exponential(size=shape)
    return total / L


def apply_gamma_noise(u, spec):
    """Degrade ``u`` by multiplicative L-look speckle: ``v = u * eta``."""
    u = as_image(u)
    return u * gamma_noise(u.shape, spec)
