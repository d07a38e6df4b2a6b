"""Restoration quality measures: PSNR, SSIM, ENL and the ratio image."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, NonPositivePixel
from .image import as_image

PEAK = 255.0
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class Region:
    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.top < 0 or self.left < 0 or self.height < 1 or self.width < 1:
            raise ValueError(f"invalid region {self}")

    @classmethod
    def parse(cls, text):
        """From ``"r,c,h,w"``."""
        parts = [int(t) for t in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"region needs 4 integers r,c,h,w, got {text!r}")
        return cls(*parts)

    def crop(self, img):
        img = as_image(img)
        H, W = img.shape
        if self.top + self.height > H or self.left + self.width > W:
            raise DimensionMismatch(f"region {self} does not fit in a {H}x{W} image")
        return img[self.top:self.top + self.height, self.left:self.left + self.width]


def _pair(u, u_hat):
    u, u_hat = as_image(u), as_image(u_hat)
    if u.shape != u_hat.shape:
        raise DimensionMismatch(f"image shapes differ: {u.shape} vs {u_hat.shape}")
    return u, u_hat


def psnr(u, u_hat):
    """``10 log10(255^2 N / ||u - u_hat||^2)``; ``inf`` for identical images."""
    u, u_hat = _pair(u, u_hat)
    err = np.sum((u - u_hat) ** 2)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(PEAK**2 * u.size / err))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalised 1-D Gaussian taps; the 2-D window is their outer product."""
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(t**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation, 'valid' region only
    rows = sliding_window_view(img, len(g), axis=1) @ g
    return sliding_window_view(rows, len(g), axis=0) @ g


def ssim_map(u, u_hat, size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    u, u_hat = _pair(u, u_hat)
    if min(u.shape) < size:
        raise DimensionMismatch(f"image {u.shape} smaller than the {size}x{size} SSIM window")
    g = gaussian_window(size, sigma)
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mx = _filter_valid(u, g)
    my = _filter_valid(u_hat, g)
    sxx = _filter_valid(u * u, g) - mx * mx
    syy = _filter_valid(u_hat * u_hat, g) - my * my
    sxy = _filter_valid(u * u_hat, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(u, u_hat):
    """Mean SSIM over all 11x11 Gaussian-weighted windows (sigma 1.5, range 255)."""
    return float(np.mean(ssim_map(u, u_hat)))


def enl(img, region=None):
    """Equivalent number of looks ``mean^2 / var`` (population variance).

    Returns ``inf`` for a constant region.
    """
    a = as_image(img) if region is None else region.crop(img)
    var = np.var(a)
    if var == 0:
        return float("inf")
    return float(np.mean(a) ** 2 / var)


def ratio_image(u, u_hat):
    """Pointwise ``u / u_hat``."""
    u, u_hat = _pair(u, u_hat)
    if not np.all(u_hat > 0):
        raise NonPositivePixel("ratio image needs a strictly positive denominator")
    return u / u_hat
