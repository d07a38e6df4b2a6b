"""Exp-model data fidelity in the log domain and its weighted proximal map.

For a log image ``x`` and noisy intensities ``v`` the fidelity is

    f(x) = sum_i W_ii * (x_i + v_i exp(-x_i) + rho * (sqrt(exp(x_i) / v_i) - gamma)**2)

with ``W`` the diagonal pixel-weight matrix. ``W`` cancels in the weighted
gradient and in the weighted prox, which therefore act pixel by pixel.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ProxDivergence

#: Bound on rho * gamma**4 below which f is strictly convex.
CONVEXITY_BOUND = 4096.0 / 27.0

#: Half-width of the initial bracket around x_tilde used by bisection.
BRACKET_HALF_WIDTH = 20.0


@dataclass(frozen=True)
class FidelityParams:
    rho: float
    gamma: float
    tau: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.rho * self.gamma**4 > CONVEXITY_BOUND:
            warnings.warn(
                f"rho*gamma^4 = {self.rho * self.gamma**4:.4g} exceeds 4096/27; "
                "the fidelity may not be strictly convex",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def convex(self):
        return self.rho * self.gamma**4 <= CONVEXITY_BOUND


@dataclass(frozen=True)
class ProxConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    bisection_fallback: bool = True

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_newton_iters < 0:
            raise ValueError("max_newton_iters must be nonnegative")


def _check_dims(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise DimensionMismatch(f"shape {np.shape(a)} does not match {shape}")


def fidelity_terms(x, v, p):
    """Per-pixel fidelity before weighting."""
    r = np.sqrt(np.exp(x) / v)
    return x + v * np.exp(-x) + p.rho * (r - p.gamma) ** 2


def fidelity_value(x, v, W, p):
    """``f(x)`` with pixel weights ``W`` (the diagonal of the weight matrix)."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    _check_dims(x, v, W)
    return float(np.sum(W * fidelity_terms(x, v, p)))


def fidelity_grad(x, v, p):
    """W-weighted gradient ``1 - v e^{-x} + rho (e^x/v - gamma sqrt(e^x/v))``."""
    x = np.asarray(x, dtype=np.float64)
    q = np.exp(x) / v
    return 1.0 - v * np.exp(-x) + p.rho * (q - p.gamma * np.sqrt(q))


def _residual(x, xt, v, p, c):
    q = np.exp(x) / v
    return 1.0 - v * np.exp(-x) + p.rho * (q - p.gamma * np.sqrt(q)) + c * (x - xt)


def _slope(x, v, p, c):
    q = np.exp(x) / v
    return v * np.exp(-x) + p.rho * (q - 0.5 * p.gamma * np.sqrt(q)) + c


def prox_fidelity(x_tilde, v, W, p, beta_k, cfg=ProxConfig()):
    """Weighted proximal map of ``tau * f`` with step ``(beta_k + 1) / tau``.

    Solves, for every pixel, ``grad f(x) + ((beta_k + 1) / tau) (x - x_tilde) = 0``
    by Newton's method started at ``x_tilde``. A Newton step that leaves the
    current sign bracket, or does not shrink the residual, is replaced by a
    bisection step; pixels still unresolved after ``max_newton_iters`` are
    finished by plain bisection on ``[x_tilde - 20, x_tilde + 20]``.

    ``W`` only has to match in shape; being diagonal it cancels.
    """
    xt = np.asarray(x_tilde, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_dims(xt, v, W)
    c = (beta_k + 1.0) / p.tau
    # aim well below the requested tolerance so the check holds after rounding
    tol = 1e-2 * cfg.newton_tol

    x = xt.copy()
    lo = xt - BRACKET_HALF_WIDTH
    hi = xt + BRACKET_HALF_WIDTH
    with np.errstate(over="ignore", invalid="ignore"):
        if not (np.all(_residual(lo, xt, v, p, c) < 0) and np.all(_residual(hi, xt, v, p, c) > 0)):
            raise ProxDivergence("fidelity residual does not change sign on the bracket")
        phi = _residual(x, xt, v, p, c)
        active = np.abs(phi) > tol
        for _ in range(cfg.max_newton_iters):
            if not active.any():
                break
            xa, pa = x[active], phi[active]
            la, ha = lo[active], hi[active]
            # shrink the bracket with the sign of the current residual
            la = np.where(pa < 0, xa, la)
            ha = np.where(pa > 0, xa, ha)
            step = xa - pa / _slope(xa, v[active], p, c)
            bad = ~((step > la) & (step < ha))
            new = np.where(bad, 0.5 * (la + ha), step)
            pn = _residual(new, xt[active], v[active], p, c)
            # no progress: fall back to the bracket midpoint
            stuck = ~bad & (np.abs(pn) >= np.abs(pa))
            if stuck.any():
                new[stuck] = 0.5 * (la[stuck] + ha[stuck])
                pn[stuck] = _residual(new[stuck], xt[active][stuck], v[active][stuck], p, c)
            x[active], phi[active] = new, pn
            lo[active], hi[active] = la, ha
            active = np.abs(phi) > tol

        if active.any():
            if not cfg.bisection_fallback:
                raise ProxDivergence(f"Newton did not converge on {int(active.sum())} pixels")
            x[active] = _bisect(xt[active], v[active], p, c, tol)
    return x


def _bisect(xt, v, p, c, tol, max_iter=200):
    lo = xt - BRACKET_HALF_WIDTH
    hi = xt + BRACKET_HALF_WIDTH
    out = np.empty_like(xt)
    todo = np.ones(xt.shape, dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = _residual(mid, xt, v, p, c)
        # converged, or the bracket has shrunk to adjacent floats
        done = todo & ((np.abs(r) <= tol) | (mid <= lo) | (mid >= hi))
        out[done] = mid[done]
        todo &= ~done
        if not todo.any():
            return out
        lo = np.where(r < 0, mid, lo)
        hi = np.where(r > 0, mid, hi)
    raise ProxDivergence("bisection did not converge")
