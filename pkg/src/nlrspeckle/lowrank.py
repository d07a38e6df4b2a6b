"""Patch-matrix kernels: SVD, log surrogate of the rank, weighted SVT.

All functions accept a single ``m x n`` matrix (``m <= n``) or a stack of
them with leading batch dimensions; weight and singular-value vectors then
carry the same leading dimensions.
"""

from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NoConvergence

#: Default smoothing constant of the surrogate g(t) = log(t + eps).
DEFAULT_EPS = 1e-10

#: Singular values below this fraction of the largest one are set to zero.
SNAP_RATIO = 1e-12


class SvdFactors(NamedTuple):
    U: np.ndarray  # (..., m, m)
    s: np.ndarray  # (..., m), nonincreasing
    V: np.ndarray  # (..., n, m)


def svd(Y):
    """Thin SVD ``Y = U diag(s) V^T`` with tiny singular values snapped to 0."""
    Y = np.asarray(Y, dtype=np.float64)
    m, n = Y.shape[-2:]
    if m > n:
        raise DimensionMismatch(f"patch matrix must have m <= n, got {m}x{n}")
    try:
        U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    s = np.where(s < SNAP_RATIO * s[..., :1], 0.0, s)
    return SvdFactors(U, s, np.swapaxes(Vt, -1, -2))


def surrogate_value(sigma, eps=DEFAULT_EPS):
    """``sum_i log(sigma_i + eps)`` over the last axis."""
    return np.sum(np.log(np.asarray(sigma, dtype=np.float64) + eps), axis=-1)


def surrogate_grad(t, eps=DEFAULT_EPS):
    """Derivative of log(t + eps)."""
    return 1.0 / (np.asarray(t, dtype=np.float64) + eps)


def reweight(sigma, eps=DEFAULT_EPS):
    """Weights ``1 / (sigma_i + eps)``; ascending whenever ``sigma`` is sorted descending."""
    return surrogate_grad(sigma, eps)


def _threshold(Y, lam, w):
    U, s, V = svd(Y)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != s.shape[-1]:
        raise DimensionMismatch(f"weight vector has length {w.shape[-1]}, expected {s.shape[-1]}")
    shrunk = np.maximum(s - lam * w, 0.0)
    return U, shrunk, V


def _compose(U, s, V):
    return (U * s[..., None, :]) @ np.swapaxes(V, -1, -2)


def wsvt(Y, lam, w):
    """Weighted singular value thresholding ``U diag((s - lam*w)_+) V^T``.

    This is the proximity operator of ``lam * sum_i w_i sigma_i(.)`` when the
    weights are ascending.
    """
    return _compose(*_threshold(Y, lam, w))


def low_rank_update(target, threshold, w, center=True, eps=DEFAULT_EPS, factors=False):
    """One patch-matrix update: ``wsvt`` of ``target`` plus reweighting.

    For the proximal step ``Y+ = prox(mu R x + alpha Y) / (mu + alpha)`` pass
    ``target = (mu R x + alpha Y) / (mu + alpha)`` and
    ``threshold = lam / (mu + alpha)``.

    With ``center`` the mean of every column (patch) is removed before
    thresholding and restored afterwards.

    Returns the new matrix and the weights from its thresholded singular
    values; with ``factors=True`` also the ``(U, s, V)`` of the centred
    result.
    """
    T = np.asarray(target, dtype=np.float64)
    mean = T.mean(axis=-2, keepdims=True) if center else 0.0
    U, s, V = _threshold(T - mean, threshold, w)
    out = _compose(U, s, V) + mean
    w_next = reweight(s, eps)
    if factors:
        return out, w_next, SvdFactors(U, s, V)
    return out, w_next


def center_columns(Y):
    return Y - Y.mean(axis=-2, keepdims=True)
