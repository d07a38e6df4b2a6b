"""Proximal alternating reweighted minimization for the nonlocal low-rank model.

The model, in the log domain ``x = log u``, is

    Phi(x, Y_1..Y_J) = tau f(x)
                       + sum_j [ mu/2 ||Y_j - R_j x||_F^2 + lam sum_i log(sigma_i(Y_j) + eps) ]

with ``f`` the weighted Exp fidelity of :mod:`nlrspeckle.fidelity` and
``R_j`` the extraction of patch group ``j``. Two drivers are provided:

* :func:`parm_fixed` keeps the groups fixed and adds the proximal term
  ``alpha/2 ||Y - Y^k||^2`` to every patch-matrix update;
* :func:`parm_practical` re-matches patches on the current estimate at every
  iteration and drops the ``alpha`` term.

All groups must share the same patch side and member count; they are then
stored as stacked arrays and processed in fixed-size chunks, so results do
not depend on the number of worker threads.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DimensionMismatch, ZeroWeight
from .fidelity import FidelityParams, ProxConfig, fidelity_value, prox_fidelity
from .image import as_image, clip_positive, to_log
from .lowrank import DEFAULT_EPS, center_columns, low_rank_update, reweight, svd, surrogate_value
from .patches import block_match_log, build_weight_matrix, group_index, stack_origins

#: Groups handled per work item. Fixed so that the summation order of the
#: aggregated image is the same for any thread count.
GROUP_CHUNK = 64

WEIGHT_INIT_MODES = ("signal", "unit", "denoised")


@dataclass(frozen=True)
class ModelParams:
    """Model weights; ``tau`` is the fidelity weight itself (not tau/beta)."""

    tau: float
    lam: float
    mu: float = 1.0
    rho: float = 1.5
    gamma: float = 1.9
    eps: float = DEFAULT_EPS
    center: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def fidelity(self):
        return FidelityParams(self.rho, self.gamma, self.tau)


@dataclass(frozen=True)
class AlgoParams:
    """Iteration constants.

    ``rel_tol`` is the floor of the relative-change stopping rule used by
    :func:`parm_fixed`; ``None`` always runs ``max_iters`` iterations.
    ``weight_init`` selects the initial reweighting vector: ``"signal"``
    (from the singular values of the initial patch matrices), ``"unit"``
    (all ones) or ``"denoised"`` (from singular values with the expected
    log-speckle energy removed).
    """

    beta: float = 1.001
    alpha: float = 0.001
    max_iters: int = 24
    rel_tol: Optional[float] = 1e-3
    weight_init: str = "signal"
    diagnostics: bool = False
    threads: int = 1
    prox: ProxConfig = field(default_factory=ProxConfig)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.weight_init not in WEIGHT_INIT_MODES:
            raise ValueError(f"weight_init must be one of {WEIGHT_INIT_MODES}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class SolverState:
    x: np.ndarray  # log image
    Y: np.ndarray  # (J, m, n) patch matrices
    w: np.ndarray  # (J, m) ascending weights
    k: int = 0


@dataclass
class IterationDiagnostics:
    k: int
    phi: float
    delta_z: float
    a_norm: float
    descent_ok: bool
    relerr_ok: bool
    phi_prev: float = math.nan
    relerr: float = math.nan


class GroupSet:
    """Equally sized patch groups with their pixel indices precomputed."""

    def __init__(self, groups, shape):
        if not groups:
            raise DimensionMismatch("at least one patch group is required")
        sides = {g.patch_side for g in groups}
        sizes = {g.n for g in groups}
        if len(sides) != 1 or len(sizes) != 1:
            raise DimensionMismatch("all groups must share patch side and member count")
        self.groups = list(groups)
        self.shape = tuple(shape)
        self.patch_side = sides.pop()
        self.idx = group_index(stack_origins(groups), self.patch_side, self.shape[1])  # (J, m, n)
        if self.idx.min() < 0 or self.idx.max() >= self.shape[0] * self.shape[1]:
            raise DimensionMismatch("patch groups do not fit the image")

    def __len__(self):
        return len(self.groups)

    @property
    def m(self):
        return self.idx.shape[1]

    @property
    def n(self):
        return self.idx.shape[2]

    def weights(self, mu):
        return build_weight_matrix(self.groups, mu, self.shape)

    def extract(self, x, sl=slice(None)):
        return np.asarray(x, dtype=np.float64).ravel()[self.idx[sl]]

    def adjoint(self, Y, sl=slice(None)):
        """``sum_j R_j^T Y_j`` over the groups in ``sl``, patch by patch."""
        idx = self.idx[sl]
        N = self.shape[0] * self.shape[1]
        acc = np.bincount(np.swapaxes(idx, -1, -2).ravel(), weights=np.swapaxes(Y, -1, -2).ravel(), minlength=N)
        return acc.reshape(self.shape)

    def chunks(self):
        J = len(self)
        return [slice(a, min(a + GROUP_CHUNK, J)) for a in range(0, J, GROUP_CHUNK)]


def _run_chunks(fn, chunks, threads):
    if threads <= 1 or len(chunks) == 1:
        return [fn(sl) for sl in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def trigamma_int(L):
    """psi'(L) for a positive integer ``L``: variance of log-speckle."""
    return math.pi**2 / 6.0 - sum(1.0 / k**2 for k in range(1, int(L)))


def initial_weights(Y, mode, eps=DEFAULT_EPS, center=True, looks=None):
    """Weights for the first low-rank update (see :class:`AlgoParams`)."""
    if mode == "unit":
        return np.ones(Y.shape[:-1])
    s = svd(center_columns(Y) if center else Y).s
    if mode == "denoised":
        if looks is None:
            raise ValueError("denoised weight initialisation needs the number of looks")
        s = np.sqrt(np.maximum(s**2 - Y.shape[-1] * trigamma_int(looks), 0.0))
    return reweight(s, eps)


def _sigma(Y, center):
    return svd(center_columns(Y) if center else Y).s


def objective(state, groups, v, W, model):
    """Phi at ``state``; singular values are those of the column-centred
    patch matrices when ``model.center`` is set."""
    gs = groups if isinstance(groups, GroupSet) else GroupSet(groups, np.shape(v))
    x = as_image(state.x)
    Y = np.asarray(state.Y, dtype=np.float64)
    if Y.shape != (len(gs), gs.m, gs.n):
        raise DimensionMismatch(f"patch matrices have shape {Y.shape}, expected {(len(gs), gs.m, gs.n)}")
    data = model.tau * fidelity_value(x, v, W, model.fidelity)
    coupling = 0.5 * model.mu * np.sum((Y - gs.extract(x)) ** 2)
    rank = model.lam * np.sum(surrogate_value(_sigma(Y, model.center), model.eps))
    return float(data + coupling + rank)


def _w_norm2(x, W):
    return float(np.sum(W * x * x))


def _x_update(x, agg_num, W, v, model, beta, prox_cfg):
    # x~ = x + (W^{-1} sum_j mu R_j^T Y_j - x) / (beta + 1), then the prox of f
    x_tilde = x + (agg_num / W - x) / (beta + 1.0)
    return prox_fidelity(x_tilde, v, W, model.fidelity, beta, prox_cfg)


def certificate(state_prev, state_next, groups, params, model=None, W=None, factors=None):
    """Subgradient certificate ``||A^{k+1}||`` and the constant ``c2``.

    ``params`` is an :class:`AlgoParams`; ``model`` the :class:`ModelParams`
    (required). ``factors`` may carry the ``(U, s, V)`` of the thresholded
    matrices from the update; otherwise they are recomputed.
    """
    if model is None:
        raise ValueError("certificate needs the model parameters")
    gs = groups if isinstance(groups, GroupSet) else GroupSet(groups, np.shape(state_prev.x))
    if W is None:
        W = gs.weights(model.mu)
    lam, mu, alpha, beta = model.lam, model.mu, params.alpha, params.beta
    x0, x1 = state_prev.x, state_next.x
    dx = x1 - x0
    a2 = beta**2 * _w_norm2(dx, W)

    if np.any(state_prev.w == 0):
        raise ZeroWeight("a reweighting entry is zero")
    if factors is None:
        Yc = center_columns(state_next.Y) if model.center else state_next.Y
        factors = svd(Yc)
    U, _, V = factors
    Rx0, Rx1 = gs.extract(x0), gs.extract(x1)
    dY = state_next.Y - state_prev.Y
    M = -alpha * dY - mu * (state_next.Y - Rx0)
    if lam > 0:
        d = np.einsum("jai,jab,jbi->ji", U, M, V) / lam
        d_tilde = d / state_prev.w * state_next.w
        corr = lam * (U * (d_tilde - d)[:, None, :]) @ np.swapaxes(V, -1, -2)
    else:
        corr = 0.0
    A_Y = mu * (Rx0 - Rx1) + corr - alpha * dY
    a2 += float(np.sum(A_Y**2))

    L_g = 1.0 / model.eps**2
    J = len(gs)
    c2 = max(beta + J * math.sqrt(mu), lam * gs.m * L_g + alpha)
    return math.sqrt(a2), c2


def delta_z(state_prev, state_next, W):
    return math.sqrt(_w_norm2(state_next.x - state_prev.x, W) + float(np.sum((state_next.Y - state_prev.Y) ** 2)))


def _limits(threads):
    # BLAS stays single-threaded: parallelism comes from group chunks only
    return threadpool_limits(limits=1, user_api="blas")


def parm_fixed(v, init, groups, model, params, looks=None, Y0=None, w0=None):
    """Algorithm with fixed patch groups and proximal terms on ``Y``.

    Parameters
    ----------
    v : ndarray
        Noisy intensity image (clipped to be positive internally).
    init : ndarray
        Positive initial intensity estimate; ``x^0 = log(init)``.
    groups : list of PatchGroup
        Fixed patch groups covering every pixel.
    model, params : ModelParams, AlgoParams

    Returns
    -------
    x : ndarray
        Final log-domain estimate.
    diags : list of IterationDiagnostics
        One entry per iteration; ``phi``, ``delta_z`` and ``a_norm`` are NaN
        unless ``params.diagnostics`` is set.
    """
    v = clip_positive(v)
    x = to_log(init)
    if x.shape != v.shape:
        raise DimensionMismatch(f"initial image {x.shape} and data {v.shape} differ")
    gs = GroupSet(groups, v.shape)
    W = gs.weights(model.mu)
    mu, alpha, beta = model.mu, params.alpha, params.beta
    den = mu + alpha
    diags = []
    with _limits(params.threads):
        Y = gs.extract(x) if Y0 is None else np.array(Y0, dtype=np.float64)
        w = initial_weights(Y, params.weight_init, model.eps, model.center, looks) if w0 is None else np.array(w0, dtype=np.float64)
        state = SolverState(x, Y, w, 0)
        phi = objective(state, gs, v, W, model) if params.diagnostics else math.nan
        c1 = 0.5 * min(beta, alpha)
        first_relerr = None

        for k in range(params.max_iters):
            def work(sl):
                target = (mu * gs.extract(state.x, sl) + alpha * state.Y[sl]) / den
                Yn, wn, fac = low_rank_update(target, model.lam / den, state.w[sl], model.center, model.eps, factors=True)
                return Yn, wn, fac, gs.adjoint(mu * Yn, sl)

            parts = _run_chunks(work, gs.chunks(), params.threads)
            Yn = np.concatenate([p[0] for p in parts])
            wn = np.concatenate([p[1] for p in parts])
            agg = np.zeros(v.shape)
            for p in parts:
                agg += p[3]
            xn = _x_update(state.x, agg, W, v, model, beta, params.prox)
            new = SolverState(xn, Yn, wn, k + 1)

            relerr = math.sqrt(_w_norm2(xn - state.x, W) / max(_w_norm2(state.x, W), 1e-300))
            if first_relerr is None:
                first_relerr = relerr
            threshold = None if params.rel_tol is None else max(params.rel_tol, 0.5 * first_relerr)
            relerr_ok = threshold is not None and relerr < threshold

            if params.diagnostics:
                factors = tuple(np.concatenate([p[2][i] for p in parts]) for i in range(3))
                phi_new = objective(new, gs, v, W, model)
                dz = delta_z(state, new, W)
                a_norm, _ = certificate(state, new, gs, params, model, W, factors)
                descent = phi - phi_new >= c1 * dz * dz and phi_new < phi
                diags.append(IterationDiagnostics(k + 1, phi_new, dz, a_norm, bool(descent), relerr_ok, phi, relerr))
                phi = phi_new
            else:
                diags.append(IterationDiagnostics(k + 1, math.nan, math.nan, math.nan, False, relerr_ok, math.nan, relerr))
            state = new
            if relerr_ok and k >= 1:
                break
    return state.x, diags


def parm_practical(v, model, params, match_cfg, init=None, rematch=True, w0=None):
    """Practical algorithm: patches re-matched on the current estimate every
    iteration, no proximal term on ``Y``.

    ``x^0 = log(clip_positive(v))`` unless ``init`` is given. With
    ``rematch=False`` the groups found on ``x^0`` are kept throughout.
    The initial reweighting is chosen by ``params.weight_init``.
    """
    v = clip_positive(v)
    x = to_log(v if init is None else init)
    if x.shape != v.shape:
        raise DimensionMismatch(f"initial image {x.shape} and data {v.shape} differ")
    mu, beta = model.mu, params.beta
    w = None if w0 is None else np.array(w0, dtype=np.float64)
    gs = None
    diags = []
    with _limits(params.threads):
        for k in range(params.max_iters):
            if gs is None or rematch:
                gs = GroupSet(block_match_log(x, match_cfg, threads=params.threads), v.shape)
                W = gs.weights(mu)
            if w is None:
                w = initial_weights(gs.extract(x), params.weight_init, model.eps, model.center, match_cfg.looks)

            def work(sl):
                Yn, wn = low_rank_update(gs.extract(x, sl), model.lam / mu, w[sl], model.center, model.eps)
                return Yn, wn, gs.adjoint(mu * Yn, sl)

            parts = _run_chunks(work, gs.chunks(), params.threads)
            w = np.concatenate([p[1] for p in parts])
            agg = np.zeros(v.shape)
            for p in parts:
                agg += p[2]
            xn = _x_update(x, agg, W, v, model, beta, params.prox)
            relerr = math.sqrt(_w_norm2(xn - x, W) / max(_w_norm2(x, W), 1e-300))
            if params.diagnostics:
                Yn = np.concatenate([p[0] for p in parts])
                phi = objective(SolverState(xn, Yn, w, k + 1), gs, v, W, model)
                dz = math.sqrt(_w_norm2(xn - x, W))
                diags.append(IterationDiagnostics(k + 1, phi, dz, math.nan, False,
                                                  params.rel_tol is not None and relerr < params.rel_tol,
                                                  math.nan, relerr))
            else:
                diags.append(IterationDiagnostics(k + 1, math.nan, math.nan, math.nan, False,
                                                  params.rel_tol is not None and relerr < params.rel_tol,
                                                  math.nan, relerr))
            x = xn
    return x, diags


DIAG_HEADER = ["k", "phi", "delta_z", "a_norm", "descent_ok", "relerr_ok"]


def write_diagnostics_csv(path, diags):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(DIAG_HEADER)
        for d in diags:
            out.writerow([d.k, repr(d.phi), repr(d.delta_z), repr(d.a_norm), int(d.descent_ok), int(d.relerr_ok)])
