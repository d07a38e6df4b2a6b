"""Block matching, patch extraction operators and the pixel weight matrix.

A patch group is stored in coordinate form: the top-left corners of its
``n`` member patches, reference patch first. Extracting a group from an
image gives an ``m x n`` matrix (``m = patch_side**2``) whose column ``l``
is member ``l`` read in row-major order. The adjoint scatter-adds columns
back, always patch by patch in member order, so accumulated images do not
depend on how work is split across threads.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ImageTooSmall, NonPositivePixel, UncoveredPixel
from .image import as_image, to_log

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BlockMatchConfig:
    """Block-matching settings.

    ``reference_stride`` defaults to ``patch_side // 2``. The search window is
    a square of side ``search_window`` centred on the reference patch's
    top-left corner (offsets ``-s//2 .. s - s//2 - 1``), clipped to the image.
    """

    looks: int
    search_window: int = 50
    patch_side: int = 9
    patches_per_group: int = 120
    reference_stride: int = None

    def __post_init__(self):
        if self.reference_stride is None:
            object.__setattr__(self, "reference_stride", max(1, self.patch_side // 2))
        if self.looks < 1:
            raise ValueError("looks must be >= 1")
        if self.patch_side < 1 or self.patches_per_group < 1 or self.reference_stride < 1:
            raise ValueError("patch_side, patches_per_group and reference_stride must be positive")
        if self.search_window < self.patch_side:
            raise ValueError("search_window must be at least patch_side")
        if self.patches_per_group < self.patch_size:
            raise ValueError("patches_per_group must be at least patch_side**2 (m <= n)")

    @property
    def patch_size(self):
        return self.patch_side * self.patch_side


@dataclass
class PatchGroup:
    group_id: int
    patch_side: int
    origins: np.ndarray = field(repr=False)  # (n, 2) int64 (row, col), reference first

    @property
    def m(self):
        return self.patch_side * self.patch_side

    @property
    def n(self):
        return len(self.origins)

    @property
    def reference(self):
        return tuple(int(c) for c in self.origins[0])


def patch_similarity(p, q, looks):
    """Speckle block distance ``(2L-1) * sum log(sqrt(p/q) + sqrt(q/p))``."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise DimensionMismatch(f"patch sizes differ: {p.size} vs {q.size}")
    if not (np.all(p > 0) and np.all(q > 0)):
        raise NonPositivePixel("patch similarity needs strictly positive pixels")
    r = np.sqrt(p / q)
    return float((2 * looks - 1) * np.sum(np.log(r + 1.0 / r)))


def _logcosh(z):
    # log(cosh z) without overflow; exactly 0 at z == 0
    t = np.abs(z)
    return np.where(t < 20.0, np.log(np.cosh(np.minimum(t, 20.0))), t - _LOG2)


def reference_positions(length, patch_side, stride):
    """Grid of reference origins along one axis, last one flush with the edge."""
    last = length - patch_side
    pos = list(range(0, last + 1, stride))
    if pos[-1] != last:
        pos.append(last)
    return np.array(pos, dtype=np.int64)


def _window_offsets(side):
    lo = -(side // 2)
    return np.arange(lo, lo + side, dtype=np.int64)


def block_match(estimate, cfg, threads=1):
    """Group similar patches of a positive intensity estimate.

    Returns one :class:`PatchGroup` per reference patch, in raster order of
    the references.
    """
    return block_match_log(to_log(estimate), cfg, threads=threads)


def block_match_log(log_estimate, cfg, threads=1):
    """:func:`block_match` on an image already in the log domain.

    Members are the reference itself followed by the ``n - 1`` candidates with
    the smallest distance; equal distances keep raster order of the candidate
    origin.
    """
    a = as_image(log_estimate)
    H, W = a.shape
    p = cfg.patch_side
    n = cfg.patches_per_group
    if H < p or W < p:
        raise ImageTooSmall(f"image {H}x{W} is smaller than patch side {p}")
    ry = reference_positions(H, p, cfg.reference_stride)
    rx = reference_positions(W, p, cfg.reference_stride)
    offs = _window_offsets(cfg.search_window)
    disp = np.stack(np.meshgrid(offs, offs, indexing="ij"), -1).reshape(-1, 2)
    ndisp = len(disp)

    # dist[iy, ix, k]: distance (less the constant m*log 2, and without the
    # 2L-1 factor) between reference (ry[iy], rx[ix]) and its k-th candidate
    dist = np.full((len(ry), len(rx), ndisp), np.inf)

    def work(ks):
        for k in ks:
            dy, dx = disp[k]
            y0, y1 = max(0, -dy), min(H - p, H - p - dy)
            x0, x1 = max(0, -dx), min(W - p, W - p - dx)
            if y1 < y0 or x1 < x0:
                continue
            iy = np.nonzero((ry >= y0) & (ry <= y1))[0]
            ix = np.nonzero((rx >= x0) & (rx <= x1))[0]
            if len(iy) == 0 or len(ix) == 0:
                continue
            # only the rows/cols spanned by usable references are needed
            ya, yb = ry[iy[0]], ry[iy[-1]]
            xa, xb = rx[ix[0]], rx[ix[-1]]
            t = _logcosh(0.5 * (a[ya:yb + p, xa:xb + p] - a[ya + dy:yb + p + dy, xa + dx:xb + p + dx]))
            c = np.zeros((t.shape[0] + 1, t.shape[1] + 1))
            np.cumsum(t, axis=0, out=c[1:, 1:])
            np.cumsum(c[1:, 1:], axis=1, out=c[1:, 1:])
            box = c[p:, p:] - c[:-p, p:] - c[p:, :-p] + c[:-p, :-p]
            dist[np.ix_(iy, ix, [k])] = box[np.ix_(ry[iy] - ya, rx[ix] - xa)][..., None]

    chunks = np.array_split(np.arange(ndisp), max(1, min(int(threads), ndisp)))
    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))

    k0 = int(np.flatnonzero((disp[:, 0] == 0) & (disp[:, 1] == 0))[0])
    dist[..., k0] = -1.0  # reference always first
    n_valid = np.isfinite(dist).sum(axis=2).min()
    if n_valid < n:
        raise ImageTooSmall(f"search window holds only {n_valid} candidates, {n} requested")
    order = np.argsort(dist, axis=2, kind="stable")[..., :n]
    chosen = disp[order]  # (ny, nx, n, 2)
    rows = ry[:, None, None] + chosen[..., 0]
    cols = rx[None, :, None] + chosen[..., 1]
    origins = np.stack([rows, cols], axis=-1).reshape(-1, n, 2)
    return [PatchGroup(j, p, origins[j]) for j in range(len(origins))]


def patch_offsets(patch_side, width):
    """Flat-index offsets of the pixels of a patch, row-major within the patch."""
    py, px = np.divmod(np.arange(patch_side * patch_side), patch_side)
    return py * width + px


def group_index(origins, patch_side, width):
    """Flat pixel indices of shape ``(..., m, n)`` for origins of shape ``(..., n, 2)``."""
    origins = np.asarray(origins, dtype=np.int64)
    base = origins[..., 0] * width + origins[..., 1]  # (..., n)
    return base[..., None, :] + patch_offsets(patch_side, width)[:, None]


def stack_origins(groups):
    """Origins of equally sized groups as one ``(J, n, 2)`` array."""
    return np.stack([g.origins for g in groups])


def _check_inside(group, shape):
    H, W = shape
    o = group.origins
    p = group.patch_side
    if o.min() < 0 or o[:, 0].max() > H - p or o[:, 1].max() > W - p:
        raise DimensionMismatch(f"group {group.group_id} does not fit in a {H}x{W} image")


def extract(x, group):
    """Patch matrix of ``x`` for ``group`` (``m x n``)."""
    x = as_image(x)
    _check_inside(group, x.shape)
    return x.ravel()[group_index(group.origins, group.patch_side, x.shape[1])]


def extract_adjoint(Y, group, accum):
    """Scatter-add the columns of ``Y`` into a copy of ``accum``."""
    accum = as_image(accum)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (group.m, group.n):
        raise DimensionMismatch(f"expected a {group.m}x{group.n} patch matrix, got {Y.shape}")
    _check_inside(group, accum.shape)
    idx = group_index(group.origins, group.patch_side, accum.shape[1])
    # transpose: accumulate patch by patch
    add = np.bincount(idx.T.ravel(), weights=Y.T.ravel(), minlength=accum.size)
    return accum + add.reshape(accum.shape)


def build_weight_matrix(groups, mu, shape):
    """Diagonal of ``W = sum_j mu_j R_j^T R_j`` as an image of per-pixel weights."""
    H, W = shape
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (len(groups),))
    diag = np.zeros(H * W)
    for g, m in zip(groups, mu):
        _check_inside(g, shape)
        idx = group_index(g.origins, g.patch_side, W)
        diag += m * np.bincount(idx.ravel(), minlength=H * W)
    diag = diag.reshape(H, W)
    if not np.all(diag > 0):
        r, c = np.argwhere(~(diag > 0))[0]
        raise UncoveredPixel(f"pixel ({r}, {c}) belongs to no patch group")
    return diag


def write_groups_csv(path, groups):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["group_id", "member_index", "row", "col"])
        for g in groups:
            for l, (r, c) in enumerate(g.origins):
                out.writerow([g.group_id, l, int(r), int(c)])


def read_groups_csv(path, patch_side):
    members = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            members.setdefault(int(row["group_id"]), []).append(
                (int(row["member_index"]), int(row["row"]), int(row["col"])))
    groups = []
    for gid in sorted(members):
        rows = sorted(members[gid])
        groups.append(PatchGroup(gid, patch_side, np.array([[r, c] for _, r, c in rows], dtype=np.int64)))
    return groups
