"""Dense tensor primitives used by every coarse-graining routine.

Tensors are plain ``numpy.ndarray`` values of dtype float64. Index positions
follow numpy axis order; element layout is row-major over that order.

Every contraction goes through :func:`contract`, which permutes the operands
so the summed indices are adjacent, fuses them, performs a single matrix
product and splits the free indices back out. The summation order is fixed
by that fused layout, so repeated calls are bit-identical on one platform.
"""

from __future__ import annotations

import contextlib
from typing import NamedTuple, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import NumericError, ShapeError

__all__ = [
    "IndexPartition",
    "as_tensor",
    "contract",
    "deterministic",
    "ein",
    "frobenius_norm",
    "permute_reshape",
    "undo_permute_reshape",
    "svd_split",
    "torus_log_contraction",
    "truncated_eig",
]


class IndexPartition(NamedTuple):
    """Split of a tensor's index positions into row and column groups."""

    left: tuple[int, ...]
    right: tuple[int, ...]

    @classmethod
    def of(cls, rank: int, left: Sequence[int]) -> "IndexPartition":
        left = tuple(int(i) for i in left)
        right = tuple(i for i in range(rank) if i not in left)
        p = cls(left, right)
        p.validate(rank)
        return p

    def validate(self, rank: int) -> None:
        seen = list(self.left) + list(self.right)
        if sorted(seen) != list(range(rank)):
            raise ValueError(
                f"partition {self} is not an exact split of {rank} indices"
            )


def as_tensor(t, what: str = "tensor") -> np.ndarray:
    """Return ``t`` as a float64 array, rejecting NaN and Inf."""
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} contains non-finite entries")
    return arr


@contextlib.contextmanager
def deterministic():
    """Pin BLAS/LAPACK to one thread so no reduction is reassociated."""
    with threadpool_limits(limits=1):
        yield


def contract(a, b, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired indices of ``a`` and ``b``.

    The result carries the unpaired indices of ``a`` (in order) followed by
    the unpaired indices of ``b``.

    >>> contract(np.array([1.0, 2.0]), np.array([3.0, 4.0]), [(0, 0)])
    array(11.)
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ia = [int(p[0]) for p in pairs]
    ib = [int(p[1]) for p in pairs]
    if len(set(ia)) != len(ia) or len(set(ib)) != len(ib):
        raise ValueError(f"repeated index position in pairs {list(pairs)}")
    for i, j in zip(ia, ib):
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise ValueError(f"pair ({i}, {j}) out of range")
        if a.shape[i] != b.shape[j]:
            raise ShapeError(
                f"cannot pair index {i} (dim {a.shape[i]}) "
                f"with index {j} (dim {b.shape[j]})"
            )
    free_a = [i for i in range(a.ndim) if i not in ia]
    free_b = [j for j in range(b.ndim) if j not in ib]
    dims_a = [a.shape[i] for i in free_a]
    dims_b = [b.shape[j] for j in free_b]
    inner = int(np.prod([a.shape[i] for i in ia], dtype=np.int64))
    ma = a.transpose(free_a + ia).reshape(-1, inner)
    mb = b.transpose(ib + free_b).reshape(inner, -1)
    return (ma @ mb).reshape(dims_a + dims_b)


def ein(subscripts: str, a, b) -> np.ndarray:
    """Pairwise contraction written in einsum notation, e.g. ``"ijk,kl->lij"``.

    Labels shared by both operands are summed; the output order is whatever
    the right-hand side lists. Only two operands are accepted, so the caller
    fixes the contraction order explicitly.
    """
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    if len(sa) != np.ndim(a) or len(sb) != np.ndim(b):
        raise ShapeError(f"{subscripts!r} does not match operand ranks")
    if len(set(sa)) != len(sa) or len(set(sb)) != len(sb):
        raise ValueError(f"{subscripts!r}: traces within one operand unsupported")
    pairs = [(sa.index(c), sb.index(c)) for c in sa if c in sb]
    res = contract(a, b, pairs)
    labels = [c for c in sa if c not in sb] + [c for c in sb if c not in sa]
    if sorted(labels) != sorted(out):
        raise ValueError(f"{subscripts!r}: output labels do not match free labels")
    return res.transpose([labels.index(c) for c in out])


def permute_reshape(t, order: Sequence[int], groups: Sequence[Sequence[int]] | None = None):
    """Permute indices, then fuse runs of adjacent (post-permutation) indices.

    ``groups`` lists consecutive position runs covering ``0..rank-1`` in
    order, e.g. ``[(0, 1), (2,)]``. ``None`` means no fusion.
    """
    t = np.asarray(t, dtype=np.float64)
    order = [int(i) for i in order]
    if sorted(order) != list(range(t.ndim)):
        raise ValueError(f"{order} is not a permutation of {t.ndim} indices")
    p = t.transpose(order)
    if groups is None:
        return p.copy()
    flat = [int(i) for g in groups for i in g]
    if flat != list(range(t.ndim)) or any(len(g) == 0 for g in groups):
        raise ValueError(f"fusion groups {groups} are not adjacent runs")
    shape = [int(np.prod([p.shape[i] for i in g], dtype=np.int64)) for g in groups]
    return p.reshape(shape)


def undo_permute_reshape(m, order: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`permute_reshape` for a tensor of original shape ``dims``."""
    order = [int(i) for i in order]
    permuted_dims = [int(dims[i]) for i in order]
    inv = np.argsort(order)
    return np.asarray(m).reshape(permuted_dims).transpose(inv).copy()


def frobenius_norm(t) -> float:
    t = as_tensor(t)
    return float(np.sqrt(np.sum(t * t)))


def _fix_column_signs(u: np.ndarray) -> np.ndarray:
    """Sign per column so its first largest-magnitude entry is positive.

    Entries within a relative ``1e-8`` of the column maximum count as tied,
    so symmetry-related entries of equal magnitude do not let round-off pick
    the sign.
    """
    if u.size == 0:
        return np.ones(u.shape[1])
    mag = np.abs(u)
    idx = np.argmax(mag >= (1.0 - 1e-8) * mag.max(axis=0), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def svd_split(t, partition: IndexPartition | Sequence[int], max_rank: int):
    """Split ``t`` across ``partition`` with a rank-capped SVD.

    Returns ``(left, s, right)``: ``left`` has the left-group indices followed
    by the new bond, ``right`` the new bond followed by the right-group
    indices, and ``s`` the retained singular values in non-increasing order.
    ``left`` has orthonormal columns and ``right`` orthonormal rows, so
    ``left @ diag(s) @ right`` approximates ``t`` with squared Frobenius
    error equal to the sum of the discarded ``s**2``.
    """
    t = as_tensor(t)
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if not isinstance(partition, IndexPartition):
        partition = IndexPartition.of(t.ndim, partition)
    partition.validate(t.ndim)
    left, right = list(partition.left), list(partition.right)
    ldims = [t.shape[i] for i in left]
    rdims = [t.shape[i] for i in right]
    m = permute_reshape(t, left + right, [range(len(left)), range(len(left), t.ndim)])
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    k = min(int(max_rank), s.size)
    u, s, vh = u[:, :k], s[:k], vh[:k]
    signs = _fix_column_signs(u)
    u = u * signs
    vh = vh * signs[:, None]
    return u.reshape(ldims + [k]), s, vh.reshape([k] + rdims)


def truncated_eig(h, max_rank: int):
    """Dominant eigenvectors of a symmetric matrix.

    ``h`` is symmetrised as ``(h + h.T) / 2`` before decomposition. The full
    spectrum is returned sorted by descending magnitude (ties keep LAPACK's
    order); the isometry holds the leading ``min(max_rank, dim)`` eigenvectors
    as columns, each signed so its first largest-magnitude entry is positive.
    """
    h = as_tensor(h, "matrix")
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {h.shape}")
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    w, v = np.linalg.eigh(0.5 * (h + h.T))
    order = np.argsort(-np.abs(w), kind="stable")
    w, v = w[order], v[:, order]
    k = min(int(max_rank), w.size)
    y = v[:, :k]
    y = y * _fix_column_signs(y)
    return y, w


def torus_log_contraction(grid) -> float:
    """Natural log of the exact contraction of a periodic grid of 4-leg tensors.

    ``grid[r][c]`` has legs ``(left, up, right, down)``; ``right`` of column
    ``c`` joins ``left`` of column ``c + 1`` and ``down`` of row ``r`` joins
    ``up`` of row ``r + 1``, both wrapping around. Each row is folded into a
    transfer matrix between its up and down legs, so the cost grows as the
    product of the vertical bond dimensions of a row.
    """
    log_scale = 0.0
    prod = None
    for row in grid:
        acc = as_tensor(row[0])
        for t in row[1:]:
            t = as_tensor(t)
            nxt = contract(acc, t, [(2, 0)])  # l U D u r d
            nxt = nxt.transpose(0, 1, 3, 4, 2, 5)  # l U u r D d
            s = nxt.shape
            acc = nxt.reshape(s[0], s[1] * s[2], s[3], s[4] * s[5])
        if acc.shape[0] != acc.shape[2]:
            raise ShapeError("row does not close periodically")
        m = np.einsum("iuid->ud", acc)
        prod = m if prod is None else prod @ m
        peak = np.max(np.abs(prod))
        if peak == 0.0:
            raise NumericError("network contraction vanished")
        prod = prod / peak
        log_scale += float(np.log(peak))
    total = float(np.trace(prod))
    if not total > 0.0:
        raise NumericError(f"network contraction is non-positive ({total})")
    return float(np.log(total)) + log_scale
