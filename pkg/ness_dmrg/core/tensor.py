"""
Tensor Kernel Module

This module provides dense labeled-index tensors together with pairwise
contraction and truncated matrix decompositions. Every network object in the
package is built from these primitives.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

logger = logging.getLogger("ness_dmrg.tensor")

# Singular values below this fraction of the largest one are always dropped.
SINGULAR_VALUE_FLOOR = 1e-14


class LabeledTensor:
    """
    Dense complex tensor whose indices are addressed by name.

    The data is laid out row-major over the label order and is read-only,
    so instances can be shared freely.
    """

    __slots__ = ("_labels", "_data")

    def __init__(self, data, labels: Sequence[str]):
        """
        Initialize a labeled tensor.

        Args:
            data: Array-like data whose rank equals the number of labels
            labels: Unique index names, one per axis
        """
        array = np.array(data, dtype=np.complex128)
        self._set(array, tuple(labels))

    @classmethod
    def _wrap(cls, array: np.ndarray, labels: Sequence[str]) -> "LabeledTensor":
        # Freshly computed arrays are adopted without a copy.
        tensor = cls.__new__(cls)
        tensor._set(np.asarray(array, dtype=np.complex128), tuple(labels))
        return tensor

    def _set(self, array: np.ndarray, labels: Tuple[str, ...]) -> None:
        if array.ndim != len(labels):
            raise ValueError(f"Got {len(labels)} labels for a rank-{array.ndim} array")
        if len(set(labels)) != len(labels):
            raise ValueError(f"Labels must be unique, got {labels}")
        if any(extent < 1 for extent in array.shape):
            raise ValueError(f"Index extents must be positive, got {array.shape}")
        array.flags.writeable = False
        self._labels = labels
        self._data = array

    @classmethod
    def from_flat(cls, flat, labels: Sequence[str], dims: Sequence[int]) -> "LabeledTensor":
        """
        Build a tensor from row-major flat data.

        Args:
            flat: One-dimensional data of length product(dims)
            labels: Index names
            dims: Extent of each index

        Returns:
            A new LabeledTensor
        """
        flat = np.asarray(flat, dtype=np.complex128).reshape(-1)
        if flat.size != int(np.prod(dims, dtype=np.int64)):
            raise ValueError(f"Data length {flat.size} does not match dims {tuple(dims)}")
        return cls(flat.reshape(tuple(dims)), labels)

    @classmethod
    def random(
        cls,
        labels: Sequence[str],
        dims: Sequence[int],
        rng: Optional[np.random.Generator] = None,
    ) -> "LabeledTensor":
        """Gaussian random complex tensor."""
        rng = rng if rng is not None else np.random.default_rng()
        shape = tuple(dims)
        return cls._wrap(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), labels)

    @property
    def labels(self) -> Tuple[str, ...]:
        return self._labels

    @property
    def dims(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view (or copy) of the data."""
        return self._data.reshape(-1)

    @property
    def rank(self) -> int:
        return len(self._labels)

    def dim(self, label: str) -> int:
        """Extent of the named index."""
        return self._data.shape[self._axis(label)]

    def _axis(self, label: str) -> int:
        try:
            return self._labels.index(label)
        except ValueError:
            raise ValueError(f"Unknown label '{label}', tensor has {self._labels}") from None

    def relabel(self, mapping: Dict[str, str]) -> "LabeledTensor":
        """
        Rename indices.

        Args:
            mapping: Old label to new label; labels not in the mapping are kept

        Returns:
            A tensor sharing the same data with renamed indices
        """
        for old in mapping:
            self._axis(old)
        return LabeledTensor._wrap(self._data, [mapping.get(label, label) for label in self._labels])

    def transpose(self, labels: Sequence[str]) -> "LabeledTensor":
        """Permute the indices into the given label order."""
        labels = tuple(labels)
        if sorted(labels) != sorted(self._labels):
            raise ValueError(f"Transpose labels {labels} do not match {self._labels}")
        axes = [self._axis(label) for label in labels]
        return LabeledTensor._wrap(np.ascontiguousarray(np.transpose(self._data, axes)), labels)

    def conj(self) -> "LabeledTensor":
        return LabeledTensor._wrap(np.conj(self._data), self._labels)

    def norm(self) -> float:
        return float(np.linalg.norm(self._data))

    def scalar(self) -> complex:
        """Value of a tensor with a single entry."""
        if self._data.size != 1:
            raise ValueError(f"Tensor with dims {self.dims} is not a scalar")
        return complex(self._data.reshape(-1)[0])

    def to_matrix(self, row_labels: Sequence[str]) -> np.ndarray:
        """
        Reshape into a matrix.

        Args:
            row_labels: Labels fused (in this order) into the row index; the
                remaining labels, in tensor order, form the column index

        Returns:
            A 2-D array
        """
        row_labels = tuple(row_labels)
        col_labels = tuple(label for label in self._labels if label not in row_labels)
        permuted = self.transpose(row_labels + col_labels)
        rows = int(np.prod([self.dim(label) for label in row_labels], dtype=np.int64))
        return permuted.data.reshape(rows, -1)

    def _aligned(self, other: "LabeledTensor") -> np.ndarray:
        if sorted(other.labels) != sorted(self._labels):
            raise ValueError(f"Cannot combine tensors with labels {self._labels} and {other.labels}")
        aligned = other.transpose(self._labels)
        if aligned.dims != self.dims:
            raise ValueError(f"Extent mismatch {self.dims} vs {aligned.dims}")
        return aligned.data

    def __add__(self, other: "LabeledTensor") -> "LabeledTensor":
        return LabeledTensor._wrap(self._data + self._aligned(other), self._labels)

    def __sub__(self, other: "LabeledTensor") -> "LabeledTensor":
        return LabeledTensor._wrap(self._data - self._aligned(other), self._labels)

    def __mul__(self, scalar: complex) -> "LabeledTensor":
        return LabeledTensor._wrap(self._data * complex(scalar), self._labels)

    __rmul__ = __mul__

    def __neg__(self) -> "LabeledTensor":
        return LabeledTensor._wrap(-self._data, self._labels)

    def __repr__(self) -> str:
        return f"LabeledTensor(labels={self._labels}, dims={self.dims})"


@dataclass(frozen=True)
class SvdResult:
    """Truncated singular value decomposition t = u . diag(s) . v."""

    u: LabeledTensor
    s: np.ndarray
    v: LabeledTensor
    discarded_weight: float

    @property
    def rank(self) -> int:
        return int(self.s.size)


def contract(
    a: LabeledTensor,
    b: LabeledTensor,
    pairs: Sequence[Tuple[str, str]],
) -> LabeledTensor:
    """
    Contract pairs of indices between two tensors.

    Args:
        a: First operand
        b: Second operand
        pairs: (label of a, label of b) pairs to sum over; empty gives the
            outer product

    Returns:
        Tensor carrying the uncontracted labels of a followed by those of b
    """
    axes_a, axes_b = [], []
    for label_a, label_b in pairs:
        axis_a = a._axis(label_a)
        axis_b = b._axis(label_b)
        if a.dims[axis_a] != b.dims[axis_b]:
            raise ValueError(
                f"Extent mismatch contracting '{label_a}' ({a.dims[axis_a]}) "
                f"with '{label_b}' ({b.dims[axis_b]})"
            )
        axes_a.append(axis_a)
        axes_b.append(axis_b)

    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ValueError(f"A label appears in more than one contraction pair: {list(pairs)}")

    free_a = [label for i, label in enumerate(a.labels) if i not in axes_a]
    free_b = [label for i, label in enumerate(b.labels) if i not in axes_b]
    out_labels = free_a + free_b
    if len(set(out_labels)) != len(out_labels):
        clashes = sorted({label for label in out_labels if out_labels.count(label) > 1})
        raise ValueError(f"Duplicate output label(s) {clashes}; relabel an operand first")

    data = np.tensordot(a.data, b.data, axes=(axes_a, axes_b))
    return LabeledTensor._wrap(data, out_labels)


def _split_labels(t: LabeledTensor, row_labels: Sequence[str], bond_label: str):
    row_labels = tuple(row_labels)
    if not row_labels or len(row_labels) >= t.rank:
        raise ValueError(f"Row labels {row_labels} must be a nonempty proper subset of {t.labels}")
    for label in row_labels:
        t._axis(label)
    if len(set(row_labels)) != len(row_labels):
        raise ValueError(f"Row labels repeat: {row_labels}")
    if bond_label in t.labels:
        raise ValueError(f"Bond label '{bond_label}' already names an index of {t.labels}")
    col_labels = tuple(label for label in t.labels if label not in row_labels)
    row_dims = tuple(t.dim(label) for label in row_labels)
    col_dims = tuple(t.dim(label) for label in col_labels)
    return row_labels, col_labels, row_dims, col_dims


def _robust_svd(matrix: np.ndarray):
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.debug("gesdd failed on a %s matrix, retrying with gesvd", matrix.shape)
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def truncation_rank(s: np.ndarray, max_rank: int, cutoff: float) -> int:
    """
    Number of singular values to keep.

    Args:
        s: Singular values in descending order
        max_rank: Upper bound on the kept count
        cutoff: Trailing values whose cumulative squared weight (relative to
            the total) stays below this are dropped

    Returns:
        A count between 1 and max_rank
    """
    if s.size == 0 or s[0] <= 0.0:
        return 1
    keep = int(np.count_nonzero(s > SINGULAR_VALUE_FLOOR * s[0]))
    keep = min(keep, max_rank)
    if cutoff > 0.0:
        weights = s ** 2 / np.sum(s ** 2)
        tail = np.cumsum(weights[::-1])[::-1]
        droppable = np.nonzero(tail < cutoff)[0]
        if droppable.size:
            keep = min(keep, int(droppable[0]))
    return max(keep, 1)


def svd_truncate(
    t: LabeledTensor,
    row_labels: Sequence[str],
    max_rank: int,
    cutoff: float = 0.0,
    bond_label: str = "bond",
) -> SvdResult:
    """
    Truncated SVD across a bipartition of the labels.

    Args:
        t: Tensor to decompose
        row_labels: Labels forming the row side (kept on u)
        max_rank: Maximum number of singular values kept
        cutoff: Relative discarded-weight threshold
        bond_label: Name of the new index joining u, s and v

    Returns:
        SvdResult with u labeled (row_labels..., bond) and v labeled
        (bond, remaining labels...)
    """
    if max_rank < 1:
        raise ValueError(f"max_rank must be at least 1, got {max_rank}")
    if cutoff < 0.0:
        raise ValueError(f"cutoff must be non-negative, got {cutoff}")
    row_labels, col_labels, row_dims, col_dims = _split_labels(t, row_labels, bond_label)

    u, s, vh = _robust_svd(t.to_matrix(row_labels))
    total = float(np.sum(s ** 2))
    keep = truncation_rank(s, max_rank, cutoff)
    discarded = float(np.sum(s[keep:] ** 2)) / total if total > 0.0 else 0.0

    return SvdResult(
        u=LabeledTensor._wrap(u[:, :keep].reshape(row_dims + (keep,)), row_labels + (bond_label,)),
        s=np.array(s[:keep], dtype=float),
        v=LabeledTensor._wrap(vh[:keep].reshape((keep,) + col_dims), (bond_label,) + col_labels),
        discarded_weight=min(max(discarded, 0.0), 1.0),
    )


def qr_split(
    t: LabeledTensor,
    row_labels: Sequence[str],
    bond_label: str = "bond",
) -> Tuple[LabeledTensor, LabeledTensor]:
    """
    Economic QR decomposition across a bipartition of the labels.

    Args:
        t: Tensor to decompose
        row_labels: Labels kept on the isometry q
        bond_label: Name of the new index joining q and r

    Returns:
        (q, r) with q labeled (row_labels..., bond) and r labeled
        (bond, remaining labels...)
    """
    row_labels, col_labels, row_dims, col_dims = _split_labels(t, row_labels, bond_label)
    q, r = scipy.linalg.qr(t.to_matrix(row_labels), mode="economic")
    # Non-negative diagonal on r, so isometric input comes back unchanged.
    diagonal = np.diag(r)
    phases = np.ones_like(diagonal)
    nonzero = np.abs(diagonal) > 0.0
    phases[nonzero] = diagonal[nonzero] / np.abs(diagonal[nonzero])
    q = q * phases[np.newaxis, :]
    r = np.conj(phases)[:, np.newaxis] * r
    rank = q.shape[1]
    return (
        LabeledTensor._wrap(q.reshape(row_dims + (rank,)), row_labels + (bond_label,)),
        LabeledTensor._wrap(r.reshape((rank,) + col_dims), (bond_label,) + col_labels),
    )
