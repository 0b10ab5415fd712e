"""
Matrix Product Module

This module defines open-boundary matrix product states and operators, their
canonical forms, inner products and exact operator algebra.

Site tensors carry fixed labels: ("left", "phys", "right") for states and
("left", "out", "in", "right") for operators.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ness_dmrg.core.tensor import LabeledTensor, contract, qr_split, svd_truncate

logger = logging.getLogger("ness_dmrg.mps")

LEFT = "left"
RIGHT = "right"
PHYS = "phys"
OUT = "out"
IN = "in"

STATE_LABELS = (LEFT, PHYS, RIGHT)
OPERATOR_LABELS = (LEFT, OUT, IN, RIGHT)


def _check_chain(tensors: Sequence[LabeledTensor], kind: str) -> None:
    if not tensors:
        raise ValueError(f"A {kind} needs at least one site")
    if tensors[0].dim(LEFT) != 1 or tensors[-1].dim(RIGHT) != 1:
        raise ValueError(f"{kind} boundary bonds must have extent 1")
    for i in range(len(tensors) - 1):
        if tensors[i].dim(RIGHT) != tensors[i + 1].dim(LEFT):
            raise ValueError(
                f"{kind} bond mismatch between sites {i + 1} and {i + 2}: "
                f"{tensors[i].dim(RIGHT)} vs {tensors[i + 1].dim(LEFT)}"
            )


class MatrixProductState:
    """
    Open-boundary chain of rank-3 tensors.

    When ortho_center is set to c (1-based), sites left of c are
    left-isometries and sites right of c are right-isometries.
    """

    def __init__(self, site_tensors: Sequence[LabeledTensor], ortho_center: Optional[int] = None):
        """
        Initialize a matrix product state.

        Args:
            site_tensors: One tensor per site with labels left, phys, right
            ortho_center: 1-based orthogonality center, or None if unknown
        """
        tensors = tuple(t.transpose(STATE_LABELS) for t in site_tensors)
        _check_chain(tensors, "MPS")
        if ortho_center is not None and not 1 <= ortho_center <= len(tensors):
            raise ValueError(f"Orthogonality center {ortho_center} outside 1..{len(tensors)}")
        self.site_tensors = tensors
        self.ortho_center = ortho_center

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray], ortho_center: Optional[int] = None) -> "MatrixProductState":
        """Build from (left, phys, right) arrays."""
        return cls([LabeledTensor(a, STATE_LABELS) for a in arrays], ortho_center)

    @classmethod
    def product_state(cls, vectors: Sequence[Sequence[complex]]) -> "MatrixProductState":
        """
        Bond-dimension-1 state from one local vector per site.

        Args:
            vectors: Local amplitudes for every site

        Returns:
            The product state
        """
        return cls.from_arrays([np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors])

    @classmethod
    def random(
        cls,
        phys_dims: Sequence[int],
        bond: int,
        rng: Optional[np.random.Generator] = None,
    ) -> "MatrixProductState":
        """
        Random complex state with bonds capped at the given dimension.

        Args:
            phys_dims: Local dimension of every site
            bond: Maximum bond dimension
            rng: Random generator (seeded by the caller for reproducibility)

        Returns:
            The random state
        """
        rng = rng if rng is not None else np.random.default_rng()
        length = len(phys_dims)
        cuts = [1]
        for k in range(1, length):
            left = int(np.prod(phys_dims[:k], dtype=np.int64))
            right = int(np.prod(phys_dims[k:], dtype=np.int64))
            cuts.append(min(bond, left, right))
        cuts.append(1)
        tensors = [
            LabeledTensor.random(STATE_LABELS, (cuts[i], phys_dims[i], cuts[i + 1]), rng)
            for i in range(length)
        ]
        return cls(tensors)

    @property
    def length(self) -> int:
        return len(self.site_tensors)

    @property
    def phys_dims(self) -> List[int]:
        return [t.dim(PHYS) for t in self.site_tensors]

    @property
    def bond_dims(self) -> List[int]:
        """Extents of the internal bonds."""
        return [t.dim(RIGHT) for t in self.site_tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def to_dense(self) -> np.ndarray:
        """Full state vector, site 1 being the most significant index."""
        first = self.site_tensors[0]
        acc = first.data.reshape(first.dim(PHYS), first.dim(RIGHT))
        for site in self.site_tensors[1:]:
            merged = contract(LabeledTensor._wrap(acc, ("acc", LEFT)), site, [(LEFT, LEFT)])
            acc = merged.data.reshape(-1, site.dim(RIGHT))
        return acc.reshape(-1)

    def scaled(self, factor: complex) -> "MatrixProductState":
        """State multiplied by a scalar (absorbed at the orthogonality center)."""
        index = (self.ortho_center or 1) - 1
        tensors = list(self.site_tensors)
        tensors[index] = tensors[index] * factor
        return MatrixProductState(tensors, self.ortho_center)

    def norm(self) -> float:
        return float(np.sqrt(max(inner(self, self).real, 0.0)))

    def normalized(self) -> "MatrixProductState":
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("Cannot normalize a zero state")
        return self.scaled(1.0 / norm)

    def is_canonical(self, center: int, tol: float = 1e-10) -> bool:
        """Check the isometry conditions around a candidate center."""
        for i, site in enumerate(self.site_tensors):
            if i + 1 < center:
                m = site.to_matrix((LEFT, PHYS))
            elif i + 1 > center:
                m = site.to_matrix((PHYS, RIGHT))
            else:
                continue
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=tol):
                return False
        return True

    def __repr__(self) -> str:
        return f"MatrixProductState(length={self.length}, bonds={self.bond_dims}, center={self.ortho_center})"


class MatrixProductOperator:
    """
    Open-boundary chain of rank-4 tensors labeled (left, out, in, right).
    """

    def __init__(self, site_tensors: Sequence[LabeledTensor], discarded_weight: float = 0.0):
        """
        Initialize a matrix product operator.

        Args:
            site_tensors: One tensor per site
            discarded_weight: Truncation weight dropped while producing it
        """
        tensors = tuple(t.transpose(OPERATOR_LABELS) for t in site_tensors)
        _check_chain(tensors, "MPO")
        for i, t in enumerate(tensors):
            if t.dim(OUT) != t.dim(IN):
                raise ValueError(f"MPO site {i + 1} has out extent {t.dim(OUT)} but in extent {t.dim(IN)}")
        self.site_tensors = tensors
        self.discarded_weight = float(discarded_weight)

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "MatrixProductOperator":
        """Build from (left, out, in, right) arrays."""
        return cls([LabeledTensor(a, OPERATOR_LABELS) for a in arrays])

    @classmethod
    def identity(cls, phys_dims: Sequence[int]) -> "MatrixProductOperator":
        return cls.from_arrays([np.eye(d).reshape(1, d, d, 1) for d in phys_dims])

    @classmethod
    def product_operator(cls, matrices: Sequence[np.ndarray]) -> "MatrixProductOperator":
        """Bond-dimension-1 operator from one local matrix per site."""
        arrays = [np.asarray(m, dtype=complex) for m in matrices]
        return cls.from_arrays([m.reshape(1, m.shape[0], m.shape[1], 1) for m in arrays])

    @property
    def length(self) -> int:
        return len(self.site_tensors)

    @property
    def phys_dims(self) -> List[int]:
        return [t.dim(OUT) for t in self.site_tensors]

    @property
    def bond_dims(self) -> List[int]:
        return [t.dim(RIGHT) for t in self.site_tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def to_dense(self) -> np.ndarray:
        """Full operator matrix, site 1 being the most significant index."""
        first = self.site_tensors[0]
        acc = first.data.reshape(first.dim(OUT), first.dim(IN), first.dim(RIGHT))
        for site in self.site_tensors[1:]:
            merged = contract(LabeledTensor._wrap(acc, ("acc_out", "acc_in", LEFT)), site, [(LEFT, LEFT)])
            merged = merged.transpose(("acc_out", OUT, "acc_in", IN, RIGHT))
            d_out = merged.dim("acc_out") * merged.dim(OUT)
            d_in = merged.dim("acc_in") * merged.dim(IN)
            acc = merged.data.reshape(d_out, d_in, merged.dim(RIGHT))
        return acc[:, :, 0]

    def __repr__(self) -> str:
        return f"MatrixProductOperator(length={self.length}, bonds={self.bond_dims})"


def _check_compatible(dims_a: Sequence[int], dims_b: Sequence[int]) -> None:
    if list(dims_a) != list(dims_b):
        raise ValueError(f"Physical dimensions differ: {list(dims_a)} vs {list(dims_b)}")


def canonicalize(psi: MatrixProductState, center: int) -> MatrixProductState:
    """
    Bring a state into mixed canonical form.

    Args:
        psi: State to transform
        center: 1-based site that becomes the orthogonality center

    Returns:
        An equivalent state with ortho_center = center
    """
    if not 1 <= center <= psi.length:
        raise ValueError(f"Center {center} outside 1..{psi.length}")
    tensors = list(psi.site_tensors)
    for i in range(center - 1):
        q, r = qr_split(tensors[i], (LEFT, PHYS))
        tensors[i] = q.relabel({"bond": RIGHT})
        tensors[i + 1] = contract(r, tensors[i + 1], [(RIGHT, LEFT)]).relabel({"bond": LEFT})
    for i in range(psi.length - 1, center - 1, -1):
        q, r = qr_split(tensors[i], (PHYS, RIGHT))
        tensors[i] = q.relabel({"bond": LEFT})
        tensors[i - 1] = contract(tensors[i - 1], r, [(RIGHT, LEFT)]).relabel({"bond": RIGHT})
    return MatrixProductState(tensors, ortho_center=center)


def _left_orthonormalize(tensors: List[LabeledTensor]) -> None:
    for i in range(len(tensors) - 1):
        rows = tuple(label for label in tensors[i].labels if label != RIGHT)
        q, r = qr_split(tensors[i], rows)
        tensors[i] = q.relabel({"bond": RIGHT})
        tensors[i + 1] = contract(r, tensors[i + 1], [(RIGHT, LEFT)]).relabel({"bond": LEFT})


def _truncate_right_to_left(tensors: List[LabeledTensor], max_bond: int, cutoff: float) -> float:
    discarded = 0.0
    for i in range(len(tensors) - 1, 0, -1):
        result = svd_truncate(tensors[i], (LEFT,), max_bond, cutoff)
        discarded += result.discarded_weight
        tensors[i] = result.v.relabel({"bond": LEFT})
        weighted = LabeledTensor._wrap(result.u.data * result.s[np.newaxis, :], result.u.labels)
        tensors[i - 1] = contract(tensors[i - 1], weighted, [(RIGHT, LEFT)]).relabel({"bond": RIGHT})
    return discarded


def truncate(psi: MatrixProductState, max_bond: int, cutoff: float = 0.0) -> Tuple[MatrixProductState, float]:
    """
    Compress a state to a maximum bond dimension.

    Args:
        psi: State to compress
        max_bond: Bond dimension cap
        cutoff: Relative discarded-weight threshold per bond

    Returns:
        (compressed state with ortho_center 1, summed discarded weight)
    """
    tensors = list(psi.site_tensors)
    _left_orthonormalize(tensors)
    discarded = _truncate_right_to_left(tensors, max_bond, cutoff)
    logger.debug("Truncated MPS to bond %d, discarded weight %.3e", max_bond, discarded)
    return MatrixProductState(tensors, ortho_center=1), discarded


def compress_mpo(op: MatrixProductOperator, cutoff: float, max_bond: Optional[int] = None) -> MatrixProductOperator:
    """
    SVD-compress an operator in the Frobenius norm.

    Args:
        op: Operator to compress
        cutoff: Relative discarded-weight threshold per bond
        max_bond: Optional bond dimension cap

    Returns:
        The compressed operator; its discarded_weight accumulates the loss
    """
    tensors = list(op.site_tensors)
    _left_orthonormalize(tensors)
    cap = max_bond if max_bond is not None else max(max(op.bond_dims, default=1), 1)
    discarded = _truncate_right_to_left(tensors, cap, cutoff)
    result = MatrixProductOperator(tensors, discarded_weight=op.discarded_weight + discarded)
    logger.debug("Compressed MPO bonds %s -> %s (discarded %.3e)", op.bond_dims, result.bond_dims, discarded)
    return result


def left_environment_step(
    env: LabeledTensor,
    bra_site: LabeledTensor,
    op_site: LabeledTensor,
    ket_site: LabeledTensor,
) -> LabeledTensor:
    """
    Absorb one site into a left environment labeled (bra, op, ket).

    Args:
        env: Current environment
        bra_site: Bra tensor (conjugated here)
        op_site: Operator tensor
        ket_site: Ket tensor

    Returns:
        The environment one site further right
    """
    t = contract(env, ket_site, [("ket", LEFT)]).relabel({RIGHT: "ket"})
    t = contract(t, op_site.relabel({RIGHT: "op"}), [("op", LEFT), (PHYS, IN)])
    t = contract(bra_site.conj().relabel({RIGHT: "bra"}), t, [(LEFT, "bra"), (PHYS, OUT)])
    return t.transpose(("bra", "op", "ket"))


def right_environment_step(
    env: LabeledTensor,
    bra_site: LabeledTensor,
    op_site: LabeledTensor,
    ket_site: LabeledTensor,
) -> LabeledTensor:
    """Absorb one site into a right environment labeled (bra, op, ket)."""
    t = contract(ket_site, env, [(RIGHT, "ket")]).relabel({LEFT: "ket"})
    t = contract(t, op_site.relabel({LEFT: "w"}), [("op", RIGHT), (PHYS, IN)])
    t = contract(bra_site.conj().relabel({LEFT: "b"}), t, [(RIGHT, "bra"), (PHYS, OUT)])
    return t.relabel({"b": "bra", "w": "op"}).transpose(("bra", "op", "ket"))


def boundary_environment() -> LabeledTensor:
    return LabeledTensor(np.ones((1, 1, 1)), ("bra", "op", "ket"))


def inner(a: MatrixProductState, b: MatrixProductState) -> complex:
    """
    Inner product conj(a) . b.

    Args:
        a: Bra state (conjugated)
        b: Ket state

    Returns:
        The full contraction
    """
    if a.length != b.length:
        raise ValueError(f"State lengths differ: {a.length} vs {b.length}")
    _check_compatible(a.phys_dims, b.phys_dims)
    env = LabeledTensor(np.ones((1, 1)), ("bra", "ket"))
    for bra_site, ket_site in zip(a.site_tensors, b.site_tensors):
        t = contract(env, ket_site, [("ket", LEFT)]).relabel({RIGHT: "ket"})
        env = contract(bra_site.conj().relabel({RIGHT: "bra"}), t, [(LEFT, "bra"), (PHYS, PHYS)])
    return env.scalar()


def overlap3(bra: MatrixProductState, op: MatrixProductOperator, ket: MatrixProductState) -> complex:
    """
    Matrix element conj(bra) . (op ket), contracted exactly.

    Args:
        bra: Bra state (conjugated)
        op: Operator
        ket: Ket state

    Returns:
        The matrix element
    """
    if not bra.length == op.length == ket.length:
        raise ValueError(f"Lengths differ: bra {bra.length}, op {op.length}, ket {ket.length}")
    _check_compatible(bra.phys_dims, op.phys_dims)
    _check_compatible(op.phys_dims, ket.phys_dims)
    env = boundary_environment()
    for bra_site, op_site, ket_site in zip(bra.site_tensors, op.site_tensors, ket.site_tensors):
        env = left_environment_step(env, bra_site, op_site, ket_site)
    return env.scalar()


def rayleigh_quotient(op: MatrixProductOperator, psi: MatrixProductState) -> float:
    """Real part of <psi|op|psi> / <psi|psi>."""
    return float((overlap3(psi, op, psi) / inner(psi, psi)).real)


def apply_mpo(op: MatrixProductOperator, psi: MatrixProductState) -> MatrixProductState:
    """
    Exact product op . psi (bond dimensions multiply).

    Args:
        op: Operator
        psi: State

    Returns:
        The resulting state
    """
    if op.length != psi.length:
        raise ValueError(f"Lengths differ: op {op.length}, state {psi.length}")
    _check_compatible(op.phys_dims, psi.phys_dims)
    tensors = []
    for op_site, site in zip(op.site_tensors, psi.site_tensors):
        t = contract(op_site.relabel({LEFT: "wl", RIGHT: "wr"}), site, [(IN, PHYS)])
        t = t.transpose(("wl", LEFT, OUT, "wr", RIGHT))
        shape = (t.dim("wl") * t.dim(LEFT), t.dim(OUT), t.dim("wr") * t.dim(RIGHT))
        tensors.append(LabeledTensor._wrap(t.data.reshape(shape), STATE_LABELS))
    return MatrixProductState(tensors)


def mpo_dagger(a: MatrixProductOperator) -> MatrixProductOperator:
    """Conjugate transpose, site by site."""
    return MatrixProductOperator(
        [t.conj().relabel({OUT: IN, IN: OUT}) for t in a.site_tensors],
        discarded_weight=a.discarded_weight,
    )


def mpo_product(
    a: MatrixProductOperator,
    b: MatrixProductOperator,
    cutoff: float = 0.0,
) -> MatrixProductOperator:
    """
    Operator product a . b (b acts first).

    Args:
        a: Left factor
        b: Right factor
        cutoff: If positive, SVD-compress the product at this relative cutoff

    Returns:
        The product operator; bond dimensions are at most the products of
        the factors' bond dimensions
    """
    if a.length != b.length:
        raise ValueError(f"MPO lengths differ: {a.length} vs {b.length}")
    _check_compatible(a.phys_dims, b.phys_dims)
    tensors = []
    for site_a, site_b in zip(a.site_tensors, b.site_tensors):
        t = contract(
            site_a.relabel({IN: "k", LEFT: "la", RIGHT: "ra"}),
            site_b.relabel({OUT: "k", LEFT: "lb", RIGHT: "rb"}),
            [("k", "k")],
        )
        t = t.transpose(("la", "lb", OUT, IN, "ra", "rb"))
        shape = (t.dim("la") * t.dim("lb"), t.dim(OUT), t.dim(IN), t.dim("ra") * t.dim("rb"))
        tensors.append(LabeledTensor._wrap(t.data.reshape(shape), OPERATOR_LABELS))
    product = MatrixProductOperator(tensors, discarded_weight=a.discarded_weight + b.discarded_weight)
    if cutoff > 0.0:
        product = compress_mpo(product, cutoff)
        logger.info(
            "MPO product compressed to bonds %s (discarded weight %.3e)",
            product.bond_dims,
            product.discarded_weight,
        )
    return product
