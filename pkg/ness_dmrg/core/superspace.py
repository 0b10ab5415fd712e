"""
Superspace Module

This module fixes the column-stacking vectorization, the two orderings of
the 2N-site superspace chain and the translation of left/right
multiplications on the physical chain into superspace operator strings.

A density matrix on N spins becomes a vector on 2N sites of dimension 2:
every physical site i owns a primed leg (acted on by right
multiplications, as the transpose) and an unprimed leg (acted on by left
multiplications). The RLN ordering interleaves the legs pairwise
(primed first); RNLN puts all primed legs first, in physical order.
"""

import logging
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ness_dmrg.core.autompo import SPIN_HALF_MATRICES, OperatorAlphabet, OperatorString
from ness_dmrg.core.mps import STATE_LABELS, MatrixProductState, truncate
from ness_dmrg.core.tensor import LabeledTensor

logger = logging.getLogger("ness_dmrg.superspace")

# 2^MAX_EXACT_OPEN_PAIRS is the largest exact bond of a paired product state
MAX_EXACT_OPEN_PAIRS = 12


class OrderingKind(str, Enum):
    RLN = "RLN"
    RNLN = "RNLN"


class Side(str, Enum):
    L = "L"
    R = "R"


class OrderingScheme(BaseModel):
    """Layout of primed and unprimed legs on the superspace chain."""

    model_config = ConfigDict(frozen=True)

    kind: OrderingKind = Field(OrderingKind.RLN, description="RLN (interleaved) or RNLN (blocked)")
    n_phys: int = Field(..., ge=1, description="Physical chain length N")

    @field_validator("kind", mode="before")
    @classmethod
    def _upper(cls, value):
        return value.upper() if isinstance(value, str) else value

    @property
    def n_super(self) -> int:
        return 2 * self.n_phys

    @property
    def phys_dims(self) -> List[int]:
        return [2] * self.n_super

    def _check_site(self, site: int) -> None:
        if not 1 <= site <= self.n_phys:
            raise ValueError(f"Physical site {site} outside 1..{self.n_phys}")

    def primed_site(self, site: int) -> int:
        """Superspace site of the right-action leg of a physical site."""
        self._check_site(site)
        return 2 * site - 1 if self.kind == OrderingKind.RLN else site

    def unprimed_site(self, site: int) -> int:
        """Superspace site of the left-action leg of a physical site."""
        self._check_site(site)
        return 2 * site if self.kind == OrderingKind.RLN else self.n_phys + site

    def super_site(self, site: int, side: "Side") -> int:
        return self.unprimed_site(site) if Side(side) == Side.L else self.primed_site(site)

    def vec_axes(self) -> List[int]:
        """
        Axis of each superspace site (in chain order) within the [2]*2N
        reshape of the column-stacked vec(rho), whose axes are the primed
        legs 1..N followed by the unprimed legs 1..N.
        """
        axes = [0] * self.n_super
        for site in range(1, self.n_phys + 1):
            axes[self.primed_site(site) - 1] = site - 1
            axes[self.unprimed_site(site) - 1] = self.n_phys + site - 1
        return axes


class SideOp(BaseModel):
    """A base operator multiplying the density matrix from one side."""

    model_config = ConfigDict(frozen=True)

    site: int = Field(..., ge=1, description="1-based physical site")
    name: str = Field(..., description="Base operator name (Id, Sx, Sy, Sz, S+, S-)")
    side: Side = Field(..., description="L for left multiplication, R for right")

    @field_validator("name")
    @classmethod
    def _registered(cls, value: str) -> str:
        if value not in SPIN_HALF_MATRICES:
            raise ValueError(f"Unknown base operator '{value}', expected one of {sorted(SPIN_HALF_MATRICES)}")
        return value


def vectorize(m) -> np.ndarray:
    """Column-stacked vector of a square matrix."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"vectorize needs a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def unvectorize(v, d: int) -> np.ndarray:
    """Inverse of vectorize for a d x d matrix."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != d * d:
        raise ValueError(f"Vector of length {v.size} cannot be a {d}x{d} matrix")
    return v.reshape(d, d, order="F")


def superspace_alphabet() -> OperatorAlphabet:
    """Alphabet with L (base matrix) and R (transposed) versions of each base operator."""
    alphabet = OperatorAlphabet(dim=2)
    alphabet.register_operator("Id", SPIN_HALF_MATRICES["Id"], description="identity")
    for name, matrix in SPIN_HALF_MATRICES.items():
        if name == "Id":
            continue
        alphabet.register_operator(f"{name}L", matrix, description=f"{name} rho")
        alphabet.register_operator(f"{name}R", matrix.T, description=f"rho {name}")
    return alphabet


def map_side_op(op: SideOp, scheme: OrderingScheme) -> Tuple[int, np.ndarray]:
    """
    Superspace site and matrix realizing a one-sided multiplication.

    Args:
        op: Side operator on the physical chain
        scheme: Superspace ordering

    Returns:
        (1-based superspace site, 2x2 matrix); R sides are transposed
    """
    base = SPIN_HALF_MATRICES[op.name]
    if op.side == Side.L:
        return scheme.unprimed_site(op.site), base.copy()
    return scheme.primed_site(op.site), base.T.copy()


def side_term(
    coefficient: complex,
    side_ops: Sequence[SideOp],
    scheme: OrderingScheme,
    alphabet: OperatorAlphabet,
) -> OperatorString:
    """
    Operator string for coefficient * (left products) rho (right products).

    Factors sharing a site and side are multiplied in the listed order
    (A then B on the right means rho A B) and registered as a composite
    operator named like "S+*S-R".

    Args:
        coefficient: Prefactor
        side_ops: One-sided factors
        scheme: Superspace ordering
        alphabet: Alphabet that receives composite operators

    Returns:
        The superspace operator string
    """
    if not side_ops:
        raise ValueError("side_term needs at least one side operator")
    groups: Dict[Tuple[int, Side], List[str]] = {}
    for op in side_ops:
        groups.setdefault((op.site, op.side), []).append(op.name)

    factors = []
    for (site, side), names in groups.items():
        product = np.eye(2, dtype=complex)
        for name in names:
            product = product @ SPIN_HALF_MATRICES[name]
        if len(names) == 1:
            name = f"{names[0]}{side.value}" if names[0] != "Id" else "Id"
        else:
            name = "*".join(names) + side.value
        matrix = product if side == Side.L else product.T
        alphabet.register_operator(name, matrix)
        factors.append((scheme.super_site(site, side), name))
    return OperatorString(coefficient=coefficient, factors=sorted(factors))


def _open_pairs(scheme: OrderingScheme) -> List[List[int]]:
    # physical sites with exactly one leg left of each cut
    opens = []
    for cut in range(scheme.n_super + 1):
        opens.append(
            [
                site
                for site in range(1, scheme.n_phys + 1)
                if scheme.primed_site(site) <= cut < scheme.unprimed_site(site)
            ]
        )
    return opens


def paired_product_state(
    scheme: OrderingScheme,
    local_matrices: Sequence[np.ndarray],
    max_bond: Optional[int] = None,
) -> MatrixProductState:
    """
    Exact MPS of vec(rho_1 (x) ... (x) rho_N) for 2x2 local matrices.

    Each physical site is a pair of legs; while a pair is open across a
    cut its primed index is carried in the bond, so the bond at a cut is
    2 to the number of open pairs.

    Args:
        scheme: Superspace ordering
        local_matrices: One 2x2 matrix per physical site
        max_bond: Optional cap; the exact state is truncated to it

    Returns:
        The state (ortho_center 1 when truncated)
    """
    if len(local_matrices) != scheme.n_phys:
        raise ValueError(f"Need {scheme.n_phys} local matrices, got {len(local_matrices)}")
    opens = _open_pairs(scheme)
    widest = max(len(o) for o in opens)
    if widest > MAX_EXACT_OPEN_PAIRS:
        raise ValueError(
            f"{scheme.kind.value} layout with N={scheme.n_phys} needs bond 2^{widest}; "
            f"exact construction is limited to 2^{MAX_EXACT_OPEN_PAIRS}"
        )

    owner = {}
    for site in range(1, scheme.n_phys + 1):
        owner[scheme.primed_site(site)] = (site, True)
        owner[scheme.unprimed_site(site)] = (site, False)

    tensors = []
    for position in range(1, scheme.n_super + 1):
        site, primed = owner[position]
        left, right = opens[position - 1], opens[position]
        rho = np.asarray(local_matrices[site - 1], dtype=complex)
        data = np.zeros((2 ** len(left), 2, 2 ** len(right)), dtype=complex)
        for l_index in range(2 ** len(left)):
            bits = {s: (l_index >> (len(left) - 1 - k)) & 1 for k, s in enumerate(left)}
            for sigma in range(2):
                if primed:
                    carried = {**bits, site: sigma}
                    weight = 1.0
                else:
                    carried = {s: b for s, b in bits.items() if s != site}
                    # vec(rho)[primed sigma', unprimed sigma] = rho[sigma, sigma']
                    weight = rho[sigma, bits[site]]
                r_index = 0
                for s in right:
                    r_index = (r_index << 1) | carried[s]
                data[l_index, sigma, r_index] += weight
        tensors.append(LabeledTensor(data, STATE_LABELS))

    psi = MatrixProductState(tensors)
    if max_bond is not None and psi.max_bond > max_bond:
        psi, discarded = truncate(psi, max_bond)
        logger.debug("Paired product state truncated to bond %d (discarded %.3e)", max_bond, discarded)
    return psi


def make_ivec(scheme: OrderingScheme, max_bond: Optional[int] = None) -> MatrixProductState:
    """vec(I) on the superspace chain; <Ivec|vec(rho)> = tr(rho)."""
    return paired_product_state(scheme, [np.eye(2)] * scheme.n_phys, max_bond=max_bond)


def vec_to_superspace(vec, scheme: OrderingScheme) -> np.ndarray:
    """Reorder a column-stacked vec(rho) into the scheme's site order."""
    vec = np.asarray(vec)
    if vec.size != 4 ** scheme.n_phys:
        raise ValueError(f"Vector of length {vec.size} does not match N={scheme.n_phys}")
    return np.transpose(vec.reshape([2] * scheme.n_super), scheme.vec_axes()).reshape(-1)


def superspace_to_vec(psi_dense, scheme: OrderingScheme) -> np.ndarray:
    """Inverse of vec_to_superspace."""
    psi_dense = np.asarray(psi_dense)
    if psi_dense.size != 4 ** scheme.n_phys:
        raise ValueError(f"Vector of length {psi_dense.size} does not match N={scheme.n_phys}")
    inverse = np.argsort(scheme.vec_axes())
    return np.transpose(psi_dense.reshape([2] * scheme.n_super), inverse).reshape(-1)


def vectorize_superspace(rho, scheme: OrderingScheme) -> np.ndarray:
    """Dense superspace vector of a density matrix."""
    return vec_to_superspace(vectorize(rho), scheme)


def unvectorize_superspace(psi_dense, scheme: OrderingScheme) -> np.ndarray:
    """Density matrix of a dense superspace vector."""
    return unvectorize(superspace_to_vec(psi_dense, scheme), 2 ** scheme.n_phys)


def superoperator_in_scheme(matrix, scheme: OrderingScheme) -> np.ndarray:
    """Express a superoperator acting on vec(rho) in the scheme's site order."""
    index = vec_to_superspace(np.arange(4 ** scheme.n_phys), scheme)
    return np.asarray(matrix)[np.ix_(index, index)]
