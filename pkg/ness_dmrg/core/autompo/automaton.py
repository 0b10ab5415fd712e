"""
Automaton Module

This module accumulates symbolic operator strings on a chain and compiles
them into a matrix product operator.

Each bond cut carries a set of automaton states: "start" (no factor placed
yet), "done" (a whole term already placed) and one prefix state per distinct
set of factors placed so far. Terms sharing a prefix share its state, so a
sum of L-site products compiles to a bond dimension that grows with the
number of distinct open prefixes rather than with the number of terms.
"""

import logging
from typing import Dict, Hashable, List, Sequence, Tuple, Union

import numpy as np

from ness_dmrg.core.autompo.operator_registry import OperatorAlphabet
from ness_dmrg.core.autompo.term_schemas import OperatorString
from ness_dmrg.core.mps import OPERATOR_LABELS, MatrixProductOperator
from ness_dmrg.core.tensor import LabeledTensor

logger = logging.getLogger("ness_dmrg.autompo")

START = ("start",)
DONE = ("done",)


class OperatorBuilder:
    """Sum of operator strings over a fixed chain and alphabet."""

    def __init__(self, alphabet: OperatorAlphabet, length: int):
        """
        Initialize an empty builder.

        Args:
            alphabet: Registry resolving operator names to matrices
            length: Number of sites in the chain
        """
        if length < 1:
            raise ValueError(f"Chain length must be positive, got {length}")
        self.alphabet = alphabet
        self.length = length
        self.terms: List[OperatorString] = []

    def add_term(self, term: OperatorString) -> "OperatorBuilder":
        """
        Append a term after checking its sites and names.

        Args:
            term: The operator string

        Returns:
            The builder, for chaining
        """
        for site, name in term.factors:
            if site > self.length:
                raise ValueError(f"Site {site} outside chain of length {self.length}")
            if name not in self.alphabet:
                raise ValueError(f"Operator not found: {name}")
        self.terms.append(term)
        return self

    def add(self, coefficient: complex, *name_site_pairs: Union[str, int]) -> "OperatorBuilder":
        """
        Append coefficient * name1_site1 * name2_site2 * ...

        Factors may be given in any site order; a site may appear only once.
        """
        if len(name_site_pairs) % 2:
            raise ValueError("Factors must alternate operator name and site")
        factors = sorted(
            (int(name_site_pairs[k + 1]), str(name_site_pairs[k]))
            for k in range(0, len(name_site_pairs), 2)
        )
        return self.add_term(OperatorString(coefficient=coefficient, factors=factors))

    @property
    def phys_dims(self) -> List[int]:
        return [self.alphabet.dim] * self.length

    def __len__(self) -> int:
        return len(self.terms)


def add_term(builder: OperatorBuilder, term: OperatorString) -> OperatorBuilder:
    """Append a term to a builder and return the builder."""
    return builder.add_term(term)


def _cut_states(terms: Sequence[OperatorString], length: int) -> List[Dict[Hashable, int]]:
    states = []
    for cut in range(length + 1):
        keys: List[Hashable] = []
        if any(term.first_site > cut for term in terms):
            keys.append(START)
        for term in terms:
            if term.first_site <= cut < term.last_site:
                key = term.prefix(cut)
                if key not in keys:
                    keys.append(key)
        if any(term.last_site <= cut for term in terms):
            keys.append(DONE)
        states.append({key: index for index, key in enumerate(keys)})
    return states


def compile_mpo(builder: OperatorBuilder) -> MatrixProductOperator:
    """
    Compile the builder's sum of terms into an MPO.

    Args:
        builder: Builder holding at least one term

    Returns:
        An MPO whose dense form equals the sum of the terms
    """
    if not builder.terms:
        raise ValueError("Cannot compile an empty operator builder")

    length, dim = builder.length, builder.alphabet.dim
    terms = [term for term in builder.terms if term.coefficient != 0]
    if not terms:
        zero = np.zeros((dim, dim), dtype=complex)
        return MatrixProductOperator.product_operator([zero] * length)

    states = _cut_states(terms, length)
    identity = np.eye(dim, dtype=complex)
    tensors = []
    for site in range(1, length + 1):
        left, right = states[site - 1], states[site]
        w = np.zeros((len(left), dim, dim, len(right)), dtype=complex)
        if START in left and START in right:
            w[left[START], :, :, right[START]] = identity
        if DONE in left and DONE in right:
            w[left[DONE], :, :, right[DONE]] = identity

        for term in terms:
            if not term.first_site <= site <= term.last_site:
                continue
            name = term.operator_at(site)
            op = builder.alphabet.get_matrix(name) if name is not None else identity
            source = left[START] if site == term.first_site else left[term.prefix(site - 1)]
            if site == term.last_site:
                w[source, :, :, right[DONE]] += term.coefficient * op
            else:
                w[source, :, :, right[term.prefix(site)]] = op
        tensors.append(LabeledTensor(w, OPERATOR_LABELS))

    mpo = MatrixProductOperator(tensors)
    logger.debug("Compiled %d terms into MPO with bonds %s", len(terms), mpo.bond_dims)
    return mpo


def bond_profile(builder: OperatorBuilder) -> Tuple[int, ...]:
    """Bond dimensions compile_mpo would produce, without building tensors."""
    terms = [term for term in builder.terms if term.coefficient != 0]
    if not terms:
        return tuple(1 for _ in range(builder.length - 1))
    return tuple(len(states) for states in _cut_states(terms, builder.length)[1:-1])
