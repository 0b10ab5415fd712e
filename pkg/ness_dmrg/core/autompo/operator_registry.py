"""
Operator Registry Module

This module handles registration and lookup of the named single-site
operators that operator strings refer to.
"""

import logging
from typing import Dict, List, Optional

import numpy as np

from ness_dmrg.core.autompo.term_schemas import OperatorDefinition

logger = logging.getLogger("ness_dmrg.autompo")

SPIN_HALF_MATRICES = {
    "Id": np.eye(2, dtype=complex),
    "Sx": np.array([[0, 1], [1, 0]], dtype=complex) / 2,
    "Sy": np.array([[0, -1j], [1j, 0]], dtype=complex) / 2,
    "Sz": np.array([[1, 0], [0, -1]], dtype=complex) / 2,
    "S+": np.array([[0, 1], [0, 0]], dtype=complex),
    "S-": np.array([[0, 0], [1, 0]], dtype=complex),
}


class OperatorAlphabet:
    """Registry of named d x d matrices sharing one local dimension."""

    def __init__(self, dim: Optional[int] = None):
        """
        Initialize an empty alphabet.

        Args:
            dim: Local dimension; fixed by the first registration if omitted
        """
        self.dim = dim
        self.operators: Dict[str, OperatorDefinition] = {}

    @classmethod
    def spin_half(cls) -> "OperatorAlphabet":
        """Alphabet with Id, Sx, Sy, Sz, S+ and S- (S = sigma / 2)."""
        alphabet = cls(dim=2)
        for name, matrix in SPIN_HALF_MATRICES.items():
            alphabet.register_operator(name, matrix, description=f"spin-1/2 {name}")
        return alphabet

    def register_operator(self, name: str, matrix, description: str = "") -> OperatorDefinition:
        """
        Register a matrix under a name.

        Args:
            name: Name used in operator strings
            matrix: Square matrix of the alphabet's local dimension
            description: What the operator does

        Returns:
            The operator definition
        """
        definition = OperatorDefinition(name=name, matrix=matrix, description=description)
        if self.dim is None:
            self.dim = definition.dim
        if definition.dim != self.dim:
            raise ValueError(f"Operator '{name}' has dimension {definition.dim}, alphabet uses {self.dim}")

        existing = self.operators.get(name)
        if existing is not None:
            if not np.allclose(existing.matrix, definition.matrix, atol=1e-15):
                raise ValueError(f"Operator '{name}' is already registered with a different matrix")
            return existing

        self.operators[name] = definition
        logger.debug("Registered operator %s", name)
        return definition

    def get_matrix(self, name: str) -> np.ndarray:
        """
        Matrix registered under a name.

        Args:
            name: Operator name

        Returns:
            The (read-only) matrix
        """
        if name not in self.operators:
            raise ValueError(f"Operator not found: {name}")
        return self.operators[name].matrix

    def get_operator_definition(self, name: str) -> Optional[OperatorDefinition]:
        return self.operators.get(name)

    def list_operators(self) -> List[OperatorDefinition]:
        return list(self.operators.values())

    def __contains__(self, name: str) -> bool:
        return name in self.operators
