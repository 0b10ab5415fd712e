"""
Symbolic operator builder for matrix product operators.
"""

from ness_dmrg.core.autompo.automaton import OperatorBuilder, add_term, bond_profile, compile_mpo
from ness_dmrg.core.autompo.operator_registry import SPIN_HALF_MATRICES, OperatorAlphabet
from ness_dmrg.core.autompo.term_schemas import OperatorDefinition, OperatorString

__all__ = [
    "OperatorBuilder",
    "add_term",
    "bond_profile",
    "compile_mpo",
    "OperatorAlphabet",
    "SPIN_HALF_MATRICES",
    "OperatorDefinition",
    "OperatorString",
]
