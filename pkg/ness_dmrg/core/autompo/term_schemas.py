"""
Term Schemas Module

This module defines the data structures used by the symbolic operator builder.
"""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class OperatorDefinition(BaseModel):
    """Definition of a named single-site operator."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = Field(..., description="Name used in operator strings")
    matrix: np.ndarray = Field(..., description="Square d x d complex matrix")
    description: str = Field("", description="What the operator does")

    @field_validator("matrix", mode="before")
    @classmethod
    def _square_matrix(cls, value: Any) -> np.ndarray:
        matrix = np.array(value, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Operator matrix must be square, got shape {matrix.shape}")
        matrix.flags.writeable = False
        return matrix

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


class OperatorString(BaseModel):
    """A coefficient times a product of single-site operators (identity elsewhere)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficient: complex = Field(1.0, description="Complex prefactor of the product")
    factors: Tuple[Tuple[int, str], ...] = Field(
        ..., description="(1-based site, operator name) pairs with strictly increasing sites"
    )

    @field_validator("coefficient", mode="before")
    @classmethod
    def _as_complex(cls, value: Any) -> complex:
        return complex(value)

    @field_validator("factors", mode="before")
    @classmethod
    def _ordered_factors(cls, value: Any) -> Tuple[Tuple[int, str], ...]:
        factors = tuple((int(site), str(name)) for site, name in value)
        if not factors:
            raise ValueError("An operator string needs at least one factor")
        sites = [site for site, _ in factors]
        if any(site < 1 for site in sites):
            raise ValueError(f"Sites are 1-based, got {sites}")
        if any(b <= a for a, b in zip(sites, sites[1:])):
            raise ValueError(f"Sites must be strictly increasing, got {sites}")
        return factors

    @property
    def first_site(self) -> int:
        return self.factors[0][0]

    @property
    def last_site(self) -> int:
        return self.factors[-1][0]

    def operator_at(self, site: int) -> Optional[str]:
        """Operator name on a site, or None where the identity is implied."""
        for factor_site, name in self.factors:
            if factor_site == site:
                return name
        return None

    def prefix(self, site: int) -> Tuple[Tuple[int, str], ...]:
        """Factors acting on sites up to and including the given one."""
        return tuple(factor for factor in self.factors if factor[0] <= site)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "coefficient": [self.coefficient.real, self.coefficient.imag],
            "factors": [list(factor) for factor in self.factors],
        }

    def __str__(self) -> str:
        body = " ".join(f"{name}_{site}" for site, name in self.factors)
        return f"({self.coefficient:.6g}) {body}"


def terms_to_list(terms: List[OperatorString]) -> List[Dict[str, Any]]:
    """Serializable form of a list of terms."""
    return [term.to_dict() for term in terms]
