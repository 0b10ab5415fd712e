"""
Liouvillian Module

This module assembles the boundary-driven XXZ chain into superspace MPOs:
the Liouvillian L, the Hermitian target M = L^dagger L and the observables
(spin current, magnetization) as left-multiplication superoperators.
"""

import logging
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ness_dmrg.core.autompo import OperatorBuilder, compile_mpo
from ness_dmrg.core.mps import MatrixProductOperator, MatrixProductState, mpo_dagger, mpo_product
from ness_dmrg.core.superspace import (
    OrderingScheme,
    Side,
    SideOp,
    paired_product_state,
    side_term,
    superspace_alphabet,
)

logger = logging.getLogger("ness_dmrg.liouvillian")

TARGET_CUTOFF = 1e-14

PARAM_ALIASES = {
    "N": "n_sites",
    "n": "n_sites",
    "J": "j",
    "Delta": "delta",
    "gamma1": "gamma_1",
    "gammaN": "gamma_n",
    "f1": "f_1",
    "fN": "f_n",
}


def normalize_param_keys(data: Dict[str, Any]) -> Dict[str, Any]:
    """Map aliases to field names and expand a shared "gamma" into both rates."""
    data = {PARAM_ALIASES.get(key, key): value for key, value in data.items()}
    if "gamma" in data:
        gamma = data.pop("gamma")
        data.setdefault("gamma_1", gamma)
        data.setdefault("gamma_n", gamma)
    return data


class ModelParams(BaseModel):
    """Parameters of the XXZ chain and its two boundary baths."""

    model_config = ConfigDict(frozen=True)

    n_sites: int = Field(..., ge=1, description="Physical chain length N")
    j: Tuple[float, ...] = Field(..., description="Per-bond couplings J_i (N-1 entries)")
    delta: Tuple[float, ...] = Field(..., description="Per-bond anisotropies Delta_i (N-1 entries)")
    h: Tuple[float, ...] = Field(..., description="Per-site fields h_i (N entries)")
    gamma_1: float = Field(1.0, gt=0, description="Bath rate at site 1")
    gamma_n: float = Field(1.0, gt=0, description="Bath rate at site N")
    f_1: float = Field(1.0, ge=0, le=1, description="Bath bias at site 1")
    f_n: float = Field(0.0, ge=0, le=1, description="Bath bias at site N")

    @model_validator(mode="before")
    @classmethod
    def _broadcast(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = normalize_param_keys(data)
        n = data.get("n_sites")
        if not isinstance(n, int) or n < 1:
            return data
        for key, count, default in (("j", n - 1, 1.0), ("delta", n - 1, 1.0), ("h", n, 0.0)):
            value = data.get(key, default)
            if np.isscalar(value):
                data[key] = (float(value),) * count
        return data

    @model_validator(mode="after")
    def _lengths(self) -> "ModelParams":
        n = self.n_sites
        for key, expected in (("j", n - 1), ("delta", n - 1), ("h", n)):
            if len(getattr(self, key)) != expected:
                raise ValueError(f"{key} needs {expected} entries for N={n}, got {len(getattr(self, key))}")
        return self

    @classmethod
    def homogeneous(cls, n_sites: int, **values) -> "ModelParams":
        """Uniform chain; values are scalars (aliases accepted)."""
        return cls.model_validate({"n_sites": n_sites, **values})

    @property
    def is_equilibrium(self) -> bool:
        return self.n_sites == 1 or self.f_1 == self.f_n

    def baths(self) -> List[Tuple[int, float, float]]:
        """(site, gamma, f) of each boundary bath; a single site gets only the first."""
        if self.n_sites == 1:
            return [(1, self.gamma_1, self.f_1)]
        return [(1, self.gamma_1, self.f_1), (self.n_sites, self.gamma_n, self.f_n)]


class SuperOperatorSet:
    """Liouvillian, target and observable MPOs sharing one ordering."""

    def __init__(
        self,
        liouvillian: MatrixProductOperator,
        target: MatrixProductOperator,
        current_ops: List[MatrixProductOperator],
        magnetization_ops: List[MatrixProductOperator],
        scheme: OrderingScheme,
    ):
        lengths = {op.length for op in [liouvillian, target, *current_ops, *magnetization_ops]}
        if lengths != {scheme.n_super}:
            raise ValueError(f"Superoperators must all have length {scheme.n_super}, got {sorted(lengths)}")
        self.liouvillian = liouvillian
        self.target = target
        self.current_ops = tuple(current_ops)
        self.magnetization_ops = tuple(magnetization_ops)
        self.scheme = scheme


def hamiltonian_terms(params: ModelParams) -> List[Tuple[float, List[Tuple[int, str]]]]:
    """
    XXZ Hamiltonian as (coefficient, [(site, spin-half operator)]) terms.

    J (XX + YY + Delta ZZ) + h Z with Pauli matrices becomes
    4J (SxSx + SySy + Delta SzSz) + 2h Sz.
    """
    terms = []
    for i in range(1, params.n_sites):
        j, delta = params.j[i - 1], params.delta[i - 1]
        for name, scale in (("Sx", 1.0), ("Sy", 1.0), ("Sz", delta)):
            coefficient = 4.0 * j * scale
            if coefficient != 0:
                terms.append((coefficient, [(i, name), (i + 1, name)]))
    for i in range(1, params.n_sites + 1):
        if params.h[i - 1] != 0:
            terms.append((2.0 * params.h[i - 1], [(i, "Sz")]))
    return terms


def dissipator_terms(site: int, rate: float, jump: str, jump_dag: str) -> List[Tuple[float, List[SideOp]]]:
    """rate * (L rho L^dag - 1/2 L^dag L rho - 1/2 rho L^dag L) as one-sided terms."""
    if rate == 0:
        return []
    return [
        (rate, [SideOp(site=site, name=jump, side=Side.L), SideOp(site=site, name=jump_dag, side=Side.R)]),
        (-rate / 2, [SideOp(site=site, name=jump_dag, side=Side.L), SideOp(site=site, name=jump, side=Side.L)]),
        (-rate / 2, [SideOp(site=site, name=jump_dag, side=Side.R), SideOp(site=site, name=jump, side=Side.R)]),
    ]


def _check_scheme(params: ModelParams, scheme: OrderingScheme) -> None:
    if scheme.n_phys != params.n_sites:
        raise ValueError(f"Ordering is for N={scheme.n_phys}, model has N={params.n_sites}")


def liouvillian_builder(params: ModelParams, scheme: OrderingScheme) -> OperatorBuilder:
    """Symbolic -i[H, rho] + boundary dissipators on the superspace chain."""
    _check_scheme(params, scheme)
    alphabet = superspace_alphabet()
    builder = OperatorBuilder(alphabet, scheme.n_super)

    for coefficient, factors in hamiltonian_terms(params):
        left = [SideOp(site=site, name=name, side=Side.L) for site, name in factors]
        right = [SideOp(site=site, name=name, side=Side.R) for site, name in factors]
        builder.add_term(side_term(-1j * coefficient, left, scheme, alphabet))
        builder.add_term(side_term(1j * coefficient, right, scheme, alphabet))

    for site, gamma, f in params.baths():
        terms = dissipator_terms(site, gamma * f, "S-", "S+") + dissipator_terms(site, gamma * (1 - f), "S+", "S-")
        for coefficient, side_ops in terms:
            builder.add_term(side_term(coefficient, side_ops, scheme, alphabet))
    return builder


def build_liouvillian(params: ModelParams, scheme: OrderingScheme) -> MatrixProductOperator:
    """
    Liouvillian MPO acting on vec(rho) in the given ordering.

    Args:
        params: Model parameters
        scheme: Superspace ordering (n_phys must equal params.n_sites)

    Returns:
        The compiled MPO
    """
    mpo = compile_mpo(liouvillian_builder(params, scheme))
    logger.debug("Liouvillian %s N=%d bonds %s", scheme.kind.value, params.n_sites, mpo.bond_dims)
    return mpo


def build_target(liouvillian: MatrixProductOperator) -> MatrixProductOperator:
    """M = L^dagger L, compressed at a 1e-14 relative cutoff."""
    target = mpo_product(mpo_dagger(liouvillian), liouvillian, cutoff=TARGET_CUTOFF)
    logger.debug("Target MPO bonds %s (max %d)", target.bond_dims, target.max_bond)
    return target


def build_current_mpo(params: ModelParams, scheme: OrderingScheme, bond: int) -> MatrixProductOperator:
    """Left multiplication by 2 J_i (X_i Y_{i+1} - Y_i X_{i+1}) on bond i."""
    _check_scheme(params, scheme)
    if not 1 <= bond <= params.n_sites - 1:
        raise ValueError(f"Bond {bond} outside 1..{params.n_sites - 1}")
    coefficient = 8.0 * params.j[bond - 1]
    builder = OperatorBuilder(superspace_alphabet(), scheme.n_super)
    builder.add(coefficient, "SxL", scheme.unprimed_site(bond), "SyL", scheme.unprimed_site(bond + 1))
    builder.add(-coefficient, "SyL", scheme.unprimed_site(bond), "SxL", scheme.unprimed_site(bond + 1))
    return compile_mpo(builder)


def build_magnetization_mpo(scheme: OrderingScheme, site: int) -> MatrixProductOperator:
    """Left multiplication by sigma_z on one site."""
    builder = OperatorBuilder(superspace_alphabet(), scheme.n_super)
    builder.add(2.0, "SzL", scheme.unprimed_site(site))
    return compile_mpo(builder)


def build_superoperators(params: ModelParams, scheme: OrderingScheme) -> SuperOperatorSet:
    """Build L, M and all observable MPOs for one model and ordering."""
    liouvillian = build_liouvillian(params, scheme)
    return SuperOperatorSet(
        liouvillian=liouvillian,
        target=build_target(liouvillian),
        current_ops=[build_current_mpo(params, scheme, i) for i in range(1, params.n_sites)],
        magnetization_ops=[build_magnetization_mpo(scheme, i) for i in range(1, params.n_sites + 1)],
        scheme=scheme,
    )


def local_fixed_point(f: float) -> np.ndarray:
    """diag(1 - f, f): the fixed point of one boundary dissipator."""
    return np.diag([1.0 - f, f]).astype(complex)


def equilibrium_state(params: ModelParams, scheme: OrderingScheme) -> MatrixProductState:
    """
    Exact steady state vec(rho) for equal bath biases.

    Args:
        params: Model with f_1 == f_n
        scheme: Superspace ordering

    Returns:
        The unit-trace product state as an MPS
    """
    _check_scheme(params, scheme)
    if not params.is_equilibrium:
        raise ValueError(f"Equilibrium state needs f_1 == f_n, got {params.f_1} and {params.f_n}")
    return paired_product_state(scheme, [local_fixed_point(params.f_1)] * params.n_sites)

