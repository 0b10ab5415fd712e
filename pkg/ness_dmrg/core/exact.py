"""
Exact Oracle Module

This module builds the dense Liouvillian of small chains with Kronecker
products, finds its null vector and evaluates observables. It is the ground
truth the tensor-network solver is checked against.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ness_dmrg import __version__
from ness_dmrg.core.liouvillian import ModelParams
from ness_dmrg.core.superspace import unvectorize, vectorize

logger = logging.getLogger("ness_dmrg.exact")

MAX_DENSE_SITES = 7
MAX_NESS_SITES = 6
FULL_SPECTRUM_SITES = 4
NULL_TOLERANCE = 1e-10
IMAG_TOLERANCE = 1e-10
INVERSE_ITERATION_SHIFT = -1e-8
INVERSE_ITERATION_STEPS = 6

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def site_operator(op: np.ndarray, site: int, n_sites: int) -> sp.csr_matrix:
    """op on one site (1-based, site 1 most significant), identity elsewhere."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"Site {site} outside 1..{n_sites}")
    left = sp.identity(2 ** (site - 1), dtype=complex, format="csr")
    right = sp.identity(2 ** (n_sites - site), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def _check_size(params: ModelParams, limit: int) -> None:
    if params.n_sites > limit:
        raise ValueError(f"Dense construction limited to N <= {limit}, got N={params.n_sites}")


def dense_hamiltonian(params: ModelParams) -> np.ndarray:
    """sum_i J_i (X X + Y Y + Delta_i Z Z) + sum_i h_i Z with Pauli matrices."""
    _check_size(params, MAX_DENSE_SITES)
    n = params.n_sites
    h = sp.csr_matrix((2 ** n, 2 ** n), dtype=complex)
    for i in range(1, n):
        j, delta = params.j[i - 1], params.delta[i - 1]
        for name, scale in (("X", 1.0), ("Y", 1.0), ("Z", delta)):
            h = h + j * scale * (site_operator(PAULI[name], i, n) @ site_operator(PAULI[name], i + 1, n))
    for i in range(1, n + 1):
        h = h + params.h[i - 1] * site_operator(PAULI["Z"], i, n)
    return h.toarray()


def dense_current_operator(params: ModelParams, bond: int) -> np.ndarray:
    """2 J_i (X_i Y_{i+1} - Y_i X_{i+1})."""
    _check_size(params, MAX_DENSE_SITES)
    n = params.n_sites
    if not 1 <= bond <= n - 1:
        raise ValueError(f"Bond {bond} outside 1..{n - 1}")
    xy = site_operator(PAULI["X"], bond, n) @ site_operator(PAULI["Y"], bond + 1, n)
    yx = site_operator(PAULI["Y"], bond, n) @ site_operator(PAULI["X"], bond + 1, n)
    return (2.0 * params.j[bond - 1] * (xy - yx)).toarray()


def dense_magnetization_operator(n_sites: int, site: int) -> np.ndarray:
    return site_operator(PAULI["Z"], site, n_sites).toarray()


def _dissipator(jump: sp.csr_matrix, dim: int) -> sp.csr_matrix:
    # D[L] = conj(L) (x) L - 1/2 [I (x) L^dag L + (L^dag L)^T (x) I]
    identity = sp.identity(dim, dtype=complex, format="csr")
    ldl = (jump.conj().T @ jump).tocsr()
    return sp.kron(jump.conj(), jump) - 0.5 * (sp.kron(identity, ldl) + sp.kron(ldl.T, identity))


def dense_liouvillian(params: ModelParams) -> np.ndarray:
    """
    Dense Liouvillian acting on column-stacked vec(rho).

    Args:
        params: Model parameters (N <= 7)

    Returns:
        The 4^N x 4^N matrix -i(I (x) H - H^T (x) I) + D_1 + D_N
    """
    _check_size(params, MAX_DENSE_SITES)
    n = params.n_sites
    dim = 2 ** n
    identity = sp.identity(dim, dtype=complex, format="csr")
    h = sp.csr_matrix(dense_hamiltonian(params))
    liouvillian = -1j * (sp.kron(identity, h) - sp.kron(h.T, identity))
    for site, gamma, f in params.baths():
        lower = site_operator(PAULI["-"], site, n)
        raise_ = site_operator(PAULI["+"], site, n)
        liouvillian = liouvillian + gamma * f * _dissipator(lower, dim)
        liouvillian = liouvillian + gamma * (1 - f) * _dissipator(raise_, dim)
    return liouvillian.toarray()


def dense_target(liouvillian: np.ndarray) -> np.ndarray:
    """L^dagger L."""
    return liouvillian.conj().T @ liouvillian


class DenseNess:
    """Exact steady state of a small chain."""

    def __init__(
        self,
        rho: np.ndarray,
        residual: float,
        spectrum: Optional[np.ndarray] = None,
        gap: Optional[float] = None,
        null_multiplicity: Optional[int] = None,
    ):
        self.rho = rho
        self.residual = residual
        self.spectrum = spectrum
        self.gap = gap
        self.null_multiplicity = null_multiplicity

    @property
    def n_sites(self) -> int:
        return int(round(np.log2(self.rho.shape[0])))

    @property
    def degenerate(self) -> bool:
        return self.null_multiplicity is not None and self.null_multiplicity > 1


def _null_vector_full(l: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Optional[float], int]:
    values, vectors = scipy.linalg.eig(l)
    order = np.argsort(np.abs(values))
    null = vectors[:, order[0]]
    multiplicity = int(np.count_nonzero(np.abs(values) <= NULL_TOLERANCE))
    nonzero = values[np.abs(values) > NULL_TOLERANCE]
    gap = float(-np.max(nonzero.real)) if nonzero.size else None
    return null, values, gap, multiplicity


def _null_vector_inverse_iteration(l: np.ndarray, dim: int) -> np.ndarray:
    lu = scipy.linalg.lu_factor(l - INVERSE_ITERATION_SHIFT * np.eye(l.shape[0]))
    x = vectorize(np.eye(dim, dtype=complex)) / np.sqrt(dim)
    for _ in range(INVERSE_ITERATION_STEPS):
        x = scipy.linalg.lu_solve(lu, x)
        x = x / np.linalg.norm(x)
    return x


def dense_ness(l: np.ndarray) -> DenseNess:
    """
    Null vector of a dense Liouvillian as a unit-trace density matrix.

    Full diagonalization for N <= 4 (spectrum, gap and null multiplicity
    are reported), shift-invert iteration for N = 5 and 6.

    Args:
        l: 4^N x 4^N Liouvillian in column-stacking convention

    Returns:
        The dense steady state
    """
    l = np.asarray(l)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise ValueError(f"Liouvillian must be square, got shape {l.shape}")
    dim = int(round(np.sqrt(l.shape[0])))
    n_sites = int(round(np.log2(dim))) if dim > 0 else 0
    if dim * dim != l.shape[0] or 2 ** n_sites != dim:
        raise ValueError(f"Liouvillian size {l.shape[0]} is not 4^N")
    if n_sites > MAX_NESS_SITES:
        raise ValueError(f"Dense steady state limited to N <= {MAX_NESS_SITES}, got N={n_sites}")

    spectrum, gap, multiplicity = None, None, None
    if n_sites <= FULL_SPECTRUM_SITES:
        null, spectrum, gap, multiplicity = _null_vector_full(l)
        if multiplicity > 1:
            logger.warning("Liouvillian null space is %d-fold degenerate; returning one null vector", multiplicity)
    else:
        null = _null_vector_inverse_iteration(l, dim)

    rho = unvectorize(null, dim)
    trace = np.trace(rho)
    if abs(trace) < 1e-14:
        raise ValueError("Null vector has vanishing trace; cannot normalize")
    rho = rho / trace
    residual = float(np.linalg.norm(l @ vectorize(rho)))
    logger.debug("Dense NESS N=%d residual %.3e", n_sites, residual)
    return DenseNess(rho=rho, residual=residual, spectrum=spectrum, gap=gap, null_multiplicity=multiplicity)


def dense_observables(ness: DenseNess, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    tr(J_i rho) on every bond and tr(Z_i rho) on every site.

    Args:
        ness: Dense steady state
        params: Model parameters it was computed from

    Returns:
        (currents, magnetization) as real arrays
    """
    n = params.n_sites
    if ness.n_sites != n:
        raise ValueError(f"Steady state has N={ness.n_sites}, model has N={n}")
    currents = np.array([np.trace(dense_current_operator(params, i) @ ness.rho) for i in range(1, n)])
    magnetization = np.array([np.trace(dense_magnetization_operator(n, i) @ ness.rho) for i in range(1, n + 1)])
    values = np.concatenate([currents, magnetization])
    max_imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if max_imag > IMAG_TOLERANCE:
        raise ValueError(f"Observables have imaginary parts up to {max_imag:.3e}; state is unphysical")
    return currents.real, magnetization.real


def oracle_for(params: ModelParams) -> Dict[str, Any]:
    """Dense steady state and observables of a model, as a fixture record."""
    _check_size(params, MAX_NESS_SITES)
    ness = dense_ness(dense_liouvillian(params))
    currents, magnetization = dense_observables(ness, params)
    return {
        "generator": f"ness_dmrg {__version__} dense oracle",
        "params": params.model_dump(),
        "residual": ness.residual,
        "gap": ness.gap,
        "null_multiplicity": ness.null_multiplicity,
        "current_profile": currents.tolist(),
        "magnetization_profile": magnetization.tolist(),
    }


def write_fixture(path: Union[str, Path], params: ModelParams) -> Dict[str, Any]:
    """
    Compute the oracle for a model and store it as JSON.

    Args:
        path: Destination file
        params: Model parameters

    Returns:
        The stored record
    """
    record = oracle_for(params)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(record, indent=2, sort_keys=True))
    tmp.replace(path)
    logger.info("Wrote oracle fixture %s", path)
    return record


def load_fixture(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a fixture; params are revalidated into ModelParams."""
    record = json.loads(Path(path).read_text())
    for key in ("params", "current_profile", "magnetization_profile"):
        if key not in record:
            raise ValueError(f"Fixture {path} is missing '{key}'")
    record["params"] = ModelParams.model_validate(record["params"])
    return record
