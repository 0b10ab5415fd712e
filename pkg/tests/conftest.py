import numpy as np
import pytest

from ness_dmrg.core.liouvillian import ModelParams
from ness_dmrg.core.mps import MatrixProductOperator, MatrixProductState
from ness_dmrg.core.superspace import OrderingKind, OrderingScheme

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def kron_all(matrices):
    out = np.eye(1, dtype=complex)
    for m in matrices:
        out = np.kron(out, m)
    return out


def embed(op, site, n):
    """op on 1-based site of an n-site chain."""
    return kron_all([op if k == site else SIGMA["I"] for k in range(1, n + 1)])


def random_density_matrix(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_mps(rng, n_sites, bond, dim=2):
    return MatrixProductState.random([dim] * n_sites, bond, rng)


def random_mpo(rng, n_sites, bond, dim=2):
    bonds = [1] + [bond] * (n_sites - 1) + [1]
    arrays = [
        rng.standard_normal((bonds[i], dim, dim, bonds[i + 1]))
        + 1j * rng.standard_normal((bonds[i], dim, dim, bonds[i + 1]))
        for i in range(n_sites)
    ]
    return MatrixProductOperator.from_arrays(arrays)


def maximal_drive(n_sites, **values):
    data = {"gamma": 1.0, "Delta": 1.0, "f1": 1.0, "fN": 0.0, "h": 0.0}
    data.update(values)
    return ModelParams.homogeneous(n_sites, **data)


def scheme(kind, n_sites):
    return OrderingScheme(kind=OrderingKind(kind), n_phys=n_sites)


BOTH_ORDERINGS = ["RLN", "RNLN"]
