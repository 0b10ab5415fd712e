import numpy as np
import pytest

from ness_dmrg.core.mps import (
    MatrixProductOperator,
    MatrixProductState,
    apply_mpo,
    canonicalize,
    compress_mpo,
    inner,
    mpo_dagger,
    mpo_product,
    overlap3,
    rayleigh_quotient,
    truncate,
)

from conftest import SIGMA, kron_all, random_mpo, random_mps


class TestMatrixProductState:
    def test_product_state_is_most_significant_first(self):
        psi = MatrixProductState.product_state([[1, 0], [0, 1], [1, 0]])
        dense = psi.to_dense()
        assert dense.shape == (8,)
        assert dense[0b010] == 1
        assert np.count_nonzero(dense) == 1

    def test_random_bonds_are_capped(self, rng):
        psi = random_mps(rng, 6, 4)
        assert psi.bond_dims == [2, 4, 4, 4, 2]
        assert psi.max_bond == 4

    def test_bond_mismatch_is_rejected(self, rng):
        arrays = [rng.standard_normal((1, 2, 2)), rng.standard_normal((3, 2, 1))]
        with pytest.raises(ValueError, match="bond mismatch"):
            MatrixProductState.from_arrays(arrays)

    def test_open_boundaries_required(self, rng):
        with pytest.raises(ValueError, match="boundary"):
            MatrixProductState.from_arrays([rng.standard_normal((2, 2, 1))])

    def test_normalized(self, rng):
        psi = random_mps(rng, 5, 3).normalized()
        np.testing.assert_allclose(psi.norm(), 1.0, rtol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(psi.to_dense()), 1.0, rtol=1e-12)


class TestCanonicalize:
    @pytest.mark.parametrize("center", [1, 3, 6])
    def test_gauge_preserves_state(self, rng, center):
        psi = random_mps(rng, 6, 4)
        canonical = canonicalize(psi, center)
        assert canonical.ortho_center == center
        assert canonical.is_canonical(center)
        np.testing.assert_allclose(canonical.to_dense(), psi.to_dense(), atol=1e-12)

    def test_norm_sits_on_center(self, rng):
        psi = canonicalize(random_mps(rng, 5, 3), 3)
        np.testing.assert_allclose(psi.site_tensors[2].norm(), psi.norm(), rtol=1e-12)

    def test_idempotent(self, rng):
        once = canonicalize(random_mps(rng, 5, 3), 2)
        twice = canonicalize(once, 2)
        for a, b in zip(once.site_tensors, twice.site_tensors):
            np.testing.assert_allclose(a.data, b.data, atol=1e-12)

    def test_center_out_of_range(self, rng):
        with pytest.raises(ValueError):
            canonicalize(random_mps(rng, 3, 2), 4)


class TestTruncate:
    def test_large_cap_is_exact(self, rng):
        psi = random_mps(rng, 6, 4)
        compressed, discarded = truncate(psi, 16)
        assert discarded < 1e-20
        np.testing.assert_allclose(compressed.to_dense(), psi.to_dense(), atol=1e-10)

    def test_small_cap_limits_bonds(self, rng):
        psi = random_mps(rng, 8, 8).normalized()
        compressed, discarded = truncate(psi, 2)
        assert compressed.max_bond <= 2
        assert compressed.ortho_center == 1
        assert compressed.is_canonical(1)
        assert 0.0 < discarded < 8.0
        fidelity = abs(np.vdot(psi.to_dense(), compressed.to_dense())) / compressed.norm()
        assert fidelity <= 1.0 + 1e-12


class TestContractions:
    def test_inner_matches_dense(self, rng):
        a, b = random_mps(rng, 5, 3), random_mps(rng, 5, 2)
        np.testing.assert_allclose(inner(a, b), np.vdot(a.to_dense(), b.to_dense()), rtol=1e-12)

    def test_overlap_matches_dense(self, rng):
        bra, ket = random_mps(rng, 4, 3), random_mps(rng, 4, 3)
        op = random_mpo(rng, 4, 2)
        expected = np.vdot(bra.to_dense(), op.to_dense() @ ket.to_dense())
        np.testing.assert_allclose(overlap3(bra, op, ket), expected, rtol=1e-11)

    def test_rayleigh_quotient_of_hermitian(self, rng):
        op = random_mpo(rng, 4, 2)
        hermitian = mpo_product(mpo_dagger(op), op)
        psi = random_mps(rng, 4, 3)
        dense_psi = psi.to_dense()
        expected = np.vdot(dense_psi, hermitian.to_dense() @ dense_psi).real / np.vdot(dense_psi, dense_psi).real
        np.testing.assert_allclose(rayleigh_quotient(hermitian, psi), expected, rtol=1e-11)
        assert rayleigh_quotient(hermitian, psi) >= 0.0

    def test_apply_mpo_matches_dense(self, rng):
        psi, op = random_mps(rng, 4, 3), random_mpo(rng, 4, 2)
        result = apply_mpo(op, psi)
        assert result.max_bond <= 6
        np.testing.assert_allclose(result.to_dense(), op.to_dense() @ psi.to_dense(), atol=1e-11)

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            inner(random_mps(rng, 3, 2), random_mps(rng, 4, 2))


class TestOperatorAlgebra:
    def test_identity_operator(self):
        np.testing.assert_array_equal(MatrixProductOperator.identity([2, 2, 2]).to_dense(), np.eye(8))

    def test_product_operator_is_kron(self):
        op = MatrixProductOperator.product_operator([SIGMA["X"], SIGMA["Z"], SIGMA["+"]])
        np.testing.assert_allclose(op.to_dense(), kron_all([SIGMA["X"], SIGMA["Z"], SIGMA["+"]]))

    def test_pauli_squares_to_identity(self):
        x = MatrixProductOperator.product_operator([SIGMA["X"]] * 3)
        np.testing.assert_allclose(mpo_product(x, x).to_dense(), np.eye(8), atol=1e-15)

    def test_dagger(self):
        op = MatrixProductOperator.product_operator([-1j * SIGMA["Z"], SIGMA["+"]])
        expected = kron_all([1j * SIGMA["Z"], SIGMA["-"]])
        np.testing.assert_allclose(mpo_dagger(op).to_dense(), expected, atol=1e-15)

    def test_dagger_is_an_involution(self, rng):
        op = random_mpo(rng, 4, 3)
        twice = mpo_dagger(mpo_dagger(op))
        assert twice.bond_dims == op.bond_dims
        for original, restored in zip(op.site_tensors, twice.site_tensors):
            assert restored.labels == original.labels
            np.testing.assert_array_equal(restored.data, original.data)

    def test_product_order(self, rng):
        a, b = random_mpo(rng, 3, 2), random_mpo(rng, 3, 3)
        product = mpo_product(a, b)
        assert product.bond_dims == [6, 6]
        np.testing.assert_allclose(product.to_dense(), a.to_dense() @ b.to_dense(), atol=1e-10)

    def test_compressed_product_keeps_operator(self, rng):
        a = random_mpo(rng, 4, 2)
        product = mpo_product(mpo_dagger(a), a, cutoff=1e-14)
        assert all(bond <= 4 for bond in product.bond_dims)
        expected = a.to_dense().conj().T @ a.to_dense()
        np.testing.assert_allclose(product.to_dense(), expected, atol=1e-6 * np.abs(expected).max())

    def test_compress_mpo_reduces_redundant_bonds(self):
        z = SIGMA["Z"]
        first = np.zeros((1, 2, 2, 2), dtype=complex)
        middle = np.zeros((2, 2, 2, 2), dtype=complex)
        last = np.zeros((2, 2, 2, 1), dtype=complex)
        for channel in range(2):
            first[0, :, :, channel] = z
            middle[channel, :, :, channel] = z
            last[channel, :, :, 0] = z
        doubled = MatrixProductOperator.from_arrays([first, middle, middle, last])
        assert doubled.bond_dims == [2, 2, 2]
        compressed = compress_mpo(doubled, cutoff=1e-12)
        assert compressed.max_bond == 1
        np.testing.assert_allclose(compressed.to_dense(), 2 * kron_all([z] * 4), atol=1e-12)
