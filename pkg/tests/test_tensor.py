import numpy as np
import pytest

from ness_dmrg.core.tensor import LabeledTensor, contract, qr_split, svd_truncate, truncation_rank

from conftest import SIGMA


class TestLabeledTensor:
    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValueError, match="unique"):
            LabeledTensor(np.zeros((2, 2)), ("a", "a"))

    def test_rejects_label_count_mismatch(self):
        with pytest.raises(ValueError):
            LabeledTensor(np.zeros((2, 2)), ("a",))

    def test_data_is_read_only(self):
        t = LabeledTensor(np.ones((2, 3)), ("a", "b"))
        with pytest.raises(ValueError):
            t.data[0, 0] = 5.0

    def test_relabel_is_simultaneous(self):
        t = LabeledTensor(np.arange(6).reshape(2, 3), ("a", "b"))
        swapped = t.relabel({"a": "b", "b": "a"})
        assert swapped.labels == ("b", "a")
        assert swapped.dims == (2, 3)

    def test_transpose_and_to_matrix(self, rng):
        data = rng.standard_normal((2, 3, 4))
        t = LabeledTensor(data, ("a", "b", "c"))
        np.testing.assert_array_equal(t.transpose(("c", "a", "b")).data, np.transpose(data, (2, 0, 1)))
        np.testing.assert_array_equal(t.to_matrix(("b",)), np.transpose(data, (1, 0, 2)).reshape(3, 8))

    def test_unknown_label(self):
        t = LabeledTensor(np.ones(2), ("a",))
        with pytest.raises(ValueError, match="Unknown label"):
            t.dim("z")

    def test_addition_aligns_labels(self, rng):
        data = rng.standard_normal((2, 3))
        a = LabeledTensor(data, ("x", "y"))
        b = LabeledTensor(data.T, ("y", "x"))
        np.testing.assert_allclose((a + b).data, 2 * data)
        np.testing.assert_allclose((a - b).data, 0 * data)


class TestContract:
    def test_identity(self):
        v = np.array([1.0, 2.0j])
        out = contract(LabeledTensor(np.eye(2), ("i", "j")), LabeledTensor(v, ("j",)), [("j", "j")])
        assert out.labels == ("i",)
        np.testing.assert_allclose(out.data, v)

    def test_pauli_product(self):
        out = contract(LabeledTensor(SIGMA["X"], ("i", "j")), LabeledTensor(SIGMA["Y"], ("j", "k")), [("j", "j")])
        np.testing.assert_allclose(out.data, 1j * SIGMA["Z"], atol=1e-15)

    def test_matches_triple_loop(self, rng):
        a = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
        b = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        out = contract(LabeledTensor(a, ("p", "q", "r")), LabeledTensor(b, ("r", "s")), [("r", "r")])
        expected = np.zeros((3, 4, 2), dtype=complex)
        for p in range(3):
            for q in range(4):
                for s in range(2):
                    for r in range(5):
                        expected[p, q, s] += a[p, q, r] * b[r, s]
        assert out.labels == ("p", "q", "s")
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_outer_product(self):
        out = contract(LabeledTensor([1, 2], ("a",)), LabeledTensor([3, 4, 5], ("b",)), [])
        np.testing.assert_allclose(out.data, np.outer([1, 2], [3, 4, 5]))

    def test_extent_mismatch(self):
        with pytest.raises(ValueError, match="Extent mismatch"):
            contract(LabeledTensor(np.ones((2, 3)), ("a", "b")), LabeledTensor(np.ones(2), ("c",)), [("b", "c")])

    def test_duplicate_output_label(self):
        with pytest.raises(ValueError, match="Duplicate output"):
            contract(LabeledTensor(np.ones((2, 3)), ("a", "b")), LabeledTensor(np.ones((3, 2)), ("b", "a")), [("b", "b")])

    def test_label_in_two_pairs(self):
        with pytest.raises(ValueError):
            contract(
                LabeledTensor(np.ones((2, 2)), ("a", "b")),
                LabeledTensor(np.ones((2, 2)), ("c", "d")),
                [("a", "c"), ("a", "d")],
            )


class TestSvdTruncate:
    def test_rank_one(self):
        u, w = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
        result = svd_truncate(LabeledTensor(np.outer(u, w), ("r", "c")), ("r",), max_rank=2)
        assert result.rank == 1
        np.testing.assert_allclose(result.s, [np.linalg.norm(u) * np.linalg.norm(w)])
        assert result.discarded_weight < 1e-20

    def test_identity(self):
        result = svd_truncate(LabeledTensor(np.eye(4), ("r", "c")), ("r",), max_rank=4)
        np.testing.assert_allclose(result.s, np.ones(4))

    def test_truncation_error_matches_dropped_weight(self, rng):
        data = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        full = np.linalg.svd(data, compute_uv=False)
        result = svd_truncate(LabeledTensor(data, ("r", "c")), ("r",), max_rank=3)
        approx = (result.u.data * result.s[np.newaxis, :]) @ result.v.data
        error = np.linalg.norm(data - approx) ** 2
        np.testing.assert_allclose(error, np.sum(full[3:] ** 2), rtol=1e-10)
        np.testing.assert_allclose(result.discarded_weight, np.sum(full[3:] ** 2) / np.sum(full ** 2), rtol=1e-10)

    def test_labels_of_factors(self, rng):
        t = LabeledTensor.random(("a", "b", "c"), (2, 3, 4), rng)
        result = svd_truncate(t, ("c", "a"), max_rank=10, bond_label="k")
        assert result.u.labels == ("c", "a", "k")
        assert result.v.labels == ("k", "b")
        rebuilt = contract(result.u * 1.0, LabeledTensor(np.diag(result.s), ("k", "k2")), [("k", "k")])
        rebuilt = contract(rebuilt, result.v.relabel({"k": "k2"}), [("k2", "k2")])
        np.testing.assert_allclose(rebuilt.transpose(("a", "b", "c")).data, t.data, atol=1e-12)

    def test_singular_values_descending(self, rng):
        t = LabeledTensor.random(("a", "b"), (6, 5), rng)
        s = svd_truncate(t, ("a",), max_rank=5).s
        assert np.all(np.diff(s) <= 0)

    def test_invalid_arguments(self, rng):
        t = LabeledTensor.random(("a", "b"), (2, 2), rng)
        with pytest.raises(ValueError):
            svd_truncate(t, ("a",), max_rank=0)
        with pytest.raises(ValueError):
            svd_truncate(t, ("a", "b"), max_rank=2)
        with pytest.raises(ValueError):
            svd_truncate(t, ("a",), max_rank=2, cutoff=-1.0)

    def test_cutoff_drops_small_tail(self):
        assert truncation_rank(np.array([1.0, 1e-3, 1e-4]), max_rank=3, cutoff=1e-5) == 1
        assert truncation_rank(np.array([1.0, 1e-3, 1e-4]), max_rank=3, cutoff=0.0) == 3
        assert truncation_rank(np.array([0.0, 0.0]), max_rank=2, cutoff=0.0) == 1


class TestQrSplit:
    def test_reconstruction_and_isometry(self, rng):
        t = LabeledTensor.random(("a", "b", "c"), (2, 3, 4), rng)
        q, r = qr_split(t, ("a", "b"))
        m = q.to_matrix(("a", "b"))
        np.testing.assert_allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=1e-12)
        rebuilt = contract(q, r, [("bond", "bond")])
        np.testing.assert_allclose(rebuilt.transpose(("a", "b", "c")).data, t.data, atol=1e-12)

    def test_isometry_is_fixed_point(self, rng):
        t = LabeledTensor.random(("a", "b"), (5, 3), rng)
        q, _ = qr_split(t, ("a",))
        q2, r2 = qr_split(q.relabel({"bond": "b"}), ("a",))
        np.testing.assert_allclose(q2.data, q.data, atol=1e-12)
        np.testing.assert_allclose(r2.data, np.eye(3), atol=1e-12)
