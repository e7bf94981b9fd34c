"""
Tensor core: storage, flattenings, Khatri-Rao, multilinear multiplication,
rank-1 inner products and best rank-1 approximation.
"""

import itertools

import numpy as np
import pytest

from pencilbench.core.tensor_core import (
    Cpd,
    Rank1Term,
    Tensor3,
    best_rank1,
    flatten,
    khatri_rao,
    multilinear_multiply,
    rank1_inner,
    reconstruct,
)
from pencilbench.errors import DimensionMismatch, InputError, NonFiniteInput

from conftest import random_cpd


def e(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def naive_reconstruct(cpd):
    out = np.zeros(cpd.dims)
    for term in cpd:
        for i1, i2, i3 in itertools.product(*(range(n) for n in cpd.dims)):
            out[i1, i2, i3] += term.a[i1] * term.b[i2] * term.c[i3]
    return out


class TestTensor3:

    def test_layout_matches_flat_position(self):
        t = Tensor3.from_flat((2, 3, 4), np.arange(24.0))
        n1, n2, n3 = t.dims
        for i1, i2, i3 in itertools.product(range(n1), range(n2), range(n3)):
            assert t.data[i1, i2, i3] == (i1 * n2 + i2) * n3 + i3

    def test_rejects_non_finite(self):
        data = np.ones((2, 2, 2))
        data[1, 0, 1] = np.nan
        with pytest.raises(NonFiniteInput):
            Tensor3(data)

    def test_rejects_wrong_value_count(self):
        with pytest.raises(DimensionMismatch):
            Tensor3.from_flat((2, 2, 2), np.ones(7))

    def test_is_read_only(self):
        t = Tensor3(np.ones((2, 2, 2)))
        with pytest.raises(ValueError):
            t.data[0, 0, 0] = 5.0


class TestRank1TermAndCpd:

    def test_zero_vector_rejected(self):
        with pytest.raises(InputError):
            Rank1Term(np.zeros(2), np.ones(2), np.ones(2))

    def test_mixed_dims_rejected(self):
        with pytest.raises(DimensionMismatch):
            Cpd((Rank1Term(np.ones(2), np.ones(2), np.ones(2)), Rank1Term(np.ones(3), np.ones(2), np.ones(2))))

    def test_normalization_keeps_tensor(self, rng):
        cpd = random_cpd(rng, (4, 3, 5), 3)
        normalized = cpd.normalized()
        a, b, _ = normalized.factors
        np.testing.assert_allclose(np.linalg.norm(a, axis=0), 1.0, rtol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(b, axis=0), 1.0, rtol=1e-14)
        assert np.all(a[0] > 0) and np.all(b[0] > 0)
        before = reconstruct(cpd)
        assert (reconstruct(normalized) - before).norm() <= 1e-14 * before.norm()

    def test_permuted(self, rng):
        cpd = random_cpd(rng, (3, 3, 3), 3)
        permuted = cpd.permuted([2, 0, 1])
        np.testing.assert_array_equal(permuted.factors[0][:, 0], cpd.factors[0][:, 2])
        with pytest.raises(InputError):
            cpd.permuted([0, 0, 1])

    def test_vectorized_columns_are_terms(self, rng):
        cpd = random_cpd(rng, (3, 4, 2), 2)
        for i, term in enumerate(cpd):
            np.testing.assert_allclose(cpd.vectorized()[:, i], term.vectorized(), rtol=1e-15)
            np.testing.assert_allclose(term.vectorized(), term.dense().flat, rtol=1e-15)


class TestReconstruct:

    def test_single_unit_term(self):
        t = reconstruct(Cpd((Rank1Term(e(2, 0), e(2, 0), e(2, 0)),)))
        expected = np.zeros((2, 2, 2))
        expected[0, 0, 0] = 1.0
        np.testing.assert_array_equal(t.data, expected)

    def test_cancellation(self):
        t = reconstruct(Cpd((Rank1Term(e(2, 0), e(2, 0), e(2, 0)), Rank1Term(-e(2, 0), e(2, 0), e(2, 0)))))
        assert t.norm() == 0.0

    def test_matches_triple_loop(self, rng):
        cpd = random_cpd(rng, (4, 3, 3), 3)
        oracle = naive_reconstruct(cpd)
        np.testing.assert_allclose(reconstruct(cpd).data, oracle, rtol=1e-14, atol=1e-14 * np.abs(oracle).max())

    def test_triangle_inequality(self, rng):
        for _ in range(20):
            cpd = random_cpd(rng, (5, 4, 3), 4)
            assert reconstruct(cpd).norm() <= sum(term.norm() for term in cpd) * (1 + 1e-14)


class TestFlatten:

    def test_unit_term_mode1(self):
        t = reconstruct(Cpd((Rank1Term(e(2, 0), e(2, 0), e(2, 0)),)))
        m = flatten(t, 1)
        assert m.shape == (2, 4)
        assert m[0, 0] == 1.0 and np.count_nonzero(m) == 1

    @pytest.mark.parametrize("dims", [(4, 3, 2), (5, 5, 5), (10, 7, 3)])
    def test_factor_identities(self, rng, dims):
        for _ in range(100):
            cpd = random_cpd(rng, dims, 3)
            t = reconstruct(cpd)
            a, b, c = cpd.factors
            for mode, expected in (
                (1, a @ khatri_rao(b, c).T),
                (2, b @ khatri_rao(a, c).T),
                (3, c @ khatri_rao(a, b).T),
            ):
                got = flatten(t, mode)
                assert np.linalg.norm(got - expected) <= 1e-13 * np.linalg.norm(expected)

    def test_norm_preserved(self, rng):
        t = Tensor3(rng.standard_normal((3, 4, 5)))
        for mode in (1, 2, 3):
            assert np.linalg.norm(flatten(t, mode)) == pytest.approx(t.norm(), rel=1e-14)

    def test_invalid_mode(self):
        with pytest.raises(InputError):
            flatten(Tensor3(np.ones((2, 2, 2))), 4)


class TestKhatriRao:

    def test_identity(self):
        np.testing.assert_array_equal(khatri_rao(np.eye(2), np.eye(2)), np.eye(4)[:, [0, 3]])

    def test_columns_are_kronecker(self, rng):
        m, n = rng.standard_normal((3, 2)), rng.standard_normal((4, 2))
        kr = khatri_rao(m, n)
        for i in range(2):
            np.testing.assert_allclose(kr[:, i], np.outer(m[:, i], n[:, i]).ravel(), rtol=1e-15)

    def test_column_mismatch(self):
        with pytest.raises(DimensionMismatch):
            khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


class TestMultilinearMultiply:

    def test_identity_is_noop(self, rng):
        t = Tensor3(rng.standard_normal((3, 4, 2)))
        np.testing.assert_array_equal(multilinear_multiply(np.eye(3), np.eye(4), np.eye(2), t).data, t.data)

    def test_mode3_contraction_of_rank1(self, rng):
        a, b, c = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(5)
        q = np.linalg.qr(rng.standard_normal((5, 2)))[0]
        got = multilinear_multiply(np.eye(3), np.eye(4), q.T, Rank1Term(a, b, c).dense())
        np.testing.assert_allclose(got.data, Rank1Term(a, b, q.T @ c).dense().data, rtol=1e-13, atol=1e-15)

    def test_against_naive_loops(self, rng):
        for _ in range(100):
            t = rng.standard_normal((3, 3, 3))
            m1, m2, m3 = (rng.standard_normal((2, 3)) for _ in range(3))
            oracle = np.zeros((2, 2, 2))
            for p, q, s in itertools.product(range(2), repeat=3):
                for i, j, k in itertools.product(range(3), repeat=3):
                    oracle[p, q, s] += m1[p, i] * m2[q, j] * m3[s, k] * t[i, j, k]
            got = multilinear_multiply(m1, m2, m3, Tensor3(t)).data
            assert np.linalg.norm(got - oracle) <= 1e-13 * np.linalg.norm(oracle)

    def test_composition(self, rng):
        t = Tensor3(rng.standard_normal((3, 4, 5)))
        n = [rng.standard_normal((d, d)) for d in (3, 4, 5)]
        m = [rng.standard_normal((2, d)) for d in (3, 4, 5)]
        twice = multilinear_multiply(*m, multilinear_multiply(*n, t))
        once = multilinear_multiply(m[0] @ n[0], m[1] @ n[1], m[2] @ n[2], t)
        assert (twice - once).norm() <= 1e-12 * once.norm()

    def test_orthonormal_projection_contracts(self, rng):
        t = Tensor3(rng.standard_normal((3, 3, 6)))
        q = np.linalg.qr(rng.standard_normal((6, 2)))[0]
        assert multilinear_multiply(np.eye(3), np.eye(3), q.T, t).norm() <= t.norm()

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            multilinear_multiply(np.eye(2), np.eye(2), np.eye(3), Tensor3(np.ones((2, 2, 2))))


class TestRank1Inner:

    def test_unit_term_with_itself(self):
        s = Rank1Term(e(3, 1), e(2, 0), e(2, 1))
        assert rank1_inner(s, s) == 1.0

    def test_orthogonal_a(self):
        assert rank1_inner(Rank1Term(e(2, 0), np.ones(2), np.ones(2)), Rank1Term(e(2, 1), np.ones(2), np.ones(2))) == 0.0

    def test_against_dense(self, rng):
        for _ in range(1000):
            s = Rank1Term(rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(2))
            t = Rank1Term(rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(2))
            dense = float(np.dot(s.dense().flat, t.dense().flat))
            assert rank1_inner(s, t) == pytest.approx(dense, rel=1e-14, abs=1e-14 * s.norm() * t.norm())


class TestBestRank1:

    def test_exact_rank1_fixed_point(self, rng):
        term = Rank1Term(rng.standard_normal(4), rng.standard_normal(3), rng.standard_normal(5))
        fit = best_rank1(term.dense())
        assert fit.converged
        assert (fit.term.dense() - term.dense()).norm() <= 1e-12 * term.norm()

    def test_small_perturbation(self, rng):
        term = Rank1Term(rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3))
        noise = rng.standard_normal((3, 3, 3))
        t = Tensor3(term.dense().data + 1e-8 * term.norm() * noise / np.linalg.norm(noise))
        fit = best_rank1(t)
        assert (fit.term.dense() - term.dense()).norm() <= 1e-7 * term.norm()
        assert fit.residual <= 1e-8 * term.norm() * (1 + 1e-6)

    def test_dominant_odeco_term(self):
        t = Tensor3(Rank1Term(e(2, 0), e(2, 0), e(2, 0)).dense().data + 0.5 * Rank1Term(e(2, 1), e(2, 1), e(2, 1)).dense().data)
        fit = best_rank1(t)
        np.testing.assert_allclose(fit.term.dense().data, Rank1Term(e(2, 0), e(2, 0), e(2, 0)).dense().data, atol=1e-12)

    def test_no_worse_than_one_more_step(self, rng):
        t = Tensor3(rng.standard_normal((3, 4, 3)))
        fit = best_rank1(t)
        a, b, c = fit.term.a, fit.term.b, fit.term.c / np.linalg.norm(fit.term.c)
        a2 = np.einsum("ijk,j,k->i", t.data, b, c)
        a2 /= np.linalg.norm(a2)
        b2 = np.einsum("ijk,i,k->j", t.data, a2, c)
        b2 /= np.linalg.norm(b2)
        c2 = np.einsum("ijk,i,j->k", t.data, a2, b2)
        stepped = np.linalg.norm(t.data - Rank1Term(a2, b2, c2).dense().data)
        assert fit.residual <= stepped + 1e-14 * t.norm() + 1e-12

    def test_zero_tensor(self):
        with pytest.raises(InputError):
            best_rank1(Tensor3(np.zeros((2, 2, 2))))
