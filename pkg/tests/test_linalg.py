"""
Matrix contracts: SVD, orthonormalization, complements, pseudoinverse and
the pencil eigendecomposition.
"""

import numpy as np
import pytest

from pencilbench.core.linalg import (
    fix_signs,
    orthonormal_complement,
    orthonormalize,
    pseudoinverse,
    singular_values,
    solve_pencil,
    svd,
)
from pencilbench.errors import ComplexEigenvalues, NonFiniteInput, RankDeficient, SingularPencil


class TestSvd:

    def test_identity(self):
        np.testing.assert_array_equal(svd(np.eye(3))[1], np.ones(3))

    def test_diagonal(self):
        np.testing.assert_allclose(svd(np.diag([3.0, 2.0, 1.0]))[1], [3.0, 2.0, 1.0])

    def test_reconstruction(self, rng):
        m = rng.standard_normal((5, 3))
        u, s, v = svd(m)
        assert np.linalg.norm(m - (u * s) @ v.T) <= 1e-13 * np.linalg.norm(m)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)

    def test_permutation_invariance(self, rng):
        m = rng.standard_normal((6, 4))
        permuted = m[rng.permutation(6)][:, rng.permutation(4)]
        np.testing.assert_allclose(singular_values(permuted), singular_values(m), rtol=1e-13)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            svd(np.array([[1.0, np.inf], [0.0, 1.0]]))


class TestOrthonormalize:

    def test_scaled_unit_vector(self):
        np.testing.assert_allclose(orthonormalize(np.array([[2.0], [0.0], [0.0]])), [[1.0], [0.0], [0.0]])

    def test_orthonormal_input_keeps_span(self, rng):
        q0 = np.linalg.qr(rng.standard_normal((6, 3)))[0]
        q = orthonormalize(q0)
        np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(q @ q.T, q0 @ q0.T, atol=1e-12)

    def test_gaussian(self, rng):
        q = orthonormalize(rng.standard_normal((10, 4)))
        np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-13)
        assert np.all(fix_signs(q) == q)

    def test_rank_deficient(self):
        m = np.ones((4, 2))
        with pytest.raises(RankDeficient):
            orthonormalize(m)


class TestOrthonormalComplement:

    @pytest.mark.parametrize("n", [2, 3, 7])
    def test_complement(self, rng, n):
        u = rng.standard_normal(n)
        q = orthonormal_complement(u)
        assert q.shape == (n, n - 1)
        np.testing.assert_allclose(q.T @ q, np.eye(n - 1), atol=1e-14)
        np.testing.assert_allclose(q.T @ u, 0.0, atol=1e-14 * np.linalg.norm(u))

    def test_deterministic(self, rng):
        u = rng.standard_normal(5)
        np.testing.assert_array_equal(orthonormal_complement(u), orthonormal_complement(u.copy()))


class TestPseudoinverse:

    def test_identity(self):
        np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3))

    def test_cutoff_zeroes_null_direction(self):
        np.testing.assert_allclose(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_left_inverse(self, rng):
        m = rng.standard_normal((6, 4))
        np.testing.assert_allclose(pseudoinverse(m) @ m, np.eye(4), atol=1e-11)

    def test_penrose_identities(self, rng):
        m = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 4))
        p = pseudoinverse(m)
        scale = np.linalg.norm(m) * np.linalg.norm(p)
        assert np.linalg.norm(m @ p @ m - m) <= 1e-11 * np.linalg.norm(m) * scale
        assert np.linalg.norm(p @ m @ p - p) <= 1e-11 * np.linalg.norm(p) * scale
        assert np.linalg.norm((m @ p).T - m @ p) <= 1e-11 * scale
        assert np.linalg.norm((p @ m).T - p @ m) <= 1e-11 * scale

    def test_transpose(self, rng):
        m = rng.standard_normal((4, 7))
        np.testing.assert_allclose(pseudoinverse(m).T, pseudoinverse(m.T), atol=1e-11)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(pseudoinverse(np.zeros((2, 3))), np.zeros((3, 2)))


class TestSolvePencil:

    def test_diagonal(self):
        eig = solve_pencil(np.diag([2.0, 3.0]), np.eye(2))
        np.testing.assert_allclose(eig.eigenvalues, [3.0, 2.0])
        np.testing.assert_allclose(np.abs(eig.eigenvectors), np.array([[0.0, 1.0], [1.0, 0.0]]), atol=1e-15)
        assert not eig.ill_conditioned_flag
        assert eig.separation == pytest.approx(1.0)

    def test_constructed_spectrum(self, rng):
        x = rng.standard_normal((2, 2))
        s2 = rng.standard_normal((2, 2))
        s1 = x @ np.diag([1.0, 4.0]) @ np.linalg.inv(x) @ s2
        eig = solve_pencil(s1, s2)
        np.testing.assert_allclose(eig.eigenvalues, [4.0, 1.0], rtol=1e-10)
        for col, j in ((0, 1), (1, 0)):
            v = x[:, j] / np.linalg.norm(x[:, j])
            assert abs(abs(np.dot(eig.eigenvectors[:, col], v)) - 1.0) <= 1e-10

    def test_recovers_random_real_spectra(self, rng):
        for _ in range(500):
            r = int(rng.integers(1, 13))
            spectrum = rng.uniform(-3.0, 3.0, size=r)
            x = np.linalg.qr(rng.standard_normal((r, r)))[0] * rng.uniform(0.5, 2.0, size=r)
            s2 = np.linalg.qr(rng.standard_normal((r, r)))[0]
            s1 = x @ np.diag(spectrum) @ np.linalg.solve(x, s2)
            try:
                eig = solve_pencil(s1, s2)
            except (SingularPencil, ComplexEigenvalues):
                continue  # unlucky draw of X or S2
            np.testing.assert_allclose(eig.eigenvalues, np.sort(spectrum)[::-1], rtol=1e-10, atol=1e-10 * np.abs(spectrum).max())

    def test_generalized_residual(self, rng):
        r = 4
        x = rng.standard_normal((r, r))
        s2 = rng.standard_normal((r, r))
        s1 = x @ np.diag([4.0, 2.0, 1.0, -1.0]) @ np.linalg.solve(x, s2)
        eig = solve_pencil(s1, s2)
        for lam, v in zip(eig.eigenvalues, eig.eigenvectors.T):
            w = np.linalg.solve(s2, v)
            bound = 1e-10 * (np.linalg.norm(s1, 2) + abs(lam) * np.linalg.norm(s2, 2)) * np.linalg.norm(w)
            assert np.linalg.norm(s1 @ w - lam * s2 @ w) <= bound

    def test_singular(self):
        with pytest.raises(SingularPencil):
            solve_pencil(np.eye(2), np.zeros((2, 2)))

    def test_complex(self):
        rotation = np.array([[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(ComplexEigenvalues):
            solve_pencil(rotation, np.eye(2))

    def test_ill_conditioned_flag(self):
        eig = solve_pencil(np.diag([1.0, 1.0 + 1e-13]), np.eye(2))
        assert eig.ill_conditioned_flag

    def test_near_real_pair_keeps_independent_vectors(self, caplog):
        # eigenvalues 1 +- 1e-12 i pass the realness test as a conjugate pair
        s1 = np.array([[1.0, 1e-12], [-1e-12, 1.0]])
        with caplog.at_level("WARNING", logger="pencilbench.core.linalg"):
            eig = solve_pencil(s1, np.eye(2))
        np.testing.assert_allclose(eig.eigenvalues, [1.0, 1.0])
        assert abs(np.linalg.det(eig.eigenvectors)) == pytest.approx(1.0, abs=1e-12)
        assert eig.ill_conditioned_flag
        assert "conjugate pair" in caplog.text
