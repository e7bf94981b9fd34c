"""Matrix Computation Contracts

SVD, orthonormalization, pseudoinverse and the pencil eigendecomposition
that the decomposition engines are built on. Thin wrappers over
scipy.linalg that pin down ordering and sign conventions so results are
reproducible.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from ..errors import (
    ComplexEigenvalues,
    DimensionMismatch,
    NonFiniteInput,
    RankDeficient,
    SingularPencil,
)

logger = logging.getLogger(__name__)

UNIT_ROUNDOFF = 2.0 ** -53  # double precision, ~1.11e-16
PINV_RCOND = 1e-12
SIGN_RTOL = 1e-12  # entries below this fraction of the column max are treated as zero


@dataclass(frozen=True, eq=False)
class PencilEig:
    """Eigendecomposition of S1 S2^-1"""
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # unit-norm columns, matching eigenvalue order
    ill_conditioned_flag: bool
    separation: float  # min_{i != j} |lambda_i - lambda_j|


def _require_matrix(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def leading_sign(v: np.ndarray) -> float:
    """Sign of the first entry that is not negligibly small (+1 for a zero vector)"""
    v = np.asarray(v)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return 1.0
    idx = np.flatnonzero(np.abs(v) > SIGN_RTOL * scale)[0]
    return 1.0 if v[idx] > 0 else -1.0


def fix_signs(m: np.ndarray) -> np.ndarray:
    """Flip columns so each column's first nonzero entry is positive"""
    m = np.array(m, dtype=np.float64)
    for j in range(m.shape[1]):
        if leading_sign(m[:, j]) < 0:
            m[:, j] = -m[:, j]
    return m


def svd(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD M = U diag(s) V^T

    Returns:
        (U, s, V) with s descending and nonnegative
    """
    arr = _require_matrix(m)
    u, s, vt = scipy.linalg.svd(arr, full_matrices=False, lapack_driver="gesdd")
    return u, s, vt.T


def singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values only, descending"""
    return scipy.linalg.svdvals(_require_matrix(m))


def orthonormalize(m: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Q-factor of the economic QR decomposition with the canonical sign convention

    Raises:
        RankDeficient: if M does not have full column rank at rtol
    """
    arr = _require_matrix(m)
    rows, cols = arr.shape
    if cols > rows:
        raise RankDeficient(f"cannot orthonormalize {cols} columns in R^{rows}")
    q, r = scipy.linalg.qr(arr, mode="economic")
    diag = np.abs(np.diag(r))
    if cols and (diag.max() == 0.0 or diag.min() <= rtol * diag.max()):
        raise RankDeficient("input matrix is numerically rank deficient")
    return fix_signs(q)


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of a nonzero vector

    Built from the Householder reflector that maps u/|u| to a multiple of
    e1; its trailing n-1 columns span u^perp. Deterministic in u.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise RankDeficient("complement of the zero vector is undefined")
    unit = u / norm
    v = unit.copy()
    v[0] += 1.0 if unit[0] >= 0 else -1.0
    h = np.eye(n) - 2.0 * np.outer(v, v) / np.dot(v, v)
    return h[:, 1:]


def pseudoinverse(m: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD with a relative rank cutoff"""
    arr = _require_matrix(m)
    if arr.size == 0:
        return np.zeros(arr.shape[::-1])
    u, s, v = svd(arr)
    if s[0] == 0.0:
        return np.zeros(arr.shape[::-1])
    keep = s > rcond * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (v * inv) @ u.T


def _real_basis(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Real eigenvector matrix; a near-real conjugate pair x +- iy becomes the columns x, y"""
    basis = np.array(vectors.real)
    pairs = np.flatnonzero(values.imag > 0.0)
    if pairs.size:
        # LAPACK stores each pair consecutively, positive imaginary part first
        basis[:, pairs + 1] = vectors[:, pairs].imag
        logger.warning(f"Pencil has {pairs.size} near-real conjugate pair(s); using their real invariant subspaces")
    return basis


def solve_pencil(s1: np.ndarray, s2: np.ndarray, tol: float = 1e-10) -> PencilEig:
    """Eigendecomposition of the pencil (S1, S2) as the spectrum of S1 S2^-1

    Args:
        s1: r x r first slice
        s2: r x r second slice, invertible to working precision
        tol: relative tolerance for singularity, realness and separation

    Returns:
        PencilEig with eigenvalues sorted descending

    Raises:
        SingularPencil: smallest singular value of S2 <= tol * largest
        ComplexEigenvalues: some imaginary part exceeds tol * spectral radius
    """
    s1 = _require_matrix(s1, "S1")
    s2 = _require_matrix(s2, "S2")
    r = s1.shape[0]
    if s1.shape != (r, r) or s2.shape != (r, r):
        raise DimensionMismatch(f"pencil slices must be square and equal, got {s1.shape} and {s2.shape}")

    sv = singular_values(s2)
    if sv[0] == 0.0 or sv[-1] <= tol * sv[0]:
        raise SingularPencil(f"S2 is numerically singular (sigma_min/sigma_max = {sv[-1] / sv[0] if sv[0] else 0.0:.3e})")

    # S1 S2^-1 = (S2^-T S1^T)^T
    product = scipy.linalg.solve(s2.T, s1.T).T
    values, vectors = scipy.linalg.eig(product)

    radius = float(np.max(np.abs(values)))
    imag = np.abs(values.imag)
    if radius > 0.0 and np.max(imag) > tol * radius:
        raise ComplexEigenvalues(
            f"pencil has complex eigenvalues (max |imag| = {np.max(imag):.3e}, radius = {radius:.3e})"
        )

    real_values = values.real
    real_vectors = _real_basis(values, vectors)
    order = np.argsort(-real_values, kind="stable")
    real_values = real_values[order]
    real_vectors = real_vectors[:, order]
    real_vectors = real_vectors / np.linalg.norm(real_vectors, axis=0)
    real_vectors = fix_signs(real_vectors)

    if r > 1:
        separation = float(np.min(np.abs(np.diff(real_values))))
    else:
        separation = float("inf")
    ill_conditioned = bool(separation < tol * radius) if r > 1 else False
    if ill_conditioned:
        logger.debug(f"Pencil eigenvalues nearly coincide: separation={separation:.3e}")

    return PencilEig(
        eigenvalues=real_values,
        eigenvectors=real_vectors,
        ill_conditioned_flag=ill_conditioned,
        separation=separation,
    )
