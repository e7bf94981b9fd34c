"""Tensor Core - Dense Order-3 Tensors and CPDs

Layout: entry (i1, i2, i3) of an n1 x n2 x n3 tensor is stored at flat
position (i1*n2 + i2)*n3 + i3, i.e. numpy C order on shape (n1, n2, n3).
All flattenings and Khatri-Rao products below are consistent with it:

    flatten(T, 1) = A (B kr C)^T
    flatten(T, 2) = B (A kr C)^T
    flatten(T, 3) = C (A kr B)^T
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np

from ..errors import ConvergenceError, DimensionMismatch, InputError, NonFiniteInput
from .linalg import leading_sign, svd

logger = logging.getLogger(__name__)

Dims = Tuple[int, int, int]


def _frozen_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a nonempty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    if not np.any(arr):
        raise InputError(f"{name} is the zero vector")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Tensor3:
    """Dense real n1 x n2 x n3 tensor"""
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionMismatch(f"Tensor3 needs a 3-D array with positive dims, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("tensor contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, dims: Sequence[int], values: Sequence[float]) -> "Tensor3":
        """Build from values listed in layout order"""
        dims = tuple(int(d) for d in dims)
        flat = np.asarray(values, dtype=np.float64).ravel()
        if len(dims) != 3 or flat.size != int(np.prod(dims)):
            raise DimensionMismatch(f"{flat.size} values do not fill a tensor of dims {dims}")
        return cls(flat.reshape(dims))

    @property
    def dims(self) -> Dims:
        return tuple(int(d) for d in self.data.shape)  # type: ignore[return-value]

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def norm(self) -> float:
        """Frobenius norm"""
        return float(np.linalg.norm(self.flat))

    def __add__(self, other: "Tensor3") -> "Tensor3":
        _check_same_dims(self.dims, other.dims)
        return Tensor3(self.data + other.data)

    def __sub__(self, other: "Tensor3") -> "Tensor3":
        _check_same_dims(self.dims, other.dims)
        return Tensor3(self.data - other.data)

    def scaled(self, factor: float) -> "Tensor3":
        return Tensor3(factor * self.data)

    def __repr__(self) -> str:
        return f"Tensor3(dims={self.dims}, norm={self.norm():.6g})"


@dataclass(frozen=True, eq=False)
class Rank1Term:
    """Rank-1 tensor a (x) b (x) c in factored form"""
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen_vector(self.a, "a"))
        object.__setattr__(self, "b", _frozen_vector(self.b, "b"))
        object.__setattr__(self, "c", _frozen_vector(self.c, "c"))

    @property
    def dims(self) -> Dims:
        return (self.a.size, self.b.size, self.c.size)

    def dense(self) -> Tensor3:
        return Tensor3(np.einsum("i,j,k->ijk", self.a, self.b, self.c))

    def vectorized(self) -> np.ndarray:
        """Layout-order vector of the dense term"""
        return np.kron(self.a, np.kron(self.b, self.c))

    def norm(self) -> float:
        return float(np.linalg.norm(self.a) * np.linalg.norm(self.b) * np.linalg.norm(self.c))

    def normalized(self) -> "Rank1Term":
        """Unit a and b with first nonzero entry positive; magnitude and sign on c"""
        na, nb = np.linalg.norm(self.a), np.linalg.norm(self.b)
        sa, sb = leading_sign(self.a), leading_sign(self.b)
        return Rank1Term(sa * self.a / na, sb * self.b / nb, (sa * sb * na * nb) * self.c)


@dataclass(frozen=True, eq=False)
class Cpd:
    """Ordered list of rank-1 terms sharing dimensions"""
    terms: Tuple[Rank1Term, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise InputError("a CPD needs at least one term")
        dims = terms[0].dims
        for idx, term in enumerate(terms):
            if term.dims != dims:
                raise DimensionMismatch(f"term {idx} has dims {term.dims}, expected {dims}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_factors(cls, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> "Cpd":
        """Build from factor matrices whose i-th columns form the i-th term"""
        a, b, c = (np.asarray(m, dtype=np.float64) for m in (a, b, c))
        if a.ndim != 2 or b.ndim != 2 or c.ndim != 2:
            raise DimensionMismatch("factor matrices must be 2-D")
        if not a.shape[1] == b.shape[1] == c.shape[1]:
            raise DimensionMismatch(
                f"factor matrices disagree on rank: {a.shape[1]}, {b.shape[1]}, {c.shape[1]}"
            )
        return cls(tuple(Rank1Term(a[:, i], b[:, i], c[:, i]) for i in range(a.shape[1])))

    @property
    def rank(self) -> int:
        return len(self.terms)

    @property
    def dims(self) -> Dims:
        return self.terms[0].dims

    @property
    def factors(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A, B, C) with one column per term"""
        return (
            np.column_stack([t.a for t in self.terms]),
            np.column_stack([t.b for t in self.terms]),
            np.column_stack([t.c for t in self.terms]),
        )

    def vectorized(self) -> np.ndarray:
        """A kr B kr C: one layout-order column per term"""
        a, b, c = self.factors
        return khatri_rao(a, khatri_rao(b, c))

    def normalized(self) -> "Cpd":
        return Cpd(tuple(t.normalized() for t in self.terms))

    def permuted(self, order: Sequence[int]) -> "Cpd":
        """Terms reordered so the i-th new term is the order[i]-th old term"""
        if sorted(order) != list(range(self.rank)):
            raise InputError(f"{list(order)} is not a permutation of range({self.rank})")
        return Cpd(tuple(self.terms[i] for i in order))

    def __len__(self) -> int:
        return self.rank

    def __iter__(self) -> Iterator[Rank1Term]:
        return iter(self.terms)

    def __repr__(self) -> str:
        return f"Cpd(rank={self.rank}, dims={self.dims})"


@dataclass(frozen=True, eq=False)
class Rank1Fit:
    """Result of a best rank-1 approximation"""
    term: Rank1Term
    iterations: int
    converged: bool
    residual: float  # ||T - term||_F


def _check_same_dims(d1: Tuple[int, ...], d2: Tuple[int, ...]) -> None:
    if tuple(d1) != tuple(d2):
        raise DimensionMismatch(f"dims {tuple(d1)} and {tuple(d2)} differ")


def reconstruct(cpd: Cpd) -> Tensor3:
    """Dense sum of the rank-1 terms"""
    a, b, c = cpd.factors
    return Tensor3(np.einsum("ir,jr,kr->ijk", a, b, c))


def flatten(t: Tensor3, mode: int) -> np.ndarray:
    """Mode-k unfolding, column order matching khatri_rao of the other two factors"""
    if mode == 1:
        return t.data.reshape(t.dims[0], -1)
    if mode == 2:
        return t.data.transpose(1, 0, 2).reshape(t.dims[1], -1)
    if mode == 3:
        return t.data.transpose(2, 0, 1).reshape(t.dims[2], -1)
    raise InputError(f"mode must be 1, 2 or 3, got {mode}")


def khatri_rao(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product [m_i (x) n_i]"""
    m = np.asarray(m, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if m.ndim != 2 or n.ndim != 2:
        raise DimensionMismatch("khatri_rao needs two matrices")
    if m.shape[1] != n.shape[1]:
        raise DimensionMismatch(f"column counts differ: {m.shape[1]} vs {n.shape[1]}")
    return (m[:, None, :] * n[None, :, :]).reshape(m.shape[0] * n.shape[0], m.shape[1])


def multilinear_multiply(m1: np.ndarray, m2: np.ndarray, m3: np.ndarray, t: Tensor3) -> Tensor3:
    """(M1, M2, M3) . T, contracting mode k of T with the columns of Mk"""
    mats = [np.asarray(m, dtype=np.float64) for m in (m1, m2, m3)]
    for k, (mat, n) in enumerate(zip(mats, t.dims), start=1):
        if mat.ndim != 2 or mat.shape[1] != n:
            raise DimensionMismatch(f"M{k} has shape {mat.shape}, needs {n} columns")
    return Tensor3(np.einsum("pi,qj,sk,ijk->pqs", *mats, t.data, optimize=True))


def rank1_inner(s: Rank1Term, t: Rank1Term) -> float:
    """Inner product of two rank-1 tensors from their factors"""
    _check_same_dims(s.dims, t.dims)
    return float(np.dot(s.a, t.a) * np.dot(s.b, t.b) * np.dot(s.c, t.c))


def best_rank1(t: Tensor3, max_iters: int = 500, tol: float = 1e-14) -> Rank1Fit:
    """Higher-order power iteration from the HOSVD initialization

    Stops when the approximant's norm stagnates: |sigma_k - sigma_{k-1}| <= tol * sigma_k.

    Raises:
        InputError: on the zero tensor
    """
    if max_iters < 1:
        raise InputError("max_iters must be at least 1")
    if t.norm() == 0.0:
        raise InputError("best rank-1 approximation of the zero tensor is undefined")

    x = t.data
    # the mode-1 vector is the first quantity updated, so only b and c need seeding
    b = svd(flatten(t, 2))[0][:, 0]
    c = svd(flatten(t, 3))[0][:, 0]

    sigma_prev = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        a = np.einsum("ijk,j,k->i", x, b, c)
        a /= np.linalg.norm(a)
        b = np.einsum("ijk,i,k->j", x, a, c)
        b /= np.linalg.norm(b)
        c_full = np.einsum("ijk,i,j->k", x, a, b)
        sigma = float(np.linalg.norm(c_full))
        if sigma == 0.0:
            raise ConvergenceError("power iteration collapsed to a zero term")
        c = c_full / sigma
        if abs(sigma - sigma_prev) <= tol * sigma:
            converged = True
            break
        sigma_prev = sigma

    if not converged:
        logger.warning(f"Rank-1 power iteration did not converge in {max_iters} iterations")

    term = Rank1Term(a, b, sigma * c).normalized()
    residual = float(np.linalg.norm(x - term.dense().data))
    return Rank1Fit(term=term, iterations=iterations, converged=converged, residual=residual)
