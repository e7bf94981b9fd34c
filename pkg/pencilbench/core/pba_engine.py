"""Pencil-Based Algorithm (PBA) Engine

Recovers a rank-r CPD of an n1 x n2 x n3 tensor by
  S1. contracting the third mode with an n3 x 2 orthonormal projection Q,
  S2. compressing the projected tensor with ST-HOSVD and solving the
      generalized eigenproblem of its two r x r core slices for A,
  S3. recovering each b_i (x) c_i from the least-squares solution
      (A^+ T_(1))^T and splitting it with a rank-1 SVD,
  S4. assembling the terms.
Failed pencils (singular or complex) trigger a fresh random projection.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from tenacity import (
    RetryError,
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
)

from ..errors import (
    ComplexEigenvalues,
    DegenerateCompression,
    DimensionMismatch,
    InputError,
    InvalidConfig,
    RankTooLarge,
    RetriesExhausted,
    SingularPencil,
)
from .als_engine import AlsConfig, als_refine
from .linalg import fix_signs, leading_sign, orthonormalize, pseudoinverse, solve_pencil, svd
from .tensor_core import Cpd, Rank1Term, Tensor3, flatten, khatri_rao, multilinear_multiply, reconstruct

logger = logging.getLogger(__name__)

ORTHONORMALITY_TOL = 1e-10


class ProjectionStrategy(str, Enum):
    """How the n3 x 2 projection Q is chosen"""
    RANDOM_ORTHONORMAL = "random"
    HOSVD_LEADING_TWO = "hosvd"
    FIXED = "fixed"


@dataclass
class PbaConfig:
    """Configuration for the pencil-based algorithm"""
    rank: int
    projection_strategy: ProjectionStrategy = ProjectionStrategy.RANDOM_ORTHONORMAL
    fixed_projection: Optional[np.ndarray] = None  # n3 x 2, required for FIXED
    max_projection_retries: int = 5
    pencil_tol: float = 1e-10
    seed: int = 0
    compression_rtol: float = 1e-8  # numerical-rank cutoff for the flattenings

    def __post_init__(self):
        self.projection_strategy = ProjectionStrategy(self.projection_strategy)
        if self.rank < 1:
            raise InvalidConfig("rank must be at least 1")
        if self.max_projection_retries < 0:
            raise InvalidConfig("max_projection_retries must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if self.projection_strategy is ProjectionStrategy.FIXED and self.fixed_projection is None:
            raise InvalidConfig("FIXED projection strategy needs fixed_projection")

    def to_dict(self) -> dict:
        return {
            'rank': self.rank,
            'projection_strategy': self.projection_strategy.value,
            'fixed_projection': None if self.fixed_projection is None else np.asarray(self.fixed_projection).tolist(),
            'max_projection_retries': self.max_projection_retries,
            'pencil_tol': self.pencil_tol,
            'seed': self.seed,
            'compression_rtol': self.compression_rtol,
        }


@dataclass
class PbaReport:
    """Output from a PBA run"""
    cpd: Cpd
    projection_used: np.ndarray  # n3 x 2, orthonormal columns
    retries_used: int
    backward_residual: float  # ||T - reconstruct(cpd)||_F / ||T||_F
    pencil_separation: float


@dataclass
class TuckerCompression:
    """Sequentially truncated HOSVD of an n1 x n2 x m tensor to r x r x m"""
    q1: np.ndarray
    q2: np.ndarray
    core: Tensor3
    mode1_singular_values: np.ndarray
    mode2_singular_values: np.ndarray


def choose_projection(
    t: Tensor3,
    strategy: ProjectionStrategy,
    rng: np.random.Generator,
    fixed: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Pick the n3 x 2 orthonormal projection for step S1

    Raises:
        DimensionMismatch: n3 < 2
        InvalidConfig: a fixed Q is missing or not orthonormal
    """
    n3 = t.dims[2]
    if n3 < 2:
        raise DimensionMismatch(f"pencil methods need n3 >= 2, got {n3}")
    strategy = ProjectionStrategy(strategy)

    if strategy is ProjectionStrategy.RANDOM_ORTHONORMAL:
        return orthonormalize(rng.standard_normal((n3, 2)))

    if strategy is ProjectionStrategy.HOSVD_LEADING_TWO:
        u = svd(flatten(t, 3))[0]
        if u.shape[1] < 2:
            raise DimensionMismatch("third flattening has fewer than two left singular vectors")
        return fix_signs(u[:, :2])

    if fixed is None:
        raise InvalidConfig("fixed projection not supplied")
    q = np.asarray(fixed, dtype=np.float64)
    if q.shape != (n3, 2):
        raise InvalidConfig(f"fixed projection must be {n3} x 2, got {q.shape}")
    if np.linalg.norm(q.T @ q - np.eye(2)) > ORTHONORMALITY_TOL:
        raise InvalidConfig("fixed projection does not have orthonormal columns")
    return q


def st_hosvd_compress(b: Tensor3, r: int) -> TuckerCompression:
    """Orthogonal Tucker compression, truncating mode 1 then mode 2

    Raises:
        RankTooLarge: r exceeds n1 or n2
    """
    n1, n2, m = b.dims
    if r > n1 or r > n2:
        raise RankTooLarge(f"rank {r} exceeds tensor dims {b.dims[:2]}")

    u1, s1, _ = svd(flatten(b, 1))
    q1 = u1[:, :r]
    partial = multilinear_multiply(q1.T, np.eye(n2), np.eye(m), b)

    u2, s2, _ = svd(flatten(partial, 2))
    q2 = u2[:, :r]
    core = multilinear_multiply(np.eye(r), q2.T, np.eye(m), partial)

    return TuckerCompression(q1=q1, q2=q2, core=core, mode1_singular_values=s1, mode2_singular_values=s2)


def split_rank1_column(w: np.ndarray, n2: int, n3: int):
    """Best rank-1 split of a vectorized n2 x n3 matrix

    Returns:
        (b, c) with b unit norm, first nonzero entry positive, magnitude on c
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n2 * n3,):
        raise DimensionMismatch(f"column has length {w.size}, expected {n2 * n3}")
    if not np.any(w):
        raise InputError("cannot split the zero column")
    u, s, v = svd(w.reshape(n2, n3))
    b = u[:, 0]
    sign = leading_sign(b)
    return sign * b, (sign * s[0]) * v[:, 0]


class PencilBasedAlgorithm:
    """Prototype PBA with pluggable projection"""

    def __init__(self, config: PbaConfig):
        """Initialize PBA

        Args:
            config: PbaConfig with target rank and projection settings
        """
        self.config = config

    def decompose(self, t: Tensor3) -> PbaReport:
        """Run steps S1-S4, redrawing Q on pencil failures"""
        self._check_shape(t)
        return self._with_projection_retries(t, self._run_with_projection)

    def decompose_projected(self, t: Tensor3, als_config: Optional[AlsConfig] = None) -> PbaReport:
        """Variant: CPD of the projected tensor first, then C by least squares

        A and B come from the n1 x n2 x 2 projection (pencil on Q = I followed
        by ALS on the projection); C = ((A kr B)^+ T_(3)^T)^T.
        """
        self._check_shape(t)

        def run(tensor: Tensor3, q: np.ndarray, retries_used: int) -> PbaReport:
            projected = self._project(tensor, q)
            inner = self._run_with_projection(projected, np.eye(2), retries_used)
            refined = als_refine(projected, inner.cpd, als_config)
            a, b, _ = refined.cpd.factors
            c = (pseudoinverse(khatri_rao(a, b)) @ flatten(tensor, 3).T).T
            cpd = Cpd.from_factors(a, b, c)
            return PbaReport(
                cpd=cpd,
                projection_used=q,
                retries_used=retries_used,
                backward_residual=self._backward_residual(tensor, cpd),
                pencil_separation=inner.pencil_separation,
            )

        return self._with_projection_retries(t, run)

    def _check_shape(self, t: Tensor3) -> None:
        n1, n2, n3 = t.dims
        r = self.config.rank
        if r > n2 or r > n1:
            raise RankTooLarge(f"rank {r} needs r <= n2 <= n1, dims are {t.dims}")
        if n3 < 2:
            raise DimensionMismatch(f"pencil methods need n3 >= 2, got {n3}")
        if t.norm() == 0.0:
            raise DegenerateCompression("input tensor is zero")

    def _with_projection_retries(
        self,
        t: Tensor3,
        run: Callable[[Tensor3, np.ndarray, int], PbaReport],
    ) -> PbaReport:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        retryer = Retrying(
            stop=stop_after_attempt(cfg.max_projection_retries + 1),
            retry=retry_if_exception_type((SingularPencil, ComplexEigenvalues)),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=False,
        )
        try:
            for attempt in retryer:
                with attempt:
                    number = attempt.retry_state.attempt_number
                    # every redraw is random, whatever the first strategy was
                    strategy = cfg.projection_strategy if number == 1 else ProjectionStrategy.RANDOM_ORTHONORMAL
                    q = choose_projection(t, strategy, rng, cfg.fixed_projection)
                    report = run(t, q, number - 1)
        except RetryError as exc:
            cause = exc.last_attempt.exception()
            logger.error(f"PBA failed after {cfg.max_projection_retries + 1} projections: {cause}")
            raise RetriesExhausted(
                f"no usable projection in {cfg.max_projection_retries + 1} attempts: {cause}"
            ) from cause
        return report

    @staticmethod
    def _project(t: Tensor3, q: np.ndarray) -> Tensor3:
        n1, n2, _ = t.dims
        return multilinear_multiply(np.eye(n1), np.eye(n2), q.T, t)

    @staticmethod
    def _backward_residual(t: Tensor3, cpd: Cpd) -> float:
        return (t - reconstruct(cpd)).norm() / t.norm()

    def _run_with_projection(self, t: Tensor3, q: np.ndarray, retries_used: int) -> PbaReport:
        cfg = self.config
        r = cfg.rank
        _, n2, n3 = t.dims

        # S1
        projected = self._project(t, q)

        # S2
        compression = st_hosvd_compress(projected, r)
        self._check_compression(compression)
        core = compression.core.data
        pencil = solve_pencil(core[:, :, 0], core[:, :, 1], cfg.pencil_tol)
        a = compression.q1 @ pencil.eigenvectors
        a = fix_signs(a / np.linalg.norm(a, axis=0))

        # S3
        w = (pseudoinverse(a) @ flatten(t, 1)).T
        terms = []
        for i in range(r):
            b_i, c_i = split_rank1_column(w[:, i], n2, n3)
            terms.append(Rank1Term(a[:, i], b_i, c_i))

        # S4
        cpd = Cpd(tuple(terms))
        report = PbaReport(
            cpd=cpd,
            projection_used=q,
            retries_used=retries_used,
            backward_residual=self._backward_residual(t, cpd),
            pencil_separation=pencil.separation,
        )
        logger.debug(
            f"PBA rank={r} retries={retries_used} residual={report.backward_residual:.3e} "
            f"separation={pencil.separation:.3e}"
        )
        return report

    def _check_compression(self, compression: TuckerCompression) -> None:
        r = self.config.rank
        for mode, s in ((1, compression.mode1_singular_values), (2, compression.mode2_singular_values)):
            if s.size < r or s[0] == 0.0 or s[r - 1] < self.config.compression_rtol * s[0]:
                raise DegenerateCompression(f"mode-{mode} flattening of the projection has numerical rank below {r}")

    def __repr__(self) -> str:
        return f"PencilBasedAlgorithm(rank={self.config.rank}, projection={self.config.projection_strategy.value})"


def pba_decompose(t: Tensor3, config: PbaConfig) -> PbaReport:
    """Functional entry point for the prototype PBA"""
    return PencilBasedAlgorithm(config).decompose(t)


def pba_decompose_projected(t: Tensor3, config: PbaConfig, als_config: Optional[AlsConfig] = None) -> PbaReport:
    """Functional entry point for the projected-CPD PBA variant"""
    return PencilBasedAlgorithm(config).decompose_projected(t, als_config)

