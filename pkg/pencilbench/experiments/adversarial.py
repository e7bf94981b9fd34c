"""Adversarial Instances for Pencil-Based Algorithms

Builds the orthogonally decomposable (odeco) tensor that is bad for a given
projection Q, perturbs its terms at scale 2^-k, and sweeps k to show that
the PBA forward error grows like 1/epsilon while ALS refinement does not.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..core.als_engine import AlsConfig, als_refine
from ..core.conditioning import condition_number
from ..core.linalg import orthonormalize
from ..core.metrics import MatchMethod, excess_factor, forward_error, representation_backward_norm
from ..core.pba_engine import PbaConfig, ProjectionStrategy, pba_decompose
from ..core.tensor_core import Cpd, Tensor3, best_rank1, reconstruct
from ..errors import (
    ConvergenceError,
    DegenerateCompression,
    InputError,
    InvalidConfig,
    NumericalError,
    RetriesExhausted,
)
from .parallel import mix_seed, parallel_map

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-12
FIT_WINDOW = (1e-12, 1e-4)
_PROJECTION_STREAM = 1 << 63


@dataclass
class OdecoSpec:
    """Bad odeco instance: dims n1 >= n2 >= n3 >= r + 1 >= 2 and the projection it targets

    n3 = r + 1 is accepted: the construction stays orthonormal and the
    projection still collapses all but the last term onto one direction.
    """
    dims: Tuple[int, int, int]
    rank: int
    seed: int = 0
    projection: Optional[np.ndarray] = None  # n3 x 2 orthonormal; drawn from seed when None
    rank1_tol: float = 1e-14
    rank1_max_iters: int = 500

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)  # type: ignore[assignment]
        if len(self.dims) != 3:
            raise InvalidConfig("dims must have three entries")
        n1, n2, n3 = self.dims
        if not (n1 >= n2 >= n3 >= self.rank + 1 >= 2):
            raise InvalidConfig(f"need n1 >= n2 >= n3 >= r + 1 >= 2, got dims {self.dims} and r = {self.rank}")
        if n3 == self.rank + 1:
            logger.info(f"n3 = r + 1 = {n3}: the last projected c-vector breaks the two-direction pattern")
        if self.projection is not None:
            q = np.asarray(self.projection, dtype=np.float64)
            if q.shape != (n3, 2) or np.linalg.norm(q.T @ q - np.eye(2)) > 1e-10:
                raise InvalidConfig("projection must be an n3 x 2 matrix with orthonormal columns")
            self.projection = q

    def projection_matrix(self) -> np.ndarray:
        if self.projection is not None:
            return self.projection
        rng = np.random.default_rng(mix_seed(self.seed, _PROJECTION_STREAM))
        return orthonormalize(rng.standard_normal((self.dims[2], 2)))

    def to_dict(self) -> dict:
        return {
            'dims': list(self.dims),
            'rank': self.rank,
            'seed': self.seed,
            'projection': self.projection_matrix().tolist(),
            'rank1_tol': self.rank1_tol,
            'rank1_max_iters': self.rank1_max_iters,
        }


@dataclass
class SweepRow:
    """One adversarial sweep record"""
    k: int
    epsilon: float
    pba_forward_error: float
    refined_forward_error: float
    omega: float


@dataclass
class PowerLawFit:
    """y = coefficient * x^exponent"""
    coefficient: float
    exponent: float


def make_bad_odeco(spec: OdecoSpec) -> Cpd:
    """Odeco CPD whose projection by spec's Q has infinite condition number

    C' = U (I - (2/n3) 1 1^T) diag(1, -1, ..., -1) with U = [Q_perp Q], so
    Q^T c_1 = (2/n3)(-1, -1) and Q^T c_i = (2/n3)(1, 1) for 2 <= i <= min(r, n3 - 2).
    """
    n1, n2, n3 = spec.dims
    r = spec.rank
    rng = np.random.default_rng(spec.seed)
    a = orthonormalize(rng.standard_normal((n1, r)))
    b = orthonormalize(rng.standard_normal((n2, r)))

    q = spec.projection_matrix()
    completion, _ = scipy.linalg.qr(np.hstack([q, rng.standard_normal((n3, n3 - 2))]))
    u = np.hstack([completion[:, 2:], q])
    signs = np.ones(r)
    signs[1:] = -1.0
    c = u @ (np.eye(n3, r) - (2.0 / n3) * np.ones((n3, r))) * signs

    for name, factor in (("A'", a), ("B'", b), ("C'", c)):
        deviation = np.linalg.norm(factor.T @ factor - np.eye(r))
        if deviation > ORTHONORMAL_TOL:
            raise NumericalError(f"{name} lost orthonormality (deviation {deviation:.2e})")
    return Cpd.from_factors(a, b, c)


def project_cpd(cpd: Cpd, q: np.ndarray) -> Cpd:
    """CPD of rho_Q(T): every c_i replaced by Q^T c_i

    Raises:
        InputError: some Q^T c_i vanishes
    """
    a, b, c = cpd.factors
    return Cpd.from_factors(a, b, np.asarray(q).T @ c)


def perturb_decomposition(
    odeco: Cpd,
    k: int,
    rng: np.random.Generator,
    rank1_tol: float = 1e-14,
    rank1_max_iters: int = 500,
) -> Tuple[Cpd, float]:
    """Perturb each term by 2^-k X/||X|| and re-extract a rank-1 term

    Returns:
        (perturbed CPD, epsilon_k = max_i ||A_{k,i} - O_i||_F)

    Raises:
        ConvergenceError: a rank-1 extraction did not converge
    """
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    scale = 2.0 ** -k
    terms = []
    epsilon = 0.0
    for i, term in enumerate(odeco.terms):
        dense = term.dense().data
        noise = rng.standard_normal(dense.shape)
        fit = best_rank1(Tensor3(dense + scale * noise / np.linalg.norm(noise)), rank1_max_iters, rank1_tol)
        if not fit.converged:
            raise ConvergenceError(f"rank-1 extraction did not converge for k={k}, term {i}")
        terms.append(fit.term)
        epsilon = max(epsilon, float(np.linalg.norm(fit.term.dense().data - dense)))
    return Cpd(tuple(terms)), epsilon


def _sweep_row(
    k: int,
    spec: OdecoSpec,
    odeco: Cpd,
    projection: np.ndarray,
    refine: bool,
    als_config: Optional[AlsConfig],
    method: MatchMethod,
) -> SweepRow:
    seed = mix_seed(spec.seed, k)
    reference, epsilon = perturb_decomposition(
        odeco, k, np.random.default_rng(seed), spec.rank1_tol, spec.rank1_max_iters
    )
    t = reconstruct(reference)
    cfg = PbaConfig(
        rank=spec.rank,
        projection_strategy=ProjectionStrategy.FIXED,
        fixed_projection=projection,
        max_projection_retries=0,  # a redraw would leave the adversarial projection
        seed=seed,
    )
    try:
        report = pba_decompose(t, cfg)
    except (RetriesExhausted, DegenerateCompression) as exc:
        logger.warning(f"PBA failed at k={k}: {exc}")
        return SweepRow(k, epsilon, math.nan, math.nan, math.nan)

    pba_error = forward_error(reference, report.cpd, method).forward_error
    refined_error = math.nan
    if refine:
        refined = als_refine(t, report.cpd, als_config)
        refined_error = forward_error(reference, refined.cpd, method).forward_error

    kappa = condition_number(reference, diagnostics=False).kappa
    omega = math.nan
    if math.isfinite(kappa):
        omega = excess_factor(reference, report.cpd, kappa, representation_backward_norm(t), method)

    logger.debug(f"k={k} eps={epsilon:.3e} pba={pba_error:.3e} refined={refined_error:.3e} omega={omega:.3e}")
    return SweepRow(k, epsilon, pba_error, refined_error, omega)


def adversarial_sweep(
    spec: OdecoSpec,
    k_range: Iterable[int],
    refine: bool = True,
    als_config: Optional[AlsConfig] = None,
    method: MatchMethod = MatchMethod.HEURISTIC_LSQ,
    threads: Optional[int] = 1,
) -> List[SweepRow]:
    """Run the PBA (with spec's fixed Q) on perturbed odeco tensors for each k

    Rows come back ordered as k_range regardless of thread count.
    """
    ks = [int(k) for k in k_range]
    if not ks:
        raise InputError("k_range is empty")
    odeco = make_bad_odeco(spec)
    task = partial(
        _sweep_row,
        spec=spec,
        odeco=odeco,
        projection=spec.projection_matrix(),
        refine=refine,
        als_config=als_config,
        method=method,
    )
    logger.info(f"Adversarial sweep: dims={spec.dims} r={spec.rank} k={ks[0]}..{ks[-1]} refine={refine}")
    return parallel_map(task, ks, threads)


def fit_powerlaw(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Least-squares line through (log x, log y)

    Raises:
        InputError: fewer than two points, nonpositive data, or a single distinct x
    """
    data = np.asarray(points, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 2:
        raise InputError("need at least two (x, y) points")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise InputError("power-law fit needs finite positive data")
    log_x, log_y = np.log(data[:, 0]), np.log(data[:, 1])
    if np.ptp(log_x) == 0.0:
        raise InputError("power-law fit needs at least two distinct x values")
    slope, intercept = np.polyfit(log_x, log_y, 1)
    return PowerLawFit(coefficient=float(math.exp(intercept)), exponent=float(slope))


def fit_sweep(rows: Sequence[SweepRow], window: Tuple[float, float] = FIT_WINDOW) -> PowerLawFit:
    """Power-law fit of PBA forward error against epsilon inside the window"""
    lo, hi = window
    points = [
        (row.epsilon, row.pba_forward_error)
        for row in rows
        if lo <= row.epsilon <= hi and math.isfinite(row.pba_forward_error) and row.pba_forward_error > 0
    ]
    return fit_powerlaw(points)
