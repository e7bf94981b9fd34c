"""Monte Carlo Distribution Experiments

Samples random CPDs and assembles empirical complementary CDFs of
  - the condition number, next to its limiting tail bound, and
  - the forward error and excess factor of the pencil-based solvers.
Trials are independent; trial i always sees seed mix_seed(master_seed, i).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.als_engine import als_refine
from ..core.conditioning import condition_number, limiting_ccdf
from ..core.linalg import orthonormalize
from ..core.metrics import MatchMethod, forward_error, representation_backward_norm
from ..core.pba_engine import PbaConfig, ProjectionStrategy, pba_decompose, pba_decompose_projected
from ..core.tensor_core import Cpd, Tensor3, reconstruct
from ..errors import InputError, InvalidConfig, NumericalError, RankTooLarge
from .adversarial import PowerLawFit, fit_powerlaw
from .parallel import mix_seed, parallel_map

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = (2.0, 4.0, 8.0)


class SamplingModel(str, Enum):
    """Distribution of the factor matrices"""
    GAUSSIAN_ALL = "gaussian"
    ORTHONORMAL_AB = "orthoab"


class Solver(str, Enum):
    """Decomposition pipeline under test in the forward-error experiment"""
    PBA_RANDOM = "pba-random"
    PBA_HOSVD = "pba-hosvd"
    PBA_PLUS_ALS = "pba-als"
    PBA_PROJECTED = "pba-projected"


@dataclass
class McConfig:
    """Monte Carlo experiment configuration"""
    dims: Tuple[int, int, int]
    rank: int
    trials: int = 10000
    sampling: SamplingModel = SamplingModel.GAUSSIAN_ALL
    master_seed: int = 0
    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    threads: Optional[int] = 1
    match_method: MatchMethod = MatchMethod.HEURISTIC_LSQ

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)  # type: ignore[assignment]
        self.sampling = SamplingModel(self.sampling)
        self.match_method = MatchMethod(self.match_method)
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise InvalidConfig(f"dims must be three positive integers, got {self.dims}")
        if self.trials < 1:
            raise InvalidConfig("trials must be at least 1")
        if not 1 <= self.rank <= self.dims[1]:
            raise InvalidConfig(f"rank must satisfy 1 <= r <= n2, got r = {self.rank} for dims {self.dims}")
        if any(a <= 0 for a in self.alpha_grid):
            raise InvalidConfig("alpha grid must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidConfig("master_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            'dims': list(self.dims),
            'rank': self.rank,
            'trials': self.trials,
            'sampling': self.sampling.value,
            'master_seed': self.master_seed,
            'alpha_grid': list(self.alpha_grid),
            'match_method': self.match_method.value,
        }


@dataclass
class BoundPoint:
    """Empirical tail next to the limiting bound at x = alpha * r^(2/(m3-1))"""
    alpha: float
    x: float
    empirical: float  # P[kappa >= x]
    bound: float


@dataclass
class CcdfSeries:
    """Empirical ccdf over the uncensored samples of a Monte Carlo run"""
    samples: np.ndarray  # ascending, +inf allowed
    raw: np.ndarray  # per-trial values in trial order, nan where censored
    censored: int = 0
    bounds: Tuple[BoundPoint, ...] = ()
    scale: Optional[float] = None  # r^(2/(m3-1)) for condition-number series

    @classmethod
    def from_raw(cls, raw: Sequence[float], **kwargs) -> "CcdfSeries":
        raw = np.asarray(raw, dtype=np.float64)
        kept = raw[~np.isnan(raw)]
        return cls(samples=np.sort(kept), raw=raw, censored=int(raw.size - kept.size), **kwargs)

    @property
    def trials(self) -> int:
        return int(self.raw.size)

    @property
    def count(self) -> int:
        return int(self.samples.size)

    def evaluate(self, x: float) -> float:
        """(#samples > x) / #samples"""
        if self.count == 0:
            return math.nan
        return (self.count - int(np.searchsorted(self.samples, x, side="right"))) / self.count

    def tail_at_least(self, x: float) -> float:
        """(#samples >= x) / #samples"""
        if self.count == 0:
            return math.nan
        return (self.count - int(np.searchsorted(self.samples, x, side="left"))) / self.count

    def curve(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, ccdf(x)) at every distinct finite sample value"""
        finite = self.samples[np.isfinite(self.samples)]
        xs = np.unique(finite)
        counts = self.count - np.searchsorted(self.samples, xs, side="right")
        return xs, counts / max(self.count, 1)


@dataclass
class ErrorCcdfResult:
    """Paired forward-error and excess-factor series of one solver"""
    solver: Solver
    forward: CcdfSeries
    omega: CcdfSeries
    kappas: np.ndarray = field(default_factory=lambda: np.empty(0))  # per trial, reference kappa


def sample_cpd(dims: Sequence[int], r: int, sampling: SamplingModel, rng: np.random.Generator) -> Cpd:
    """Random rank-r CPD; ORTHONORMAL_AB orthonormalizes A and B

    Raises:
        RankTooLarge: r > min(n1, n2) with ORTHONORMAL_AB
    """
    n1, n2, n3 = (int(d) for d in dims)
    sampling = SamplingModel(sampling)
    a = rng.standard_normal((n1, r))
    b = rng.standard_normal((n2, r))
    c = rng.standard_normal((n3, r))
    if sampling is SamplingModel.ORTHONORMAL_AB:
        if r > min(n1, n2):
            raise RankTooLarge(f"orthonormal A and B need r <= min(n1, n2), got r = {r} for dims {(n1, n2, n3)}")
        a = orthonormalize(a)
        b = orthonormalize(b)
    return Cpd.from_factors(a, b, c)


def _kappa_trial(index: int, cfg: McConfig) -> float:
    rng = np.random.default_rng(mix_seed(cfg.master_seed, index))
    cpd = sample_cpd(cfg.dims, cfg.rank, cfg.sampling, rng)
    return condition_number(cpd, diagnostics=False).kappa


def _bound_points(series: CcdfSeries, m3: int, alpha_grid: Sequence[float], scale: float) -> Tuple[BoundPoint, ...]:
    return tuple(
        BoundPoint(alpha=a, x=a * scale, empirical=series.tail_at_least(a * scale), bound=limiting_ccdf(m3, a))
        for a in alpha_grid
    )


def run_kappa_ccdf(cfg: McConfig) -> CcdfSeries:
    """Empirical ccdf of the condition number; numerically infinite kappa stays +inf"""
    logger.info(f"Condition-number ccdf: dims={cfg.dims} r={cfg.rank} trials={cfg.trials} sampling={cfg.sampling.value}")
    kappas = parallel_map(partial(_kappa_trial, cfg=cfg), range(cfg.trials), cfg.threads)
    m3 = cfg.dims[2]
    series = CcdfSeries.from_raw(kappas)
    if m3 >= 2:
        series.scale = cfg.rank ** (2.0 / (m3 - 1))
        series.bounds = _bound_points(series, m3, cfg.alpha_grid, series.scale)
    infinite = int(np.isinf(series.samples).sum())
    if infinite:
        logger.info(f"{infinite} of {cfg.trials} trials have numerically infinite kappa")
    return series


def _solve(t: Tensor3, rank: int, solver: Solver, seed: int) -> Cpd:
    if solver is Solver.PBA_RANDOM:
        return pba_decompose(t, PbaConfig(rank=rank, seed=seed)).cpd
    if solver is Solver.PBA_PROJECTED:
        return pba_decompose_projected(t, PbaConfig(rank=rank, seed=seed)).cpd
    hosvd = PbaConfig(rank=rank, projection_strategy=ProjectionStrategy.HOSVD_LEADING_TWO, seed=seed)
    cpd = pba_decompose(t, hosvd).cpd
    if solver is Solver.PBA_PLUS_ALS:
        cpd = als_refine(t, cpd).cpd
    return cpd


def unit_norm_cpd(cpd: Cpd) -> Cpd:
    """cpd rescaled on its C factor so that the tensor it represents has unit norm"""
    norm = reconstruct(cpd).norm()
    if norm == 0.0:
        return cpd
    a, b, c = cpd.factors
    return Cpd.from_factors(a, b, c / norm)


def _error_trial(index: int, cfg: McConfig, solver: Solver) -> Tuple[float, float, float]:
    """(forward error, omega, kappa) for one trial; nan marks a censored value"""
    trial_seed = mix_seed(cfg.master_seed, index)
    reference = sample_cpd(cfg.dims, cfg.rank, cfg.sampling, np.random.default_rng(trial_seed))
    reference = unit_norm_cpd(reference)
    t = reconstruct(reference)
    kappa = condition_number(reference, diagnostics=False).kappa
    try:
        computed = _solve(t, cfg.rank, solver, mix_seed(trial_seed, 1))
    except NumericalError as exc:
        logger.debug(f"Trial {index} censored: {exc}")
        return math.nan, math.nan, kappa
    fwd = forward_error(reference, computed, cfg.match_method).forward_error
    omega = fwd / (kappa * representation_backward_norm(t)) if math.isfinite(kappa) else math.nan
    return fwd, omega, kappa


def run_forward_error_ccdf(cfg: McConfig, solver: Solver) -> ErrorCcdfResult:
    """Forward-error and excess-factor ccdfs of one solver on sampled CPDs

    Each sampled CPD is rescaled so its tensor has unit norm; errors are
    therefore absolute and relative at once.
    Solver failures are censored: excluded from both ccdfs and counted.
    Trials with infinite kappa are censored in the omega series only.
    """
    solver = Solver(solver)
    logger.info(f"Forward-error ccdf: solver={solver.value} dims={cfg.dims} r={cfg.rank} trials={cfg.trials}")
    rows: List[Tuple[float, float, float]] = parallel_map(
        partial(_error_trial, cfg=cfg, solver=solver), range(cfg.trials), cfg.threads
    )
    fwd, omega, kappa = (np.array(column, dtype=np.float64) for column in zip(*rows))
    result = ErrorCcdfResult(
        solver=solver,
        forward=CcdfSeries.from_raw(fwd),
        omega=CcdfSeries.from_raw(omega),
        kappas=kappa,
    )
    if result.forward.censored:
        logger.warning(f"{result.forward.censored} of {cfg.trials} trials censored by solver failures")
    return result


def fit_ccdf_tail(series: CcdfSeries, upper: float = 0.1, min_count: int = 5) -> PowerLawFit:
    """Power-law fit P[X > x] ~ coefficient * x^exponent over the tail of a ccdf

    Uses the curve points with ccdf <= upper that still rest on at least
    min_count samples.

    Raises:
        InputError: fewer than two usable tail points
    """
    xs, ccdf = series.curve()
    keep = (ccdf > 0.0) & (ccdf <= upper) & (ccdf * series.count >= min_count)
    if np.count_nonzero(keep) < 2:
        raise InputError(f"ccdf tail below {upper} has fewer than two points with {min_count}+ samples")
    return fit_powerlaw(list(zip(xs[keep].tolist(), ccdf[keep].tolist())))
