"""Executable Property Checks

Randomized checks of inequalities and uniqueness claims that sit beside
the decomposition pipeline:
  - no-decrease: an error in the first factor matrix cannot be compensated
    by any choice of the other two,
  - Kruskal's criterion implies that independent restarts agree.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Tuple

import numpy as np

from ..core.als_engine import als_refine
from ..core.conditioning import condition_number
from ..core.linalg import orthonormalize
from ..core.metrics import BRUTE_FORCE_MAX_RANK, MatchMethod, forward_error, match_columns
from ..core.pba_engine import PbaConfig, pba_decompose
from ..core.tensor_core import khatri_rao, reconstruct
from ..errors import InvalidConfig, NumericalError
from .monte_carlo import SamplingModel, sample_cpd
from .parallel import mix_seed, parallel_map

logger = logging.getLogger(__name__)

NODECREASE_SLACK = 1e-9
MAX_CONSTRUCTION_ATTEMPTS = 20
HYPOTHESIS_TOL = 1e-12


@dataclass
class CheckResult:
    """Outcome of one randomized check"""
    name: str
    trials: int
    failures: int
    worst_margin: float  # smallest observed margin; negative means a violation
    errors: int = 0  # trials where the construction or solver failed

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'trials': self.trials,
            'failures': self.failures,
            'worst_margin': self.worst_margin,
            'errors': self.errors,
        }


@dataclass
class NodecreaseConfig:
    dims: Tuple[int, int, int] = (6, 5, 4)
    rank: int = 3
    nu: float = 0.01
    trials: int = 1000
    seed: int = 0
    slack: float = NODECREASE_SLACK
    threads: Optional[int] = 1

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)  # type: ignore[assignment]
        if not 0.0 < self.nu <= 0.05:
            raise InvalidConfig(f"nu must lie in (0, 0.05], got {self.nu}")
        if not 1 <= self.rank <= self.dims[0]:
            raise InvalidConfig(f"orthonormal A' needs 1 <= r <= n1, got r = {self.rank} for dims {self.dims}")
        if self.trials < 1:
            raise InvalidConfig("trials must be at least 1")

    def to_dict(self) -> dict:
        return {
            'dims': list(self.dims),
            'rank': self.rank,
            'nu': self.nu,
            'trials': self.trials,
            'seed': self.seed,
            'slack': self.slack,
        }


@dataclass
class IdentifiabilityConfig:
    dims: Tuple[int, int, int] = (5, 4, 3)
    rank: int = 3
    trials: int = 100
    restarts: int = 5
    seed: int = 0
    tolerance: float = 1e-6  # relative to ||t||_F
    threads: Optional[int] = 1

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)  # type: ignore[assignment]
        if not 1 <= self.rank <= min(5, self.dims[1]):
            raise InvalidConfig(f"identifiability check needs 1 <= r <= min(5, n2), got r = {self.rank}")
        if self.dims[2] < 2:
            raise InvalidConfig("identifiability check runs the PBA and needs n3 >= 2")
        if self.trials < 1 or self.restarts < 1:
            raise InvalidConfig("trials and restarts must be at least 1")

    def to_dict(self) -> dict:
        return {
            'dims': list(self.dims),
            'rank': self.rank,
            'trials': self.trials,
            'restarts': self.restarts,
            'seed': self.seed,
            'tolerance': self.tolerance,
        }


def _match_method(r: int) -> MatchMethod:
    return MatchMethod.BRUTE_FORCE if r < BRUTE_FORCE_MAX_RANK else MatchMethod.ASSIGNMENT


def nodecrease_margin(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    a_tilde: np.ndarray,
    b_tilde: np.ndarray,
    c_tilde: np.ndarray,
    nu: float,
) -> float:
    """min_pi ||A kr B kr C - (At kr Bt kr Ct) P_pi||_F - sqrt(3/4) (1 - nu) delta

    delta = min_pi ||A - At P_pi||_F. Zero columns in Bt or Ct are allowed.
    """
    r = a.shape[1]
    method = _match_method(r)
    delta = match_columns(a, a_tilde, method).forward_error
    lhs = match_columns(khatri_rao(a, khatri_rao(b, c)), khatri_rao(a_tilde, khatri_rao(b_tilde, c_tilde)), method)
    return lhs.forward_error - math.sqrt(0.75) * (1.0 - nu) * delta


def _unit_columns(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=0)


def _nodecrease_instance(cfg: NodecreaseConfig, rng: np.random.Generator):
    n1, n2, n3 = cfg.dims
    r = cfg.rank
    a_prime = orthonormalize(rng.standard_normal((n1, r)))
    noise = rng.standard_normal((n1, r))
    # column normalization at most doubles the perturbation
    a = _unit_columns(a_prime + 0.5 * cfg.nu * noise / np.linalg.norm(noise))

    scales = rng.uniform(1.0 - cfg.nu, 2.0, size=r)
    b = _unit_columns(rng.standard_normal((n2, r)))
    c = _unit_columns(rng.standard_normal((n3, r))) * scales

    shift = rng.standard_normal((n1, r))
    shift *= rng.uniform(0.0, 0.5 / math.sqrt(r), size=r) / np.linalg.norm(shift, axis=0)
    a_tilde = _unit_columns(a[:, rng.permutation(r)] + shift)

    b_tilde = rng.standard_normal((n2, r)) * rng.uniform(0.0, 2.0)
    c_tilde = rng.standard_normal((n3, r)) * rng.uniform(0.0, 2.0)
    return a_prime, a, b, c, a_tilde, b_tilde, c_tilde


def _nodecrease_hypotheses_hold(cfg: NodecreaseConfig, a_prime, a, b, c, a_tilde) -> bool:
    r = cfg.rank
    unit = np.allclose(np.linalg.norm(a, axis=0), 1.0, atol=HYPOTHESIS_TOL)
    unit_tilde = np.allclose(np.linalg.norm(a_tilde, axis=0), 1.0, atol=HYPOTHESIS_TOL)
    near_orthonormal = np.linalg.norm(a - a_prime) <= cfg.nu
    bc_norms = np.linalg.norm(b, axis=0) * np.linalg.norm(c, axis=0)
    delta = match_columns(a, a_tilde, _match_method(r)).forward_error
    return bool(unit and unit_tilde and near_orthonormal and np.all(bc_norms >= 1.0 - cfg.nu) and delta < 1.0)


def _nodecrease_trial(index: int, cfg: NodecreaseConfig) -> float:
    """Margin of one constructed instance; nan when no instance met the hypotheses"""
    rng = np.random.default_rng(mix_seed(cfg.seed, index))
    for _ in range(MAX_CONSTRUCTION_ATTEMPTS):
        a_prime, a, b, c, a_tilde, b_tilde, c_tilde = _nodecrease_instance(cfg, rng)
        if _nodecrease_hypotheses_hold(cfg, a_prime, a, b, c, a_tilde):
            return nodecrease_margin(a, b, c, a_tilde, b_tilde, c_tilde, cfg.nu)
    logger.warning(f"Trial {index}: no instance with delta < 1 after {MAX_CONSTRUCTION_ATTEMPTS} draws")
    return math.nan


def _summarize(name: str, margins: List[float], threshold: float) -> CheckResult:
    values = np.asarray(margins, dtype=np.float64)
    valid = values[~np.isnan(values)]
    result = CheckResult(
        name=name,
        trials=int(values.size),
        failures=int(np.sum(valid < threshold)),
        worst_margin=float(valid.min()) if valid.size else math.nan,
        errors=int(values.size - valid.size),
    )
    level = logging.INFO if result.passed else logging.ERROR
    logger.log(level, f"{name}: {result.failures} failures in {result.trials} trials, worst margin {result.worst_margin:.3e}")
    return result


def check_nodecrease(config: Optional[NodecreaseConfig] = None) -> CheckResult:
    """Randomized check of the no-decrease inequality on constructed instances"""
    cfg = config or NodecreaseConfig()
    margins = parallel_map(partial(_nodecrease_trial, cfg=cfg), range(cfg.trials), cfg.threads)
    return _summarize("nodecrease", margins, -cfg.slack)


def _identifiability_trial(index: int, cfg: IdentifiabilityConfig) -> float:
    """tolerance * ||t|| minus the worst restart error; nan on solver failure"""
    trial_seed = mix_seed(cfg.seed, index)
    rng = np.random.default_rng(trial_seed)
    for _ in range(MAX_CONSTRUCTION_ATTEMPTS):
        reference = sample_cpd(cfg.dims, cfg.rank, SamplingModel.GAUSSIAN_ALL, rng)
        if condition_number(reference).kruskal_identifiable:
            break
    else:
        logger.warning(f"Trial {index}: no Kruskal-identifiable sample after {MAX_CONSTRUCTION_ATTEMPTS} draws")
        return math.nan

    t = reconstruct(reference)
    method = _match_method(cfg.rank)
    worst = 0.0
    for restart in range(cfg.restarts):
        pba_cfg = PbaConfig(rank=cfg.rank, seed=mix_seed(trial_seed, restart + 1))
        try:
            recovered = als_refine(t, pba_decompose(t, pba_cfg).cpd).cpd
        except NumericalError as exc:
            logger.debug(f"Trial {index} restart {restart} failed: {exc}")
            return math.nan
        worst = max(worst, forward_error(reference, recovered, method).forward_error)
    return cfg.tolerance * t.norm() - worst


def check_kruskal_implies_identifiable_numerically(config: Optional[IdentifiabilityConfig] = None) -> CheckResult:
    """Restarted PBA + ALS recover the same terms on Kruskal-identifiable samples"""
    cfg = config or IdentifiabilityConfig()
    margins = parallel_map(partial(_identifiability_trial, cfg=cfg), range(cfg.trials), cfg.threads)
    return _summarize("kruskal_identifiable", margins, 0.0)


def run_property_suite(
    nodecrease: Optional[NodecreaseConfig] = None,
    identifiability: Optional[IdentifiabilityConfig] = None,
) -> dict:
    """Both checks as a JSON-ready report {checks: [...]}"""
    checks = [check_nodecrease(nodecrease), check_kruskal_implies_identifiable_numerically(identifiability)]
    return {'checks': [check.to_dict() for check in checks]}
