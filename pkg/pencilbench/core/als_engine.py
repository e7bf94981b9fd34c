"""ALS Refinement Engine

Alternating least squares polishing of a CPD, used after a pencil-based
algorithm to restore the accuracy the pencil step loses. Each block update
is an SVD-based least-squares solve against the Khatri-Rao product of the
other two factors.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch, InvalidConfig
from .linalg import UNIT_ROUNDOFF
from .tensor_core import Cpd, Tensor3, flatten, khatri_rao

logger = logging.getLogger(__name__)


@dataclass
class AlsConfig:
    """Configuration for ALS refinement"""
    max_iters: int = 500
    residual_tol: float = 2.0 * math.sqrt(10.0) * UNIT_ROUNDOFF  # relative to ||T||_F
    stagnation_tol: float = 1e-14  # minimum decrease of the best residual, relative to itself
    patience: int = 5  # cycles without such a decrease before stopping

    def __post_init__(self):
        if self.max_iters < 0:
            raise InvalidConfig("max_iters must be nonnegative")
        if self.residual_tol <= 0 or self.stagnation_tol <= 0:
            raise InvalidConfig("ALS tolerances must be positive")
        if self.patience < 1:
            raise InvalidConfig("patience must be at least 1")

    def to_dict(self) -> dict:
        return {
            'max_iters': self.max_iters,
            'residual_tol': self.residual_tol,
            'stagnation_tol': self.stagnation_tol,
            'patience': self.patience,
        }


@dataclass
class AlsResult:
    """Output from ALS refinement"""
    cpd: Cpd
    iterations: int
    residual: float  # ||T - reconstruct(cpd)||_F
    converged: bool  # residual_tol reached
    singular: bool = False  # a Khatri-Rao factor lost rank; cpd is the best iterate
    history: List[float] = field(default_factory=list)  # residual after each full cycle


class _SingularUpdate(Exception):
    pass


def _block_update(unfolded: np.ndarray, kr: np.ndarray) -> np.ndarray:
    """argmin_M ||unfolded - M kr^T||_F"""
    solution, _, rank, _ = scipy.linalg.lstsq(kr, unfolded.T, lapack_driver="gelsd")
    if rank < kr.shape[1]:
        raise _SingularUpdate()
    return solution.T


def _normalize_columns(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=0)
    if np.any(norms == 0.0):
        raise _SingularUpdate()
    return m / norms


class AlsRefiner:
    """Cyclic A, B, C least-squares refinement"""

    def __init__(self, config: Optional[AlsConfig] = None):
        self.config = config or AlsConfig()

    def refine(self, t: Tensor3, init: Cpd) -> AlsResult:
        """Refine init towards a CPD of t

        Args:
            t: target tensor
            init: starting decomposition, dims must match t

        Returns:
            AlsResult; when a block update is singular the best iterate so far
            is returned with singular=True
        """
        if init.dims != t.dims:
            raise DimensionMismatch(f"init dims {init.dims} differ from tensor dims {t.dims}")

        cfg = self.config
        norm_t = t.norm()
        x1, x2, x3 = flatten(t, 1), flatten(t, 2), flatten(t, 3)
        a, b, c = (np.array(m) for m in init.factors)

        def residual(fa: np.ndarray, fb: np.ndarray, fc: np.ndarray) -> float:
            return float(np.linalg.norm(x1 - fa @ khatri_rao(fb, fc).T))

        current = residual(a, b, c)
        history = [current]
        best: Tuple[np.ndarray, np.ndarray, np.ndarray, float] = (a, b, c, current)
        target = cfg.residual_tol * norm_t

        if current <= target:
            return AlsResult(init.normalized(), 0, current, True, False, history)

        converged = False
        singular = False
        iterations = 0
        idle = 0
        for iterations in range(1, cfg.max_iters + 1):
            try:
                a = _normalize_columns(_block_update(x1, khatri_rao(b, c)))
                b = _normalize_columns(_block_update(x2, khatri_rao(a, c)))
                c = _block_update(x3, khatri_rao(a, b))
            except _SingularUpdate:
                logger.warning(f"ALS block update lost rank at iteration {iterations}; keeping best iterate")
                singular = True
                break

            current = residual(a, b, c)
            history.append(current)
            improved = current < best[3] * (1.0 - cfg.stagnation_tol)
            if current < best[3]:
                best = (a, b, c, current)
            if current <= target:
                converged = True
                break
            idle = 0 if improved else idle + 1
            if idle >= cfg.patience:
                logger.debug(f"ALS stagnated at iteration {iterations}: residual={best[3]:.3e}")
                break

        a, b, c, current = best
        logger.debug(f"ALS finished: iterations={iterations} residual={current:.3e} converged={converged}")
        return AlsResult(
            cpd=Cpd.from_factors(a, b, c).normalized(),
            iterations=iterations,
            residual=current,
            converged=converged,
            singular=singular,
            history=history,
        )


def als_refine(t: Tensor3, init: Cpd, config: Optional[AlsConfig] = None) -> AlsResult:
    """Functional entry point for ALS refinement"""
    return AlsRefiner(config).refine(t, init)
