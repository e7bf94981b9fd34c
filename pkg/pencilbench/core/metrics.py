"""Error Metrics for Tensor Decompositions

Forward error between two CPDs up to term permutation, the excess factor
omega = forward error / (kappa * backward error), and the floating-point
representation backward error used as omega's denominator.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from ..errors import DimensionMismatch, InputError, NumericalError
from .linalg import UNIT_ROUNDOFF
from .tensor_core import Cpd, Tensor3

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_RANK = 8


class MatchMethod(str, Enum):
    """How the optimal term permutation is found"""
    HEURISTIC_LSQ = "heuristic"
    BRUTE_FORCE = "brute-force"
    ASSIGNMENT = "assignment"


@dataclass
class MatchResult:
    """Forward error with the permutation that attains it"""
    permutation: Tuple[int, ...]  # reference term i is matched to computed term permutation[i]
    forward_error: float
    method: MatchMethod


def _squared_distances(m: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """D[i, j] = ||m_i - m2_j||^2"""
    diff = m[:, :, None] - m2[:, None, :]
    return np.einsum("nij,nij->ij", diff, diff)


def _greedy_assignment(weights: np.ndarray) -> np.ndarray:
    """Bijection picking the largest remaining |weight| first; returns col for each row"""
    r = weights.shape[0]
    order = np.argsort(-np.abs(weights), axis=None, kind="stable")
    row_to_col = np.full(r, -1, dtype=int)
    used_cols = np.zeros(r, dtype=bool)
    for flat in order:
        i, j = divmod(int(flat), r)
        if row_to_col[i] < 0 and not used_cols[j]:
            row_to_col[i] = j
            used_cols[j] = True
    return row_to_col


def _heuristic_permutation(m: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Project the least-squares solution of min_X ||M - M2 X||_F onto a permutation"""
    x = scipy.linalg.lstsq(m2, m)[0]  # r x r, x[j, i]: weight of computed j in reference i
    computed_to_ref = np.argmax(x, axis=1)
    if len(set(computed_to_ref.tolist())) == x.shape[0]:
        perm = np.empty_like(computed_to_ref)
        perm[computed_to_ref] = np.arange(x.shape[0])
        return perm
    logger.debug("Least-squares projection is not bijective; repairing greedily")
    computed_to_ref = _greedy_assignment(x)
    perm = np.empty_like(computed_to_ref)
    perm[computed_to_ref] = np.arange(x.shape[0])
    return perm


def match_columns(m: np.ndarray, m2: np.ndarray, method: MatchMethod = MatchMethod.HEURISTIC_LSQ) -> MatchResult:
    """min over permutations of ||M - M2 P||_F for matrices of vectorized terms"""
    m = np.asarray(m, dtype=np.float64)
    m2 = np.asarray(m2, dtype=np.float64)
    if m.shape != m2.shape:
        raise DimensionMismatch(f"term matrices differ in shape: {m.shape} vs {m2.shape}")
    method = MatchMethod(method)
    r = m.shape[1]
    dist = _squared_distances(m, m2)

    if method is MatchMethod.BRUTE_FORCE:
        if r > BRUTE_FORCE_MAX_RANK:
            raise InputError(f"brute-force matching is limited to r <= {BRUTE_FORCE_MAX_RANK}, got {r}")
        rows = np.arange(r)
        best_perm, best_cost = None, math.inf
        for candidate in itertools.permutations(range(r)):
            cost = float(dist[rows, candidate].sum())
            if cost < best_cost:
                best_perm, best_cost = candidate, cost
        perm = np.asarray(best_perm)
    elif method is MatchMethod.ASSIGNMENT:
        _, perm = linear_sum_assignment(dist)
    else:
        perm = _heuristic_permutation(m, m2)

    error = math.sqrt(max(float(dist[np.arange(r), perm].sum()), 0.0))
    return MatchResult(permutation=tuple(int(p) for p in perm), forward_error=error, method=method)


def forward_error(reference: Cpd, computed: Cpd, method: MatchMethod = MatchMethod.HEURISTIC_LSQ) -> MatchResult:
    """Forward error between two CPDs, compared term by term as dense rank-1 tensors

    Raises:
        DimensionMismatch: ranks or dims differ
    """
    if reference.rank != computed.rank:
        raise DimensionMismatch(f"rank mismatch: {reference.rank} vs {computed.rank}")
    if reference.dims != computed.dims:
        raise DimensionMismatch(f"dims mismatch: {reference.dims} vs {computed.dims}")
    return match_columns(reference.vectorized(), computed.vectorized(), method)


def representation_backward_norm(t: Tensor3, unit_roundoff: float = UNIT_ROUNDOFF) -> float:
    """Upper-bound proxy for ||T - fl(T)||_F: unit roundoff times ||T||_F"""
    norm = t.norm()
    if norm == 0.0:
        raise InputError("backward norm of the zero tensor is undefined")
    return unit_roundoff * norm


def excess_factor(
    reference: Cpd,
    computed: Cpd,
    kappa: float,
    backward_norm: float,
    method: MatchMethod = MatchMethod.HEURISTIC_LSQ,
) -> float:
    """omega = forward_error / (kappa * backward_norm)

    Raises:
        NumericalError: kappa is infinite
        InputError: kappa or backward_norm nonpositive
    """
    if math.isinf(kappa) or math.isnan(kappa):
        raise NumericalError("excess factor is undefined for an infinite condition number")
    if kappa <= 0:
        raise InputError(f"kappa must be positive, got {kappa}")
    if backward_norm <= 0:
        raise InputError(f"backward norm must be positive, got {backward_norm}")
    return forward_error(reference, computed, method).forward_error / (kappa * backward_norm)
