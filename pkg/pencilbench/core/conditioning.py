"""Conditioning of the Tensor Decomposition Problem

The condition number of a CPD is 1 / sigma_min of the Terracini matrix
[U_1 ... U_r], where U_i is an orthonormal basis of the tangent space to
the manifold of rank-1 tensors at the i-th term. This module also carries
the pairwise lower bound, Kruskal/general-position diagnostics and the
limiting tail probability of the condition number for random c-factors.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import gammaln

from ..errors import CombinatorialBudgetExceeded, InputError
from .linalg import orthonormal_complement, singular_values
from .tensor_core import Cpd, Rank1Term, khatri_rao

logger = logging.getLogger(__name__)

INF_THRESHOLD = 1e12
KRUSKAL_TOL = 1e-10
SUBSET_BUDGET = 10**6
PAIR_COINCIDENCE_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class TerraciniMatrix:
    """Orthonormal tangent bases, one block per rank-1 term"""
    blocks: Tuple[np.ndarray, ...]

    @property
    def assembled(self) -> np.ndarray:
        return np.hstack(self.blocks)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.blocks[0].shape[0], sum(block.shape[1] for block in self.blocks))


@dataclass
class ConditionReport:
    """Condition number with identifiability diagnostics"""
    kappa: float  # math.inf when numerically infinite
    sigma_min: float
    pair_lower_bound: float
    kruskal_ranks: Optional[Tuple[int, int, int]] = None
    kruskal_identifiable: Optional[bool] = None
    sglp_ok: Optional[bool] = None
    entry_nonzero_ok: Optional[bool] = None


@dataclass
class RNiceReport:
    """Checkable conditions of an r-nice decomposition"""
    sglp_ok: bool
    kruskal_identifiable: bool
    entry_nonzero_ok: bool
    kappa_finite: bool
    smooth_point: str = "untested"

    @property
    def all_ok(self) -> bool:
        return self.sglp_ok and self.kruskal_identifiable and self.entry_nonzero_ok and self.kappa_finite


def tangent_basis(term: Rank1Term) -> np.ndarray:
    """Orthonormal basis of the tangent space at a (x) b (x) c

    Columns: [I (x) b (x) c, a (x) Q2 (x) c, a (x) b (x) Q3] for unit a, b, c,
    with Q2, Q3 orthonormal bases of b^perp and c^perp.
    """
    a = term.a / np.linalg.norm(term.a)
    b = term.b / np.linalg.norm(term.b)
    c = term.c / np.linalg.norm(term.c)
    q2 = orthonormal_complement(b)
    q3 = orthonormal_complement(c)
    return np.hstack([
        np.kron(np.eye(a.size), np.kron(b, c)[:, None]),
        np.kron(a[:, None], np.kron(q2, c[:, None])),
        np.kron(np.kron(a, b)[:, None], q3),
    ])


def terracini_matrix(cpd: Cpd) -> TerraciniMatrix:
    return TerraciniMatrix(tuple(tangent_basis(term) for term in cpd.terms))


def terracini_sigma_min(cpd: Cpd) -> float:
    """Smallest singular value of the Terracini matrix (0 when it is wider than tall)"""
    terracini = terracini_matrix(cpd)
    rows, cols = terracini.shape
    if cols > rows:
        logger.warning(
            f"Terracini matrix is {rows} x {cols}; more tangent directions than entries, kappa is infinite"
        )
        return 0.0
    return float(singular_values(terracini.assembled)[-1])


def pair_lower_bound(cpd: Cpd) -> float:
    """max over pairs of 1 / sqrt(1 - |<c_i, c_j>|) for normalized c-vectors"""
    if cpd.rank < 2:
        return 1.0
    c = cpd.factors[2]
    c = c / np.linalg.norm(c, axis=0)
    gram = np.abs(c.T @ c)
    np.fill_diagonal(gram, 0.0)
    worst = float(gram.max())
    gap = 1.0 - worst
    if gap <= PAIR_COINCIDENCE_TOL:
        return math.inf
    return 1.0 / math.sqrt(gap)


def _subsets_within_budget(r: int, k: int) -> None:
    count = math.comb(r, k)
    if count > SUBSET_BUDGET:
        raise CombinatorialBudgetExceeded(f"C({r}, {k}) = {count} subsets exceeds budget {SUBSET_BUDGET}")


def _all_subsets_full_rank(m: np.ndarray, k: int, threshold: float) -> bool:
    r = m.shape[1]
    _subsets_within_budget(r, k)
    for subset in itertools.combinations(range(r), k):
        if singular_values(m[:, subset])[-1] <= threshold:
            return False
    return True


def kruskal_rank(m: np.ndarray, tol: float = KRUSKAL_TOL) -> int:
    """Largest k such that every k columns are linearly independent

    A k-subset counts as independent when its smallest singular value
    exceeds tol times the largest singular value of M.

    Raises:
        CombinatorialBudgetExceeded: a subset size needs more than 10^6 evaluations
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise InputError("kruskal_rank needs a matrix")
    n, r = m.shape
    if m.size == 0:
        return 0
    top = singular_values(m)[0]
    if top == 0.0:
        return 0
    threshold = tol * top
    rank = 0
    for k in range(1, min(n, r) + 1):
        if not _all_subsets_full_rank(m, k, threshold):
            break
        rank = k
    return rank


def _general_linear_position(m: np.ndarray, tol: float = KRUSKAL_TOL) -> bool:
    """Every min(r, n) columns have full rank"""
    n, r = m.shape
    top = singular_values(m)[0]
    if top == 0.0:
        return False
    return _all_subsets_full_rank(m, min(n, r), tol * top)


def _kruskal_criterion(ranks: Tuple[int, int, int], r: int) -> bool:
    if r == 1:
        return True
    if min(ranks) <= 1:
        return False
    return 2 * r <= sum(ranks) - 2


def _sglp(cpd: Cpd) -> bool:
    a, b, c = cpd.factors
    families: List[np.ndarray] = [
        a, b, c,
        khatri_rao(a, b), khatri_rao(a, c), khatri_rao(b, c),
        khatri_rao(a, khatri_rao(b, c)),
    ]
    return all(_general_linear_position(f) for f in families)


def _entries_nonzero(cpd: Cpd) -> bool:
    return all(term.a[0] * term.b[0] * term.c[0] != 0.0 for term in cpd.terms)


def condition_number(
    cpd: Cpd,
    inf_threshold: float = INF_THRESHOLD,
    diagnostics: bool = True,
) -> ConditionReport:
    """Condition number of the decomposition problem at cpd

    Args:
        cpd: the decomposition
        inf_threshold: kappa above this is reported as math.inf
        diagnostics: also compute Kruskal ranks, SGLP and leading-entry checks

    Returns:
        ConditionReport
    """
    sigma_min = terracini_sigma_min(cpd)
    if sigma_min == 0.0 or 1.0 / sigma_min > inf_threshold:
        kappa = math.inf
    else:
        kappa = 1.0 / sigma_min

    report = ConditionReport(kappa=kappa, sigma_min=sigma_min, pair_lower_bound=pair_lower_bound(cpd))
    if diagnostics:
        a, b, c = cpd.factors
        ranks = (kruskal_rank(a), kruskal_rank(b), kruskal_rank(c))
        report.kruskal_ranks = ranks
        report.kruskal_identifiable = _kruskal_criterion(ranks, cpd.rank)
        report.sglp_ok = _sglp(cpd)
        report.entry_nonzero_ok = _entries_nonzero(cpd)
    return report


def check_r_nice(cpd: Cpd, inf_threshold: float = INF_THRESHOLD) -> RNiceReport:
    """Evaluate the decidable r-nice conditions; smoothness is not tested"""
    report = condition_number(cpd, inf_threshold=inf_threshold, diagnostics=True)
    return RNiceReport(
        sglp_ok=bool(report.sglp_ok),
        kruskal_identifiable=bool(report.kruskal_identifiable),
        entry_nonzero_ok=bool(report.entry_nonzero_ok),
        kappa_finite=report.sigma_min > 1.0 / inf_threshold,
    )


def limiting_ccdf(m3: int, alpha: float) -> float:
    """Limit as r -> infinity of the lower bound on P[kappa >= alpha r^(2/(m3-1))]

    Returns 1 - exp(-K alpha^(1-m3)) with
    K = 2^((m3-5)/2) / sqrt(pi) * Gamma(m3/2) / Gamma((m3+1)/2).
    """
    if int(m3) != m3 or m3 < 2:
        raise InputError(f"m3 must be an integer >= 2, got {m3}")
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    log_k = 0.5 * (m3 - 5) * math.log(2.0) - 0.5 * math.log(math.pi) + gammaln(m3 / 2.0) - gammaln((m3 + 1) / 2.0)
    rate = math.exp(log_k + (1 - m3) * math.log(alpha))
    return float(-math.expm1(-rate))
