"""Gaussian witness evaluation: expectations, errors, separability bounds.

For a test operator ``L = sum_ij M_ij xi_i xi_j`` the minimum over pure
product states of one partition is the sum, over blocks, of the symplectic
eigenvalues of M restricted to that block's rows/columns.  The bound for
convex mixtures of K-partitions is the minimum of that over all
K-partitions.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional

import numpy as np

from gwit.model import (
    CovarianceState,
    InadmissibleOperatorError,
    Individual,
    InputError,
    Partition,
    SeparabilityTarget,
    TestOperator,
    WitnessVerdict,
    check_target,
    mode_indices,
    normalize_state,
)
from gwit.partitions import MAX_EXHAUSTIVE_MODES, mask_to_modes, partition_masks
from gwit.symplectic import symplectic_trace_batch

ADMISSIBILITY_RTOL = 1e-12


class SubsetScoreCache:
    """Block scores of one test operator, keyed by mode-subset bitmask.

    Bound to a single operator: reusing it for a different M raises.  Plain
    dict access, so concurrent readers/writers only ever race to store the
    same deterministic value.
    """

    def __init__(self, operator: Optional[TestOperator] = None):
        self._operator = operator
        self._scores: dict[int, float] = {}

    def bind(self, operator: TestOperator) -> None:
        if self._operator is None:
            self._operator = operator
        elif self._operator is not operator and not self._operator == operator:
            raise ValueError("SubsetScoreCache is bound to a different test operator")

    def get(self, mask: int) -> Optional[float]:
        return self._scores.get(mask)

    def put(self, mask: int, value: float) -> None:
        self._scores[mask] = value

    def __len__(self) -> int:
        return len(self._scores)

    def __contains__(self, mask: int) -> bool:
        return mask in self._scores


def _check_dims(op: TestOperator, state: CovarianceState) -> None:
    if op.n_modes != state.n_modes:
        raise InputError(
            f"test operator has {op.n_modes} modes but state has {state.n_modes}")


def expectation(op: TestOperator, state: CovarianceState) -> float:
    """``<L> = tr(M C)`` for a zero-mean state."""
    _check_dims(op, state)
    c = normalize_state(state).matrix
    return float(np.sum(op.matrix * c))


def _error_weights(m: np.ndarray) -> np.ndarray:
    # each unordered pair (i, j), i < j, appears twice in tr(MC)
    w = 2.0 * np.triu(m, 1)
    w[np.diag_indices_from(w)] = np.diag(m)
    return w


def expectation_error(op: TestOperator, state: CovarianceState) -> float:
    """First-order error of ``<L>`` assuming independent element errors."""
    _check_dims(op, state)
    dc = normalize_state(state).uncertainty
    w = _error_weights(op.matrix)
    return float(np.sqrt(np.sum((w * np.triu(dc)) ** 2)))


def block_submatrix(m: np.ndarray, modes: Iterable[int], n_modes: int) -> np.ndarray:
    idx = mode_indices(modes, n_modes)
    return m[np.ix_(idx, idx)]


def block_score(op: TestOperator, subset: Iterable[int],
                cache: Optional[SubsetScoreCache] = None) -> float:
    """Sum of symplectic eigenvalues of M restricted to the modes in ``subset``.

    ``subset`` holds 0-based mode indices.  Raises
    :class:`InadmissibleOperatorError` if the restricted matrix is not
    strictly positive definite.
    """
    modes = sorted(set(int(i) for i in subset))
    if not modes:
        raise InputError("block_score needs a non-empty subset")
    if modes[0] < 0 or modes[-1] >= op.n_modes:
        raise InputError(f"subset {modes} out of range for {op.n_modes} modes")
    mask = sum(1 << i for i in modes)
    if cache is not None:
        cache.bind(op)
        hit = cache.get(mask)
        if hit is not None:
            return hit
    sub = block_submatrix(op.matrix, modes, op.n_modes)
    eig = np.linalg.eigvalsh(sub)
    if eig[0] <= ADMISSIBILITY_RTOL * max(1.0, float(eig[-1])):
        raise InadmissibleOperatorError(
            "test operator block on modes "
            + ",".join(str(i + 1) for i in modes)
            + " is not positive definite")
    try:
        value = float(symplectic_trace_batch(sub))
    except np.linalg.LinAlgError:
        raise InadmissibleOperatorError(
            "test operator block on modes "
            + ",".join(str(i + 1) for i in modes)
            + " is not positive definite") from None
    if cache is not None:
        cache.put(mask, value)
    return value


def g_min_individual(op: TestOperator, partition: Partition,
                     cache: Optional[SubsetScoreCache] = None) -> float:
    """Minimum of ``<L>`` over states separable with respect to ``partition``."""
    if partition.n_modes != op.n_modes:
        raise InputError(
            f"partition {partition} is for {partition.n_modes} modes, operator has {op.n_modes}")
    return float(sum(block_score(op, block, cache) for block in partition.blocks))


def g_min_k(op: TestOperator, n: int, k: int,
            cache: Optional[SubsetScoreCache] = None) -> tuple[float, Partition]:
    """Minimum of ``<L>`` over convex mixtures of K-partition separable states.

    Returns the bound and the first partition (canonical order) attaining it.
    Every K-partition must be admissible; none is skipped, since skipping
    would raise the bound.
    """
    if n != op.n_modes:
        raise InputError(f"n={n} does not match operator with {op.n_modes} modes")
    if not 1 <= k <= n:
        raise InputError(f"K={k} out of range 1..{n}")
    if n > MAX_EXHAUSTIVE_MODES:
        raise InputError(f"K-partition scans are capped at N={MAX_EXHAUSTIVE_MODES}")
    if cache is None:
        cache = SubsetScoreCache(op)
    best = math.inf
    best_masks = None
    for masks in partition_masks(n, k):
        total = 0.0
        for mask in masks:
            total += block_score(op, mask_to_modes(mask), cache)
        if total < best:
            best, best_masks = total, masks
    partition = Partition.from_blocks(n, [mask_to_modes(m) for m in best_masks])
    return float(best), partition


def significance(numerator: float, error: float) -> float:
    """``numerator / error``; ``±inf`` for zero error, 0 when both vanish."""
    if error > 0:
        return numerator / error
    if numerator == 0:
        return 0.0
    return math.copysign(math.inf, numerator)


def bound(op: TestOperator, target: SeparabilityTarget,
          cache: Optional[SubsetScoreCache] = None) -> tuple[float, Partition]:
    check_target(target, op.n_modes)
    if isinstance(target, Individual):
        return g_min_individual(op, target.partition, cache), target.partition
    return g_min_k(op, op.n_modes, target.k, cache)


def verdict(op: TestOperator, state: CovarianceState, target: SeparabilityTarget,
            cache: Optional[SubsetScoreCache] = None) -> WitnessVerdict:
    """Signed significance of ``op`` on ``state`` for one separability notion.

    ``sigma < 0`` certifies entanglement for ``target`` at ``|sigma|``
    standard deviations; ``sigma >= 0`` only means nothing was detected.
    """
    _check_dims(op, state)
    check_target(target, state.n_modes)
    exp = expectation(op, state)
    err = expectation_error(op, state)
    g, argmin = bound(op, target, cache)
    return WitnessVerdict(target, exp, g, err, significance(exp - g, err), argmin)


def epr_operator(n_modes: int = 2, pair: tuple[int, int] = (0, 1)) -> TestOperator:
    """EPR-type operator ``(x_i - x_j)^2 + (p_i + p_j)^2`` (0-based pair).

    Singular as a full matrix, so only partitions separating ``i`` from
    ``j`` are admissible.  Other modes get ``x^2 + p^2``.
    """
    i, j = pair
    n = n_modes
    m = np.zeros((2 * n, 2 * n))
    for k in range(n):
        if k not in pair:
            m[k, k] = m[k + n, k + n] = 1.0
    m[i, i] = m[j, j] = 1.0
    m[i, j] = m[j, i] = -1.0
    m[i + n, i + n] = m[j + n, j + n] = 1.0
    m[i + n, j + n] = m[j + n, i + n] = 1.0
    return TestOperator(n, m)
