"""Tail-sum selection on weight sequences: offset bounds, extraction and exhaustive probes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from src.utils.error_handler import BadParameters, NoPlissPoint

logger = logging.getLogger(__name__)

_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Log leg-norms a_1..a_n with their leg durations."""

    values: np.ndarray
    leg_durations: np.ndarray = field(default=None)  # type: ignore[assignment]
    gap_bound: Optional[float] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        durations = (
            np.ones_like(values)
            if self.leg_durations is None
            else np.asarray(self.leg_durations, dtype=float).ravel()
        )
        if durations.shape != values.shape:
            raise BadParameters(
                f"weights and durations differ in length: {values.size} != {durations.size}"
            )
        if np.any(durations <= 0):
            raise BadParameters("leg durations must be positive")
        if self.gap_bound is not None and np.any(durations > self.gap_bound * (1 + 1e-12)):
            raise BadParameters(f"leg duration exceeds T={self.gap_bound}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "leg_durations", durations)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class PlissSelection:
    """Offset L after which every tail average stays below lambda2."""

    L: int
    lambda2: float
    verified_upto: int


SequenceLike = Union[WeightSequence, Sequence[float], np.ndarray]


def _values(seq: SequenceLike) -> np.ndarray:
    if isinstance(seq, WeightSequence):
        return seq.values
    return np.asarray(seq, dtype=float).ravel()


def pliss_bound(C: float, lambda1: float, lambda2: float) -> int:
    """Smallest N >= 1 with C + N*lambda1 < N*lambda2."""

    if C < 0:
        raise BadParameters(f"C must be nonnegative, got {C}")
    if lambda1 >= lambda2:
        raise BadParameters(f"need lambda1 < lambda2, got {lambda1} >= {lambda2}")

    n = math.floor(C / (lambda2 - lambda1)) + 1
    # the closed form can be off by one in floating point
    while n > 1 and C + (n - 1) * lambda1 < (n - 1) * lambda2:
        n -= 1
    while not C + n * lambda1 < n * lambda2:
        n += 1
    return n


def find_tail_offset(
    seq: SequenceLike, lambda2: float, tol: float = _SUM_TOL
) -> Optional[PlissSelection]:
    """Smallest L with sum_{i=1..n} a_{L+i} <= n*lambda2 for every tail length n.

    Returns None when no offset below the sequence length works.
    """

    a = _values(seq)
    n = a.size
    if n == 0:
        return None
    shifted = np.concatenate(([0.0], np.cumsum(a - lambda2)))
    # suffix_max[L] = max_{k > L} shifted[k]
    suffix_max = np.maximum.accumulate(shifted[::-1])[::-1]
    later = suffix_max[1:]
    valid = np.flatnonzero(later <= shifted[:-1] + tol)
    if valid.size == 0:
        return None
    offset = int(valid[0])
    return PlissSelection(L=offset, lambda2=lambda2, verified_upto=n - offset)


def tail_violation(
    log_norms: Sequence[float],
    C: float,
    eta: float,
    durations: Optional[Sequence[float]] = None,
) -> float:
    """Largest excess of sum_{i<=n} a_i over log C - eta * elapsed; nonpositive means contracted."""

    if C <= 0:
        raise BadParameters("C must be positive")
    a = np.asarray(log_norms, dtype=float)
    if a.size == 0:
        return -math.inf
    tau = np.ones_like(a) if durations is None else np.asarray(durations, dtype=float)
    excess = np.cumsum(a + eta * tau) - math.log(C)
    return float(excess.max())


def is_contracted(
    log_norms: Sequence[float],
    C: float,
    eta: float,
    durations: Optional[Sequence[float]] = None,
    tol: float = 1e-6,
) -> bool:
    """Whether every prefix product stays below C exp(-eta * elapsed)."""

    return tail_violation(log_norms, C, eta, durations) <= tol


def pliss_point(seq: WeightSequence, eta: float, tol: float = _SUM_TOL) -> list[int]:
    """Schedule indices from which all cyclic tail sums satisfy sum a <= -eta * sum duration.

    The sequence is treated as periodic; checking one full cycle from each start
    covers every longer tail because the whole-cycle sum is negative.
    """

    a = seq.values
    tau = seq.leg_durations
    average = float(a.sum() / tau.sum())
    if not average < -eta:
        raise NoPlissPoint(
            f"time-weighted average {average:.6g} is not below -eta = {-eta:.6g}"
        )
    b = a + eta * tau
    n = b.size
    doubled = np.concatenate((b, b))
    indices = [
        k for k in range(n) if float(np.cumsum(doubled[k : k + n]).max()) <= tol
    ]
    logger.debug(f"pliss_point: {len(indices)} of {n} indices qualify at eta={eta}")
    return indices


@dataclass
class AdversarialResult:
    """Outcome of the exhaustive worst-offset search."""

    worst_L: int
    witness: Optional[np.ndarray]
    partial: bool
    evaluations: int
    bound: int


def _premise_holds(a: np.ndarray, C: float, lambda1: float) -> bool:
    steps = np.arange(1, a.size + 1)
    return bool(np.all(np.cumsum(a) <= C + steps * lambda1 + _SUM_TOL))


def _witness_for(
    L: int,
    C: float,
    lambda1: float,
    lambda2: float,
    length: int,
    grid: float,
    K: int,
) -> tuple[Optional[np.ndarray], int]:
    """Search lattice sequences whose first maximum of the shifted sums sits at L.

    Reachable lattice partial sums form intervals [-jK, hi_j], so each target
    is decided by one forward sweep.
    """

    evaluations = 0
    top = math.floor((C + L * lambda1) / grid + 1e-9)
    low = -L * K
    for target in range(top, low - 1, -1):
        level = target * grid - L * lambda2
        if L > 0 and level <= _SUM_TOL:
            break
        evaluations += 1
        highs = [0]
        feasible = True
        for j in range(1, L):
            premise = math.floor((C + j * lambda1) / grid + 1e-9)
            below_target = math.floor((level + j * lambda2) / grid - 1e-6)
            hi = min(highs[-1] + K, premise, below_target)
            if hi < -j * K:
                feasible = False
                break
            highs.append(hi)
        if not feasible:
            continue
        if L > 0 and not (-L * K <= target <= highs[-1] + K):
            continue

        # walk back from the target through the reachable intervals
        path = [target]
        for j in range(L - 1, -1, -1):
            nxt = path[-1]
            candidate = min(highs[j], nxt + K)
            if candidate < nxt - K or candidate < -j * K:
                feasible = False
                break
            path.append(candidate)
        if not feasible or path[-1] != 0:
            continue
        partial_sums = np.array(path[::-1], dtype=float)
        prefix = np.diff(partial_sums) * grid
        tail = np.full(length - L, -K * grid)
        witness = np.concatenate((prefix, tail))
        if not _premise_holds(witness, C, lambda1):
            continue
        selection = find_tail_offset(witness, lambda2)
        if selection is not None and selection.L == L:
            return witness, evaluations
    return None, evaluations


def adversarial_search(
    C: float,
    lambda1: float,
    lambda2: float,
    length: int,
    grid: float,
    k_max: Optional[int] = None,
    budget: int = 1_000_000,
) -> AdversarialResult:
    """Worst offset over all premise-satisfying sequences on the lattice grid*{-K..K}.

    The premise is sum_{i<=n} a_i <= C + n*lambda1 for every n; the returned
    witness reproduces ``worst_L`` through :func:`find_tail_offset`.
    """

    if grid <= 0 or length < 1:
        raise BadParameters("grid must be positive and length at least 1")
    bound = pliss_bound(C, lambda1, lambda2)
    K = (
        k_max
        if k_max is not None
        else math.ceil((C + abs(lambda1) + abs(lambda2) + 1.0) / grid)
    )

    worst = 0
    witness: Optional[np.ndarray] = None
    evaluations = 0
    partial = False
    for L in range(length):
        if evaluations >= budget:
            partial = True
            logger.warning(f"adversarial_search: budget {budget} exhausted at L={L}")
            break
        found, spent = _witness_for(L, C, lambda1, lambda2, length, grid, K)
        evaluations += spent
        if found is not None:
            worst, witness = L, found
    logger.info(
        f"adversarial_search: worst L={worst} (bound N={bound}), evaluations={evaluations}"
    )
    return AdversarialResult(
        worst_L=worst, witness=witness, partial=partial, evaluations=evaluations, bound=bound
    )


__all__ = [
    "WeightSequence",
    "PlissSelection",
    "AdversarialResult",
    "pliss_bound",
    "find_tail_offset",
    "tail_violation",
    "is_contracted",
    "pliss_point",
    "adversarial_search",
]
