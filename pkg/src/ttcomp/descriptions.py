"""Partitions of the sensor set and the clipped-frequency description chains.

A description chain for symbol ``ell`` with threshold ``theta`` runs over the
groups A_1, ..., A_J of a partition:

    U_0 = 0,   U_m = U_{m-1} + 1{U_{m-1} < theta} * sum_{i in A_m} 1{S_i = ell}

so that min(U_J, theta) is the clipped frequency of ``ell``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import SourceModel, TypeThresholdFunction
from .pmf import poisson_binomial_pmf


@dataclass(frozen=True)
class Partition:
    """Ordered disjoint cover of the sensors {0, ..., M-1} by non-empty groups."""

    groups: tuple[tuple[int, ...], ...]
    merged_tail: bool = field(default=False, compare=False)

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ValueError("partition groups must be non-empty")
        flat = [i for g in groups for i in g]
        if len(set(flat)) != len(flat):
            raise ValueError("partition groups overlap")
        if sorted(flat) != list(range(len(flat))):
            raise ValueError("partition groups must cover 0..M-1 exactly")

    @property
    def M(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def J(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    def rotated(self, d: int) -> "Partition":
        """Groups in transmission order d+1, ..., J, 1, ..., d."""
        d %= self.J
        return Partition(self.groups[d:] + self.groups[:d], self.merged_tail)

    def to_json(self) -> list[list[int]]:
        return [[i + 1 for i in g] for g in self.groups]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[int]]) -> "Partition":
        return cls(tuple(tuple(i - 1 for i in g) for g in data))

    def describe(self) -> str:
        return f"J={self.J},sizes={min(self.sizes)}..{max(self.sizes)}"


def single_group(M: int) -> Partition:
    return Partition((tuple(range(M)),))


def a_partition(M: int, a: int) -> Partition:
    """J = floor(M/a) consecutive blocks: J-1 of size a, the last of size M-(J-1)a."""
    if not 1 <= a <= M:
        raise ValueError(f"block size a={a} outside [1:{M}]")
    J = M // a
    groups = [tuple(range(j * a, (j + 1) * a)) for j in range(J - 1)]
    groups.append(tuple(range((J - 1) * a, M)))
    return Partition(tuple(groups))


def lemma_partition(p: Sequence[float], theta: int) -> Partition:
    """Consecutive intervals whose indicator-probability sums first reach theta.

    With theta = 0 or sum(p) <= theta the whole set is one group. Otherwise
    each interval closes at the first index where its running sum reaches
    theta; a leftover tail whose sum stays below theta joins the last closed
    interval. If that leaves the final sum at or above 2*theta the result is
    flagged with ``merged_tail``.
    """
    p = np.asarray(p, dtype=float)
    M = p.size
    if M == 0:
        raise ValueError("need at least one sensor")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("indicator probabilities must lie in [0, 1]")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0 or math.fsum(p) <= theta:
        return single_group(M)
    bounds = []  # exclusive right ends of closed intervals
    start, run = 0, 0.0
    for i in range(M):
        run += p[i]
        if run >= theta:
            bounds.append(i + 1)
            start, run = i + 1, 0.0
    if not bounds:  # rounding left the running sum just short of theta
        return Partition(single_group(M).groups, merged_tail=True)
    if bounds[-1] != M:
        bounds[-1] = M  # leftover tail with sum < theta
    edges = [0] + bounds
    groups = tuple(tuple(range(edges[j], edges[j + 1])) for j in range(len(bounds)))
    final = math.fsum(p[edges[-2] :])
    return Partition(groups, merged_tail=not (theta <= final < 2 * theta))


def check_lemma_rules(p: Sequence[float], theta: int, part: Partition) -> bool:
    """True iff ``part`` obeys the interval rules used by ``lemma_partition``.

    Non-final intervals: the sum without their last element is < theta and
    the full sum is >= theta. Final interval: theta <= sum < 2 theta.
    """
    p = np.asarray(p, dtype=float)
    if part.J == 1:
        return theta == 0 or math.fsum(p) <= theta or theta <= math.fsum(p) < 2 * theta
    for g in part.groups[:-1]:
        s = math.fsum(p[list(g)])
        if not (s - p[g[-1]] < theta <= s):
            return False
    last = math.fsum(p[list(part.groups[-1])])
    return theta <= last < 2 * theta


@dataclass(frozen=True)
class ChainLaw:
    """Exact law of one description chain.

    kernels[m-1] is the PMF of sum_{i in A_m} 1{S_i = ell} for the m-th group
    in transmission order; state_pmfs[m] is the PMF of U_m (index = value,
    implicitly zero beyond the stored length).
    """

    theta: int
    kernels: tuple[np.ndarray, ...]
    state_pmfs: tuple[np.ndarray, ...]
    partition: Partition
    shift: int = 0

    @property
    def J(self) -> int:
        return len(self.kernels)

    def state_pmf(self, m: int, length: int | None = None) -> np.ndarray:
        s = self.state_pmfs[m]
        if length is None:
            return s.copy()
        out = np.zeros(length)
        out[: min(length, s.size)] = s[:length]
        return out

    def below_threshold(self, m: int) -> float:
        """P(U_m < theta)."""
        return float(self.state_pmfs[m][: self.theta].sum())


def _advance(state: np.ndarray, kernel: np.ndarray, theta: int) -> np.ndarray:
    live = state[:theta]
    grown = np.convolve(live, kernel) if live.size else np.zeros(0)
    out = np.zeros(max(state.size, grown.size))
    out[: grown.size] += grown
    out[theta : state.size] += state[theta:]
    return out


def chain_law_from_probs(
    p: Sequence[float], theta: int, partition: Partition, shift: int = 0
) -> ChainLaw:
    """Forward recursion for the chain with indicator probabilities ``p``.

    P(U_m = u) = sum_{j < theta} P(U_{m-1} = j) k_m(u - j) + 1{u >= theta} P(U_{m-1} = u)
    """
    p = np.asarray(p, dtype=float)
    if p.size != partition.M:
        raise ValueError("partition does not cover the sensors")
    if not 0 <= shift < partition.J:
        raise ValueError(f"shift {shift} outside [0:{partition.J - 1}]")
    order = partition.rotated(shift)
    # groups with the same probabilities share one kernel
    cache: dict[bytes, np.ndarray] = {}
    kernels = []
    for g in order.groups:
        pg = np.sort(p[list(g)])
        key = pg.tobytes()
        if key not in cache:
            cache[key] = poisson_binomial_pmf(pg)
        kernels.append(cache[key])
    kernels = tuple(kernels)
    states = [np.ones(1)]
    for k in kernels:
        states.append(_advance(states[-1], k, theta))
    return ChainLaw(theta, kernels, tuple(states), partition, shift)


def chain_law(
    src: SourceModel, ell: int, theta: int, partition: Partition, shift: int = 0
) -> ChainLaw:
    return chain_law_from_probs(src.indicator_probs(ell), theta, partition, shift)


# -- shift policies and sampling ----------------------------------------------


@dataclass(frozen=True)
class ShiftPolicy:
    """How the cyclic transmission offset of each symbol's chain is chosen.

    mode: ``none`` (offset 0), ``fixed`` (offset ``d`` reduced mod J) or
    ``uniform_random`` (drawn once per block, uniformly over [0 : J-1]).
    """

    mode: str = "none"
    d: int = 0

    def __post_init__(self):
        if self.mode not in ("none", "fixed", "uniform_random"):
            raise ValueError(f"unknown shift mode {self.mode!r}")

    def draw(self, Js: Sequence[int], rng: np.random.Generator) -> list[int]:
        if self.mode == "none":
            return [0] * len(Js)
        if self.mode == "fixed":
            return [self.d % J for J in Js]
        return [int(rng.integers(J)) for J in Js]


def draw_sources(src: SourceModel, k: int, rng: np.random.Generator) -> np.ndarray:
    """k i.i.d. source columns as an (M, k) integer array."""
    cdf = np.cumsum(src.pmfs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((src.M, k))
    out = np.empty((src.M, k), dtype=np.int64)
    for i in range(src.M):
        out[i] = np.searchsorted(cdf[i], u[i], side="right")
    return np.minimum(out, src.q - 1)


def run_chain(indicators: np.ndarray, theta: int, order: Partition) -> np.ndarray:
    """Sample paths U_0..U_J, shape (J+1, k), from a boolean (M, k) indicator array."""
    k = indicators.shape[1]
    U = np.zeros((order.J + 1, k), dtype=np.int64)
    for m, g in enumerate(order.groups, start=1):
        inc = indicators[list(g)].sum(axis=0)
        U[m] = U[m - 1] + np.where(U[m - 1] < theta, inc, 0)
    return U


@dataclass
class DescriptionSample:
    symbols: np.ndarray  # (M, k)
    shifts: list[int]
    chains: list[np.ndarray]  # per ell, (J_ell + 1, k)
    clipped: np.ndarray  # (q, k)

    def write_csv(self, path) -> None:
        """Rows (symbol_index, ell, m, U_value), all 1-based except ell and m=0."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["symbol_index", "ell", "m", "U_value"])
            for ell, U in enumerate(self.chains):
                for j in range(U.shape[1]):
                    for m in range(1, U.shape[0]):
                        w.writerow([j + 1, ell, m, int(U[m, j])])


def sample_descriptions(
    src: SourceModel,
    f: TypeThresholdFunction,
    partitions: Sequence[Partition],
    policy: ShiftPolicy = ShiftPolicy(),
    seed: int | np.random.SeedSequence = 0,
    k: int = 1,
) -> DescriptionSample:
    """Draw k source columns and run every symbol's description chain.

    RNG order: the (M, k) source block first, then one offset per symbol.
    """
    if len(partitions) != f.q:
        raise ValueError("need one partition per symbol")
    rng = np.random.default_rng(seed)
    symbols = draw_sources(src, k, rng)
    shifts = policy.draw([P.J for P in partitions], rng)
    chains, clipped = [], np.zeros((f.q, k), dtype=np.int64)
    for ell, (P, d) in enumerate(zip(partitions, shifts)):
        U = run_chain(symbols == ell, f.theta[ell], P.rotated(d))
        chains.append(U)
        clipped[ell] = np.minimum(U[-1], f.theta[ell])
    return DescriptionSample(symbols, shifts, chains, clipped)


# -- binary-search maximum ----------------------------------------------------


def n_search_stages(q: int) -> int:
    return max(1, math.ceil(math.log2(q)))


def closed_form_midpoint(q: int, outcomes: Sequence[bool]) -> int:
    """ceil(q / 2^l * (1 + sum_j o_j 2^(l-j))) for stage l = len(outcomes) + 1."""
    stage = len(outcomes) + 1
    num = 1 + sum(2 ** (stage - j) for j, o in enumerate(outcomes, 1) if o)
    # q * num / 2^stage, rounded up in exact integer arithmetic
    return -((-q * num) // 2**stage)


@dataclass
class BinarySearchResult:
    thresholds: list[int]
    outcomes: list[int]  # U~ at the end of each stage
    stage_chains: list[np.ndarray]  # per stage, U~_0..U~_J
    maximum: int


def binary_search_max_descriptions(
    symbols: Sequence[int], q: int, partitions: Sequence[Partition]
) -> BinarySearchResult:
    """Recover max(symbols) by ceil(log2 q) threshold stages.

    The live interval [lo, hi] starts at [0, q-1]; stage l tests S_i >= D with
    D = ceil((lo + hi) / 2) through a chain that stops growing once positive.
    A positive outcome sets lo = D, otherwise hi = D - 1. When q is a power of
    two, D coincides with the closed-form midpoint of ``closed_form_midpoint``.
    """
    s = np.asarray(symbols, dtype=np.int64).ravel()
    n = n_search_stages(q)
    if len(partitions) != n:
        raise ValueError(f"need {n} stage partitions, got {len(partitions)}")
    if s.size and (s.min() < 0 or s.max() >= q):
        raise ValueError("symbol out of range")
    pow2 = q & (q - 1) == 0
    lo, hi = 0, q - 1
    thresholds, outcomes, chains = [], [], []
    for P in partitions:
        D = (lo + hi + 1) // 2
        if pow2:
            assert D == closed_form_midpoint(q, [o > 0 for o in outcomes])
        U = run_chain((s >= D)[:, None], 1, P)[:, 0]
        thresholds.append(D)
        outcomes.append(int(U[-1]))
        chains.append(U)
        if U[-1] > 0:
            lo = D
        else:
            hi = D - 1
    return BinarySearchResult(thresholds, outcomes, chains, lo)


def partitions_to_json(parts: Iterable[Partition], path) -> None:
    with open(path, "w") as fh:
        json.dump([P.to_json() for P in parts], fh)
