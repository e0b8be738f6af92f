"""Entropies of description chains and the constant bounds they satisfy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .descriptions import ChainLaw, Partition, lemma_partition
from .model import SourceModel, TypeThresholdFunction
from .pmf import (
    binomial_entropy,
    entropy_bits,
    h2,
    poisson_binomial_pmf,
)

__all__ = [
    "EntropyBreakdown",
    "ShiftSweep",
    "bernoulli_sum_entropy_bound",
    "binary_max_entropy_closed_form",
    "chain_entropy",
    "description_entropy_budget",
    "entropy_bits",
    "h2",
    "lemma_bound",
    "poisson_binomial_pmf",
    "shift_sweep",
]


@dataclass(frozen=True)
class EntropyBreakdown:
    per_step: tuple[float, ...]  # H(U_m | U_{m-1}), m = 1..J
    total: float
    bound: float

    def to_dict(self) -> dict:
        return {"per_step": list(self.per_step), "total": self.total, "bound": self.bound}


def lemma_bound(theta: float) -> float:
    """(5/2) log2(1 + theta) + 12."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    return 2.5 * math.log2(1.0 + theta) + 12.0


def chain_entropy(law: ChainLaw) -> EntropyBreakdown:
    """Joint entropy H(U_1, ..., U_J) via the Markov chain rule.

    Given U_{m-1} >= theta the step is deterministic, and given U_{m-1} = j <
    theta the increment is the group's Poisson-binomial sum, so
    H(U_m | U_{m-1}) = P(U_{m-1} < theta) H(kernel_m).
    """
    steps = tuple(
        law.below_threshold(m - 1) * entropy_bits(law.kernels[m - 1]) for m in range(1, law.J + 1)
    )
    return EntropyBreakdown(steps, math.fsum(steps), lemma_bound(law.theta))


def bernoulli_sum_entropy_bound(p: Sequence[float]) -> float:
    """(1/2) log2(2 pi e (sum p + 1/12)), an upper bound on H(sum of Bernoulli(p_i))."""
    s = math.fsum(np.asarray(p, dtype=float))
    return 0.5 * math.log2(2 * math.pi * math.e * (s + 1.0 / 12.0))


def binary_max_entropy_closed_form(M: int, beta: float, a: int, form: str = "corrected") -> float:
    """Entropy of the binary-maximum chain for i.i.d. Bernoulli(beta) under an a-partition.

    With J = floor(M/a), Q_n ~ Binomial(n, beta) and r = (1-beta)^a:

        (1 - r^(J-1)) / (1 - r) * H(Q_a) + w * H(Q_{M-(J-1)a})

    where the last group is reached with U = 0 with probability
    w = (1-beta)^((J-1)a) (``form="corrected"``). ``form="literal"`` uses
    w = (1-beta)^(J-1) as the expression is usually printed; the two agree
    only for a = 1 or J = 1.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not 1 <= a <= M:
        raise ValueError("a must lie in [1:M]")
    J = M // a
    r = (1.0 - beta) ** a
    Ha = binomial_entropy(a, beta)[0]
    Hlast = binomial_entropy(M - (J - 1) * a, beta)[0]
    head = (1.0 - r ** (J - 1)) / (1.0 - r) * Ha if J > 1 else 0.0
    if form == "corrected":
        w = (1.0 - beta) ** ((J - 1) * a)
    elif form == "literal":
        w = (1.0 - beta) ** (J - 1)
    else:
        raise ValueError(f"unknown form {form!r}")
    return head + w * Hlast


# -- all-shift sweep ----------------------------------------------------------


_kernel_cache: dict[bytes, tuple[np.ndarray, float]] = {}


def _group_kernel(p: np.ndarray) -> tuple[np.ndarray, float]:
    key = p.tobytes()
    hit = _kernel_cache.get(key)
    if hit is None:
        k = poisson_binomial_pmf(p)
        hit = (k, entropy_bits(k))
        if len(_kernel_cache) > 100_000:
            _kernel_cache.clear()
        _kernel_cache[key] = hit
    return hit


@dataclass(frozen=True)
class ShiftSweep:
    """Step entropies of one chain under every cyclic shift d in ``shifts``.

    totals[i]: sum over positions of H(U_pos | U_pos-1) under shift shifts[i].
    per_group[g]: sum over the sweep of the step entropy of group g, i.e.
    J times the shift-averaged entropy of group g's transmission (only
    meaningful when ``shifts`` covers all of [0 : J-1]).
    per_step: (len(shifts), J) matrix, present only when requested.
    truncation: upper bound on the entropy dropped by early termination,
    for any single entry of ``totals`` or ``per_group``.
    """

    shifts: np.ndarray
    totals: np.ndarray
    per_group: np.ndarray
    truncation: float
    per_step: np.ndarray | None = None


def shift_sweep(
    p: Sequence[float],
    theta: int,
    partition: Partition,
    shifts: Sequence[int] | None = None,
    tol: float = 1e-13,
    keep_steps: bool = False,
) -> ShiftSweep:
    """Run the chain recursion for many cyclic shifts at once.

    Only the sub-threshold mass P(U = j), j < theta, influences later steps,
    so each shift carries a length-theta state. Once every shift's
    sub-threshold mass times the remaining kernel entropy falls below ``tol``
    the sweep stops; the dropped amount is reported in ``truncation``.
    """
    p = np.asarray(p, dtype=float)
    J = partition.J
    shifts = np.arange(J) if shifts is None else np.asarray(shifts, dtype=np.int64) % J
    S = shifts.size
    if theta == 0:
        z = np.zeros(S)
        return ShiftSweep(shifts, z, np.zeros(J), 0.0, np.zeros((S, J)) if keep_steps else None)
    K = np.zeros((J, theta))
    Hk = np.zeros(J)
    for g, grp in enumerate(partition.groups):
        kern, hk = _group_kernel(p[list(grp)])
        n = min(theta, kern.size)
        K[g, :n] = kern[:n]
        Hk[g] = hk
    totalH = float(Hk.sum())
    distinct = np.unique(shifts).size == S

    state = np.zeros((S, theta))
    state[:, 0] = 1.0
    totals = np.zeros(S)
    per_group = np.zeros(J)
    steps = np.zeros((S, J)) if keep_steps else None
    truncation = 0.0
    for pos in range(J):
        groups = (shifts + pos) % J
        alive = state.sum(axis=1)
        vals = alive * Hk[groups]
        totals += vals
        if distinct:
            per_group[groups] += vals
        else:
            np.add.at(per_group, groups, vals)
        if keep_steps:
            steps[:, pos] = vals
        kg = K[groups]
        new = np.zeros_like(state)
        for j in range(theta):
            new[:, j] = (state[:, : j + 1] * kg[:, j::-1]).sum(axis=1)
        state = new
        worst = float(state.sum(axis=1).max())
        bound = worst * max(totalH, S * float(Hk.max()))
        if bound < tol and pos + 1 < J:
            truncation = bound
            break
    return ShiftSweep(shifts, totals, per_group, truncation, steps)


def description_entropy_budget(
    f: TypeThresholdFunction,
    src: SourceModel,
    partitions: Sequence[Partition] | None = None,
) -> tuple[float, float]:
    """(sum over symbols of chain entropies, 12 q + 2.5 sum log2(1 + theta_l)).

    The first value upper-bounds the joint description entropy by
    subadditivity. ``partitions`` defaults to ``lemma_partition`` per symbol.
    """
    if partitions is None:
        partitions = [lemma_partition(src.indicator_probs(l), t) for l, t in enumerate(f.theta)]
    total = 0.0
    for ell, (t, P) in enumerate(zip(f.theta, partitions)):
        if t == 0:
            continue
        sw = shift_sweep(src.indicator_probs(ell), t, P, shifts=[0])
        total += float(sw.totals[0])
    const = 12.0 * f.q + 2.5 * sum(math.log2(1 + t) for t in f.theta)
    return total, const
