"""PMF primitives shared by every module: entropies and Poisson-binomial laws.

All entropies are in bits and use the convention 0 log 0 = 0.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats

PMF_TOL = 1e-12


def entropy_bits(pmf) -> float:
    """Shannon entropy of a PMF (any shape) in bits."""
    p = np.asarray(pmf, dtype=float).ravel()
    p = p[p > 0]
    if p.size == 0:
        return 0.0
    return float(-(p * np.log2(p)).sum())


def h2(p: float) -> float:
    """Binary entropy function."""
    if p < 0.0 or p > 1.0:
        raise ValueError(f"h2 argument {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def log2_plus(x: float) -> float:
    """max(log2 x, 0); zero for x <= 1."""
    return math.log2(x) if x > 1.0 else 0.0


def _check_probs(probabilities) -> np.ndarray:
    p = np.asarray(probabilities, dtype=float).ravel()
    if np.any(p < 0.0) or np.any(p > 1.0) or np.any(~np.isfinite(p)):
        raise ValueError("indicator probabilities must lie in [0, 1]")
    return p


def poisson_binomial_pmf(probabilities: Sequence[float]) -> np.ndarray:
    """PMF of a sum of independent Bernoulli(p_i) variables on [0 : n].

    Computed by iterative convolution with one factor (1 - p + p x) per
    variable. Equal probabilities take the closed-form binomial path.
    Entries that underflow to exactly zero at the top of the support are not
    revisited, so long sums of small p_i cost O(n * effective support).
    """
    p = _check_probs(probabilities)
    n = p.size
    if n == 0:
        return np.ones(1)
    if np.all(p == p[0]):
        return binomial_pmf(n, float(p[0]))
    out = np.zeros(n + 1)
    out[0] = 1.0
    top = 0  # highest index holding nonzero mass
    for pi in p:
        if pi == 0.0:
            continue
        hi = min(top + 1, n)
        # out[k] <- (1-p) out[k] + p out[k-1], on the live window
        shifted = out[:hi].copy()
        out[: hi + 1] *= 1.0 - pi
        out[1 : hi + 1] += pi * shifted
        top = hi
        while top > 0 and out[top] == 0.0:
            top -= 1
    return out


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Full Binomial(n, p) PMF on [0 : n]."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if p == 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p == 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    return stats.binom.pmf(np.arange(n + 1), n, p)


def binomial_entropy(n: int, p: float, tail: float = 1e-15) -> tuple[float, float]:
    """Entropy of Binomial(n, p) in bits and a bound on the truncation error.

    Only the window [lo, hi] outside of which each tail holds at most ``tail``
    mass is evaluated. The neglected mass t contributes at most
    t * log2((n + 1) / t) bits.
    """
    if n == 0 or p in (0.0, 1.0):
        return 0.0, 0.0
    if n <= 20000 or tail <= 0.0:
        return entropy_bits(binomial_pmf(n, p)), 0.0
    lo = int(stats.binom.ppf(tail, n, p))
    hi = int(stats.binom.isf(tail, n, p)) + 1
    lo, hi = max(lo, 0), min(hi, n)
    k = np.arange(lo, hi + 1)
    pk = stats.binom.pmf(k, n, p)
    lost = max(0.0, 1.0 - float(pk.sum()))
    err = lost * math.log2((n + 1) / lost) if lost > 0 else 0.0
    return entropy_bits(pk), err
