"""Brute-force reference computations by full enumeration.

These deliberately share no code with the dynamic programs they check: every
realization of the sources is listed and its probability multiplied out.
Only small instances are feasible (q^M realizations).
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from typing import Sequence

import numpy as np

from .descriptions import Partition
from .model import SourceModel, TypeThresholdFunction

MAX_REALIZATIONS = 2_000_000


def _realizations(src: SourceModel):
    """Yield (symbols, probability) over all q^M source realizations."""
    if src.q**src.M > MAX_REALIZATIONS:
        raise ValueError(f"{src.q}^{src.M} realizations is too many to enumerate")
    for s in itertools.product(range(src.q), repeat=src.M):
        pr = 1.0
        for i, v in enumerate(s):
            pr *= float(src.pmfs[i][v])
        if pr > 0.0:
            yield s, pr


def _entropy(masses) -> float:
    return -math.fsum(p * math.log2(p) for p in masses if p > 0.0)


def enumerate_chain_entropy(
    src: SourceModel, ell: int, theta: int, partition: Partition, shift: int = 0
) -> float:
    """H(U_1, ..., U_J) for symbol ell by listing every realization."""
    groups = list(partition.groups)
    d = shift % len(groups)
    groups = groups[d:] + groups[:d]
    law: dict[tuple, float] = defaultdict(float)
    for s, pr in _realizations(src):
        u, path = 0, []
        for g in groups:
            if u < theta:
                u += sum(1 for i in g if s[i] == ell)
            path.append(u)
        law[tuple(path)] += pr
    return _entropy(law.values())


def enumerate_clipped_types(src: SourceModel, theta: Sequence[int]) -> dict[tuple, float]:
    """Law of the clipped type vector as a dict keyed by clipped counts."""
    law: dict[tuple, float] = defaultdict(float)
    for s, pr in _realizations(src):
        counts = [0] * src.q
        for v in s:
            counts[v] += 1
        law[tuple(min(c, t) for c, t in zip(counts, theta))] += pr
    return dict(law)


def enumerate_function_entropy(
    f: TypeThresholdFunction, src: SourceModel, given: Sequence[int] = ()
) -> float:
    """H(f(S) | S_given) by enumeration."""
    given = tuple(sorted(given))
    joint: dict[tuple, float] = defaultdict(float)
    marg: dict[tuple, float] = defaultdict(float)
    for s, pr in _realizations(src):
        key = tuple(s[i] for i in given)
        joint[(key, f(s))] += pr
        marg[key] += pr
    return _entropy(joint.values()) - _entropy(marg.values())


def enumerate_poisson_binomial(p: Sequence[float]) -> np.ndarray:
    """PMF of sum of independent Bernoulli(p_i) by listing all 2^n outcomes."""
    n = len(p)
    if n > 20:
        raise ValueError("enumeration limited to n <= 20")
    out = np.zeros(n + 1)
    for bits in itertools.product((0, 1), repeat=n):
        pr = 1.0
        for b, pi in zip(bits, p):
            pr *= pi if b else 1.0 - pi
        out[sum(bits)] += pr
    return out


def random_partition(M: int, rng: np.random.Generator) -> Partition:
    """A uniformly shuffled ordering cut at random points into contiguous groups."""
    order = rng.permutation(M).tolist()
    n_cuts = int(rng.integers(0, M))
    cuts = sorted(rng.choice(np.arange(1, M), size=n_cuts, replace=False).tolist()) if M > 1 else []
    bounds = [0] + cuts + [M]
    return Partition(tuple(tuple(order[a:b]) for a, b in zip(bounds[:-1], bounds[1:])))
