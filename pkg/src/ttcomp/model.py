"""Sources, types, and type-threshold functions.

Sensor indices are 0-based throughout the Python API; the JSON forms that
name sensors (partitions) use 1-based indices.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import signal

from .pmf import PMF_TOL, entropy_bits

DEFAULT_STATE_CAP = 2_000_000
STANDARD_KINDS = (
    "maximum",
    "distinct_count",
    "avg_top_ell",
    "frequency_indicator",
    "heavy_hitters",
)


class StateSpaceError(RuntimeError):
    """An exact computation would exceed the configured state-space cap."""


@dataclass(frozen=True)
class SourceModel:
    """M independent sources over the alphabet [0 : q-1]."""

    q: int
    pmfs: np.ndarray  # shape (M, q)

    def __post_init__(self):
        pmfs = np.array(self.pmfs, dtype=float)
        if self.q < 2:
            raise ValueError("alphabet size q must be at least 2")
        if pmfs.ndim != 2 or pmfs.shape[0] < 1 or pmfs.shape[1] != self.q:
            raise ValueError(f"pmfs must have shape (M >= 1, q={self.q}), got {pmfs.shape}")
        if np.any(pmfs < 0.0) or np.any(pmfs > 1.0):
            raise ValueError("pmf entries must lie in [0, 1]")
        bad = np.abs(pmfs.sum(axis=1) - 1.0) > PMF_TOL
        if np.any(bad):
            raise ValueError(f"pmf of sensor {int(np.argmax(bad))} does not sum to 1")
        pmfs.setflags(write=False)
        object.__setattr__(self, "pmfs", pmfs)

    @property
    def M(self) -> int:
        return self.pmfs.shape[0]

    def indicator_probs(self, ell: int) -> np.ndarray:
        """P(S_i = ell) for every sensor."""
        return self.pmfs[:, ell].copy()

    def tail_probs(self, d: int) -> np.ndarray:
        """P(S_i >= d) for every sensor."""
        return self.pmfs[:, d:].sum(axis=1)

    @classmethod
    def iid(cls, M: int, pmf: Sequence[float]) -> "SourceModel":
        pmf = np.asarray(pmf, dtype=float)
        return cls(q=pmf.size, pmfs=np.tile(pmf, (M, 1)))

    @classmethod
    def bernoulli(cls, M: int, beta: float) -> "SourceModel":
        """i.i.d. binary sources with P(S = 1) = beta."""
        return cls.iid(M, [1.0 - beta, beta])

    @classmethod
    def random(cls, M: int, q: int, rng: np.random.Generator, concentration: float = 1.0):
        return cls(q=q, pmfs=rng.dirichlet(np.full(q, concentration), size=M))

    def to_dict(self) -> dict:
        return {"q": self.q, "pmfs": self.pmfs.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SourceModel":
        return cls(q=int(d["q"]), pmfs=np.asarray(d["pmfs"], dtype=float))


@dataclass(frozen=True)
class TypeVector:
    counts: tuple[int, ...]

    @property
    def M(self) -> int:
        return sum(self.counts)

    def clipped(self, theta: Sequence[int]) -> tuple[int, ...]:
        return tuple(min(t, b) for t, b in zip(theta, self.counts))


def _check_symbols(symbols, q: int) -> np.ndarray:
    s = np.asarray(symbols)
    if s.size and (not np.issubdtype(s.dtype, np.integer)):
        if np.any(s != np.round(s)):
            raise ValueError("symbols must be integers")
        s = s.astype(np.int64)
    if s.size and (s.min() < 0 or s.max() >= q):
        raise ValueError(f"symbol out of range [0:{q - 1}]")
    return s.astype(np.int64, copy=False)


def type_vector(symbols: Sequence[int], q: int) -> TypeVector:
    """Frequency histogram of ``symbols`` over [0 : q-1]."""
    s = _check_symbols(symbols, q)
    return TypeVector(tuple(int(c) for c in np.bincount(s.ravel(), minlength=q)))


def _canonical_label(label):
    """Hashable, JSON-stable form of an output label."""
    if isinstance(label, (list, tuple)):
        return tuple(_canonical_label(x) for x in label)
    if isinstance(label, (frozenset, set)):
        return tuple(sorted(label))
    if isinstance(label, np.integer):
        return int(label)
    if isinstance(label, np.floating):
        return float(label)
    return label


def _box(theta: Sequence[int]) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(t + 1) for t in theta))


@dataclass(frozen=True)
class TypeThresholdFunction:
    """A type-threshold function given by its threshold vector and reducer table.

    ``reducer`` maps every clipped-frequency vector in the box
    prod_l [0 : theta_l] to an output label.
    """

    q: int
    theta: tuple[int, ...]
    reducer: Mapping[tuple[int, ...], Hashable]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        theta = tuple(int(t) for t in self.theta)
        if len(theta) != self.q or any(t < 0 for t in theta):
            raise ValueError("theta must be a length-q vector of non-negative integers")
        table = {tuple(int(x) for x in k): _canonical_label(v) for k, v in self.reducer.items()}
        missing = [b for b in _box(theta) if b not in table]
        if missing:
            raise ValueError(f"reducer undefined on clipped vector {missing[0]}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "reducer", table)

    @classmethod
    def from_callable(cls, q: int, theta: Sequence[int], g: Callable, name: str = "custom"):
        return cls(q, tuple(theta), {b: g(b) for b in _box(theta)}, name)

    @property
    def box_shape(self) -> tuple[int, ...]:
        return tuple(t + 1 for t in self.theta)

    def labels(self) -> list:
        return sorted(set(self.reducer.values()), key=repr)

    def __call__(self, symbols) -> Hashable:
        return evaluate(self, symbols)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "theta": list(self.theta),
            "reducer": [[list(k), _jsonable(v)] for k, v in sorted(self.reducer.items())],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TypeThresholdFunction":
        table = {tuple(k): _canonical_label(v) for k, v in d["reducer"]}
        return cls(int(d["q"]), tuple(d["theta"]), table, d.get("name", "custom"))


def _jsonable(label):
    if isinstance(label, tuple):
        return [_jsonable(x) for x in label]
    return label


def evaluate(f: TypeThresholdFunction, symbols) -> Hashable:
    """f(s_1, ..., s_M) through the reducer applied to the clipped type."""
    b = type_vector(symbols, f.q)
    return f.reducer[b.clipped(f.theta)]


def column_codes(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense integer codes for the distinct columns of a non-negative 2-D array.

    Returns (codes, first) where equal columns share a code and ``first[c]``
    is the index of a column with code c. Codes are built row by row in mixed
    radix and re-densified before they could overflow.
    """
    a = np.asarray(arr)
    k = a.shape[1]
    code = np.zeros(k, dtype=np.int64)
    span = 1
    for row in a:
        radix = int(row.max(initial=0)) + 1
        if span * radix >= 2**62:
            _, code = np.unique(code, return_inverse=True)
            code = code.astype(np.int64).ravel()
            span = int(code.max(initial=0)) + 1
        code = code * radix + row.astype(np.int64)
        span *= radix
    _, first, inverse = np.unique(code, return_index=True, return_inverse=True)
    return inverse.astype(np.int64).ravel(), first


def clipped_columns(f: TypeThresholdFunction, symbols: np.ndarray) -> np.ndarray:
    """(q, k) clipped frequencies of every column of an (M, k) symbol array."""
    s = _check_symbols(symbols, f.q)
    counts = np.stack([(s == ell).sum(axis=0) for ell in range(f.q)])
    return np.minimum(counts, np.asarray(f.theta)[:, None])


def reduce_columns(f: TypeThresholdFunction, clipped: np.ndarray) -> list:
    """Apply the reducer to every column of a (q, k) clipped-frequency array."""
    codes, first = column_codes(clipped)
    labels = [f.reducer[tuple(int(x) for x in clipped[:, j])] for j in first]
    return [labels[c] for c in codes]


def evaluate_columns(f: TypeThresholdFunction, symbols: np.ndarray) -> list:
    """Evaluate f on every column of an (M, k) symbol array."""
    return reduce_columns(f, clipped_columns(f, symbols))


# -- standard functions -------------------------------------------------------


def _maximum(b):
    nz = [ell for ell in range(1, len(b)) if b[ell] > 0]
    return max(nz) if nz else 0


def standard_function(kind: str, q: int, **params) -> TypeThresholdFunction:
    """One of the common type-threshold functions.

    kinds: ``maximum``, ``distinct_count``, ``avg_top_ell`` (param ``ell``),
    ``frequency_indicator`` (param ``ell``), ``heavy_hitters`` (param ``T``).
    """
    if q < 2:
        raise ValueError("q must be at least 2")
    if kind == "maximum":
        theta = (0,) + (1,) * (q - 1)
        return TypeThresholdFunction.from_callable(q, theta, _maximum, "maximum")
    if kind == "distinct_count":
        return TypeThresholdFunction.from_callable(q, (1,) * q, sum, "distinct_count")
    if kind == "avg_top_ell":
        k = int(params["ell"])
        if k < 1:
            raise ValueError("avg_top_ell needs ell >= 1")
        theta = (0,) + (k,) * (q - 1)

        def top(b):
            # values from the top down; the shortfall is made up by zeros
            total, left = 0, k
            for v in range(q - 1, 0, -1):
                take = min(b[v], left)
                total += v * take
                left -= take
            return (total, k)

        return TypeThresholdFunction.from_callable(q, theta, top, f"avg_top_{k}")
    if kind == "frequency_indicator":
        ell = int(params["ell"])
        if not 0 <= ell < q:
            raise ValueError(f"frequency_indicator symbol {ell} outside [0:{q - 1}]")
        theta = tuple(1 if v == ell else 0 for v in range(q))
        return TypeThresholdFunction.from_callable(
            q, theta, lambda b: b[ell], f"frequency_indicator_{ell}"
        )
    if kind == "heavy_hitters":
        T = int(params["T"])
        if T < 1:
            raise ValueError("heavy_hitters needs T >= 1")
        return TypeThresholdFunction.from_callable(
            q,
            (T,) * q,
            lambda b: tuple(ell for ell in range(q) if b[ell] >= T),
            f"heavy_hitters_{T}",
        )
    raise ValueError(f"unknown function kind {kind!r}; expected one of {STANDARD_KINDS}")


# -- exact distribution of the clipped type -----------------------------------


def _state_size(theta) -> int:
    return math.prod(t + 1 for t in theta)


def _sensor_step(dist: np.ndarray, pmf: np.ndarray, theta: Sequence[int]) -> np.ndarray:
    """Add one sensor with law ``pmf`` to a clipped-count distribution."""
    out = np.zeros_like(dist)
    for v, pv in enumerate(pmf):
        if pv == 0.0:
            continue
        if theta[v] == 0:
            out += pv * dist
            continue
        moved = np.zeros_like(dist)
        src = [slice(None)] * dist.ndim
        dst = [slice(None)] * dist.ndim
        src[v], dst[v] = slice(0, theta[v]), slice(1, theta[v] + 1)
        moved[tuple(dst)] = dist[tuple(src)]
        sat = [slice(None)] * dist.ndim
        sat[v] = slice(theta[v], theta[v] + 1)
        moved[tuple(sat)] += dist[tuple(sat)]
        out += pv * moved
    return out


def _saturate(full: np.ndarray, theta: Sequence[int]) -> np.ndarray:
    out = full
    for ax, t in enumerate(theta):
        head = np.take(out, range(t), axis=ax)
        tail = np.take(out, range(t, out.shape[ax]), axis=ax).sum(axis=ax, keepdims=True)
        out = np.concatenate([head, tail], axis=ax)
    return out


def clipped_convolve(a: np.ndarray, b: np.ndarray, theta: Sequence[int]) -> np.ndarray:
    """Law of the clipped sum of two independent clipped-count vectors."""
    full = signal.convolve(a, b, method="direct")
    return _saturate(full, theta)


def _power(dist_one: np.ndarray, n: int, theta) -> np.ndarray:
    result = np.zeros(tuple(t + 1 for t in theta))
    result[(0,) * len(theta)] = 1.0
    base = dist_one
    while n:
        if n & 1:
            result = clipped_convolve(result, base, theta)
        n >>= 1
        if n:
            base = clipped_convolve(base, base, theta)
    return result


_REPEAT_MIN = 64


def clipped_type_distribution(
    src: SourceModel,
    theta: Sequence[int],
    initial_counts: Sequence[int] | None = None,
    sensors: Sequence[int] | None = None,
    state_cap: int = DEFAULT_STATE_CAP,
    as_array: bool = False,
):
    """Exact law of (min(theta_l, b_l))_l by dynamic programming over sensors.

    ``initial_counts`` seeds the clipped counts (default all zero) and
    ``sensors`` restricts the DP to a subset of sensors (default all).
    Sensors sharing a PMF are folded in by repeated squaring.
    Returns ``{clipped_vector: probability}`` or, with ``as_array``, the dense
    array over the box.
    """
    theta = tuple(int(t) for t in theta)
    if len(theta) != src.q:
        raise ValueError("theta length must equal q")
    size = _state_size(theta)
    if size > state_cap:
        raise StateSpaceError(f"clipped state space {size} exceeds cap {state_cap}")
    dist = np.zeros(tuple(t + 1 for t in theta))
    start = tuple(initial_counts) if initial_counts is not None else (0,) * src.q
    if any(c < 0 or c > t for c, t in zip(start, theta)) or len(start) != src.q:
        raise ValueError("initial_counts must lie in the clipped box")
    dist[start] = 1.0

    idx = range(src.M) if sensors is None else sensors
    pmfs = src.pmfs[list(idx)] if len(idx) else np.zeros((0, src.q))
    if pmfs.shape[0]:
        uniq, inverse, counts = np.unique(pmfs, axis=0, return_inverse=True, return_counts=True)
        for u, n in zip(uniq, counts):
            if n >= _REPEAT_MIN:
                one = np.zeros_like(dist)
                one[(0,) * src.q] = 1.0
                one = _sensor_step(one, u, theta)
                dist = clipped_convolve(dist, _power(one, int(n), theta), theta)
            else:
                for _ in range(int(n)):
                    dist = _sensor_step(dist, u, theta)
    if as_array:
        return dist
    return {tuple(int(x) for x in k): float(dist[k]) for k in zip(*np.nonzero(dist))}


def _output_pmf(f: TypeThresholdFunction, dist: np.ndarray) -> np.ndarray:
    acc: dict = {}
    for k in zip(*np.nonzero(dist)):
        key = tuple(int(x) for x in k)
        lab = f.reducer[key]
        acc[lab] = acc.get(lab, 0.0) + float(dist[k])
    return np.array(list(acc.values()))


def function_output_distribution(f: TypeThresholdFunction, src: SourceModel) -> dict:
    dist = clipped_type_distribution(src, f.theta, as_array=True)
    acc: dict = {}
    for k in zip(*np.nonzero(dist)):
        lab = f.reducer[tuple(int(x) for x in k)]
        acc[lab] = acc.get(lab, 0.0) + float(dist[k])
    return acc


def function_entropy(
    f: TypeThresholdFunction,
    src: SourceModel,
    given: Iterable[int] | None = None,
    state_cap: int = DEFAULT_STATE_CAP,
) -> float:
    """H(f(S)) or H(f(S) | S_given) in bits.

    f depends on S_given only through the clipped type of S_given, so the
    conditional entropy averages the inner entropy over that clipped type;
    each value seeds ``initial_counts`` of a DP over the remaining sensors.
    """
    if f.q != src.q:
        raise ValueError("function and source alphabets differ")
    given = sorted(set(given or ()))
    if given and (given[0] < 0 or given[-1] >= src.M):
        raise ValueError("conditioning index out of range")
    if not given:
        dist = clipped_type_distribution(src, f.theta, state_cap=state_cap, as_array=True)
        return entropy_bits(_output_pmf(f, dist))
    given_set = set(given)
    rest = [i for i in range(src.M) if i not in given_set]
    outer = clipped_type_distribution(src, f.theta, sensors=given, state_cap=state_cap)
    if not rest:
        return 0.0
    total = 0.0
    for start, w in outer.items():
        inner = clipped_type_distribution(
            src, f.theta, initial_counts=start, sensors=rest, state_cap=state_cap, as_array=True
        )
        total += w * entropy_bits(_output_pmf(f, inner))
    return total


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, indent=2)
