"""Achievable computation rates and upper bounds, in bits per channel use.

Every function returns a :class:`RateReport`. Achievable rates from the
round-robin baseline are for the step rates the caller supplies; no
optimisation over interactive descriptions is attempted here.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .descriptions import Partition, ShiftPolicy, chain_law, lemma_partition
from .entropy import chain_entropy, lemma_bound, shift_sweep
from .model import SourceModel, TypeThresholdFunction, function_entropy
from .pmf import h2, log2_plus

ENTROPY_FLOOR = 1e-15  # steps below this many bits are treated as deterministic
BUDGET_SLACK = 1e-9


@dataclass
class RateReport:
    scheme: str
    rate: float
    kind: str  # "achievable" or "upper_bound"
    params: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("achievable", "upper_bound"):
            raise ValueError(f"unknown report kind {self.kind!r}")
        if not self.rate >= 0:
            raise ValueError(f"rate must be non-negative, got {self.rate}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rate_bits_per_channel_use"] = d.pop("rate")
        return _plain(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def description_constant(theta: Sequence[int]) -> float:
    """12 q + (5/2) sum_l log2(1 + theta_l)."""
    return 12.0 * len(theta) + 2.5 * sum(math.log2(1 + t) for t in theta)


def default_partitions(f: TypeThresholdFunction, src: SourceModel) -> list[Partition]:
    """One interval partition per symbol, built from P(S_i = l) and theta_l."""
    return [lemma_partition(src.indicator_probs(l), t) for l, t in enumerate(f.theta)]


def cf_rate(group_size: int, P: float) -> float:
    """(1/2) log2+(1/|A| + P): sum-decoding rate for a group of transmitters."""
    if group_size < 1:
        raise ValueError("group size must be at least 1")
    if P < 0:
        raise ValueError("power must be non-negative")
    return 0.5 * log2_plus(1.0 / group_size + P)


# -- linear finite field network ----------------------------------------------


def mrgb_rate_finite_field(
    f: TypeThresholdFunction,
    src: SourceModel,
    partitions: Sequence[Partition] | None,
    capacity: float,
    field_order: int | None = None,
) -> RateReport:
    """capacity / sum_l H(U^(l)_[1:J_l]).

    The denominator upper-bounds the joint entropy of all descriptions, so the
    returned value is achievable. Sum decoding needs every group smaller than
    the field order; that requirement is recorded, and checked if
    ``field_order`` is given.
    """
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    parts = list(partitions) if partitions is not None else default_partitions(f, src)
    chains = []
    for ell, (t, P) in enumerate(zip(f.theta, parts)):
        if t == 0:
            chains.append(0.0)
            continue
        chains.append(float(shift_sweep(src.indicator_probs(ell), t, P, shifts=[0]).totals[0]))
    denom = math.fsum(chains)
    largest = max(max(P.sizes) for P in parts)
    notes = [f"assumes every group is smaller than the field order (largest group {largest})"]
    if field_order is not None and largest >= field_order:
        raise ValueError(f"group of size {largest} not below field order {field_order}")
    rate = capacity / denom if denom > 0 else (0.0 if capacity == 0 else math.inf)
    return RateReport(
        "mrgb_finite_field",
        rate,
        "achievable",
        {
            "M": src.M,
            "q": f.q,
            "theta": list(f.theta),
            "capacity": capacity,
            "partitions": [P.describe() for P in parts],
            "chain_entropies": chains,
            "description_entropy": denom,
        },
        notes,
    )


# -- Gaussian network ---------------------------------------------------------


@dataclass
class Allocation:
    """Time fractions alpha[l][m] and powers power[l][m] per transmission step."""

    alpha: list[np.ndarray]
    power: list[np.ndarray]

    def audit(self, parts: Sequence[Partition], P: float) -> np.ndarray:
        """Per-sensor average power; raises if any budget is exceeded."""
        total_time = math.fsum(float(a.sum()) for a in self.alpha)
        if total_time > 1.0 + BUDGET_SLACK:
            raise ValueError(f"time fractions sum to {total_time} > 1")
        for a, pw in zip(self.alpha, self.power):
            if np.any(a < 0) or np.any(pw < 0):
                raise ValueError("time fractions and powers must be non-negative")
        M = parts[0].M
        used = np.zeros(M)
        for a, pw, Pt in zip(self.alpha, self.power, parts):
            if a.size != Pt.J or pw.size != Pt.J:
                raise ValueError("allocation shape does not match partition")
            for g, grp in enumerate(Pt.groups):
                used[list(grp)] += a[g] * pw[g]
        worst = int(np.argmax(used))
        if used[worst] > P * (1.0 + BUDGET_SLACK) + BUDGET_SLACK:
            raise ValueError(f"sensor {worst} exceeds its power budget: {used[worst]} > {P}")
        return used


def equal_split_allocation(
    f: TypeThresholdFunction,
    parts: Sequence[Partition],
    P: float,
    beta: float = 1.0,
    weights: str | Sequence[float] = "active",
) -> Allocation:
    """alpha_m^(l) = beta * alpha_l / J_l and P_m^(l) = J_l P / beta.

    ``weights`` picks alpha_l: ``"active"`` splits time evenly over symbols
    with theta_l > 0, ``"lemma"`` uses (2.5 log2(1+theta_l) + 12) / const,
    or pass explicit values.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    if isinstance(weights, str):
        if weights == "active":
            act = [1.0 if t > 0 else 0.0 for t in f.theta]
            s = sum(act) or 1.0
            w = [a / s for a in act]
        elif weights == "lemma":
            c = description_constant(f.theta)
            w = [lemma_bound(t) / c for t in f.theta]
        else:
            raise ValueError(f"unknown weighting {weights!r}")
    else:
        w = [float(x) for x in weights]
    alpha, power = [], []
    for wl, Pt in zip(w, parts):
        alpha.append(np.full(Pt.J, beta * wl / Pt.J))
        power.append(np.full(Pt.J, Pt.J * P / beta if wl > 0 else 0.0))
    return Allocation(alpha, power)


def step_denominators(
    p: np.ndarray, theta: int, part: Partition, policy: ShiftPolicy
) -> np.ndarray:
    """Entropy charged to each group's transmission, indexed by group.

    Uniform random offsets average the step entropy of a group over all J
    offsets; a fixed offset d charges the step at which the group transmits.
    """
    if theta == 0:
        return np.zeros(part.J)
    if policy.mode == "uniform_random":
        sw = shift_sweep(p, theta, part)
        return sw.per_group / part.J
    d = policy.d % part.J if policy.mode == "fixed" else 0
    sw = shift_sweep(p, theta, part, shifts=[d], keep_steps=True)
    steps = sw.per_step[0]
    return np.array([steps[(g - d) % part.J] for g in range(part.J)])


def mrgb_rate_gaussian(
    f: TypeThresholdFunction,
    src: SourceModel,
    partitions: Sequence[Partition] | None,
    P: float,
    allocation: Allocation | None = None,
    policy: ShiftPolicy = ShiftPolicy("uniform_random"),
) -> RateReport:
    """min over steps of (alpha/2) log2+(1/|A| + P_step) / D_step.

    D_step bounds the conditional entropy of the step given all earlier
    descriptions by its entropy given only the previous state of its own
    chain. Steps with zero entropy need no channel time and are skipped.
    """
    if P < 0:
        raise ValueError("power must be non-negative")
    parts = list(partitions) if partitions is not None else default_partitions(f, src)
    if len(parts) != f.q:
        raise ValueError("need one partition per symbol")
    alloc = allocation or equal_split_allocation(f, parts, P)
    alloc.audit(parts, P)
    rate, arg = math.inf, None
    denoms = []
    for ell, (t, Pt) in enumerate(zip(f.theta, parts)):
        D = step_denominators(src.indicator_probs(ell), t, Pt, policy)
        denoms.append(D)
        for g in range(Pt.J):
            if D[g] <= ENTROPY_FLOOR:
                continue
            num = 0.5 * alloc.alpha[ell][g] * log2_plus(1.0 / len(Pt.groups[g]) + alloc.power[ell][g])
            r = num / D[g]
            if r < rate:
                rate, arg = float(r), (ell, g)
    notes = []
    if arg is None:
        notes.append("every description step is deterministic")
    return RateReport(
        "mrgb_gaussian",
        rate,
        "achievable",
        {
            "M": src.M,
            "q": f.q,
            "P": P,
            "theta": list(f.theta),
            "partitions": [Pt.describe() for Pt in parts],
            "shift_policy": policy.mode if policy.mode != "fixed" else f"fixed({policy.d})",
            "binding_step": arg,
            "sum_denominators": [float(D.sum()) for D in denoms],
        },
        notes,
    )


def lemma_J_min(f: TypeThresholdFunction, src: SourceModel) -> int:
    return min(P.J for P in default_partitions(f, src))


def corollary_objective(beta: float, M: int, J_min: int, P: float, const: float) -> float:
    return 0.5 * beta * log2_plus(1.0 / M + J_min * P / beta) / const


def mrgb_rate_gaussian_corollary(
    f: TypeThresholdFunction, src: SourceModel, P: float, J_min: int | None = None
) -> RateReport:
    """max over beta in (0, 1] of (beta/2) log2+(1/M + J_min P / beta) / const.

    The objective is concave in beta wherever it is positive, so a bounded
    scalar search finds the maximiser; the endpoint beta = 1 is compared too.
    """
    J_min = lemma_J_min(f, src) if J_min is None else int(J_min)
    if J_min < 1:
        raise ValueError("J_min must be at least 1")
    const = description_constant(f.theta)
    M = src.M
    if P == 0:
        beta, val = 1.0, corollary_objective(1.0, M, J_min, P, const)
    else:
        obj = lambda b: corollary_objective(b, M, J_min, P, const)  # noqa: E731
        # log2+ is zero once beta >= J_min P / (1 - 1/M); search where it is positive
        top = 1.0 if M == 1 else min(1.0, J_min * P / (1.0 - 1.0 / M))
        res = minimize_scalar(lambda b: -obj(b), bounds=(1e-12 * top, top), method="bounded", options={"xatol": 1e-10 * top})
        beta, val = max((float(res.x), obj(float(res.x))), (top, obj(top)), key=lambda t: t[1])
    return RateReport(
        "mrgb_gaussian_corollary",
        val,
        "achievable",
        {"M": M, "q": f.q, "P": P, "J_min": J_min, "beta": beta, "denominator": const},
    )


# -- round-robin baseline -----------------------------------------------------


def irr_rate_gaussian(
    step_rates: Sequence[float],
    schedule: Sequence[int],
    alpha: Sequence[float],
    powers: Sequence[float],
    P: float,
) -> RateReport:
    """min over rounds of (alpha_l / 2) log2(1 + P_l) / r_l.

    ``schedule[l]`` is the (0-based) sensor active in round l. Rounds with
    r_l = 0 carry nothing and are excluded.
    """
    r = np.asarray(step_rates, dtype=float)
    a = np.asarray(alpha, dtype=float)
    pw = np.asarray(powers, dtype=float)
    kappa = np.asarray(schedule, dtype=np.int64)
    if not (r.size == a.size == pw.size == kappa.size):
        raise ValueError("step rates, schedule, alpha and powers must have equal length")
    if np.any(r < 0) or np.any(a < 0) or np.any(pw < 0):
        raise ValueError("negative rate, time fraction or power")
    if abs(a.sum() - 1.0) > BUDGET_SLACK:
        raise ValueError(f"time fractions must sum to 1, got {a.sum()}")
    for sensor in np.unique(kappa):
        used = float((a * pw)[kappa == sensor].sum())
        if used > P * (1.0 + BUDGET_SLACK) + BUDGET_SLACK:
            raise ValueError(f"sensor {sensor} exceeds its power budget: {used} > {P}")
    live = r > 0
    if not np.any(live):
        rate = math.inf
    else:
        rate = float(np.min(0.5 * a[live] * np.log2(1.0 + pw[live]) / r[live]))
    return RateReport(
        "irr_gaussian",
        rate,
        "achievable",
        {"rounds": int(r.size), "P": P, "sum_rate": float(r.sum())},
        ["for the supplied description scheme, not the optimal interactive code"],
    )


def irr_rate_no_power_control(step_rates: Sequence[float], P: float) -> RateReport:
    """(1/2) log2(1 + P) / sum_l r_l, i.e. P_l = P and alpha_l proportional to r_l."""
    total = math.fsum(step_rates)
    rate = 0.5 * math.log2(1.0 + P) / total if total > 0 else math.inf
    return RateReport(
        "irr_gaussian_no_power_control",
        rate,
        "achievable",
        {"P": P, "sum_rate": total},
        ["for the supplied description scheme, not the optimal interactive code"],
    )


def irr_upper_bound(I_total: float, M: int, P: float) -> RateReport:
    """(1/2) log2(1 + M P) / I_total for any round-robin scheme."""
    if I_total <= 0:
        raise ValueError("sum-rate I_total must be positive")
    return RateReport(
        "irr_upper_bound",
        0.5 * math.log2(1.0 + M * P) / I_total,
        "upper_bound",
        {"M": M, "P": P, "I_total": I_total},
    )


def binary_max_irr_denominator(M: int, alpha: float) -> float:
    """Lower bound on the interactive sum-rate for the binary maximum of i.i.d. Bernoulli(alpha).

    M h2(a) - (M-1)(1-(1-a)^M) h2((M a / (1-(1-a)^M) - 1) / (M-1))
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    busy = -math.expm1(M * math.log1p(-alpha))  # 1 - (1-alpha)^M
    inner = (M * alpha / busy - 1.0) / (M - 1)
    if inner < -1e-12 or inner > 1.0 + 1e-12:
        raise ArithmeticError(f"inner binary-entropy argument {inner} outside [0, 1]")
    inner = min(max(inner, 0.0), 1.0)
    return M * h2(alpha) - (M - 1) * busy * h2(inner)


# -- cut-set bounds -----------------------------------------------------------


def conditional_covariance(K: np.ndarray, omega: Sequence[int]) -> np.ndarray:
    """Covariance of X_omega given the remaining coordinates (Schur complement)."""
    K = np.asarray(K, dtype=float)
    idx = np.asarray(sorted(omega), dtype=np.int64)
    rest = np.setdiff1d(np.arange(K.shape[0]), idx)
    A = K[np.ix_(idx, idx)]
    if rest.size == 0:
        return A
    B = K[np.ix_(idx, rest)]
    C = K[np.ix_(rest, rest)]
    if np.linalg.cond(C) > 1e12:
        raise np.linalg.LinAlgError("conditioning block is singular")
    return A - B @ np.linalg.solve(C, B.T)


def symmetric_covariance(M: int, P: float, rho: float) -> np.ndarray:
    return P * ((1.0 - rho) * np.eye(M) + rho * np.ones((M, M)))


def symmetric_conditional_sum(M: int, n: int, P: float, rho: float) -> float:
    """Sum of entries of K_{X_omega | X_rest} for K = P((1-rho) I + rho 11^T), |omega| = n."""
    c = M - n
    if c == 0:
        return P * (n * (1.0 - rho) + n * n * rho)
    denom = 1.0 - rho + c * rho
    if denom <= 0 or rho >= 1.0:
        raise ZeroDivisionError("conditioning block is singular")
    return P * (n * (1.0 - rho) + n * n * (rho - rho * rho * c / denom))


def default_cuts(M: int, family: str = "default") -> list[tuple[int, ...]]:
    if family == "default":
        cuts = [(i,) for i in range(M)]
        if M > 1:
            cuts.append(tuple(range(M)))
        return cuts
    if family == "all":
        if M > 16:
            raise ValueError("full cut enumeration is limited to M <= 16")
        return [c for n in range(1, M + 1) for c in itertools.combinations(range(M), n)]
    if family == "full":
        return [tuple(range(M))]
    raise ValueError(f"unknown cut family {family!r}")


def _cut_entropy(f, src, cut, cache):
    """H(f(S) | S_rest) with a cache keyed on the law of singleton cuts."""
    if len(cut) == 1:
        key = ("single", src.pmfs[cut[0]].tobytes())
        if key not in cache:
            cache[key] = function_entropy(f, src, given=[i for i in range(src.M) if i != cut[0]])
        return cache[key]
    rest = sorted(set(range(src.M)) - set(cut))
    return function_entropy(f, src, given=rest)


def _best_conditional_sum(M: int, n: int, P: float, grid: np.ndarray) -> float:
    """Largest 1^T K_cut|rest 1 over the candidate inputs for a cut of size n."""
    rho = grid[grid < 1.0]
    c = M - n
    vals = P * (n * (1.0 - rho) + n * n * (rho - rho * rho * c / (1.0 - rho + c * rho)))
    # fully correlated inside the cut, independent of the rest: n^2 P
    return float(max(vals.max(initial=0.0), n * n * P))


def cutset_bound_gaussian(
    f: TypeThresholdFunction,
    src: SourceModel,
    P: float,
    rho_grid: Sequence[float] | None = None,
    cuts: str | Sequence[Sequence[int]] = "default",
) -> RateReport:
    """min over cuts of max over K of (1/2) log2(1 + (M+1-|cut|) 1^T K_cut|rest 1) / H(f | S_rest).

    K ranges over the equicorrelated family P((1-rho) I + rho 11^T) on
    ``rho_grid`` plus, for each cut, the input that is fully correlated inside
    the cut and independent of the rest. The latter attains 1^T K 1 = |cut|^2 P,
    the largest value any admissible K can give, so the result is a valid
    upper bound for every cut family. Singleton cuts whose sensors share a
    PMF give the same value and are evaluated once.
    """
    M = src.M
    grid = np.linspace(0.0, 0.99, 100) if rho_grid is None else np.asarray(rho_grid, dtype=float)
    if isinstance(cuts, str):
        family = cuts
        if family == "default":
            _, first = np.unique(src.pmfs, axis=0, return_index=True)
            cut_list = [(int(i),) for i in sorted(first)]
            if M > 1:
                cut_list.append(tuple(range(M)))
        else:
            cut_list = default_cuts(M, family)
    else:
        family = "custom"
        cut_list = [tuple(c) for c in cuts]
    cache: dict = {}
    numerators: dict[int, float] = {}
    per_cut, notes = [], []
    best, arg = math.inf, None
    for cut in cut_list:
        n = len(cut)
        if n not in numerators:
            numerators[n] = 0.5 * math.log2(1.0 + (M + 1 - n) * _best_conditional_sum(M, n, P, grid))
        num = numerators[n]
        H = _cut_entropy(f, src, cut, cache)
        val = num / H if H > 0.0 else math.inf
        if len(per_cut) < 64:
            per_cut.append({"cut_size": n, "numerator": num, "entropy": H, "bound": val})
        if val < best:
            best, arg = val, cut
    if any(c["entropy"] <= 0.0 for c in per_cut):
        notes.append("cuts with H(f | S_rest) = 0 give no constraint")
    return RateReport(
        "cutset_gaussian",
        best,
        "upper_bound",
        {
            "M": M,
            "P": P,
            "cut_family": family,
            "cuts_evaluated": len(cut_list),
            "binding_cut_size": None if arg is None else len(arg),
            "per_cut": per_cut,
        },
        notes,
    )


def cutset_bound_finite_field(
    f: TypeThresholdFunction,
    src: SourceModel,
    capacity_by_cut: Mapping[Sequence[int], float],
    cuts: Sequence[Sequence[int]] | None = None,
) -> RateReport:
    """min over cuts of I(W; Y_0, Y_rest) / H(f | S_rest), numerators supplied per cut."""
    table = {tuple(sorted(k)): float(v) for k, v in capacity_by_cut.items()}
    cut_list = [tuple(sorted(c)) for c in cuts] if cuts is not None else list(table)
    cache: dict = {}
    best, arg = math.inf, None
    for cut in cut_list:
        if cut not in table:
            raise ValueError(f"no channel value supplied for cut {cut}")
        H = _cut_entropy(f, src, cut, cache)
        if H <= 0.0:
            continue
        val = table[cut] / H
        if val < best:
            best, arg = val, cut
    return RateReport(
        "cutset_finite_field",
        best,
        "upper_bound",
        {"M": src.M, "cuts": len(cut_list), "binding_cut": arg},
    )


def exact_mrgb_denominator(src: SourceModel, ell: int, theta: int, part: Partition) -> float:
    """H(U^(l)_[1:J]) from the full chain law (no early stopping)."""
    return chain_entropy(chain_law(src, ell, theta, part)).total
