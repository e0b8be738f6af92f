import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttcomp.descriptions import a_partition, chain_law, chain_law_from_probs, lemma_partition, single_group
from ttcomp.entropy import (
    bernoulli_sum_entropy_bound,
    binary_max_entropy_closed_form,
    chain_entropy,
    description_entropy_budget,
    lemma_bound,
    shift_sweep,
)
from ttcomp.model import SourceModel, standard_function
from ttcomp.oracles import enumerate_chain_entropy, random_partition
from ttcomp.pmf import binomial_entropy, entropy_bits, h2, poisson_binomial_pmf


def test_two_coin_chain():
    br = chain_entropy(chain_law_from_probs([0.5, 0.5], 1, a_partition(2, 1)))
    assert br.per_step == pytest.approx((1.0, 0.5), abs=1e-15)
    assert br.total == pytest.approx(1.5, abs=1e-15)
    assert br.bound == 14.5


def test_zero_threshold_chain_has_no_entropy():
    assert chain_entropy(chain_law_from_probs([0.4, 0.6, 0.5], 0, a_partition(3, 1))).total == 0.0


def test_lemma_bound_values():
    assert lemma_bound(1) == 14.5
    assert lemma_bound(0) == 12.0
    assert lemma_bound(3) == 17.0


def test_bernoulli_sum_bound_values():
    assert bernoulli_sum_entropy_bound([0.5, 0.5]) == pytest.approx(0.5 * math.log2(2 * math.pi * math.e * 13 / 12))
    assert bernoulli_sum_entropy_bound([0.5, 0.5]) == pytest.approx(2.1048, abs=1e-4)
    assert bernoulli_sum_entropy_bound([]) == pytest.approx(0.5 * math.log2(2 * math.pi * math.e / 12))


def test_bernoulli_sum_bound_holds():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(0, 60))
        p = rng.random(n) ** rng.uniform(0.2, 5.0)
        assert entropy_bits(poisson_binomial_pmf(p)) <= bernoulli_sum_entropy_bound(p)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_chain_entropy_equals_enumeration(M, q, seed):
    rng = np.random.default_rng(seed)
    src = SourceModel.random(M, q, rng)
    ell = int(rng.integers(q))
    theta = int(rng.integers(0, M + 2))
    P = random_partition(M, rng)
    d = int(rng.integers(P.J))
    br = chain_entropy(chain_law(src, ell, theta, P, d))
    assert br.total == pytest.approx(enumerate_chain_entropy(src, ell, theta, P, d), abs=1e-9)
    assert br.total == pytest.approx(math.fsum(br.per_step), abs=1e-10)
    assert min(br.per_step) >= 0.0
    # each step is bounded by the entropy bound of its group sum
    order = P.rotated(d)
    p = src.indicator_probs(ell)
    for step, g in zip(br.per_step, order.groups):
        assert step <= bernoulli_sum_entropy_bound(p[list(g)])


# -- closed form for the binary maximum ----------------------------------------


def test_closed_form_two_coins():
    assert binary_max_entropy_closed_form(2, 0.5, 1) == pytest.approx(1.5, abs=1e-15)


def test_closed_form_single_group_is_binomial_entropy():
    for M, b in [(10, 0.3), (300, 0.01), (5000, 0.2)]:
        assert binary_max_entropy_closed_form(M, b, M) == pytest.approx(binomial_entropy(M, b)[0], abs=1e-12)


def test_one_at_a_time_limit():
    assert binary_max_entropy_closed_form(64, 0.5, 1) == pytest.approx(h2(0.5) / 0.5, abs=1e-6)


@pytest.mark.parametrize("M", [7, 12, 30, 77])
def test_literal_form_disagrees_with_dp_when_groups_are_large(M):
    b, a = 0.2, 3
    dp = chain_entropy(chain_law(SourceModel.bernoulli(M, b), 1, 1, a_partition(M, a))).total
    assert binary_max_entropy_closed_form(M, b, a) == pytest.approx(dp, abs=1e-12)
    assert abs(binary_max_entropy_closed_form(M, b, a, form="literal") - dp) > 1e-6


def test_forms_agree_for_unit_groups():
    for M in (4, 9, 40):
        assert binary_max_entropy_closed_form(M, 0.3, 1) == pytest.approx(
            binary_max_entropy_closed_form(M, 0.3, 1, form="literal"), abs=1e-15
        )


def test_one_partition_diverges_for_sparse_sources():
    for M in (4, 16, 64, 256, 1024):
        val = chain_entropy(chain_law(SourceModel.bernoulli(M, 1 / M), 1, 1, a_partition(M, 1))).total
        assert val >= 0.5 * math.log2(M)


# -- shift sweep ---------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 40), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_sweep_matches_per_shift_chains(M, theta, seed):
    rng = np.random.default_rng(seed)
    p = rng.random(M) ** 2
    P = random_partition(M, rng)
    sw = shift_sweep(p, theta, P, tol=0.0, keep_steps=True)
    per_group = np.zeros(P.J)
    for d in range(P.J):
        br = chain_entropy(chain_law_from_probs(p, theta, P, d))
        assert sw.totals[d] == pytest.approx(br.total, abs=1e-10)
        np.testing.assert_allclose(sw.per_step[d], br.per_step, atol=1e-10)
        for pos, step in enumerate(br.per_step):
            per_group[(d + pos) % P.J] += step
    np.testing.assert_allclose(sw.per_group, per_group, atol=1e-9)


def test_sweep_truncation_is_bounded():
    p = np.full(20000, 0.5)
    P = lemma_partition(p, 2)
    fast = shift_sweep(p, 2, P, shifts=[0, 7])
    exact = [chain_entropy(chain_law_from_probs(p, 2, P, d)).total for d in (0, 7)]
    assert fast.truncation < 1e-12
    np.testing.assert_allclose(fast.totals, exact, atol=fast.truncation + 1e-12)


# -- budget --------------------------------------------------------------------


def test_budget_constant_binary_max():
    f = standard_function("maximum", 2)
    total, const = description_entropy_budget(f, SourceModel.bernoulli(50, 0.1))
    assert const == 26.5
    assert 0 < total < const


def test_budget_zero_thresholds():
    f = standard_function("frequency_indicator", 3, ell=1)
    src = SourceModel.random(5, 3, np.random.default_rng(0))
    total, _ = description_entropy_budget(f, src, [single_group(5)] * 3)
    assert total == pytest.approx(chain_entropy(chain_law(src, 1, 1, single_group(5))).total)
    g = standard_function("maximum", 2)
    assert description_entropy_budget(g, SourceModel.bernoulli(4, 0.0), [single_group(4)] * 2)[0] == 0.0


def test_budget_below_constant_random_models():
    rng = np.random.default_rng(21)
    kinds = ["maximum", "distinct_count", "heavy_hitters"]
    for i in range(200):
        q = int(rng.integers(2, 5))
        M = int(10 ** rng.uniform(0, 4))
        src = SourceModel(q, rng.dirichlet(np.full(q, 10 ** rng.uniform(-1, 1)), size=M))
        kind = kinds[i % 3]
        f = standard_function(kind, q, T=int(rng.integers(1, 5))) if kind == "heavy_hitters" else standard_function(kind, q)
        total, const = description_entropy_budget(f, src)
        assert total <= const
