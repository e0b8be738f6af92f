import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttcomp.descriptions import (
    Partition,
    ShiftPolicy,
    a_partition,
    binary_search_max_descriptions,
    chain_law,
    chain_law_from_probs,
    check_lemma_rules,
    lemma_partition,
    n_search_stages,
    closed_form_midpoint,
    sample_descriptions,
    single_group,
)
from ttcomp.model import SourceModel, clipped_type_distribution, standard_function
from ttcomp.oracles import random_partition


def groups_1based(part):
    return [[i + 1 for i in g] for g in part.groups]


# -- partitions ----------------------------------------------------------------


def test_a_partition_examples():
    assert groups_1based(a_partition(5, 2)) == [[1, 2], [3, 4, 5]]
    assert groups_1based(a_partition(4, 4)) == [[1, 2, 3, 4]]
    assert groups_1based(a_partition(4, 1)) == [[1], [2], [3], [4]]
    with pytest.raises(ValueError):
        a_partition(4, 5)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.data())
def test_a_partition_sizes(M, data):
    a = data.draw(st.integers(1, M))
    P = a_partition(M, a)
    J = M // a
    assert P.J == J
    assert P.sizes[:-1] == [a] * (J - 1)
    assert P.sizes[-1] == M - (J - 1) * a


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        Partition(((0,), (2,)))
    with pytest.raises(ValueError):
        Partition(((0,), ()))


def test_partition_json_is_one_based():
    P = a_partition(5, 2)
    assert P.to_json() == [[1, 2], [3, 4, 5]]
    assert Partition.from_json(P.to_json()) == P


def test_lemma_partition_pairs():
    P = lemma_partition(np.full(10, 0.5), 1)
    assert groups_1based(P) == [[1, 2], [3, 4], [5, 6], [7, 8], [9, 10]]
    assert not P.merged_tail


def test_lemma_partition_small_total_is_single_group():
    assert lemma_partition(np.full(6, 0.05), 1) == single_group(6)
    assert lemma_partition(np.full(6, 0.9), 0) == single_group(6)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=60),
    st.integers(0, 6),
)
def test_lemma_partition_rules(p, theta):
    p = np.asarray(p)
    P = lemma_partition(p, theta)
    assert P.M == p.size
    for g in P.groups[:-1]:
        s = p[list(g)].sum()
        assert theta <= s + 1e-12 and s < theta + 1 + 1e-12
        assert p[list(g)[:-1]].sum() < theta
    if not P.merged_tail:
        assert check_lemma_rules(p, theta, P)


def test_lemma_partition_tail_merge_flagged():
    # three intervals reach theta, then a tail of sum 0.9 < theta joins the last
    p = np.array([1.0, 1.0, 0.6, 0.5, 0.9])
    P = lemma_partition(p, 1)
    assert groups_1based(P) == [[1], [2], [3, 4, 5]]
    assert P.merged_tail


# -- chain laws ----------------------------------------------------------------


def test_chain_law_two_coins():
    law = chain_law_from_probs([0.5, 0.5], 1, a_partition(2, 1))
    np.testing.assert_allclose(law.state_pmf(1, 2), [0.5, 0.5])
    np.testing.assert_allclose(law.state_pmf(2, 2), [0.25, 0.75])


def test_zero_threshold_chain_is_point_mass():
    law = chain_law_from_probs([0.3, 0.7, 0.2], 0, a_partition(3, 1))
    for m in range(law.J + 1):
        assert law.state_pmfs[m][0] == 1.0 and law.state_pmfs[m][1:].sum() == 0.0


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 9), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_chain_law_invariants(M, q, seed):
    rng = np.random.default_rng(seed)
    src = SourceModel.random(M, q, rng)
    ell = int(rng.integers(q))
    theta = int(rng.integers(0, M + 2))
    P = random_partition(M, rng)
    d = int(rng.integers(P.J))
    law = chain_law(src, ell, theta, P, d)
    L = M + 1
    sizes = P.rotated(d).sizes
    prev = law.state_pmf(0, L)
    assert prev[0] == 1.0
    for m in range(1, law.J + 1):
        cur = law.state_pmf(m, L)
        assert abs(cur.sum() - 1.0) < 1e-10
        assert cur[sum(sizes[:m]) + 1 :].sum() == 0.0
        # stochastic dominance
        assert np.all(np.cumsum(cur[::-1]) >= np.cumsum(prev[::-1]) - 1e-12)
        prev = cur
    # the final clipped count matches the clipped-type law
    theta_vec = [0] * q
    theta_vec[ell] = theta
    dist = clipped_type_distribution(src, theta_vec, as_array=True)
    marg = dist.sum(axis=tuple(a for a in range(q) if a != ell))
    assert abs(law.state_pmf(law.J, L)[theta:].sum() - marg[theta]) < 1e-10
    # rotation equivalence
    rot = chain_law(src, ell, theta, P.rotated(d), 0)
    for a, b in zip(law.state_pmfs, rot.state_pmfs):
        np.testing.assert_array_equal(a, b)


# -- sampling ------------------------------------------------------------------


def test_constant_sources_clip():
    src = SourceModel.iid(6, [0.0, 0.0, 1.0])
    f = standard_function("heavy_hitters", 3, T=2)
    parts = [a_partition(6, 2)] * 3
    ds = sample_descriptions(src, f, parts, seed=1, k=5)
    # U for symbol 2: 2 after the first group, then frozen
    np.testing.assert_array_equal(ds.chains[2][:, 0], [0, 2, 2, 2])
    assert np.all(ds.clipped[2] == 2)


def test_sampling_is_deterministic(tmp_path):
    src = SourceModel.random(5, 3, np.random.default_rng(0))
    f = standard_function("distinct_count", 3)
    parts = [lemma_partition(src.indicator_probs(l), 1) for l in range(3)]
    a = sample_descriptions(src, f, parts, ShiftPolicy("uniform_random"), seed=9, k=50)
    b = sample_descriptions(src, f, parts, ShiftPolicy("uniform_random"), seed=9, k=50)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    with open(tmp_path / "a.csv") as fh:
        assert next(csv.reader(fh)) == ["symbol_index", "ell", "m", "U_value"]


def test_clipped_output_matches_definition():
    rng = np.random.default_rng(2)
    src = SourceModel.random(7, 4, rng)
    f = standard_function("heavy_hitters", 4, T=2)
    parts = [random_partition(7, rng) for _ in range(4)]
    ds = sample_descriptions(src, f, parts, ShiftPolicy("uniform_random"), seed=3, k=400)
    counts = np.stack([(ds.symbols == l).sum(axis=0) for l in range(4)])
    np.testing.assert_array_equal(ds.clipped, np.minimum(counts, 2))


def test_empirical_state_law_within_bands():
    src = SourceModel.random(8, 3, np.random.default_rng(11))
    f = standard_function("heavy_hitters", 3, T=3)
    parts = [a_partition(8, 2)] * 3
    k = 10**4
    ds = sample_descriptions(src, f, parts, seed=4, k=k)
    for ell in range(3):
        law = chain_law(src, ell, 3, parts[ell])
        for m in range(1, law.J + 1):
            exact = law.state_pmf(m, 9)
            emp = np.bincount(ds.chains[ell][m], minlength=9)[:9] / k
            sigma = np.sqrt(exact * (1 - exact) / k)
            assert np.all(np.abs(emp - exact) <= 3 * sigma + 1e-12), (ell, m)


# -- binary-search maximum -----------------------------------------------------


def test_binary_search_hand_case():
    res = binary_search_max_descriptions([2], 4, [single_group(1)] * 2)
    assert res.thresholds == [2, 3]
    assert res.outcomes == [1, 0]
    assert res.maximum == 2


def test_binary_search_all_zero():
    res = binary_search_max_descriptions([0] * 5, 8, [a_partition(5, 2)] * 3)
    assert res.outcomes == [0, 0, 0] and res.maximum == 0


@pytest.mark.parametrize("q", [4, 8, 16])
def test_binary_search_matches_max(q):
    rng = np.random.default_rng(q)
    n = n_search_stages(q)
    for _ in range(2000):
        M = int(rng.integers(1, 33))
        s = rng.integers(0, q, size=M)
        parts = [random_partition(M, rng) for _ in range(n)]
        assert binary_search_max_descriptions(s, q, parts).maximum == s.max()


@pytest.mark.parametrize("q", [2, 4, 8, 16, 32])
def test_midpoints_agree_for_powers_of_two(q):
    for outcomes in itertools.product([False, True], repeat=n_search_stages(q) - 1):
        lo, hi = 0, q - 1
        for j, o in enumerate(outcomes):
            D = (lo + hi + 1) // 2
            assert D == closed_form_midpoint(q, outcomes[:j])
            lo, hi = (D, hi) if o else (lo, D - 1)


def test_stage_count():
    assert [n_search_stages(q) for q in (2, 3, 4, 5, 16, 17)] == [1, 2, 2, 3, 4, 5]
