import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import BruteGibbs, restricted_gap
from orthospin import correlations as co
from orthospin import gibbs_exact as ge
from orthospin import interactions as ia
from orthospin.correlations import FatDiagonalSpec
from orthospin.errors import CapacityError
from orthospin.gibbs_exact import GibbsContext


def sine(n, beta):
    return GibbsContext(ia.build_sine(n), beta)


def cw(n, beta):
    return GibbsContext(ia.build_curie_weiss(n), beta)


# --- fat diagonal --------------------------------------------------------------

@pytest.mark.parametrize("n", range(1, 11))
def test_d4_complement_size_by_counting(n):
    spec = FatDiagonalSpec(4, n)
    count = sum(1 for t in itertools.product(range(n), repeat=4) if not spec.contains(t))
    assert count == n * (n - 1) * (n - 2) * (n - 3) == spec.complement_size()
    assert int(spec.complement_mask().sum()) == count


@given(st.lists(st.integers(0, 5), min_size=3, max_size=3))
def test_fat_diagonal_membership(t):
    assert FatDiagonalSpec(3, 6).contains(t) == (len(set(t)) < 3)


def test_fat_diagonal_validation():
    with pytest.raises(ValueError):
        FatDiagonalSpec(1, 4)
    with pytest.raises(ValueError):
        FatDiagonalSpec(2, 4).contains((1, 2, 3))


# --- higher moments ------------------------------------------------------------

@pytest.fixture(scope="module")
def acc6():
    return co.accumulate_higher_moments(sine(6, 0.9), 6)


def test_tensors_match_brute_force(acc6):
    b = BruteGibbs(ia.build_sine(6).entries, 0.9, keep_diagonal=True)
    rng = np.random.default_rng(0)
    for _ in range(30):
        idx4 = tuple(rng.integers(0, 6, 4))
        idx6 = tuple(rng.integers(0, 6, 6))
        assert abs(acc6.four[idx4] - b.spin_product(idx4)) <= 1e-12
        assert abs(acc6.six[idx6] - b.spin_product(idx6)) <= 1e-12
        assert abs(acc6.expectation(idx6) - b.spin_product(idx6)) <= 1e-12


def test_tensor_invariants(acc6):
    four = acc6.four
    assert np.all(np.abs(four) <= 1 + 1e-12)
    for perm in itertools.permutations(range(4)):
        np.testing.assert_allclose(np.transpose(four, perm), four, atol=1e-13)
    for i, l, m in itertools.product(range(6), repeat=3):
        assert abs(four[i, i, l, m] - acc6.two[l, m]) <= 1e-12


def test_odd_products_vanish(acc6):
    assert acc6.expectation((0, 1, 2)) == 0.0
    assert acc6.expectation((3,)) == 0.0
    assert acc6.expectation((2, 2)) == 1.0


def test_fully_distinct_four_point_vanishes_at_beta_zero():
    acc = co.accumulate_higher_moments(sine(7, 0.0), 4)
    mask = FatDiagonalSpec(4, 7).complement_mask()
    assert np.max(np.abs(acc.four[mask])) <= 1e-14


def test_cw_four_point_dominates_square():
    acc = co.accumulate_higher_moments(cw(8, 0.5), 4)
    assert acc.four[0, 1, 2, 3] >= acc.two[0, 1] ** 2


def test_higher_moment_caps():
    with pytest.raises(CapacityError):
        co.accumulate_higher_moments(sine(13, 0.1), 4)
    with pytest.raises(CapacityError):
        co.accumulate_higher_moments(sine(9, 0.1), 6)
    acc = co.accumulate_higher_moments(sine(5, 0.1), 4)
    with pytest.raises(CapacityError):
        acc.expectation(tuple(range(6)))


def test_cw_closed_loop_four_point():
    # permutation symmetry makes the average over i<j<l<k equal <s1 s2 s3 s4>
    n = 16
    four = co.cw_correlation(n, 0.5, 4)
    two = co.cw_correlation(n, 0.5, 2)
    assert abs(four - two ** 2) <= 10 / n


def test_cw_correlation_matches_enumeration():
    n, beta = 8, 1.3
    acc = co.accumulate_higher_moments(cw(n, beta), 6)
    assert math.isclose(co.cw_correlation(n, beta, 2), acc.two[0, 1], rel_tol=1e-12)
    assert math.isclose(co.cw_correlation(n, beta, 4), acc.four[0, 1, 2, 3], rel_tol=1e-12)
    assert math.isclose(co.cw_correlation(n, beta, 6), acc.six[0, 1, 2, 3, 4, 5], rel_tol=1e-11)
    assert co.cw_correlation(n, beta, 3) == pytest.approx(0.0, abs=1e-15)


# --- factorization gap ---------------------------------------------------------

@pytest.mark.parametrize("n,beta", [(5, 0.5), (6, 1.2)])
def test_oracle_gap_matches_loops(n, beta):
    b = BruteGibbs(ia.build_sine(n).entries, beta, keep_diagonal=True)
    ref = restricted_gap(ia.build_sine(n).entries, b)
    assert abs(co.factorization_gap(sine(n, beta), "oracle") - ref) <= 1e-13


@pytest.mark.parametrize("n", [5, 8, 12])
@pytest.mark.parametrize("beta", [0.2, 0.5, 0.8, 1.5])
def test_oracle_and_contraction_agree(n, beta):
    ctx = sine(n, beta)
    a = co.factorization_gap(ctx, "oracle")
    b = co.factorization_gap(ctx, "contraction")
    assert abs(a - b) <= 1e-9


@pytest.mark.parametrize("J", [ia.build_curie_weiss(9),
                               ia.build_random_orthogonal(8, [1] * 8, 3),
                               ia.build_random_orthogonal(7, ia.alternating_signs(7), 4)],
                         ids=["cw", "orth-plus", "orth-alt"])
def test_contraction_on_other_models(J):
    ctx = GibbsContext(J, 0.7)
    assert abs(co.factorization_gap(ctx, "oracle") - co.factorization_gap(ctx, "contraction")) <= 1e-9


def test_contraction_ignores_shift():
    J = ia.build_sine(8)
    a = co.factorization_gap(GibbsContext(J, 0.6), "contraction")
    b = co.factorization_gap(GibbsContext(J, 0.6, shifted=True), "contraction")
    assert abs(a - b) <= 1e-12


def test_gap_vanishes_at_beta_zero():
    assert co.factorization_gap(sine(8, 0.0), "oracle") <= 1e-14
    assert co.factorization_gap(sine(8, 0.0), "contraction") <= 1e-12


def test_sine_gap_decays():
    from orthospin.analytics import fit_decay
    pts = [(n, co.factorization_gap(sine(n, 0.5))) for n in range(7, 22, 2)]
    assert -1.6 <= fit_decay(pts).slope <= -0.6


def test_cw_gap_slope_band():
    # fails: the Curie-Weiss gap barely decays for n <= 20 (slope about -0.04)
    from orthospin.analytics import fit_decay
    pts = [(n, co.factorization_gap(cw(n, 0.5))) for n in range(8, 21, 2)]
    assert -1.8 <= fit_decay(pts).slope <= -0.6


# --- lemma terms -----------------------------------------------------------------

def test_lemma_terms_by_loops():
    n, beta = 7, 0.8
    J = ia.build_sine(n).entries
    b = BruteGibbs(J, beta, keep_diagonal=True)
    C = np.array([[b.spin_product((i, j)) for j in range(n)] for i in range(n)])
    tr = abs(sum(J[i, i] * J[l, m] * C[l, m]
                 for i in range(n) for l in range(n) for m in range(n))) / n ** 2
    rs = sum(J[i, j] * J[j, m] * C[i, m]
             for i in range(n) for j in range(n) for m in range(n)) / n ** 2
    assert math.isclose(co.lemma_trace_term(sine(n, beta)), tr, rel_tol=1e-12)
    assert math.isclose(co.lemma_resolvent_term(sine(n, beta)), rs, rel_tol=1e-12)


@pytest.mark.parametrize("n,beta", [(10, 1.3), (5, 0.0)])
def test_resolvent_is_one_over_n_sine(n, beta):
    assert abs(co.lemma_resolvent_term(sine(n, beta)) - 1 / n) <= 1e-10


def test_resolvent_random_orthogonal():
    J = ia.build_random_orthogonal(8, [1, 1, -1, 1, -1, -1, 1, 1], 21)
    vals = [co.lemma_resolvent_term(GibbsContext(J, b)) for b in np.linspace(0, 2, 9)]
    assert abs(vals[0] - 0.125) <= 1e-10
    assert max(abs(v - 0.125) for v in vals) <= 1e-10
    assert max(vals) - min(vals) <= 1e-10


def test_trace_term_infinite_temperature():
    for n in (5, 6, 9):
        tr = np.trace(ia.build_sine(n).entries)
        assert abs(co.lemma_trace_term(sine(n, 0.0)) - tr * tr / n ** 2) <= 1e-14
    assert abs(co.lemma_trace_term(sine(9, 0.0)) - 1 / 81) <= 1e-14


@pytest.mark.parametrize("n,beta", [(9, 0.7), (8, 0.5)])
def test_trace_term_stated_examples(n, beta):
    # fails at odd n: the term equals 2|<h>|/n, here 0.0625 > 1/18
    assert co.lemma_trace_term(sine(n, beta)) <= 1 / (2 * n)


@pytest.mark.parametrize("n", [5, 7, 9, 11])
@pytest.mark.parametrize("beta", [0.5, 1.3])
def test_trace_term_corrected_bound(n, beta):
    # sum_lm J_lm <s_l s_m> = -2 <H> lies in [-n, n], so the term is at most |tr J| / n
    ctx = sine(n, beta)
    tr = abs(np.trace(ctx.matrix.entries))
    assert co.lemma_trace_term(ctx) <= tr / n + 1e-12
    h = ge.mean_energy_density(ge.enumerate(ctx, k_max=1))
    assert abs(co.lemma_trace_term(ctx) - 2 * abs(h) * tr / n) <= 1e-12


# --- connected correlations ----------------------------------------------------

def test_connected_two_pairs_vanish_at_beta_zero():
    acc = co.accumulate_higher_moments(sine(6, 0.0), 4)
    for p, q in itertools.combinations(itertools.combinations(range(6), 2), 2):
        assert abs(co.connected_correlation(acc, [p, q])) <= 1e-14


def test_connected_one_pair_is_two_point(acc6):
    assert co.connected_correlation(acc6, [(1, 4)]) == acc6.two[1, 4]
    with pytest.raises(ValueError):
        co.connected_correlation(acc6, [])


def test_connected_three_pairs_is_joint_cumulant(acc6):
    # joint cumulant of X_k = s_i s_j from brute-force moments
    b = BruteGibbs(ia.build_sine(6).entries, 0.9, keep_diagonal=True)
    pairs = [(0, 1), (1, 3), (2, 5)]
    X = [b.s[:, i] * b.s[:, j] for i, j in pairs]
    mu = [b.avg(x) for x in X]
    c = b.avg((X[0] - mu[0]) * (X[1] - mu[1]) * (X[2] - mu[2]))
    assert abs(co.connected_correlation(acc6, pairs) - c) <= 1e-12


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_pair_cumulant_sum_is_variance_cw(n):
    ctx = cw(n, 0.5)
    acc = co.accumulate_higher_moments(ctx, 4)
    pairs = list(itertools.combinations(range(n), 2))
    total = sum(co.connected_correlation(acc, [p, q]) for p in pairs for q in pairs)
    var = ge.cumulants(acc.summary, 2)[2]
    assert abs(total / n ** 4 - var) <= 1e-10


def test_three_pair_example_with_shared_spin():
    acc = co.accumulate_higher_moments(sine(8, 0.5), 6)
    c = co.connected_correlation
    worst = 0.0
    for i, j1, j2 in itertools.permutations(range(8), 3):
        for i3, j3 in [(0, 5), (3, 7), (i, j1)]:
            lhs = c(acc, [(i, j1), (i, j2), (i3, j3)])
            rhs = (c(acc, [(j1, j2), (i3, j3)]) - c(acc, [(i, j1), (i3, j3)]) * c(acc, [(i, j2)])
                   - c(acc, [(i, j2), (i3, j3)]) * c(acc, [(i, j1)]))
            worst = max(worst, abs(lhs - rhs))
    assert worst <= 1e-10


# --- weighted and starred sums ---------------------------------------------------

def test_weighted_order_two_is_four_var_h():
    ctx = sine(10, 0.5)
    var = ge.cumulants(ge.enumerate(ctx, k_max=2), 2)[2]
    assert abs(co.weighted_cumulant_sum(ctx, 2) - 4 * var) <= 1e-10


@pytest.mark.parametrize("order,n", [(2, 8), (3, 6)])
@pytest.mark.parametrize("beta", [0.0, 0.3, 0.6])
def test_weighted_direct_equals_moments(order, n, beta):
    ctx = sine(n, beta)
    a = co.weighted_cumulant_sum(ctx, order, "moments")
    b = co.weighted_cumulant_sum(ctx, order, "direct")
    assert abs(a - b) <= 1e-10


def test_weighted_beta_zero_matches_enumeration():
    ctx = sine(9, 0.0)
    b = BruteGibbs(ia.build_sine(9).entries, 0.0, keep_diagonal=True)
    assert abs(co.weighted_cumulant_sum(ctx, 2) - 4 * b.var_h()) <= 1e-12


@pytest.mark.parametrize("beta", [0.3, 0.6])
def test_weighted_order_three_sine_8(beta):
    ctx = sine(8, beta)
    direct = co.weighted_cumulant_sum(ctx, 3, "direct")
    via = co.weighted_cumulant_sum(ctx, 3, "moments")
    assert abs(direct) <= abs(via) + 1e-10


def test_weighted_rejects_order():
    with pytest.raises(ValueError):
        co.weighted_cumulant_sum(sine(4, 0.1), 4)


def test_starred_two_is_signed_gap():
    ctx = sine(8, 0.5)
    assert abs(abs(co.starred_sum(ctx, 2)) - co.factorization_gap(ctx, "oracle")) <= 1e-12


def test_starred_three_by_loops():
    n, beta = 5, 0.7
    J = ia.build_sine(n).entries
    b = BruteGibbs(J, beta, keep_diagonal=True)
    E = b.spin_product
    a = sum(J[i, j] * E((i, j)) for i, j in itertools.permutations(range(n), 2))
    bb = sum(J[i, j] * J[l, m] * E((i, j, l, m)) for i, j, l, m in itertools.permutations(range(n), 4))
    # six distinct indices do not exist at n = 5
    ref = (0.0 - 3 * a * bb + 2 * a ** 3) / n ** 3
    assert abs(co.starred_sum(sine(n, beta), 3) - ref) <= 1e-12


def test_starred_three_zero_at_beta_zero():
    assert abs(co.starred_sum(sine(8, 0.0), 3)) <= 1e-14


def test_starred_three_decreasing_small_n():
    # fails: |starred_3| at n = 6, 7, 8 is 0.052, 0.031, 0.051 (odd/even oscillation)
    vals = [abs(co.starred_sum(sine(n, 0.5), 3)) for n in (6, 7, 8)]
    assert vals[0] > vals[1] > vals[2]


def test_starred_caps():
    with pytest.raises(CapacityError):
        co.starred_sum(sine(13, 0.1), 2)
    with pytest.raises(CapacityError):
        co.starred_sum(sine(9, 0.1), 3)
