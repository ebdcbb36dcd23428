import random
from itertools import combinations

import pytest

from sinrlab.ssf import (BudgetExceeded, DilutionConfig, Infeasible, OutOfRange, SsfFamily, build_ssf,
                         dumps, loads, protocol_family, schedule_active, singletons, verify_ssf)


def brute_force_selective(family: SsfFamily) -> bool:
    """Plain enumeration of every S with |S| <= c; the reference for verify_ssf."""
    n, c = family.n_labels, family.selectivity
    for size in range(1, c + 1):
        for s in combinations(range(1, n + 1), size):
            s = frozenset(s)
            for x in s:
                if not any(s & f == {x} for f in family.sets):
                    return False
    return True


def fam(n, c, *sets):
    return SsfFamily(n, c, tuple(frozenset(s) for s in sets))


def test_singletons_are_the_greedy_answer_when_c_equals_n():
    f = build_ssf(4, 4, "greedy")
    assert sorted(map(sorted, f.sets)) == [[1], [2], [3], [4]]
    assert verify_ssf(f)


def test_one_set_covering_everything_selects_only_for_c1():
    assert verify_ssf(fam(2, 1, {1, 2}))
    bad = verify_ssf(fam(2, 2, {1, 2}))
    assert not bad
    assert bad.witness_set == frozenset({1, 2}) and bad.witness_label == 1


def test_singletons_plus_pair_passes():
    assert verify_ssf(fam(2, 2, {1}, {2}, {1, 2}))


@pytest.mark.parametrize("n", [2, 5, 9])
def test_singletons_pass_for_any_c(n):
    assert verify_ssf(SsfFamily(n, n, singletons(n)))


def test_n8_c2_within_length_bound():
    f = build_ssf(8, 2, "greedy")
    assert f.length <= f.length_bound()
    assert verify_ssf(f) and brute_force_selective(f)


def test_exhaustive_check_agrees_with_enumeration_on_random_families():
    rng = random.Random(7)
    for _ in range(300):
        n = rng.randint(2, 7)
        c = rng.randint(1, min(4, n))
        sets = [frozenset(x for x in range(1, n + 1) if rng.random() < 0.4) for _ in range(rng.randint(1, 12))]
        f = SsfFamily(n, c, tuple(sets))
        assert bool(verify_ssf(f)) == brute_force_selective(f), (n, c, sets)


def test_witness_is_a_real_counterexample():
    f = fam(5, 3, {1, 2}, {3, 4}, {5}, {1, 3})
    v = verify_ssf(f)
    assert not v
    s, x = v.witness_set, v.witness_label
    assert x in s and len(s) <= 3
    assert not any(s & f_ == {x} for f_ in f.sets)


@pytest.mark.parametrize("strategy", ["greedy", "randomized", "algebraic"])
def test_every_strategy_yields_verified_families(strategy):
    for n, c in [(8, 2), (16, 3), (32, 2)]:
        f = build_ssf(n, c, strategy, seed=3)
        assert verify_ssf(f), (strategy, n, c)


def test_algebraic_scales_past_exhaustive_range():
    f = build_ssf(256, 3, "algebraic")
    assert verify_ssf(f, mode="sampled", trials=300)


def test_build_is_deterministic():
    assert build_ssf(16, 3, "randomized", seed=5).sets == build_ssf(16, 3, "randomized", seed=5).sets


def test_infeasible_selectivity():
    with pytest.raises(Infeasible):
        build_ssf(4, 5)


def test_budget_exceeded_for_big_exhaustive_request():
    with pytest.raises(BudgetExceeded):
        verify_ssf(SsfFamily(200, 6, singletons(200)[:-1] + (frozenset(range(1, 201)),)))


def test_schedule_active():
    f = SsfFamily(5, 5, singletons(5))
    assert schedule_active(f, 3, 2)
    assert not schedule_active(f, 3, 0)
    with pytest.raises(OutOfRange):
        schedule_active(f, 3, f.length)
    with pytest.raises(OutOfRange):
        schedule_active(f, 6, 0)


def test_text_round_trip_is_exact():
    f = build_ssf(16, 3, "algebraic")
    text = dumps(f)
    g = loads(text)
    assert g.sets == f.sets and (g.n_labels, g.selectivity) == (16, 3)
    assert dumps(g) == text


def test_protocol_family_caps_selectivity_at_label_count():
    f = protocol_family(8, DilutionConfig())
    assert f.selectivity == 8 and f.length == 8
    assert f.c1 == 3  # ceil(8 / ceil(log2 8))


def test_degenerate_density_rejected():
    with pytest.raises(ValueError):
        DilutionConfig(k_density=0)
