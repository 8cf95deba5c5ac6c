import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soficount.groups import GroupError, GroupSpec, cyclic_table
from soficount.sofic import (
    Permutation,
    SoficMap,
    build,
    build_cyclic,
    build_random_free,
    build_regular,
    build_torus,
    defect_report,
    good_set,
)


def test_cyclic_d1_is_identity():
    s = build_cyclic(1)
    assert s.generator(1).is_identity()


def test_cyclic_word_twice_is_rotation_by_two():
    s = build_cyclic(5)
    p = s.evaluate_word((1, 1))
    assert p.to_list()[0] == 3  # 1 -> 3 in 1-based terms
    assert p == s.evaluate(2)


def test_cyclic_mult_defect_zero():
    rep = defect_report(build_cyclic(6), [1, -1])
    assert rep.mult[(1, -1)] == 0.0


def test_cyclic_inverse_word():
    p = build_cyclic(4).evaluate(-1)
    assert p.to_list()[0] == 4


def test_empty_word_is_identity():
    for s in (build_cyclic(7), build_random_free(2, 9, 3), build_torus(3)):
        assert s.evaluate_word(()).is_identity()


def test_word_applied_twice_matches_composed_word():
    s = build_cyclic(4)
    g = s.evaluate(1)
    assert g.compose(g) == s.evaluate_word((1, 1))


def test_regular_z2_and_z3():
    s2 = build_regular(cyclic_table(2))
    assert s2.d == 2 and s2.generator(1).to_list() == [2, 1]
    s3 = build_regular(cyclic_table(3))
    p = s3.generator(1)
    assert sorted(p.to_list()) == [1, 2, 3]
    assert not p.is_identity() and p.compose(p).compose(p).is_identity()


def test_regular_rejects_nonassociative_table():
    # a Latin square with identity 0 that is not associative
    bad = [[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1], [4, 3, 1, 2, 0]]
    with pytest.raises(GroupError):
        build_regular(bad)


def test_random_free_d1_identity():
    s = build_random_free(2, 1, 99)
    assert s.generator(1).is_identity() and s.generator(2).is_identity()


def test_random_free_free_defect_counts_fixed_points():
    s = build_random_free(1, 500, 11)
    rep = defect_report(s, [(), (1,)])
    fixed = int(np.count_nonzero(s.generator(1).images == np.arange(500)))
    assert rep.free[((1,), ())] == fixed / 500


def test_random_free_fixed_point_mean_near_one():
    # E[#fixed points] = 1 for a uniform permutation
    counts = [np.count_nonzero(build_random_free(1, 500, seed).generator(1).images == np.arange(500))
              for seed in range(400)]
    assert abs(np.mean(counts) - 1.0) < 0.2


def test_random_free_deterministic():
    assert build_random_free(2, 300, 5) == build_random_free(2, 300, 5)
    assert build_random_free(2, 300, 5) != build_random_free(2, 300, 6)


def test_defect_report_cyclic_d6():
    rep = defect_report(build_cyclic(6), [0, 1, -1])
    assert all(v == 0 for v in rep.mult.values())
    assert rep.free[(1, -1)] == 0.0


def test_defect_report_regular_z3_whole_group():
    s = build_regular(cyclic_table(3))
    rep = defect_report(s, [0, 1, 2])
    assert rep.total() == 0.0


def test_random_free_small_defects_at_500():
    s = build_random_free(2, 500, 20240601)
    g = s.group
    rep = defect_report(s, [g.identity, (1,), (2,), (-1,), (-2,)])
    assert rep.max_mult() <= 0.05 and rep.max_free() <= 0.05


def test_good_set_examples():
    assert good_set(build_cyclic(6), [0, 1, -1]).tolist() == list(range(6))
    assert good_set(build_cyclic(2), [0, 1, 2, -1]).size == 0
    s = build_random_free(2, 50, 1)
    assert good_set(s, [()]).tolist() == list(range(50))


def test_good_set_pointwise():
    s = build_random_free(2, 60, 4)
    g = s.group
    F = [g.identity, (1,), (2,), (1, 2)]
    V = set(good_set(s, F).tolist())
    for v in range(60):
        ok = all(s.evaluate(g.multiply(a, b)).images[v] == s.evaluate(a).images[s.evaluate(b).images[v]]
                 for a, b in itertools.product(F, F))
        pre = [s.evaluate(a).inverse.images[v] for a in F]
        ok = ok and len(set(pre)) == len(pre)
        assert (v in V) == ok


def test_torus_is_exact():
    s = build_torus(5)
    rep = defect_report(s, s.group.ball(2))
    assert rep.total() == 0.0
    # on the 4x4 torus (0,2) and (0,-2) act alike: only freeness fails
    rep4 = defect_report(build_torus(4), s.group.ball(2))
    assert rep4.max_mult() == 0.0 and rep4.free[((0, 2), (0, -2))] == 1.0


def test_exact_builders_have_zero_defects_over_distinct_elements():
    for s, F in ((build_cyclic(9), [0, 1, -1, 2, -2, 3]),
                 (build_regular(cyclic_table(5)), [0, 1, 2, 3, 4])):
        rep = defect_report(s, F)
        assert rep.max_mult() == 0.0 and rep.max_free() == 0.0


def test_json_round_trip_one_based():
    s = build_random_free(2, 7, 8)
    obj = s.to_json()
    assert min(obj["perms"][0]) == 1 and max(obj["perms"][0]) == 7
    assert SoficMap.from_json(obj) == s


def test_build_dispatch():
    assert build({"builder": "cyclic"}, 5) == build_cyclic(5)
    with pytest.raises(ValueError):
        build({"builder": "torus"}, 5)
    with pytest.raises(ValueError):
        build({"builder": "nope"}, 5)


def test_unknown_generator_rejected():
    with pytest.raises((GroupError, ValueError)):
        build_cyclic(4).evaluate_word((2,))


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation(np.array([0, 0, 1]))


@settings(max_examples=60, deadline=None)
@given(word=st.lists(st.sampled_from([1, -1, 2, -2]), max_size=12), seed=st.integers(0, 2**32))
def test_word_evaluation_is_bijection(word, seed):
    s = build_random_free(2, 17, seed)
    p = s.evaluate_word(word)
    assert np.array_equal(np.sort(p.images), np.arange(17))
    w = GroupSpec.free(2).from_word(word)
    assert p == s.evaluate(w)
