import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soficount.counting import (
    NEG_INF,
    BudgetExceeded,
    ball_count_bound,
    bound_summary,
    compositions,
    conditional_extension_bound,
    count_exact,
    count_types,
    default_budget,
    enumerate_homs,
    enumerate_multi,
    mc_membership,
    multinomial,
    orbit_witness_lower,
    sample_gamma,
    stirling_upper_bound,
    sum_multinomials,
    typical_set_lower_bound,
    wilson_interval,
    window_coordinate,
    window_upper_bound,
)
from soficount.homspace import HomContext
from soficount.measure import MeasureSystem, PartitionSpec
from soficount.sofic import build_cyclic

HALF = MeasureSystem.bernoulli([0.5, 0.5])
PTS2 = PartitionSpec.points(2)


def ctx_for(d, F=(0,), system=HALF, alpha=PTS2, xi=None):
    return HomContext.build(build_cyclic(d), system, alpha, list(F), {"xi": xi} if xi is not None else None)


def fraction_members(ctx, delta):
    """Independent brute force with exact rational arithmetic."""
    t = ctx.table
    mu = [Fraction(x).limit_denominator(10**12) for x in t.measures]
    d, m = ctx.d, ctx.m
    sig_inv = [ctx.sofic.evaluate(s).inverse.images for s in ctx.F]
    dl = Fraction(delta)
    out = []
    for lab in itertools.product(range(m), repeat=d):
        ok = True
        for i in range(len(ctx.F)):
            mism = sum(t.coord[t.e_pos][lab[sig_inv[i][k]]] != t.coord[i][lab[k]] for k in range(d))
            if Fraction(2 * mism, d) >= dl:
                ok = False
                break
        if ok:
            meas = sum(abs(Fraction(lab.count(a), d) - mu[a]) for a in range(m))
            ok = meas < dl
        if ok:
            out.append(lab)
    return out


def test_d2_example_two_labelings():
    res, models = enumerate_homs(ctx_for(2), 0.1)
    assert res.count == 2 and res.log_count == pytest.approx(math.log(2))
    assert sorted(m.labels.tolist() for m in models) == [[0, 1], [1, 0]]


def test_delta_two_and_zero():
    res, _ = enumerate_homs(ctx_for(5), 2.0)
    assert res.count == 2**5
    res0, models = enumerate_homs(ctx_for(5), 0.0)
    assert res0.count == 0 and res0.log_count == NEG_INF and models == []


@pytest.mark.parametrize("d,F,delta", [(4, (0, 1), 0.55), (5, (0, 1), 0.85), (6, (0, -1), 0.65), (3, (0, 1, -1), 1.3)])
def test_enumeration_matches_rational_oracle(d, F, delta):
    ctx = ctx_for(d, F)
    res, models = enumerate_homs(ctx, delta, keep_models=True)
    want = fraction_members(ctx, delta)
    assert res.count == len(want)
    assert sorted(tuple(m.labels.tolist()) for m in models) == sorted(want)


def test_type_classes_match_enumeration():
    b3 = MeasureSystem.bernoulli([0.2, 0.3, 0.5])
    xi = PartitionSpec.from_atoms([[0], [1, 2]], 3)
    for d in (4, 6, 8):
        ctx = ctx_for(d, system=b3, alpha=PartitionSpec.points(3), xi=xi)
        deltas = [0.9, 0.5, 0.3]
        a = count_types(ctx, deltas)
        b = enumerate_multi(ctx, deltas)
        for x, y in zip(a, b):
            assert x.count == y.count
            assert x.restriction_counts == y.restriction_counts


def test_budget_refusal_has_no_partial_result():
    with pytest.raises(BudgetExceeded) as exc:
        enumerate_homs(ctx_for(12, F=(0, 1)), 0.5, budget=1000)
    assert exc.value.budget == 1000


def test_env_budget(monkeypatch):
    monkeypatch.setenv("SOFICOUNT_BUDGET", "1e3")
    assert default_budget() == 1000
    monkeypatch.delenv("SOFICOUNT_BUDGET")
    assert default_budget() == 10**8


def test_compositions_and_multinomials():
    c = compositions(5, 3)
    assert c.shape[0] == math.comb(7, 2)
    assert (c.sum(axis=1) == 5).all()
    assert len({tuple(r) for r in c.tolist()}) == c.shape[0]
    exact, log = sum_multinomials(5, c)
    assert exact == 3**5 and log == pytest.approx(5 * math.log(3))
    _, log_lg = sum_multinomials(5, c, exact_limit=0)
    assert log_lg == pytest.approx(log, abs=1e-12)
    assert multinomial(4, (2, 2)) == 6


def test_sample_gamma_examples():
    assert (sample_gamma([1.0, 0.0], 50, 3) == 0).all()
    a = sample_gamma([0.5, 0.5], 100, 7, 4)
    assert np.array_equal(a, sample_gamma([0.5, 0.5], 100, 7, 4))
    g = sample_gamma([0.5, 0.5], 10_000, 20240601)
    assert abs(np.mean(g == 0) - 0.5) <= 0.02


def test_mc_delta_two_counts_everything():
    ctx = ctx_for(30)
    (res,), _ = mc_membership(ctx, 2.0, 200, seed=5)
    assert res.rate == 1.0
    assert res.log_count == pytest.approx(30 * math.log(2), abs=1e-12)


def test_mc_rate_bernoulli_d1000():
    ctx = ctx_for(1000, F=(0, 1, -1))
    (res,), _ = mc_membership(ctx, 0.1, 1000, seed=20240601)
    assert res.rate >= 0.8


def test_mc_no_valid_sample_is_neg_inf():
    ctx = ctx_for(50, F=(0, 1))
    (res,), _ = mc_membership(ctx, 1e-6, 50, seed=1)
    assert res.valid == 0 and res.log_count == NEG_INF
    assert any("no valid sample" in n for n in res.notes)


def test_mc_independent_of_jobs_and_batch():
    ctx = ctx_for(40, F=(0, 1))
    a, _ = mc_membership(ctx, [0.6, 0.3], 300, seed=9, batch=17, jobs=1)
    b, _ = mc_membership(ctx, [0.6, 0.3], 300, seed=9, batch=64, jobs=4)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 10)[0] == 0.0 and wilson_interval(10, 10)[1] == 1.0
    # continuity correction widens the plain Wilson interval
    z = 1.959963984540054
    p, n = 0.3, 200
    c = (p + z * z / (2 * n)) / (1 + z * z / n)
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    lo, hi = wilson_interval(60, 200)
    assert lo < c - h and hi > c + h


def test_typical_set_examples():
    v, flags = typical_set_lower_bound([0.5, 0.5], 100, 0.1)
    assert v == pytest.approx(59.09, abs=0.005)
    assert "asymptotic" in flags
    v, flags = typical_set_lower_bound([1.0, 0.0], 100, 0.1)
    assert v == 0.0 and "floored" in flags
    raw, _ = typical_set_lower_bound([1.0, 0.0], 100, 0.1, floor=False)
    assert raw == pytest.approx(math.log(0.8) - 10)
    small, _ = typical_set_lower_bound([0.5, 0.5], 1000, 1e-9)
    assert small == pytest.approx(1000 * math.log(2), abs=1e-5)


def test_stirling_examples():
    assert math.log(6) <= stirling_upper_bound([0.5, 0.5], 4, 0.3, 0.1)
    assert stirling_upper_bound([0.5, 0.5], 2000, 0.01, 0.01) / 2000 <= math.log(2) + 0.05
    pm = stirling_upper_bound([1.0], 1000, 0.01, 0.01)
    assert pm == pytest.approx(math.log(20) + 1000 * 1.01 * 0.01)


def test_conditional_extension_bound():
    sys_ = MeasureSystem.bernoulli([0.3, 0.7])
    v = conditional_extension_bound(sys_, PTS2, PTS2, 500, 0.01, 0.01)
    assert v == pytest.approx(2 * math.log(10) + 500 * 1.01 * 0.02)
    crossing = PartitionSpec.from_atoms([[0, 2], [1]], 3)
    with pytest.raises(Exception):
        conditional_extension_bound(MeasureSystem.bernoulli([0.2, 0.3, 0.5]),
                                    PartitionSpec.from_atoms([[0, 1], [2]], 3), crossing, 100, 0.1, 0.1)


def test_ball_count_examples():
    assert ball_count_bound(20, 0.04, 2) == 0.0
    assert ball_count_bound(20, 0.1, 2) == pytest.approx(2 * math.log(190))
    vals = [ball_count_bound(1000, e, 2) / 1000 for e in (0.3, 0.2, 0.1, 0.05, 0.01, 0.001)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_bounds_mode_sandwiches_exact_count():
    z4 = MeasureSystem.finite([0.25] * 4, [[1, 2, 3, 0]])
    split = PartitionSpec.from_atoms([[0], [1, 2, 3]], 4)
    for d, F, delta in ((8, (0, 1), 0.3), (8, (0, 1), 0.6), (6, (0, 1), 0.5), (9, (0,), 0.5)):
        ctx = HomContext.build(build_cyclic(d), z4, split, list(F))
        exact = count_exact(ctx, [delta])[0]
        # the bounds are on |Hom|_alpha, the restriction to the alpha algebra
        target = exact.restriction_log_count["alpha"]
        b = bound_summary(ctx, delta)
        assert b.mode == "bounds"
        assert target <= b.log_count + 1e-9
        wb = window_upper_bound(ctx, delta)
        if wb is not None:
            assert target <= wb + 1e-9
        ow = orbit_witness_lower(ctx, delta)
        if ow is not None:
            assert ow[0] <= target + 1e-9


def test_exact_json_counts_are_strings():
    res = count_exact(ctx_for(6), [0.5])[0]
    obj = res.to_json()
    assert isinstance(obj["count"], str) and int(obj["count"]) == res.count


@settings(max_examples=25, deadline=None)
@given(d=st.integers(1, 7), delta=st.floats(0.05, 1.5))
def test_restriction_count_at_most_count(d, delta):
    xi = PartitionSpec.trivial(2)
    res, _ = enumerate_homs(ctx_for(d, F=(0, 1), xi=xi), delta)
    assert res.restriction_log_count["xi"] <= res.log_count
    assert res.restriction_counts["xi"] == (1 if res.count else 0)


def test_window_coordinate():
    assert window_coordinate(PartitionSpec.points(2, (0, 1)), 2) == 0
    # xor of the two symbols pins neither coordinate
    xor = PartitionSpec.from_atoms([[(0, 0), (1, 1)], [(0, 1), (1, 0)]], 2, (0, 1))
    assert window_coordinate(xor, 2) is None


def test_mc_windowed_counts_base_sequences():
    pair = PartitionSpec.points(2, (0, 1))
    ctx = HomContext.build(build_cyclic(40), HALF, pair, [0, 1])
    (res,), _ = mc_membership(ctx, 2.0, 100, seed=3)
    # every y is valid at delta = 2 and y -> phi is injective
    assert res.rate == 1.0 and res.log_count == pytest.approx(40 * math.log(2))
    assert "window-sequences" in res.flags
    skew = MeasureSystem.bernoulli([0.3, 0.7])
    ctx = HomContext.build(build_cyclic(400), skew, PartitionSpec.points(2, (0, 1)), [0, 1])
    (res,), _ = mc_membership(ctx, 0.2, 300, seed=3)
    assert "typical-lower-estimate" in res.flags
    assert res.log_count <= 400 * math.log(2)
    assert res.log_count / 400 == pytest.approx(0.610864 - 0.2, abs=0.02)
