import copy
import json
import math
from pathlib import Path

import pytest

from soficount.counting import NEG_INF
from soficount.pipeline import (
    CellRecord,
    EmptyResult,
    ValidationError,
    aggregate,
    bernoulli_reference,
    estimate,
    ks_compare,
    parse_config,
    run_cell,
    run_sweep,
    tail_half,
    validate_config,
)
from soficount.serialize import ConfigError, load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

HALF = {
    "group": {"kind": "Z"},
    "system": {"kind": "bernoulli", "weights": [0.5, 0.5]},
    "partitions": {"base": {"kind": "points"}},
    "sofic": {"builder": "cyclic", "d_grid": [8]},
    "xi_list": [{"xi": "base", "alphas": ["base"]}],
    "F_list": [[0]],
    "delta_grid": [0.5],
    "mode": "exact",
}

Z4 = {
    "group": {"kind": "Z"},
    "system": {"kind": "finite", "weights": [0.25] * 4, "perms": [[1, 2, 3, 0]]},
    "partitions": {
        "points": {"kind": "points"},
        "parity": {"atoms": [[0, 2], [1, 3]]},
        "split": {"atoms": [[0], [1, 2, 3]]},
    },
    "sofic": {"builder": "cyclic", "d_grid": [1000]},
    "xi_list": [{"xi": "points", "alphas": ["points"]}],
    "F_list": [[0, 1]],
    "delta_grid": [0.01],
    "mode": "bounds",
}


def cfg_of(base, **kw):
    obj = copy.deepcopy(base)
    obj.update(kw)
    return parse_config(obj)


def test_exact_cell_counts_balanced_words():
    cell = run_cell(cfg_of(HALF), "base", "base", 0, 0.5, 8)
    # |k/8 - 1/2| summed over both symbols is below 1/2 for k = 3, 4, 5
    n = math.comb(8, 3) + math.comb(8, 4) + math.comb(8, 5)
    assert n == 182
    assert cell.value == pytest.approx(math.log(182) / 8)
    assert cell.result.count == 182


def test_exact_delta_zero_is_neg_inf():
    cell = run_cell(cfg_of(HALF, delta_grid=[0.0]), "base", "base", 0, 0.0, 8)
    assert cell.value == NEG_INF


def test_periodic_bounds_cell_small():
    # at delta = 0.01 up to 8 breaks fit (4 mismatches, 4 null labels): about 0.055
    cell = run_cell(cfg_of(Z4, delta_grid=[0.005]), "points", "points", 0, 0.005, 1000)
    assert "certified-upper" in cell.result.flags
    assert cell.value <= 0.05


def rec(delta, d, value, F="F0", xi="x", alpha="a"):
    return CellRecord(xi, alpha, F, delta, d, "exact", value)


def test_aggregate_single_cell():
    r = aggregate([rec(0.1, 10, 0.42)])
    assert r.aggregate == 0.42


def test_aggregate_cascade():
    cells = [rec(0.2, 10, 0.6), rec(0.1, 10, 0.5), rec(0.2, 5, 9.0), rec(0.1, 5, 9.0)]
    r = aggregate(cells)
    # d=5 is outside the top half of {5, 10}; inf over delta picks 0.5
    assert r.aggregate == 0.5
    cells += [rec(0.2, 10, 0.3, F="F1"), rec(0.1, 10, 0.2, F="F1")]
    assert aggregate(cells).aggregate == 0.2  # inf over F
    cells += [rec(0.1, 10, 0.9, xi="y")]
    assert aggregate(cells).aggregate == 0.9  # sup over xi


def test_aggregate_limsup_takes_max_over_top_half():
    cells = [rec(0.1, d, v) for d, v in ((100, 0.1), (200, 0.7), (300, 0.4), (400, 0.6))]
    assert tail_half([100, 200, 300, 400]) == [300, 400]
    assert aggregate(cells).aggregate == 0.6


def test_aggregate_skipped_cells():
    skipped = CellRecord("x", "a", "F0", 0.1, 10, "exact", None, skipped=True, reason="budget")
    with pytest.raises(EmptyResult):
        aggregate([skipped])
    with pytest.warns(UserWarning):
        r = aggregate([skipped, rec(0.1, 20, 0.3)])
    assert r.aggregate == 0.3 and r.warnings


def test_bernoulli_reference():
    assert bernoulli_reference([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)
    assert bernoulli_reference([1 / 3] * 3) == pytest.approx(math.log(3), abs=1e-12)
    assert bernoulli_reference([0.3, 0.7]) == pytest.approx(0.610864, abs=1e-6)


def test_ks_compare_identical_families():
    fam = {"name": "a", "xi_list": [{"xi": "points", "alphas": ["points"]}]}
    cfg = cfg_of(Z4, families=[fam, dict(fam, name="b")])
    cmp_ = ks_compare(cfg)
    assert cmp_.difference == 0.0


def test_ks_compare_rejects_non_generating():
    fams = [{"name": "a", "xi_list": [{"xi": "points", "alphas": ["points"]}]},
            {"name": "b", "xi_list": [{"xi": "parity", "alphas": ["parity"]}]}]
    with pytest.raises(ValidationError, match="generate"):
        ks_compare(cfg_of(Z4, families=fams))


def test_ks_compare_periodic_config():
    obj, _ = load_config(CONFIGS / "periodic_z4.json")
    cmp_ = ks_compare(parse_config(obj))
    a, b = (r.aggregate for r in cmp_.reports)
    assert abs(a) <= 0.1 and abs(b) <= 0.1 and cmp_.difference <= 0.1


def test_ks_compare_bernoulli_cylinder():
    obj, _ = load_config(CONFIGS / "bernoulli_cylinder.json")
    cmp_ = ks_compare(parse_config(dict(obj, seed=7)))
    assert cmp_.difference <= 0.15
    assert all(abs(r.aggregate - math.log(2)) <= 0.1 for r in cmp_.reports)


@pytest.mark.parametrize("change,match", [
    ({"F_list": [[1, 2]]}, "identity"),
    ({"delta_grid": [0.1, 0.2]}, "decreasing"),
    ({"delta_grid": [0.2, 0.2]}, "decreasing"),
    ({"xi_list": [{"xi": "nope", "alphas": ["points"]}]}, "unknown partition"),
    ({"xi_list": [{"xi": "points", "alphas": ["parity"]}]}, "refine"),
    ({"system": {"kind": "finite", "weights": [0.1, 0.2, 0.3, 0.4], "perms": [[1, 2, 3, 0]]}}, "."),
])
def test_validation_errors(change, match):
    with pytest.raises(ValidationError, match=match):
        validate_config(cfg_of(Z4, **change))


@pytest.mark.parametrize("change", [{"mode": "guess"}, {"F_list": "x"}, {"group": {"kind": "Q"}}])
def test_config_errors(change):
    with pytest.raises(ConfigError):
        cfg_of(Z4, **change)


def test_missing_key_is_config_error():
    obj = copy.deepcopy(HALF)
    del obj["partitions"]
    with pytest.raises(ConfigError, match="partitions"):
        parse_config(obj)


def test_json_and_toml_configs_agree():
    a, ha = load_config(CONFIGS / "bernoulli_half.json")
    b, hb = load_config(CONFIGS / "bernoulli_half.toml")
    assert ha != hb
    assert parse_config(a).to_json() == parse_config(b).to_json()


def test_mc_needs_seed():
    cfg = cfg_of(HALF, mode="mc", sofic={"builder": "cyclic", "d_grid": [50]})
    with pytest.raises(ConfigError, match="seed"):
        run_sweep(cfg)


def test_sweep_independent_of_jobs():
    cfg = cfg_of(HALF, mode="mc", seed=11, trials=200, F_list=[[0, 1], [0, 1, -1]],
                 delta_grid=[0.3, 0.2], sofic={"builder": "cyclic", "d_grid": [100, 200]})
    a, _ = run_sweep(cfg, jobs=1)
    b, _ = run_sweep(cfg, jobs=4)
    dump = lambda cells: json.dumps([c.to_json() for c in cells], sort_keys=True, default=str)
    assert dump(a) == dump(b)


def test_budget_skips_cells_and_reports():
    cfg = cfg_of(HALF, budget=10, sofic={"builder": "cyclic", "d_grid": [8, 1]}, F_list=[[0, 1]])
    cells, _ = run_sweep(cfg)
    assert [c.skipped for c in cells] == [True, False]
    with pytest.raises(EmptyResult):
        estimate(cfg_of(HALF, budget=10, F_list=[[0, 1]]))
