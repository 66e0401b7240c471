import math

import pytest
from hypothesis import given, settings, strategies as st

from rtlock import (
    DistributionVector,
    InputError,
    OpType,
    build_odt,
    default_pair_table,
    distance,
    generate_from_string,
    lock_assure,
    metric,
    metric_for_designs,
)

from conftest import flat_design

ADD = OpType.ADD
SUB = OpType.SUB
SHL = OpType.SHL


def vec(values, mask=None):
    values = tuple(values)
    mask = tuple(mask) if mask is not None else (True,) * len(values)
    return DistributionVector(values, mask)


def table_for(initial_abs, affected_pairs=()):
    """DistributionTable stand-in over the default pair order."""
    pairs = default_pair_table()
    from rtlock.odt import DistributionTable

    entries = {c: v for (c, _), v in zip(pairs.pair_list, initial_abs)}
    affected = {c: (c in affected_pairs) for c, _ in pairs.pair_list}
    return DistributionTable(pairs, entries, affected)


def test_build_odt_signed_entries():
    d = flat_design({ADD: 7, SUB: 5})
    table = build_odt(d)
    assert table.entries[ADD] == 2
    assert table.signed(ADD) == 2
    assert table.signed(SUB) == -2
    assert not table.affected[ADD]


def test_build_odt_balanced_benchmark_all_zero():
    d = generate_from_string("balanced:add-sub:1023")
    table = build_odt(d)
    assert all(v == 0 for v in table.entries.values())


def test_build_odt_empty_design():
    d = flat_design({})
    table = build_odt(d)
    assert all(v == 0 for v in table.entries.values())
    assert not any(table.affected.values())


def test_build_odt_affected_tracks_locking():
    d = flat_design({ADD: 3, SHL: 2})
    session = lock_assure(d, 1, seed=3, selection="serial")
    table = build_odt(session.freeze())
    assert table.affected[ADD]
    assert not table.affected[SHL]


def test_distance_triangle():
    assert distance(vec([3, 4]), vec([0, 0])) == pytest.approx(5.0)


def test_distance_masked_exclusion():
    assert distance(vec([3, 4]), vec([0, 0], mask=[True, False])) == pytest.approx(3.0)


def test_distance_equal_vectors():
    assert distance(vec([2, 9]), vec([2, 9])) == 0.0


def test_distance_length_mismatch():
    with pytest.raises(InputError):
        distance(vec([1]), vec([1, 2]))


def _pad(values):
    return list(values) + [0] * (9 - len(values))


def test_metric_unlocked_design_scores_zero():
    initial = vec(_pad([25, 10]))
    report = metric(initial, vec(_pad([25, 10])), table_for(_pad([25, 10])))
    assert report.global_value == pytest.approx(0.0)


def test_metric_balanced_design_scores_hundred():
    initial = vec(_pad([25, 10]))
    report = metric(initial, vec(_pad([0, 0])), table_for(_pad([0, 0])))
    assert report.global_value == 100.0
    assert report.restricted_value == 100.0


def test_metric_partial_balance_matches_independent_evaluation():
    # independent evaluation of the score formula, straight from its parts
    initial_distance = math.sqrt(25**2 + 10**2)
    expected = 100.0 * (1.0 - 25.0 / initial_distance)
    initial = vec(_pad([25, 10]))
    report = metric(initial, vec(_pad([25, 0])), table_for(_pad([25, 0])))
    assert report.global_value == pytest.approx(expected, abs=1e-9)
    assert report.global_value == pytest.approx(7.15, abs=0.01)


def test_metric_degenerate_initial_distance():
    initial = vec(_pad([0, 0]))
    report = metric(initial, vec(_pad([0, 0])), table_for(_pad([0, 0])))
    assert report.global_value == 100.0
    worse = metric(initial, vec(_pad([0, 2])), table_for(_pad([0, 2])))
    assert worse.global_value == 0.0


def test_metric_restricted_masks_unaffected_pairs():
    # second pair unbalanced but untouched: restricted ignores it
    initial = vec(_pad([4, 10]))
    current = vec(_pad([0, 10]))
    report = metric(initial, current, table_for(_pad([0, 10]), affected_pairs=(ADD,)))
    assert report.restricted_value == 100.0
    assert report.global_value < 100.0


def test_metric_all_affected_makes_variants_equal():
    pairs = default_pair_table()
    all_canon = tuple(c for c, _ in pairs.pair_list)
    initial = vec(_pad([12, 5, 3]))
    current = vec(_pad([6, 5, 1]))
    report = metric(initial, current, table_for(_pad([6, 5, 1]), affected_pairs=all_canon))
    assert report.restricted_value == pytest.approx(report.global_value)


def test_metric_global_100_implies_restricted_100():
    initial = vec(_pad([9, 9]))
    report = metric(initial, vec(_pad([0, 0])), table_for(_pad([0, 0]), affected_pairs=(ADD,)))
    assert report.global_value == 100.0
    assert report.restricted_value == 100.0


def test_metric_report_json_fields_and_rounding():
    initial = vec(_pad([25, 10]))
    report = metric(initial, vec(_pad([25, 0])), table_for(_pad([25, 0])))
    data = report.to_json_dict()
    assert set(data) == {
        "global", "restricted", "initialDistance",
        "currentDistanceGlobal", "currentDistanceRestricted",
    }
    assert data["global"] == 7.15
    assert data["initialDistance"] == round(math.sqrt(725), 2)


@given(
    st.lists(st.integers(min_value=0, max_value=40), min_size=9, max_size=9),
    st.integers(min_value=0, max_value=8),
    st.integers(min_value=1, max_value=5),
)
@settings(max_examples=60, deadline=None)
def test_metric_global_monotone_in_each_entry(initial_values, index, bump):
    initial = vec(initial_values)
    current_values = list(initial_values)
    base = metric(initial, vec(current_values), table_for(current_values))
    worse_values = list(current_values)
    worse_values[index] += bump
    worse = metric(initial, vec(worse_values), table_for(worse_values))
    assert worse.global_value <= base.global_value + 1e-9
    assert 0.0 <= worse.global_value <= 100.0
    assert 0.0 <= worse.restricted_value <= 100.0


def test_metric_for_designs_wrapper():
    d = flat_design({ADD: 7, SUB: 5})
    session = lock_assure(d, 2, seed=1, selection="serial")
    report = metric_for_designs(session.freeze(), d)
    assert 0.0 <= report.global_value <= 100.0
    assert report.initial_distance == pytest.approx(2.0)
