import json

import pytest

from rtlock import OpType, PairTable, PairTableError, default_pair_table
from rtlock.pairs import split_raw_table, validate_pair_mapping


def test_default_table_covers_every_type():
    table = default_pair_table()
    assert set(table.partner) == set(OpType)
    for t, p in table.partner.items():
        assert p is not t
        assert table.partner[p] is t


def test_default_pairings_match_documented_partners():
    table = default_pair_table()
    assert table.partner[OpType.ADD] is OpType.SUB
    assert table.partner[OpType.MUL] is OpType.DIV
    assert table.partner[OpType.MOD] is OpType.POW
    assert table.partner[OpType.SHL] is OpType.SHR
    assert table.partner[OpType.BIT_AND] is OpType.BIT_OR
    assert table.partner[OpType.BIT_XOR] is OpType.BIT_XNOR
    assert table.partner[OpType.LT] is OpType.GE
    assert table.partner[OpType.GT] is OpType.LE
    assert table.partner[OpType.EQ] is OpType.NE


def test_default_codes_distinct_positive():
    table = default_pair_table()
    codes = list(table.codes.values())
    assert len(set(codes)) == len(OpType)
    assert all(c > 0 for c in codes)  # 0 stays reserved for the attack


def test_pair_list_order_and_labels():
    table = default_pair_table()
    assert len(table.pair_list) == 9
    assert table.pair_list[0] == (OpType.ADD, OpType.SUB)
    assert table.pair_label(OpType.SUB) == "add|sub"
    assert table.pair_index(OpType.DIV) == 1


def _leaky_mapping():
    """The known-bad configuration: mul pairs to add while add pairs to sub."""
    raw = {t.value: p.value for t, p in default_pair_table().partner.items()}
    raw["mul"] = "add"
    return raw


def test_leaky_mapping_is_flagged_and_names_the_leak():
    findings = validate_pair_mapping(_leaky_mapping())
    leaks = [f for f in findings if f.kind == "leakage"]
    assert leaks
    assert any("'mul'" in f.message for f in leaks)


def test_default_mapping_has_no_findings():
    raw = {t.value: p.value for t, p in default_pair_table().partner.items()}
    assert validate_pair_mapping(raw) == []


def test_self_pair_is_flagged():
    raw = {t.value: p.value for t, p in default_pair_table().partner.items()}
    raw["add"] = "add"
    findings = validate_pair_mapping(raw)
    assert any(f.kind == "self-pair" for f in findings)


def test_duplicate_and_invalid_codes_flagged():
    raw_pairs = {t.value: p.value for t, p in default_pair_table().partner.items()}
    codes = {t.value: i + 1 for i, t in enumerate(OpType)}
    codes["add"] = codes["sub"]
    findings = validate_pair_mapping(raw_pairs, codes)
    assert any(f.kind == "duplicate-code" for f in findings)
    codes = {t.value: i + 1 for i, t in enumerate(OpType)}
    codes["add"] = 0
    findings = validate_pair_mapping(raw_pairs, codes)
    assert any(f.kind == "bad-code" for f in findings)


def test_missing_operation_flagged():
    raw = {t.value: p.value for t, p in default_pair_table().partner.items()}
    del raw["eq"]
    del raw["ne"]
    findings = validate_pair_mapping(raw)
    assert any(f.kind == "missing-operation" for f in findings)


def test_from_mapping_rejects_leaky_table():
    with pytest.raises(PairTableError) as err:
        PairTable.from_mapping({"pairs": _leaky_mapping()})
    assert any(f.kind == "leakage" for f in err.value.findings)


def test_from_mapping_accepts_involutive_override(tmp_path):
    # swap the comparison pairings: lt<->gt, le<->ge
    raw = {t.value: p.value for t, p in default_pair_table().partner.items()}
    raw.update({"lt": "gt", "gt": "lt", "le": "ge", "ge": "le"})
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps({"pairs": raw}), encoding="utf-8")
    table = PairTable.from_json_file(path)
    assert table.partner[OpType.LT] is OpType.GT
    assert table.partner[OpType.GE] is OpType.LE
    assert len(table.pair_list) == 9


def test_split_raw_table_accepts_bare_mapping():
    raw = {t.value: p.value for t, p in default_pair_table().partner.items()}
    pairs_raw, codes_raw = split_raw_table(raw)
    assert pairs_raw == raw
    assert codes_raw is None
