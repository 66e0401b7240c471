"""Locking-pair tables: the involutive partner mapping and attack codes.

A usable table pairs every operation type with exactly one partner,
symmetrically (partner(partner(T)) == T, never T itself), and gives each
type a distinct positive integer code.  Code 0 is reserved for "not a
plain operation" in attack feature extraction.  Asymmetric pairings are
reported as leakage findings: if T pairs to P but P pairs elsewhere, an
observed (T, P) construct gives away which side is real.
"""

from __future__ import annotations

import json
from typing import NamedTuple, Optional

from .errors import InputError, PairTableError
from .ir import OP_BY_NAME, OP_ORDER, OpType

DEFAULT_PAIRING = (
    (OpType.ADD, OpType.SUB),
    (OpType.MUL, OpType.DIV),
    (OpType.MOD, OpType.POW),
    (OpType.SHL, OpType.SHR),
    (OpType.BIT_AND, OpType.BIT_OR),
    (OpType.BIT_XOR, OpType.BIT_XNOR),
    (OpType.LT, OpType.GE),
    (OpType.GT, OpType.LE),
    (OpType.EQ, OpType.NE),
)


class Finding(NamedTuple):
    kind: str
    message: str


class PairTable:
    """Validated partner mapping plus per-type integer codes."""

    def __init__(self, partner: dict[OpType, OpType], codes: dict[OpType, int]):
        findings = _check_mapping(partner, codes)
        if findings:
            raise PairTableError(
                "; ".join(f.message for f in findings), findings=findings
            )
        self.partner = dict(partner)
        self.codes = dict(codes)
        self.canonical = {}
        pair_list = []
        for t, p in self.partner.items():
            canon = t if OP_ORDER[t] < OP_ORDER[p] else p
            self.canonical[t] = canon
            if t is canon:
                pair_list.append((t, p))
        pair_list.sort(key=lambda pair: OP_ORDER[pair[0]])
        self.pair_list = tuple(pair_list)

    def pair_of(self, t: OpType) -> tuple[OpType, OpType]:
        canon = self.canonical[t]
        return (canon, self.partner[canon])

    def pair_label(self, t: OpType) -> str:
        canon, other = self.pair_of(t)
        return f"{canon.value}|{other.value}"

    def pair_index(self, t: OpType) -> int:
        return self._index[self.canonical[t]]

    @property
    def _index(self):
        idx = getattr(self, "_index_cache", None)
        if idx is None:
            idx = {pair[0]: i for i, pair in enumerate(self.pair_list)}
            self._index_cache = idx
        return idx

    def to_mapping(self) -> dict:
        return {
            "pairs": {t.value: p.value for t, p in self.partner.items()},
            "codes": {t.value: c for t, c in self.codes.items()},
        }

    @classmethod
    def from_mapping(cls, raw: dict) -> "PairTable":
        pairs_raw, codes_raw = split_raw_table(raw)
        findings = validate_pair_mapping(pairs_raw, codes_raw)
        fatal = [f for f in findings if f.kind != "leakage"] or findings
        if findings:
            raise PairTableError(
                "; ".join(f.message for f in fatal), findings=findings
            )
        partner = {OP_BY_NAME[t]: OP_BY_NAME[p] for t, p in pairs_raw.items()}
        codes = _resolve_codes(codes_raw)
        return cls(partner, codes)

    @classmethod
    def from_json_file(cls, path) -> "PairTable":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"pair table {path}: invalid JSON ({exc})") from None
        return cls.from_mapping(raw)


def default_codes() -> dict[OpType, int]:
    return {op: i + 1 for i, op in enumerate(OpType)}


_DEFAULT_TABLE: Optional[PairTable] = None


def default_pair_table() -> PairTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        partner = {}
        for a, b in DEFAULT_PAIRING:
            partner[a] = b
            partner[b] = a
        _DEFAULT_TABLE = PairTable(partner, default_codes())
    return _DEFAULT_TABLE


def split_raw_table(raw: dict) -> tuple[dict, Optional[dict]]:
    """Accept both {"pairs": ..., "codes": ...} and bare {op: partner} JSON."""
    if not isinstance(raw, dict):
        raise InputError("pair table must be a JSON object")
    if "pairs" in raw:
        pairs_raw = raw["pairs"]
        codes_raw = raw.get("codes")
    else:  # bare {op: partner} form
        pairs_raw = raw
        codes_raw = None
    if not isinstance(pairs_raw, dict):
        raise InputError("pair table 'pairs' must map operation names to names")
    return pairs_raw, codes_raw


def _resolve_codes(codes_raw: Optional[dict]) -> dict[OpType, int]:
    if codes_raw is None:
        return default_codes()
    return {OP_BY_NAME[t]: int(c) for t, c in codes_raw.items()}


def validate_pair_mapping(pairs_raw: dict, codes_raw: Optional[dict] = None):
    """Inspect a raw name->name mapping; returns findings without raising.

    Asymmetric pairings come back as kind="leakage" and name the operation
    whose pair construct betrays the real side.
    """
    findings: list[Finding] = []
    known = {}
    for t_name, p_name in pairs_raw.items():
        if t_name not in OP_BY_NAME:
            findings.append(Finding("unknown-operation", f"unknown operation {t_name!r}"))
            continue
        if not isinstance(p_name, str) or p_name not in OP_BY_NAME:
            findings.append(
                Finding("unknown-operation", f"{t_name}: unknown partner {p_name!r}")
            )
            continue
        known[t_name] = p_name
    for t_name, p_name in known.items():
        if p_name == t_name:
            findings.append(Finding("self-pair", f"operation {t_name!r} pairs with itself"))
            continue
        back = known.get(p_name)
        if back != t_name:
            detail = f"{p_name!r} pairs with {back!r}" if back else f"{p_name!r} has no pairing"
            findings.append(
                Finding(
                    "leakage",
                    f"asymmetric pair: {t_name!r} pairs with {p_name!r} but {detail}; "
                    f"an observed ({t_name}, {p_name}) lock reveals {t_name!r} as real",
                )
            )
    for op in OpType:
        if op.value not in known:
            findings.append(Finding("missing-operation", f"no pairing for {op.value!r}"))
    if codes_raw is not None:
        seen = {}
        for name, code in codes_raw.items():
            if name not in OP_BY_NAME:
                findings.append(Finding("unknown-operation", f"code for unknown operation {name!r}"))
                continue
            if not isinstance(code, int) or code <= 0:
                findings.append(
                    Finding("bad-code", f"{name}: code must be a positive integer (0 is reserved)")
                )
                continue
            if code in seen:
                findings.append(
                    Finding("duplicate-code", f"{name} and {seen[code]} share code {code}")
                )
            seen[code] = name
        for name in known:
            if name not in codes_raw:
                findings.append(Finding("bad-code", f"missing code for {name!r}"))
    return findings


def _check_mapping(partner: dict, codes: dict) -> list[Finding]:
    findings = []
    for op in OpType:
        if op not in partner:
            findings.append(Finding("missing-operation", f"no pairing for {op.value!r}"))
        if op not in codes:
            findings.append(Finding("bad-code", f"missing code for {op.value!r}"))
    for t, p in partner.items():
        if p is t:
            findings.append(Finding("self-pair", f"operation {t.value!r} pairs with itself"))
        elif partner.get(p) is not t:
            findings.append(
                Finding("leakage", f"asymmetric pair: {t.value!r} -> {p.value!r}")
            )
    values = [c for c in codes.values()]
    if len(set(values)) != len(values) or any(c <= 0 for c in values):
        findings.append(Finding("bad-code", "codes must be distinct positive integers"))
    return findings
