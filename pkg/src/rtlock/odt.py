"""Operation distribution bookkeeping and the balance security metrics.

For every locking pair the table stores one signed entry: the count of the
canonical member minus the count of its partner (the partner's entry is
implicitly the negation).  A pair is "affected" once either member appears
as the top-level operation of a key-mux branch, i.e. once locking touched
it.  The metric maps the distance between the current imbalance vector and
the all-zero optimum onto a 0..100 scale, normalized by the design's
initial distance; the restricted variant masks out unaffected pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InputError
from .ir import BinOp, Design, count_ops_by_type, iter_key_muxes
from .pairs import PairTable, default_pair_table


@dataclass
class DistributionTable:
    pairs: PairTable
    entries: dict  # canonical OpType -> signed imbalance
    affected: dict  # canonical OpType -> bool

    def signed(self, t) -> int:
        canon = self.pairs.canonical[t]
        value = self.entries[canon]
        return value if t is canon else -value

    def vector(self, restricted: bool = False) -> "DistributionVector":
        values = tuple(abs(self.entries[c]) for c, _ in self.pairs.pair_list)
        if restricted:
            mask = tuple(self.affected[c] for c, _ in self.pairs.pair_list)
        else:
            mask = (True,) * len(values)
        return DistributionVector(values, mask)


@dataclass(frozen=True)
class DistributionVector:
    values: tuple[int, ...]
    mask: tuple[bool, ...]

    def __post_init__(self):
        if len(self.values) != len(self.mask):
            raise InputError("distribution vector and mask lengths differ")


@dataclass(frozen=True)
class MetricReport:
    global_value: float
    restricted_value: float
    initial_distance: float
    current_distance_global: float
    current_distance_restricted: float

    def to_json_dict(self) -> dict:
        return {
            "global": round(self.global_value, 2),
            "restricted": round(self.restricted_value, 2),
            "initialDistance": round(self.initial_distance, 2),
            "currentDistanceGlobal": round(self.current_distance_global, 2),
            "currentDistanceRestricted": round(self.current_distance_restricted, 2),
        }


def build_odt(design: Design, pairs: PairTable = None) -> DistributionTable:
    """Count per-pair imbalance and which pairs are touched by locking."""
    pairs = pairs or default_pair_table()
    counts = count_ops_by_type(design)
    entries = {}
    affected = {}
    for canon, partner in pairs.pair_list:
        entries[canon] = counts.get(canon, 0) - counts.get(partner, 0)
        affected[canon] = False
    for mux in iter_key_muxes(design):
        for branch in (mux.when_one, mux.when_zero):
            if isinstance(branch, BinOp):
                affected[pairs.canonical[branch.op]] = True
    return DistributionTable(pairs, entries, affected)


def distance(v: DistributionVector, target: DistributionVector) -> float:
    """Euclidean distance over the indices where the target mask is set."""
    if len(v.values) != len(target.values):
        raise InputError(
            f"vector lengths differ: {len(v.values)} vs {len(target.values)}"
        )
    total = 0.0
    for value, ref, counted in zip(v.values, target.values, target.mask):
        if counted:
            diff = ref - value
            total += diff * diff
    return math.sqrt(total)


def metric_value(current_distance: float, initial_distance: float) -> float:
    """0..100 score; a balanced start that stays balanced counts as secure."""
    if initial_distance == 0.0:
        return 100.0 if current_distance == 0.0 else 0.0
    value = 100.0 * (1.0 - current_distance / initial_distance)
    return min(100.0, max(0.0, value))


def metric(
    initial: DistributionVector,
    current: DistributionVector,
    odt: DistributionTable,
) -> MetricReport:
    """Global and restricted scores for `current` relative to `initial`.

    Both input vectors are the plain per-pair |imbalance| values; the
    restricted variant re-masks them with the table's affected flags.
    """
    if len(initial.values) != len(current.values):
        raise InputError("initial and current vectors must have equal length")
    n = len(initial.values)
    zeros_global = DistributionVector((0,) * n, (True,) * n)
    restricted_mask = tuple(
        odt.affected[c] for c, _ in odt.pairs.pair_list
    )
    if len(restricted_mask) != n:
        raise InputError("vectors do not match the pair table ordering")
    zeros_restricted = DistributionVector((0,) * n, restricted_mask)

    d_init_g = distance(initial, zeros_global)
    d_cur_g = distance(current, zeros_global)
    d_init_r = distance(initial, zeros_restricted)
    d_cur_r = distance(current, zeros_restricted)
    return MetricReport(
        global_value=metric_value(d_cur_g, d_init_g),
        restricted_value=metric_value(d_cur_r, d_init_r),
        initial_distance=d_init_g,
        current_distance_global=d_cur_g,
        current_distance_restricted=d_cur_r,
    )


def metric_for_designs(
    locked: Design, original: Design, pairs: PairTable = None
) -> MetricReport:
    """Metric report comparing a locked design against its original."""
    pairs = pairs or default_pair_table()
    initial = build_odt(original, pairs).vector()
    current_table = build_odt(locked, pairs)
    return metric(initial, current_table.vector(), current_table)
