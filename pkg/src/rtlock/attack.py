"""Oracle-less, data-driven key recovery against operation-locked designs.

The attacker holds only the locked design.  Training data comes from
relocking it with fresh keys the attacker knows (self-referencing): every
new key bit yields one feature record, the pair of operation codes visible
at the tops of its mux branches.  A branch whose top is itself a mux, or
not an operation at all, gets the reserved code 0.  Prediction is a
seeded per-cell vote over those records: a cell votes its majority only
when the count gap is statistically meaningful, nested-code cells fall
back to the vote of all cells sharing their visible operation code, and
everything else is a fair coin.  Key prediction accuracy (KPA) is the
percentage of correctly guessed bits; 50% is the random-guess baseline.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import InputError
from .ir import BinOp, Design, Key, KeyMux, iter_key_muxes
from .locking import relock_observation_rounds
from .pairs import PairTable, default_pair_table

# A cell only casts a majority vote when |ones - zeros| exceeds this many
# standard deviations of a fair coin over the same sample count; below
# that the observations carry no usable signal and the bit is guessed.
SIGNIFICANCE_Z = 3.0


class Locality(NamedTuple):
    """One key bit and the operation-code pair its mux exposes."""

    key_index: int
    c1: int  # code of the branch selected by key bit 1
    c2: int  # code of the branch selected by key bit 0


@dataclass
class ObservationTable:
    """Per-cell key-bit counts collected from training localities."""

    counts: dict = field(default_factory=dict)  # (c1, c2) -> [zeros, ones]
    total: int = 0

    def add(self, c1: int, c2: int, bit: int) -> None:
        cell = self.counts.get((c1, c2))
        if cell is None:
            cell = [0, 0]
            self.counts[(c1, c2)] = cell
        cell[bit] += 1
        self.total += 1

    def merge(self, other: "ObservationTable") -> "ObservationTable":
        for (c1, c2), (zeros, ones) in other.counts.items():
            cell = self.counts.setdefault((c1, c2), [0, 0])
            cell[0] += zeros
            cell[1] += ones
        self.total += other.total
        return self

    def to_json_dict(self) -> dict:
        cells = [
            {"c1": c1, "c2": c2, "zeros": zeros, "ones": ones}
            for (c1, c2), (zeros, ones) in sorted(self.counts.items())
        ]
        return {"totalSamples": self.total, "cells": cells}

    @classmethod
    def from_json_dict(cls, raw: dict) -> "ObservationTable":
        table = cls()
        for cell in raw.get("cells", ()):
            table.counts[(cell["c1"], cell["c2"])] = [cell["zeros"], cell["ones"]]
        table.total = raw.get("totalSamples", sum(
            z + o for z, o in table.counts.values()
        ))
        return table


@dataclass(frozen=True)
class BitDecision:
    key_index: int
    locality: tuple[int, int]
    bit: int
    confidence: float
    basis: str  # "cell" | "context" | "coin"


@dataclass(frozen=True)
class AttackReport:
    bits: tuple[int, ...]
    confidences: tuple[float, ...]
    details: tuple[BitDecision, ...]
    kpa: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "predictedKey": Key(self.bits).to_hex(),
            "keyLength": len(self.bits),
            "kpa": None if self.kpa is None else round(self.kpa, 2),
            "bits": [
                {
                    "index": d.key_index,
                    "c1": d.locality[0],
                    "c2": d.locality[1],
                    "bit": d.bit,
                    "confidence": round(d.confidence, 4),
                    "basis": d.basis,
                }
                for d in self.details
            ],
        }

    def csv_row(self, benchmark: str, algorithm: str, seed: int) -> str:
        kpa_txt = "" if self.kpa is None else f"{self.kpa:.2f}"
        return f"{benchmark},{algorithm},{seed},{kpa_txt}"


def _branch_code(expr, pairs: PairTable) -> int:
    if isinstance(expr, BinOp):
        return pairs.codes[expr.op]
    return 0  # nested mux, constant, or identifier


def extract_localities(design: Design, pairs: PairTable = None) -> list[Locality]:
    """One locality per key bit, ordered by key index."""
    pairs = pairs or default_pair_table()
    out = [
        Locality(
            mux.index,
            _branch_code(mux.when_one, pairs),
            _branch_code(mux.when_zero, pairs),
        )
        for mux in iter_key_muxes(design)
    ]
    out.sort(key=lambda loc: loc.key_index)
    return out


def train(
    samples: Iterable[tuple[Design, Key]], pairs: PairTable = None
) -> ObservationTable:
    """Count locality/key-bit observations over relocked training samples.

    Each sample's key covers the bits added by relocking, i.e. the top
    `key.length` indices of the design; earlier bits belong to the target
    and their values are unknown, so their localities are skipped.
    """
    pairs = pairs or default_pair_table()
    table = ObservationTable()
    for design, key in samples:
        start = design.key_length - key.length
        if start < 0:
            raise InputError(
                f"training key has {key.length} bits but the design only "
                f"has {design.key_length}"
            )
        for loc in extract_localities(design, pairs):
            if loc.key_index >= start:
                table.add(loc.c1, loc.c2, key.bits[loc.key_index - start])
    return table


def train_by_relocking(
    target: Design,
    rounds: int,
    bits_per_round: int,
    seed: int = 0,
    pairs: PairTable = None,
) -> ObservationTable:
    """Self-referencing training: relock the target and tally the new bits.

    Streams locality records straight out of the relocking session, which
    matches `train(relock(...))` with the same seed without materializing
    every relocked copy.
    """
    table = ObservationTable()
    for records in relock_observation_rounds(
        target, rounds, bits_per_round, seed=seed, pairs=pairs
    ):
        for c1, c2, bit in records:
            table.add(c1, c2, bit)
    return table


def _significant(zeros: int, ones: int, z: float) -> bool:
    n = zeros + ones
    return n > 0 and abs(ones - zeros) > z * math.sqrt(n)


def _vote(zeros: int, ones: int) -> tuple[int, float]:
    bit = 1 if ones > zeros else 0
    return bit, max(zeros, ones) / (zeros + ones)


def _decide(table: ObservationTable, c1: int, c2: int, rng, z: float) -> BitDecision:
    cell = table.counts.get((c1, c2))
    if cell is not None and _significant(cell[0], cell[1], z):
        bit, conf = _vote(cell[0], cell[1])
        return BitDecision(-1, (c1, c2), bit, conf, "cell")
    if (c1 == 0) != (c2 == 0):
        # Nested mux on one side: pool every cell that shows the same
        # operation code on the visible side.
        zeros = ones = 0
        side = 1 if c1 == 0 else 0
        want = c2 if c1 == 0 else c1
        for (a, b), (cell_zeros, cell_ones) in table.counts.items():
            if (b if side == 1 else a) == want:
                zeros += cell_zeros
                ones += cell_ones
        if _significant(zeros, ones, z):
            bit, conf = _vote(zeros, ones)
            return BitDecision(-1, (c1, c2), bit, conf, "context")
    return BitDecision(-1, (c1, c2), rng.getrandbits(1), 0.5, "coin")


def predict(
    table: ObservationTable,
    target: Design,
    pairs: PairTable = None,
    seed: int = 0,
    truth: Optional[Key] = None,
    z_threshold: float = SIGNIFICANCE_Z,
) -> AttackReport:
    """Predict the target's key from the observation table.

    Deterministic for a given (table, target, seed); undecidable bits are
    drawn from the seeded generator with confidence 0.5.  When the true
    key is supplied the report carries the KPA score.
    """
    pairs = pairs or default_pair_table()
    rng = random.Random(seed)
    details = []
    for loc in extract_localities(target, pairs):
        decision = _decide(table, loc.c1, loc.c2, rng, z_threshold)
        details.append(
            BitDecision(loc.key_index, decision.locality, decision.bit,
                        decision.confidence, decision.basis)
        )
    bits = tuple(d.bit for d in details)
    confidences = tuple(d.confidence for d in details)
    score = None if truth is None else kpa(bits, truth)
    return AttackReport(bits, confidences, tuple(details), kpa=score)


def kpa(predicted: Sequence[int], truth: Key) -> float:
    """Key prediction accuracy: percentage of matching bits."""
    if len(predicted) != truth.length:
        raise InputError(
            f"predicted {len(predicted)} bits but the key has {truth.length}"
        )
    if truth.length == 0:
        raise InputError("cannot score an empty key")
    matches = sum(1 for p, t in zip(predicted, truth.bits) if p == t)
    return 100.0 * matches / truth.length
