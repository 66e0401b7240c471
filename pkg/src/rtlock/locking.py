"""Key-mux insertion and the four locking algorithms.

A `LockSession` mirrors a design as a mutable graph so a single insertion
is O(1): wrap a selected operation node in a key-controlled mux whose
other branch applies the partner operation to the same operands.  The
correct key bit is drawn uniformly per insertion and decides which branch
holds the real operation.  Every insertion is journaled, so tentative
locks (the heuristic's candidate scan) and per-round relocking can be
undone exactly.

Only operation nodes whose operands are plain identifiers or constants are
selectable.  Wrapping a node whose operands contain further operations or
muxes would duplicate those subtrees in the emitted text, silently skewing
the distribution counts and cloning key-bit references; generated
benchmarks are flat, so there every operation is selectable.  Selection
pools include operations already sitting inside mux branches, which is how
repeated locking produces nested mux trees.
"""

from __future__ import annotations

import math
import random
from typing import Iterator, NamedTuple

from .errors import InputError, LockError, UsageError
from .ir import (
    Assign,
    BinOp,
    Const,
    Design,
    Key,
    KeyMux,
    OpType,
    Var,
)
from .odt import DistributionTable, DistributionVector, metric, metric_value
from .pairs import PairTable, default_pair_table

_LEAF_TYPES = (Const, Var)


class _OpNode:
    __slots__ = ("op", "lhs", "rhs", "parent", "slot")

    def __init__(self, op, lhs, rhs):
        self.op = op
        self.lhs = lhs
        self.rhs = rhs
        self.parent = None
        self.slot = None


class _MuxNode:
    __slots__ = ("index", "one", "zero", "parent", "slot", "code_one", "code_zero")

    def __init__(self, index):
        self.index = index
        self.one = None
        self.zero = None
        self.parent = None
        self.slot = None
        self.code_one = 0
        self.code_zero = 0


class TraceRow(NamedTuple):
    step: int
    pair: str
    pair_mode: bool
    bits_used: int
    metric_global: float


TRACE_HEADER = "step,pair,pair_mode,bits_used,metric_global"


def trace_csv(rows) -> str:
    lines = [TRACE_HEADER]
    for r in rows:
        lines.append(
            f"{r.step},{r.pair},{int(r.pair_mode)},{r.bits_used},{r.metric_global:.6f}"
        )
    return "\n".join(lines) + "\n"


class LockSession:
    """Mutable locking state for one design; single-writer."""

    def __init__(self, design: Design, pairs: PairTable = None, seed: int = 0):
        self.pairs = pairs or default_pair_table()
        self.design_in = design
        self.rng = random.Random(seed)
        self.base_key_length = design.key_length
        self.roots: list = []
        self.ops: dict[OpType, list] = {t: [] for t in OpType}
        self.initial_ops: list[_OpNode] = []
        self.muxes: list[_MuxNode] = []
        self.odt: dict[OpType, int] = {c: 0 for c, _ in self.pairs.pair_list}
        self.affected: set[OpType] = set()
        self.new_bits: list[int] = []
        self.journal: list = []
        self.trace: list[TraceRow] = []
        self.warnings: list[str] = []
        self.budget_exceeded = False
        self._counts = {t: 0 for t in OpType}
        for assign in design.assigns:
            self.roots.append(self._thaw(assign.rhs, None, len(self.roots)))
        self.muxes.sort(key=lambda m: m.index)
        if [m.index for m in self.muxes] != list(range(self.base_key_length)):
            raise InputError("design key indices are not contiguous from 0")
        for canon, partner in self.pairs.pair_list:
            self.odt[canon] = self._counts[canon] - self._counts[partner]
        self.initial_vector = tuple(
            abs(self.odt[c]) for c, _ in self.pairs.pair_list
        )
        self._initial_norm = _l2norm(self.initial_vector)

    # --- construction / extraction ---

    def _thaw(self, expr, parent, slot):
        if isinstance(expr, BinOp):
            node = _OpNode(expr.op, None, None)
            node.parent = parent
            node.slot = slot
            node.lhs = self._thaw(expr.lhs, node, "lhs")
            node.rhs = self._thaw(expr.rhs, node, "rhs")
            self._counts[expr.op] += 1
            if isinstance(node.lhs, _LEAF_TYPES) and isinstance(node.rhs, _LEAF_TYPES):
                self.ops[expr.op].append(node)
                self.initial_ops.append(node)
            return node
        if isinstance(expr, KeyMux):
            mux = _MuxNode(expr.index)
            mux.parent = parent
            mux.slot = slot
            mux.one = self._thaw(expr.when_one, mux, "one")
            mux.zero = self._thaw(expr.when_zero, mux, "zero")
            mux.code_one = self._branch_code(mux.one)
            mux.code_zero = self._branch_code(mux.zero)
            for branch in (mux.one, mux.zero):
                if isinstance(branch, _OpNode):
                    self.affected.add(self.pairs.canonical[branch.op])
            self.muxes.append(mux)
            return mux
        return expr  # leaves are shared with the immutable design

    def _branch_code(self, node) -> int:
        if isinstance(node, _OpNode):
            return self.pairs.codes[node.op]
        return 0

    def _freeze_expr(self, node):
        if isinstance(node, _OpNode):
            return BinOp(node.op, self._freeze_expr(node.lhs), self._freeze_expr(node.rhs))
        if isinstance(node, _MuxNode):
            return KeyMux(
                node.index, self._freeze_expr(node.one), self._freeze_expr(node.zero)
            )
        return node

    def freeze(self) -> Design:
        src = self.design_in
        assigns = tuple(
            Assign(a.target, self._freeze_expr(root))
            for a, root in zip(src.assigns, self.roots)
        )
        return Design(
            src.name, src.ports, src.wires, assigns, self.base_key_length + len(self.new_bits)
        )

    def key(self) -> Key:
        """Bits added by this session, in insertion (index) order."""
        return Key(tuple(self.new_bits))

    @property
    def bits_used(self) -> int:
        return len(self.new_bits)

    # --- bookkeeping snapshots ---

    def odt_signed(self, t: OpType) -> int:
        canon = self.pairs.canonical[t]
        value = self.odt[canon]
        return value if t is canon else -value

    def distribution_table(self) -> DistributionTable:
        return DistributionTable(
            self.pairs,
            dict(self.odt),
            {c: (c in self.affected) for c, _ in self.pairs.pair_list},
        )

    def current_vector(self) -> DistributionVector:
        values = tuple(abs(self.odt[c]) for c, _ in self.pairs.pair_list)
        return DistributionVector(values, (True,) * len(values))

    def metric_global(self) -> float:
        current = _l2norm(abs(self.odt[c]) for c, _ in self.pairs.pair_list)
        return metric_value(current, self._initial_norm)

    def metric_report(self):
        initial = DistributionVector(
            self.initial_vector, (True,) * len(self.initial_vector)
        )
        return metric(initial, self.current_vector(), self.distribution_table())

    # --- journaled insertion ---

    def mark(self) -> int:
        return len(self.journal)

    def _insert(self, real: _OpNode, dummy_op: OpType) -> None:
        bit = self.rng.getrandbits(1)
        dummy = _OpNode(dummy_op, real.lhs, real.rhs)
        mux = _MuxNode(self.base_key_length + len(self.new_bits))
        parent = real.parent
        slot = real.slot
        code_real = self.pairs.codes[real.op]
        code_dummy = self.pairs.codes[dummy_op]
        if bit:
            mux.one = real
            mux.zero = dummy
            mux.code_one = code_real
            mux.code_zero = code_dummy
            real.slot = "one"
            dummy.slot = "zero"
        else:
            mux.one = dummy
            mux.zero = real
            mux.code_one = code_dummy
            mux.code_zero = code_real
            real.slot = "zero"
            dummy.slot = "one"
        real.parent = mux
        dummy.parent = mux
        mux.parent = parent
        mux.slot = slot
        prev_code = None
        if parent is None:
            self.roots[slot] = mux
        else:
            setattr(parent, slot, mux)
            if isinstance(parent, _MuxNode):
                if slot == "one":
                    prev_code = parent.code_one
                    parent.code_one = 0
                else:
                    prev_code = parent.code_zero
                    parent.code_zero = 0
        canon = self.pairs.canonical[dummy_op]
        delta = 1 if dummy_op is canon else -1
        self.odt[canon] += delta
        newly_affected = canon not in self.affected
        if newly_affected:
            self.affected.add(canon)
        self.ops[dummy_op].append(dummy)
        self.muxes.append(mux)
        self.new_bits.append(bit)
        self.journal.append(
            (mux, real, dummy, parent, slot, prev_code, canon, delta, newly_affected)
        )

    def _undo_one(self) -> None:
        mux, real, dummy, parent, slot, prev_code, canon, delta, newly = self.journal.pop()
        if parent is None:
            self.roots[slot] = real
        else:
            setattr(parent, slot, real)
            if prev_code is not None:
                if slot == "one":
                    parent.code_one = prev_code
                else:
                    parent.code_zero = prev_code
        real.parent = parent
        real.slot = slot
        self.ops[dummy.op].pop()
        self.muxes.pop()
        self.new_bits.pop()
        self.odt[canon] -= delta
        if newly:
            self.affected.discard(canon)

    def undo_to(self, mark: int) -> None:
        while len(self.journal) > mark:
            self._undo_one()

    # --- the shared locking step ---

    def _select(self, t: OpType) -> _OpNode:
        pool = self.ops[t]
        if not pool:
            raise LockError(f"no lockable operation of type {t.value!r}")
        return pool[self.rng.randrange(len(pool))]

    def lock_step(self, t: OpType, pair_mode: bool = False) -> int:
        """One locking step for type t; returns the number of key bits used.

        With a positive imbalance (or negative, symmetrically) a single
        partner dummy is paired onto one random operation, moving the
        entry one step toward zero.  At zero imbalance, or when pair_mode
        is set, both members get a dummy so the balance is unchanged.
        """
        partner = self.pairs.partner[t]
        value = self.odt_signed(t)
        if value > 0 and not pair_mode:
            self._insert(self._select(t), partner)
            return 1
        if value < 0 and not pair_mode:
            self._insert(self._select(partner), t)
            return 1
        node_i = self._select(t)
        node_j = self._select(partner)
        self._insert(node_i, partner)
        self._insert(node_j, t)
        return 2

    def single_eligible(self, pair) -> bool:
        canon, partner = pair
        value = self.odt[canon]
        if value > 0:
            return bool(self.ops[canon])
        if value < 0:
            return bool(self.ops[partner])
        return bool(self.ops[canon]) and bool(self.ops[partner])

    def pair_eligible(self, pair) -> bool:
        return bool(self.ops[pair[0]]) and bool(self.ops[pair[1]])

    def _log(self, pair, pair_mode: bool) -> None:
        self.trace.append(
            TraceRow(
                len(self.trace),
                f"{pair[0].value}|{pair[1].value}",
                pair_mode,
                self.bits_used,
                self.metric_global(),
            )
        )


def _l2norm(values) -> float:
    return math.sqrt(sum(v * v for v in values))


def _check_budget(budget: int) -> None:
    if budget < 0:
        raise UsageError(f"key budget must be non-negative, got {budget}")


def lock_assure(
    design: Design,
    budget: int,
    seed: int = 0,
    selection: str = "serial",
    pairs: PairTable = None,
) -> LockSession:
    """Baseline locking: wrap `budget` operations, no balancing logic.

    Serial selection walks the design in textual order (first assign
    first, leftmost-innermost operation first); random selection draws
    uniformly without replacement.  Each chosen operation gets a single
    key mux with its partner as the dummy.
    """
    _check_budget(budget)
    if selection not in ("serial", "random"):
        raise UsageError(f"unknown selection mode {selection!r}")
    session = LockSession(design, pairs, seed)
    available = len(session.initial_ops)
    if available == 0 and budget > 0:
        raise LockError("design has no lockable operations")
    if budget > available:
        session.warnings.append(
            f"budget {budget} exceeds the {available} lockable operations; locking all"
        )
        budget = available
    if selection == "serial":
        chosen = session.initial_ops[:budget]
    else:
        order = session.rng.sample(range(available), budget)
        chosen = [session.initial_ops[i] for i in order]
    for node in chosen:
        session._insert(node, session.pairs.partner[node.op])
        session._log(session.pairs.pair_of(node.op), False)
    return session


def lock_era(
    design: Design, budget: int, seed: int = 0, pairs: PairTable = None
) -> LockSession:
    """Exact balancing locker: secure output even past the key budget.

    Repeatedly picks a random pair and member and locks that type until
    its imbalance hits zero, so every touched pair ends balanced and the
    restricted metric is exactly 100.  A pick that is already balanced
    spends one pair-mode step (two bits, balance preserved) so budget
    consumption always progresses.
    """
    _check_budget(budget)
    session = LockSession(design, pairs, seed)
    present = [
        pair
        for pair in session.pairs.pair_list
        if session.ops[pair[0]] or session.ops[pair[1]]
    ]
    if not present and budget > 0:
        raise LockError("design has no lockable operations")
    stalled = 0
    while session.bits_used < budget:
        pair = present[session.rng.randrange(len(present))]
        t = pair[session.rng.getrandbits(1)]
        if session.odt_signed(t) == 0:
            if session.pair_eligible(pair):
                session.lock_step(t, pair_mode=True)
                session._log(pair, True)
                stalled = 0
            else:
                stalled += 1
                if stalled > 8 * len(present):
                    raise LockError(
                        "cannot spend remaining budget without unbalancing: "
                        f"no pair-mode candidates (type {t.value!r})"
                    )
        else:
            while session.odt_signed(t) != 0:
                session.lock_step(t, pair_mode=False)
                session._log(pair, False)
            stalled = 0
    session.budget_exceeded = session.bits_used > budget
    return session


def lock_hra(
    design: Design,
    budget: int,
    seed: int = 0,
    pairs: PairTable = None,
    greedy_only: bool = False,
) -> LockSession:
    """Heuristic balancing locker: stays within the key budget (+1 at most).

    Each round flips a fair coin.  Heads locks a randomly chosen pair in
    pair mode (a reversibility countermeasure; balance unchanged).  Tails
    tentatively locks each pair's canonical member, scores the global
    metric, undoes, and commits the best candidate (ties go to the first
    in the shuffled order).  When the random branch draws a pair with no
    usable operations on both sides it falls through to the greedy scan,
    so progress never stalls on sparse designs.  `greedy_only` forces the
    greedy branch every round.
    """
    _check_budget(budget)
    session = LockSession(design, pairs, seed)
    pair_list = session.pairs.pair_list
    while session.bits_used < budget:
        committed = False
        random_branch = False if greedy_only else bool(session.rng.getrandbits(1))
        if random_branch:
            pair = pair_list[session.rng.randrange(len(pair_list))]
            if session.pair_eligible(pair):
                session.lock_step(pair[0], pair_mode=True)
                session._log(pair, True)
                committed = True
        if not committed:
            order = list(range(len(pair_list)))
            session.rng.shuffle(order)
            best_pair = None
            best_metric = -1.0
            for idx in order:
                pair = pair_list[idx]
                if not session.single_eligible(pair):
                    continue
                mark = session.mark()
                session.lock_step(pair[0], pair_mode=False)
                candidate = session.metric_global()
                session.undo_to(mark)
                if candidate > best_metric:
                    best_metric = candidate
                    best_pair = pair
            if best_pair is None:
                raise LockError("design has no lockable operations")
            session.lock_step(best_pair[0], pair_mode=False)
            session._log(best_pair, False)
    session.budget_exceeded = session.bits_used > budget
    return session


def relock(
    design: Design,
    rounds: int,
    bits_per_round: int,
    seed: int = 0,
    pairs: PairTable = None,
) -> Iterator[tuple[Design, Key]]:
    """Independently relocked copies with fresh known keys.

    Each round wraps `bits_per_round` distinct operations chosen uniformly
    at random over everything in the design, including operations inside
    existing mux branches.  Pre-existing key bits keep their indices; the
    returned key covers only the freshly added bits, which start at index
    `design.key_length`.
    """
    if rounds < 0 or bits_per_round < 0:
        raise UsageError("rounds and bits-per-round must be non-negative")
    session = LockSession(design, pairs, seed)
    available = len(session.initial_ops)
    if available == 0 and rounds > 0 and bits_per_round > 0:
        raise LockError("design has no lockable operations")
    bits = min(bits_per_round, available)
    if bits < bits_per_round:
        session.warnings.append(
            f"bits-per-round {bits_per_round} exceeds the {available} lockable "
            f"operations; using {bits}"
        )

    def rounds_iter():
        for _ in range(rounds):
            mark = session.mark()
            for i in session.rng.sample(range(available), bits):
                node = session.initial_ops[i]
                session._insert(node, session.pairs.partner[node.op])
            yield session.freeze(), session.key()
            session.undo_to(mark)

    return rounds_iter()


def relock_observation_rounds(
    design: Design,
    rounds: int,
    bits_per_round: int,
    seed: int = 0,
    pairs: PairTable = None,
) -> Iterator[list[tuple[int, int, int]]]:
    """Streaming variant of `relock` for attack training.

    Yields, per round, a list of (branch-one code, branch-zero code,
    key bit) for the freshly inserted muxes only, without materializing
    the relocked designs.  Equivalent to extracting the new-bit feature
    records from `relock` with the same seed.
    """
    if rounds < 0 or bits_per_round < 0:
        raise UsageError("rounds and bits-per-round must be non-negative")
    session = LockSession(design, pairs, seed)
    available = len(session.initial_ops)
    if available == 0 and rounds > 0 and bits_per_round > 0:
        raise LockError("design has no lockable operations")
    bits = min(bits_per_round, available)
    base = session.base_key_length
    partner = session.pairs.partner
    initial_ops = session.initial_ops

    def rounds_iter():
        for _ in range(rounds):
            mark = session.mark()
            for i in session.rng.sample(range(available), bits):
                node = initial_ops[i]
                session._insert(node, partner[node.op])
            muxes = session.muxes
            new_bits = session.new_bits
            yield [
                (muxes[base + j].code_one, muxes[base + j].code_zero, new_bits[j])
                for j in range(bits)
            ]
            session.undo_to(mark)

    return rounds_iter()


def is_learning_resilient(design: Design, pairs: PairTable = None) -> bool:
    """True iff every pair touched by locking has equal member counts."""
    from .odt import build_odt

    table = build_odt(design, pairs)
    return all(
        table.entries[canon] == 0
        for canon, _ in table.pairs.pair_list
        if table.affected[canon]
    )
