import random

import pytest

from rtlock import (
    BinOp,
    Key,
    KeyMux,
    LockError,
    LockSession,
    OpType,
    UsageError,
    apply_key,
    build_odt,
    count_ops,
    emit,
    generate_from_string,
    is_learning_resilient,
    lock_assure,
    lock_era,
    lock_hra,
    relock,
    structural_equal,
)
from rtlock.locking import TRACE_HEADER, trace_csv

from conftest import flat_design, random_flat_design

ADD = OpType.ADD
SUB = OpType.SUB
MUL = OpType.MUL
SHL = OpType.SHL


# --- the shared locking step ---

def test_lock_step_reduces_positive_imbalance():
    session = LockSession(flat_design({ADD: 2}), seed=1)
    assert session.odt_signed(ADD) == 2
    used = session.lock_step(ADD)
    assert used == 1
    assert session.odt_signed(ADD) == 1
    assert session.bits_used == 1
    assert count_ops(session.freeze(), SUB) == 1


def test_lock_step_reduces_negative_imbalance():
    session = LockSession(flat_design({SUB: 3}), seed=1)
    assert session.odt_signed(ADD) == -3
    used = session.lock_step(ADD)  # deficit of add: wrap a sub with an add dummy
    assert used == 1
    assert session.odt_signed(ADD) == -2
    assert count_ops(session.freeze(), ADD) == 1


def test_lock_step_balanced_locks_both_members():
    session = LockSession(flat_design({ADD: 1, SUB: 1}), seed=1)
    used = session.lock_step(ADD)
    assert used == 2
    assert session.odt_signed(ADD) == 0
    locked = session.freeze()
    assert count_ops(locked, ADD) == 2
    assert count_ops(locked, SUB) == 2


def test_lock_step_pair_mode_ignores_imbalance():
    session = LockSession(flat_design({ADD: 4, SUB: 1}), seed=1)
    used = session.lock_step(ADD, pair_mode=True)
    assert used == 2
    assert session.odt_signed(ADD) == 3  # unchanged


def test_lock_step_error_names_missing_type():
    session = LockSession(flat_design({ADD: 2}), seed=1)
    with pytest.raises(LockError) as err:
        session.lock_step(MUL)
    assert "mul" in str(err.value)


def test_lock_step_conservation_property():
    rng = random.Random(5)
    for _ in range(40):
        d = random_flat_design(rng, max_ops=12)
        session = LockSession(d, seed=rng.randrange(2**32))
        candidates = [t for t in OpType if session.ops[t]]
        t = rng.choice(candidates)
        pair_mode = rng.random() < 0.3
        pair = session.pairs.pair_of(t)
        if pair_mode and not session.pair_eligible(pair):
            continue
        if not pair_mode and not session.single_eligible(pair):
            continue
        before = abs(session.odt_signed(t))
        bits_before = session.bits_used
        used = session.lock_step(t, pair_mode)
        after = abs(session.odt_signed(t))
        assert session.bits_used - bits_before == used
        if used == 1:
            assert after == before - 1
        else:
            assert after == before


def test_insert_orientation_is_randomized():
    session = LockSession(flat_design({ADD: 64}), seed=9)
    for _ in range(32):
        session.lock_step(ADD)
    locked = session.freeze()
    orientations = set()
    for assign in locked.assigns:
        if isinstance(assign.rhs, KeyMux):
            top = assign.rhs.when_one
            if isinstance(top, BinOp):
                orientations.add(top.op)
    assert orientations == {ADD, SUB}


def test_undo_restores_everything():
    d = flat_design({ADD: 3, SHL: 2})
    session = LockSession(d, seed=4)
    before = emit(session.freeze())
    odt_before = dict(session.odt)
    mark = session.mark()
    session.lock_step(ADD)
    session.lock_step(SHL, pair_mode=False)
    session.undo_to(mark)
    assert emit(session.freeze()) == before
    assert session.odt == odt_before
    assert session.bits_used == 0
    assert not session.affected


# --- exact balancing (era) ---

def test_era_overshoots_budget_to_stay_balanced():
    session = lock_era(flat_design({ADD: 2}), budget=1, seed=0)
    assert session.bits_used == 2
    assert session.budget_exceeded
    assert session.odt_signed(ADD) == 0


def test_era_full_imbalance_needs_full_budget():
    d = generate_from_string("imbalanced:add:2046")
    session = lock_era(d, budget=2046, seed=1)
    assert session.bits_used == 2046
    assert not session.budget_exceeded
    locked = session.freeze()
    assert count_ops(locked, ADD) == 2046
    assert count_ops(locked, SUB) == 2046


def test_era_balanced_design_spends_budget_in_pairs():
    session = lock_era(flat_design({ADD: 2, SUB: 2}), budget=4, seed=2)
    assert session.bits_used == 4
    assert all(row.pair_mode for row in session.trace)
    assert session.metric_report().restricted_value == 100.0


def test_era_restricted_metric_and_resilience_across_seeds():
    rng = random.Random(77)
    for _ in range(15):
        d = random_flat_design(rng, max_ops=20)
        budget = rng.randint(0, 30)
        session = lock_era(d, budget, seed=rng.randrange(2**32))
        assert session.metric_report().restricted_value == 100.0
        assert is_learning_resilient(session.freeze())


def test_era_rejects_empty_design():
    with pytest.raises(LockError):
        lock_era(flat_design({}), budget=2, seed=0)


def _balanced_endpoints(state):
    """All final count profiles reachable with single-insertion steps."""
    seen = set()
    endpoints = set()
    stack = [state]
    while stack:
        current = stack.pop()
        if current in seen:
            continue
        seen.add(current)
        if all(a == b for a, b in current):
            endpoints.add(current)
            continue
        for i, (a, b) in enumerate(current):
            if a > b:
                nxt = current[:i] + ((a, b + 1),) + current[i + 1:]
            elif b > a:
                nxt = current[:i] + ((a + 1, b),) + current[i + 1:]
            else:
                continue
            stack.append(nxt)
    return endpoints


def test_era_matches_enumeration_oracle_on_small_designs():
    # two unbalanced pairs, 8 operations total
    d = flat_design({ADD: 3, SUB: 1, SHL: 3, OpType.SHR: 1})
    initial = ((3, 1), (3, 1))
    endpoints = _balanced_endpoints(initial)
    assert endpoints == {((3, 3), (3, 3))}  # enumeration confirms uniqueness
    budget = 4  # total imbalance
    exact_runs = 0
    for seed in range(24):
        session = lock_era(d, budget, seed=seed)
        locked = session.freeze()
        for t, tp in ((ADD, SUB), (SHL, OpType.SHR)):
            if build_odt(locked).affected[t]:
                assert count_ops(locked, t) == count_ops(locked, tp)
        singles_only = all(not row.pair_mode for row in session.trace)
        if session.bits_used == budget and singles_only:
            # no pair-mode filler steps: the endpoint must be the unique one
            exact_runs += 1
            assert count_ops(locked, ADD) == 3
            assert count_ops(locked, SUB) == 3
            assert count_ops(locked, SHL) == 3
            assert count_ops(locked, OpType.SHR) == 3
    assert exact_runs > 0


# --- heuristic balancing (hra) ---

def test_hra_budget_zero_is_identity():
    d = flat_design({ADD: 5})
    session = lock_hra(d, budget=0, seed=3)
    assert session.bits_used == 0
    assert structural_equal(session.freeze(), d)


def test_hra_greedy_only_reaches_full_balance_in_exact_steps():
    # two-pair imbalance of 25 and 10: steepest ascent needs 35 single bits
    d = flat_design({ADD: 25, SHL: 10})
    session = lock_hra(d, budget=35, seed=6, greedy_only=True)
    assert session.bits_used == 35
    assert session.metric_global() == 100.0
    metrics = [row.metric_global for row in session.trace]
    assert metrics == sorted(metrics)
    assert metrics[-1] == 100.0
    assert all(not row.pair_mode for row in session.trace)


def test_hra_respects_budget_within_one_bit():
    rng = random.Random(13)
    for _ in range(12):
        d = random_flat_design(rng, max_ops=18)
        budget = rng.randint(0, 24)
        session = lock_hra(d, budget, seed=rng.randrange(2**32))
        assert session.bits_used <= budget + 1
        if session.bits_used == budget + 1:
            assert session.budget_exceeded


def test_hra_greedy_steps_never_decrease_global_metric():
    rng = random.Random(14)
    for _ in range(10):
        d = random_flat_design(rng, max_ops=20)
        session = lock_hra(d, rng.randint(1, 25), seed=rng.randrange(2**32))
        greedy = [row.metric_global for row in session.trace if not row.pair_mode]
        assert greedy == sorted(greedy)


def test_hra_partial_budget_leaves_imbalance():
    d = generate_from_string("imbalanced:add:2046")
    session = lock_hra(d, budget=1535, seed=8)
    assert session.bits_used <= 1536
    assert session.odt_signed(ADD) > 0
    assert session.metric_global() < 100.0


def test_hra_random_branch_takes_pair_steps_when_possible():
    d = flat_design({ADD: 30, SUB: 30})
    session = lock_hra(d, budget=20, seed=15)
    assert any(row.pair_mode for row in session.trace)


# --- baseline locking (assure) ---

def chain_design():
    from rtlock import Assign, Design, Port, Var, Wire

    ports = (Port("a", "input", 8), Port("b", "input", 8), Port("c", "input", 8),
             Port("d", "input", 8), Port("e", "input", 8), Port("out", "output", 8))
    wires = (Wire("w_0", 8), Wire("w_1", 8), Wire("w_2", 8))
    assigns = (
        Assign("w_0", BinOp(ADD, Var("a"), Var("b"))),
        Assign("w_1", BinOp(ADD, Var("w_0"), Var("c"))),
        Assign("w_2", BinOp(ADD, Var("w_1"), Var("d"))),
        Assign("out", BinOp(ADD, Var("w_2"), Var("e"))),
    )
    return Design("chain", ports, wires, assigns)


def test_assure_serial_locks_textual_prefix():
    session = lock_assure(chain_design(), budget=2, seed=0, selection="serial")
    locked = session.freeze()
    assert isinstance(locked.assigns[0].rhs, KeyMux)
    assert isinstance(locked.assigns[1].rhs, KeyMux)
    assert isinstance(locked.assigns[2].rhs, BinOp)
    assert isinstance(locked.assigns[3].rhs, BinOp)


def test_assure_random_is_deterministic_under_seed():
    d = flat_design({ADD: 12, MUL: 4})
    first = emit(lock_assure(d, 6, seed=42, selection="random").freeze())
    second = emit(lock_assure(d, 6, seed=42, selection="random").freeze())
    assert first == second
    other = emit(lock_assure(d, 6, seed=43, selection="random").freeze())
    assert other != first


def test_assure_budget_overflow_locks_all_and_warns():
    d = flat_design({ADD: 3})
    session = lock_assure(d, budget=99, seed=0, selection="serial")
    assert session.bits_used == 3
    assert session.warnings
    assert "3" in session.warnings[0]


def test_assure_rejects_unknown_selection():
    with pytest.raises(UsageError):
        lock_assure(flat_design({ADD: 2}), 1, selection="sideways")


def test_negative_budget_rejected():
    with pytest.raises(UsageError):
        lock_assure(flat_design({ADD: 2}), -1)
    with pytest.raises(UsageError):
        lock_era(flat_design({ADD: 2}), -1)
    with pytest.raises(UsageError):
        lock_hra(flat_design({ADD: 2}), -1)


# --- functional preservation and determinism across algorithms ---

def _lock_any(name, design, budget, seed):
    if name == "assure-serial":
        return lock_assure(design, budget, seed, selection="serial")
    if name == "assure-random":
        return lock_assure(design, budget, seed, selection="random")
    if name == "era":
        return lock_era(design, budget, seed)
    return lock_hra(design, budget, seed)


@pytest.mark.parametrize("algo", ["assure-serial", "assure-random", "era", "hra"])
def test_functional_preservation(algo):
    rng = random.Random(hash(algo) & 0xFFFF)
    for _ in range(10):
        d = random_flat_design(rng, max_ops=16)
        budget = rng.randint(0, 12)
        session = _lock_any(algo, d, budget, rng.randrange(2**32))
        locked = session.freeze()
        assert structural_equal(apply_key(locked, session.key()), d)


@pytest.mark.parametrize("algo", ["assure-serial", "assure-random", "era", "hra"])
def test_locked_output_bytes_deterministic(algo):
    d = flat_design({ADD: 9, SHL: 5, OpType.EQ: 2})
    one = emit(_lock_any(algo, d, 7, 123).freeze())
    two = emit(_lock_any(algo, d, 7, 123).freeze())
    assert one == two


# --- relocking ---

def test_relock_produces_requested_rounds():
    d = flat_design({ADD: 6})
    samples = list(relock(d, rounds=5, bits_per_round=3, seed=1))
    assert len(samples) == 5
    for sample, key in samples:
        assert sample.key_length == 3
        assert key.length == 3


def test_relock_zero_rounds():
    assert list(relock(flat_design({ADD: 2}), 0, 2, seed=1)) == []


def test_relock_preserves_function_through_existing_key():
    d = flat_design({ADD: 5, SUB: 2})
    base = lock_assure(d, 4, seed=9, selection="random")
    locked = base.freeze()
    for sample, fresh_key in relock(locked, rounds=4, bits_per_round=3, seed=11):
        assert sample.key_length == locked.key_length + 3
        full = Key(base.key().bits + fresh_key.bits)
        assert structural_equal(apply_key(sample, full), d)


def test_relock_nests_muxes_over_locked_pairs():
    d = flat_design({ADD: 4})
    locked = lock_assure(d, 4, seed=2, selection="serial").freeze()
    total_ops = 8  # 4 real + 4 dummies
    nested = False
    for sample, _ in relock(locked, rounds=3, bits_per_round=total_ops, seed=3):
        for assign in sample.assigns:
            stack = [assign.rhs]
            while stack:
                node = stack.pop()
                if isinstance(node, KeyMux):
                    if isinstance(node.when_one, KeyMux) or isinstance(node.when_zero, KeyMux):
                        nested = True
                    stack.extend((node.when_one, node.when_zero))
                elif isinstance(node, BinOp):
                    stack.extend((node.lhs, node.rhs))
    assert nested


def test_relock_keys_differ_between_rounds():
    d = flat_design({ADD: 8})
    samples = list(relock(d, rounds=6, bits_per_round=8, seed=5))
    keys = {key.bits for _, key in samples}
    designs = {emit(sample) for sample, _ in samples}
    assert len(keys) > 1
    assert len(designs) > 1


def test_relock_caps_bits_at_available_operations():
    d = flat_design({ADD: 3})
    samples = list(relock(d, rounds=2, bits_per_round=50, seed=6))
    for sample, key in samples:
        assert key.length == 3


# --- learning-resilience predicate ---

def test_learning_resilient_vacuous_without_locking():
    assert is_learning_resilient(flat_design({ADD: 9}))


def test_learning_resilient_false_after_serial_on_biased_design():
    d = generate_from_string("imbalanced:add:64")
    locked = lock_assure(d, 48, seed=1, selection="serial").freeze()
    assert not is_learning_resilient(locked)


def test_learning_resilient_true_for_era_even_on_biased_design():
    d = generate_from_string("imbalanced:add:64")
    locked = lock_era(d, 48, seed=1).freeze()
    assert is_learning_resilient(locked)


# --- traces ---

def test_trace_rows_and_csv_shape():
    session = lock_era(flat_design({ADD: 3}), budget=2, seed=0)
    assert len(session.trace) == session.bits_used  # singles only on this input
    text = trace_csv(session.trace)
    lines = text.strip().split("\n")
    assert lines[0] == TRACE_HEADER
    assert len(lines) == len(session.trace) + 1
    first = lines[1].split(",")
    assert first[0] == "0"
    assert first[1] == "add|sub"


def test_session_key_indices_stay_contiguous():
    from rtlock import validate_design

    d = flat_design({ADD: 6, MUL: 3})
    session = lock_hra(d, 7, seed=21)
    validate_design(session.freeze())
