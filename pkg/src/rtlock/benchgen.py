"""Synthetic benchmark generation.

Three kinds: a single-type reduction network ("imbalanced", the worst case
for balance-based security), the same network shape with two partner types
interleaved one-to-one ("balanced"), and a random forest of two-operand
assignments drawn from a weighted operation mix.  Every generated design
is flat: one operation per assign over declared signals, so operation
counts are exact and every operation is lockable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import UsageError
from .ir import (
    Assign,
    BinOp,
    Design,
    OpType,
    Port,
    Var,
    Wire,
    op_from_name,
)

KINDS = ("imbalanced-network", "balanced-network", "random-mixed")

_KIND_ALIASES = {
    "imbalanced": "imbalanced-network",
    "balanced": "balanced-network",
    "random": "random-mixed",
    "random-mixed": "random-mixed",
    "imbalanced-network": "imbalanced-network",
    "balanced-network": "balanced-network",
}

# Deliberately skewed default mix: several one-sided pairs make the
# baseline locker's bias plainly learnable, which is what a stress
# benchmark is for.
DEFAULT_RANDOM_MIX = (
    (OpType.ADD, 6.0),
    (OpType.SUB, 1.0),
    (OpType.MUL, 3.0),
    (OpType.SHL, 2.0),
    (OpType.BIT_AND, 2.0),
    (OpType.LT, 1.0),
)


@dataclass(frozen=True)
class BenchSpec:
    kind: str
    op_count: int
    op_mix: tuple = DEFAULT_RANDOM_MIX  # ((OpType, weight), ...)
    seed: int = 0
    width: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown benchmark kind {self.kind!r}")
        if self.op_count < 1:
            raise UsageError("op-count must be at least 1")
        if self.width < 1:
            raise UsageError("width must be at least 1")
        weights = [w for _, w in self.op_mix]
        if not self.op_mix or any(w < 0 for w in weights) or not any(weights):
            raise UsageError("op-mix weights must be non-negative, not all zero")
        if self.kind == "balanced-network" and len(self.op_mix) != 2:
            raise UsageError("balanced-network needs exactly two operation types")


def parse_bench_spec(text: str, seed: int = 0, width: int = 8) -> BenchSpec:
    """Parse CLI spec strings.

    Forms: `imbalanced:<op>:<count>`, `balanced:<op>-<op>:<count-per-type>`,
    `random-mixed:<count>[:op=weight,op=weight,...]`.
    """
    parts = text.strip().split(":")
    kind = _KIND_ALIASES.get(parts[0])
    if kind is None:
        raise UsageError(f"unknown benchmark kind {parts[0]!r} in {text!r}")
    try:
        if kind == "imbalanced-network":
            if len(parts) != 3:
                raise UsageError(f"expected imbalanced:<op>:<count>, got {text!r}")
            op = op_from_name(parts[1])
            return BenchSpec(kind, _parse_count(parts[2]), ((op, 1.0),), seed, width)
        if kind == "balanced-network":
            if len(parts) != 3 or "-" not in parts[1]:
                raise UsageError(f"expected balanced:<op>-<op>:<count>, got {text!r}")
            a_name, b_name = parts[1].split("-", 1)
            mix = ((op_from_name(a_name), 1.0), (op_from_name(b_name), 1.0))
            return BenchSpec(kind, _parse_count(parts[2]), mix, seed, width)
        if len(parts) == 2:
            return BenchSpec(kind, _parse_count(parts[1]), DEFAULT_RANDOM_MIX, seed, width)
        if len(parts) == 3:
            mix = []
            for item in parts[2].split(","):
                name, _, weight = item.partition("=")
                mix.append((op_from_name(name), float(weight) if weight else 1.0))
            return BenchSpec(kind, _parse_count(parts[1]), tuple(mix), seed, width)
        raise UsageError(f"expected random-mixed:<count>[:mix], got {text!r}")
    except (UsageError,):
        raise
    except Exception as exc:
        raise UsageError(f"bad benchmark spec {text!r}: {exc}") from None


def _parse_count(text: str) -> int:
    try:
        count = int(text)
    except ValueError:
        raise UsageError(f"benchmark op-count must be an integer, got {text!r}") from None
    if count < 1:
        raise UsageError("benchmark op-count must be at least 1")
    return count


def generate(spec: BenchSpec) -> Design:
    """Deterministically generate the design described by `spec`."""
    if spec.kind == "imbalanced-network":
        op = spec.op_mix[0][0]
        return _reduction_network(
            f"N_{spec.op_count}", spec.op_count, lambda i: op, spec.width
        )
    if spec.kind == "balanced-network":
        first, second = spec.op_mix[0][0], spec.op_mix[1][0]
        return _reduction_network(
            f"N_{spec.op_count}",
            2 * spec.op_count,
            lambda i: first if i % 2 == 0 else second,
            spec.width,
        )
    return _random_forest(spec)


def generate_from_string(text: str, seed: int = 0, width: int = 8) -> Design:
    return generate(parse_bench_spec(text, seed=seed, width=width))


def _reduction_network(name, total_ops, op_for_index, width) -> Design:
    """Pairwise reduction tree over total_ops + 1 inputs; flat assigns."""
    inputs = [f"in_{i}" for i in range(total_ops + 1)]
    ports = [Port(n, "input", width) for n in inputs]
    ports.append(Port("out", "output", width))
    wires = []
    assigns = []
    level = inputs
    index = 0
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            last = index == total_ops - 1
            target = "out" if last else f"w_{index}"
            if not last:
                wires.append(Wire(target, width))
            assigns.append(
                Assign(target, BinOp(op_for_index(index), Var(level[i]), Var(level[i + 1])))
            )
            nxt.append(target)
            index += 1
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return Design(name, tuple(ports), tuple(wires), tuple(assigns))


def _random_forest(spec: BenchSpec) -> Design:
    rng = random.Random(spec.seed)
    n_inputs = max(2, min(64, spec.op_count // 8 + 2))
    inputs = [f"in_{i}" for i in range(n_inputs)]
    ports = [Port(n, "input", spec.width) for n in inputs]
    ports.append(Port("out", "output", spec.width))
    types = [t for t, _ in spec.op_mix]
    weights = [w for _, w in spec.op_mix]
    pool = list(inputs)
    wires = []
    assigns = []
    for index in range(spec.op_count):
        op = rng.choices(types, weights)[0]
        lhs = pool[rng.randrange(len(pool))]
        rhs = pool[rng.randrange(len(pool))]
        last = index == spec.op_count - 1
        target = "out" if last else f"w_{index}"
        if not last:
            wires.append(Wire(target, spec.width))
            pool.append(target)
        assigns.append(Assign(target, BinOp(op, Var(lhs), Var(rhs))))
    return Design(f"R_{spec.op_count}", tuple(ports), tuple(wires), tuple(assigns))
