"""In-memory representation of the supported combinational RTL subset.

A design is a named module with ports, wires, and a list of continuous
assignments.  Expressions are trees of binary operations over identifiers
and constants, plus key-controlled multiplexers (`KeyMux`) inserted by the
locking passes.  Everything here is immutable; the locking engine keeps
its own mutable mirror and freezes back into these types.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

from .errors import InputError


class OpType(enum.Enum):
    """The 18 binary operator kinds eligible for operation locking."""

    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    MOD = "mod"
    POW = "pow"
    SHL = "shl"
    SHR = "shr"
    BIT_AND = "bit-and"
    BIT_OR = "bit-or"
    BIT_XOR = "bit-xor"
    BIT_XNOR = "bit-xnor"
    LT = "lt"
    GT = "gt"
    LE = "le"
    GE = "ge"
    EQ = "eq"
    NE = "ne"

    def __repr__(self):
        return f"OpType.{self.name}"


OP_BY_NAME = {op.value: op for op in OpType}
OP_ORDER = {op: i for i, op in enumerate(OpType)}


def op_from_name(name: str) -> OpType:
    try:
        return OP_BY_NAME[name]
    except KeyError:
        raise InputError(f"unknown operation name: {name!r}") from None


@dataclass(frozen=True)
class Const:
    value: int
    width: Optional[int] = None


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: OpType
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class KeyMux:
    """Key-controlled ternary: bit == 1 selects `when_one`."""

    index: int
    when_one: "Expr"
    when_zero: "Expr"


Expr = Union[Const, Var, BinOp, KeyMux]


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output"
    width: int = 1


@dataclass(frozen=True)
class Wire:
    name: str
    width: int = 1


@dataclass(frozen=True)
class Assign:
    target: str
    rhs: Expr


@dataclass(frozen=True)
class Design:
    name: str
    ports: tuple[Port, ...] = ()
    wires: tuple[Wire, ...] = ()
    assigns: tuple[Assign, ...] = ()
    key_length: int = 0


@dataclass(frozen=True)
class Key:
    """Ordered key bits; bit i drives the KeyMux with index i."""

    bits: tuple[int, ...] = ()

    @property
    def length(self) -> int:
        return len(self.bits)

    def to_hex(self) -> str:
        """Hex encoding, most-significant (highest-index) bit first."""
        value = 0
        for i, b in enumerate(self.bits):
            value |= (b & 1) << i
        digits = max(1, (len(self.bits) + 3) // 4)
        return f"{value:0{digits}x}"

    @classmethod
    def from_hex(cls, text: str, length: int) -> "Key":
        text = text.strip()
        try:
            value = int(text, 16) if text else 0
        except ValueError:
            raise InputError(f"invalid hex key: {text!r}") from None
        if value >> max(length, 1):
            raise InputError(f"hex key {text!r} does not fit in {length} bits")
        return cls(tuple((value >> i) & 1 for i in range(length)))


def iter_exprs(design: Design) -> Iterator[Expr]:
    """Yield every expression node, visiting both branches of each KeyMux."""
    stack = [a.rhs for a in reversed(design.assigns)]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, BinOp):
            stack.append(node.rhs)
            stack.append(node.lhs)
        elif isinstance(node, KeyMux):
            stack.append(node.when_zero)
            stack.append(node.when_one)


def count_ops_by_type(design: Design) -> Counter:
    counts = Counter()
    for node in iter_exprs(design):
        if isinstance(node, BinOp):
            counts[node.op] += 1
    return counts


def count_ops(design: Design, t: OpType) -> int:
    """Number of binary operations of type `t`, dummy branches included."""
    return count_ops_by_type(design).get(t, 0)


def count_total_ops(design: Design) -> int:
    return sum(count_ops_by_type(design).values())


def iter_key_muxes(design: Design) -> Iterator[KeyMux]:
    for node in iter_exprs(design):
        if isinstance(node, KeyMux):
            yield node


def apply_key(design: Design, key: Key) -> Design:
    """Resolve every KeyMux with the given key; the result is key-free."""
    if key.length != design.key_length:
        raise InputError(
            f"key length {key.length} does not match design key length "
            f"{design.key_length}"
        )
    bits = key.bits

    def resolve(expr: Expr) -> Expr:
        if isinstance(expr, BinOp):
            lhs = resolve(expr.lhs)
            rhs = resolve(expr.rhs)
            if lhs is expr.lhs and rhs is expr.rhs:
                return expr
            return BinOp(expr.op, lhs, rhs)
        if isinstance(expr, KeyMux):
            chosen = expr.when_one if bits[expr.index] else expr.when_zero
            return resolve(chosen)
        return expr

    assigns = tuple(Assign(a.target, resolve(a.rhs)) for a in design.assigns)
    return Design(design.name, design.ports, design.wires, assigns, key_length=0)


def structural_equal(a: Design, b: Design) -> bool:
    """Name-preserving tree equality; iterative so deep trees are safe."""
    if (
        a.name != b.name
        or a.ports != b.ports
        or a.wires != b.wires
        or a.key_length != b.key_length
        or len(a.assigns) != len(b.assigns)
    ):
        return False
    stack: list[tuple[Expr, Expr]] = []
    for x, y in zip(a.assigns, b.assigns):
        if x.target != y.target:
            return False
        stack.append((x.rhs, y.rhs))
    while stack:
        x, y = stack.pop()
        if type(x) is not type(y):
            return False
        if isinstance(x, BinOp):
            if x.op is not y.op:
                return False
            stack.append((x.lhs, y.lhs))
            stack.append((x.rhs, y.rhs))
        elif isinstance(x, KeyMux):
            if x.index != y.index:
                return False
            stack.append((x.when_one, y.when_one))
            stack.append((x.when_zero, y.when_zero))
        elif x != y:  # Const / Var
            return False
    return True


def validate_design(design: Design) -> None:
    """Raise InputError on dangling references or bad key-index numbering."""
    declared = {p.name for p in design.ports} | {w.name for w in design.wires}
    if len(declared) != len(design.ports) + len(design.wires):
        raise InputError(f"duplicate signal declaration in module {design.name}")
    indices = []
    for assign in design.assigns:
        if assign.target not in declared:
            raise InputError(f"assignment to undeclared signal {assign.target!r}")
    for node in iter_exprs(design):
        if isinstance(node, Var) and node.name not in declared:
            raise InputError(f"reference to undeclared identifier {node.name!r}")
        if isinstance(node, KeyMux):
            indices.append(node.index)
    if sorted(indices) != list(range(design.key_length)):
        raise InputError(
            f"key indices must be unique and cover 0..{design.key_length - 1}; "
            f"found {sorted(indices)}"
        )


def design_signals(design: Design) -> Sequence[str]:
    return [p.name for p in design.ports] + [w.name for w in design.wires]
