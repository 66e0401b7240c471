import random

import pytest

from rtlock import Assign, BinOp, Design, OpType, Port, Var, Wire

LOCKABLE_TYPES = list(OpType)


def flat_design(type_counts, name="t", width=8):
    """One operation per assign over two shared inputs; exact counts."""
    ports = (Port("a", "input", width), Port("b", "input", width),
             Port("out", "output", width))
    wires = []
    assigns = []
    index = 0
    for op, count in type_counts.items():
        for _ in range(count):
            target = f"w_{index}"
            wires.append(Wire(target, width))
            assigns.append(Assign(target, BinOp(op, Var("a"), Var("b"))))
            index += 1
    last = assigns[-1].target if assigns else "a"
    assigns.append(Assign("out", Var(last)))
    return Design(name, ports, tuple(wires), tuple(assigns))


def random_type_counts(rng, max_ops=24, max_types=5):
    n_types = rng.randint(1, max_types)
    types = rng.sample(LOCKABLE_TYPES, n_types)
    counts = {}
    remaining = rng.randint(1, max_ops)
    for op in types:
        if remaining <= 0:
            break
        take = rng.randint(1, remaining)
        counts[op] = take
        remaining -= take
    return counts


def random_flat_design(rng, name="t", max_ops=24):
    return flat_design(random_type_counts(rng, max_ops), name=name)


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
