"""End-to-end attack evaluation: lock, relock, train, predict, score.

One trial locks a benchmark with a fresh key, assembles a training set by
relocking that target with known keys, trains the observation table, and
scores key prediction accuracy against the ground truth.  Trials get their
seeds derived from (master seed, benchmark, algorithm, copy), so results
are byte-identical however the trials are batched or ordered.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from statistics import mean
from typing import Callable, Optional

from .attack import predict, train_by_relocking
from .benchgen import generate_from_string
from .errors import UsageError
from .ir import Design, count_total_ops
from .locking import LockSession, lock_assure, lock_era, lock_hra
from .pairs import PairTable, default_pair_table
from .verilog import parse_file

ALGORITHMS = ("assure-serial", "assure-random", "hra", "era")
BASELINE_ALGORITHM = "random-guess"

RUNS_CSV_HEADER = "benchmark,algorithm,seed,copy,key_bits,kpa"
SUMMARY_CSV_HEADER = "benchmark,algorithm,mean_kpa,runs"

DEFAULT_TRAIN_ROUNDS = 100
PAPER_SCALE_TRAIN_ROUNDS = 1000


@dataclass
class ExperimentConfig:
    benchmarks: list = field(default_factory=list)  # spec strings or .v paths
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    key_budget: str = "75%"
    test_copies: int = 10
    train_rounds: int = DEFAULT_TRAIN_ROUNDS
    seeds: list = field(default_factory=lambda: [0])
    output_dir: Optional[str] = None

    def __post_init__(self):
        if not self.benchmarks:
            raise UsageError("at least one benchmark is required")
        if not self.algorithms:
            raise UsageError("at least one algorithm is required")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise UsageError(
                    f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}"
                )
        if self.test_copies < 1 or self.train_rounds < 1:
            raise UsageError("test-copies and train-rounds must be at least 1")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        resolve_budget(self.key_budget, 100)  # validate the format early

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {
            "benchmarks", "algorithms", "key_budget", "test_copies",
            "train_rounds", "seeds", "output_dir",
        }
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**raw)


@dataclass(frozen=True)
class TrialResult:
    benchmark: str
    algorithm: str
    seed: int
    copy_index: int
    key_bits: int
    kpa: float


@dataclass(frozen=True)
class SummaryRow:
    benchmark: str
    algorithm: str
    mean_kpa: float
    runs: int


def derive_seed(master, *tags) -> int:
    """Stable 63-bit seed from a master seed and string tags."""
    text = "|".join([str(master)] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def resolve_budget(budget, op_total: int) -> int:
    """Budget as absolute bits or 'NN%' of the operation count (ceil)."""
    if isinstance(budget, int):
        bits = budget
    else:
        text = str(budget).strip()
        if text.endswith("%"):
            try:
                pct = float(text[:-1])
            except ValueError:
                raise UsageError(f"bad budget percentage {budget!r}") from None
            if not 0 < pct <= 100:
                raise UsageError("budget percentage must be in (0, 100]")
            return math.ceil(op_total * pct / 100.0)
        try:
            bits = int(text)
        except ValueError:
            raise UsageError(
                f"budget must be an integer bit count or 'NN%', got {budget!r}"
            ) from None
    if bits < 0:
        raise UsageError("budget must be non-negative")
    return bits


def lock_with_algorithm(
    algorithm: str, design: Design, budget: int, seed: int, pairs: PairTable = None
) -> LockSession:
    if algorithm == "assure-serial":
        return lock_assure(design, budget, seed, selection="serial", pairs=pairs)
    if algorithm == "assure-random":
        return lock_assure(design, budget, seed, selection="random", pairs=pairs)
    if algorithm == "era":
        return lock_era(design, budget, seed, pairs=pairs)
    if algorithm == "hra":
        return lock_hra(design, budget, seed, pairs=pairs)
    raise UsageError(f"unknown algorithm {algorithm!r}")


def load_benchmark(entry: str) -> Design:
    """A benchmark entry is a generator spec string or a path to a .v file."""
    if ":" in entry:
        return generate_from_string(entry)
    if os.path.exists(entry):
        return parse_file(entry)
    raise UsageError(f"benchmark {entry!r} is neither a spec string nor a file")


def run_trial(
    design: Design,
    algorithm: str,
    budget_bits: int,
    train_rounds: int,
    train_bits: int,
    trial_seed: int,
    pairs: PairTable = None,
):
    """Lock, self-reference, train, and score one attack trial."""
    session = lock_with_algorithm(
        algorithm, design, budget_bits, derive_seed(trial_seed, "lock"), pairs
    )
    target = session.freeze()
    truth = session.key()
    table = train_by_relocking(
        target, train_rounds, train_bits, derive_seed(trial_seed, "train"), pairs
    )
    report = predict(
        table, target, pairs, seed=derive_seed(trial_seed, "predict"), truth=truth
    )
    return report, truth


def run_attack_experiment(
    config: ExperimentConfig,
    pairs: PairTable = None,
    on_row: Optional[Callable[[TrialResult], None]] = None,
) -> tuple[list[TrialResult], list[SummaryRow]]:
    """Run every (benchmark x algorithm x seed x copy) trial in order."""
    pairs = pairs or default_pair_table()
    rows: list[TrialResult] = []
    for entry in config.benchmarks:
        design = load_benchmark(entry)
        op_total = count_total_ops(design)
        budget = resolve_budget(config.key_budget, op_total)
        for algorithm in config.algorithms:
            for master in config.seeds:
                for copy in range(config.test_copies):
                    trial_seed = derive_seed(master, design.name, algorithm, copy)
                    report, truth = run_trial(
                        design,
                        algorithm,
                        budget,
                        config.train_rounds,
                        budget,
                        trial_seed,
                        pairs,
                    )
                    row = TrialResult(
                        design.name, algorithm, master, copy, truth.length, report.kpa
                    )
                    rows.append(row)
                    if on_row is not None:
                        on_row(row)
    return rows, summarize(rows)


def summarize(rows) -> list[SummaryRow]:
    """Mean KPA per (benchmark, algorithm), per-algorithm grand means, and
    the 50% random-guess baseline row."""
    out: list[SummaryRow] = []
    bench_order: list[str] = []
    algo_order: list[str] = []
    grouped: dict = {}
    for row in rows:
        if row.benchmark not in bench_order:
            bench_order.append(row.benchmark)
        if row.algorithm not in algo_order:
            algo_order.append(row.algorithm)
        grouped.setdefault((row.benchmark, row.algorithm), []).append(row.kpa)
    for bench in bench_order:
        for algo in algo_order:
            values = grouped.get((bench, algo))
            if values:
                out.append(SummaryRow(bench, algo, mean(values), len(values)))
    for algo in algo_order:
        values = [r.kpa for r in rows if r.algorithm == algo]
        if values:
            out.append(SummaryRow("ALL", algo, mean(values), len(values)))
    out.append(SummaryRow("ALL", BASELINE_ALGORITHM, 50.0, 0))
    return out


def runs_csv(rows, header: bool = True) -> str:
    lines = [RUNS_CSV_HEADER] if header else []
    for r in rows:
        lines.append(
            f"{r.benchmark},{r.algorithm},{r.seed},{r.copy_index},{r.key_bits},{r.kpa:.2f}"
        )
    return "\n".join(lines) + "\n"


def summary_csv(rows) -> str:
    lines = [SUMMARY_CSV_HEADER]
    for r in rows:
        lines.append(f"{r.benchmark},{r.algorithm},{r.mean_kpa:.2f},{r.runs}")
    return "\n".join(lines) + "\n"
