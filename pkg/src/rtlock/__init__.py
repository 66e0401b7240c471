"""RTL operation locking, balance metrics, and oracle-less attack evaluation."""

__version__ = "0.1.0"

from .attack import (
    AttackReport,
    Locality,
    ObservationTable,
    extract_localities,
    kpa,
    predict,
    train,
    train_by_relocking,
)
from .benchgen import BenchSpec, generate, generate_from_string, parse_bench_spec
from .errors import (
    InputError,
    LockError,
    PairTableError,
    ParseError,
    ToolError,
    UsageError,
)
from .experiment import (
    ALGORITHMS,
    ExperimentConfig,
    derive_seed,
    resolve_budget,
    run_attack_experiment,
)
from .ir import (
    Assign,
    BinOp,
    Const,
    Design,
    Key,
    KeyMux,
    OpType,
    Port,
    Var,
    Wire,
    apply_key,
    count_ops,
    count_ops_by_type,
    count_total_ops,
    structural_equal,
    validate_design,
)
from .locking import (
    LockSession,
    is_learning_resilient,
    lock_assure,
    lock_era,
    lock_hra,
    relock,
)
from .odt import (
    DistributionTable,
    DistributionVector,
    MetricReport,
    build_odt,
    distance,
    metric,
    metric_for_designs,
)
from .pairs import PairTable, default_pair_table, validate_pair_mapping
from .verilog import emit, emit_file, parse, parse_file

__all__ = [
    "ALGORITHMS",
    "Assign",
    "AttackReport",
    "BenchSpec",
    "BinOp",
    "Const",
    "Design",
    "DistributionTable",
    "DistributionVector",
    "ExperimentConfig",
    "InputError",
    "Key",
    "KeyMux",
    "Locality",
    "LockError",
    "LockSession",
    "MetricReport",
    "ObservationTable",
    "OpType",
    "PairTable",
    "PairTableError",
    "ParseError",
    "Port",
    "ToolError",
    "UsageError",
    "Var",
    "Wire",
    "apply_key",
    "build_odt",
    "count_ops",
    "count_ops_by_type",
    "count_total_ops",
    "default_pair_table",
    "derive_seed",
    "distance",
    "emit",
    "emit_file",
    "extract_localities",
    "generate",
    "generate_from_string",
    "is_learning_resilient",
    "kpa",
    "lock_assure",
    "lock_era",
    "lock_hra",
    "metric",
    "metric_for_designs",
    "parse",
    "parse_bench_spec",
    "parse_file",
    "predict",
    "relock",
    "resolve_budget",
    "run_attack_experiment",
    "structural_equal",
    "train",
    "train_by_relocking",
    "validate_design",
    "validate_pair_mapping",
    "__version__",
]
