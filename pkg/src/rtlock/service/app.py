"""FastAPI service wrapping the locking toolkit.

Every endpoint is stateless and deterministic for a given payload: designs
travel as source text, seeds ride along in the request, and CSV/JSON
artifacts come back in the response.  The bundled CLI is a thin client of
this app (in-process by default, remote with --server).
"""

from __future__ import annotations

import os
import tempfile

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..benchgen import generate, parse_bench_spec
from ..errors import ParseError, ToolError
from ..experiment import (
    ExperimentConfig,
    TrialResult,
    lock_with_algorithm,
    resolve_budget,
    run_attack_experiment,
    runs_csv,
    summarize,
    summary_csv,
)
from ..ir import count_ops_by_type, count_total_ops
from ..locking import trace_csv
from ..odt import metric_for_designs
from ..pairs import PairTable, default_pair_table, split_raw_table, validate_pair_mapping
from ..verilog import emit, parse
from .models import (
    AttackRunRequest,
    AttackRunResponse,
    FindingModel,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    LockRequest,
    LockResponse,
    MetricRequest,
    MetricResponse,
    PairsValidateRequest,
    PairsValidateResponse,
    SummarizeRequest,
    SummarizeResponse,
    SummaryRowModel,
    TrialRowModel,
)


def _pair_table_from(raw) -> PairTable:
    if raw is None:
        return default_pair_table()
    return PairTable.from_mapping(raw)


def create_app() -> FastAPI:
    app = FastAPI(title="rtlock service", version=__version__)

    @app.exception_handler(ToolError)
    async def tool_error_handler(request: Request, exc: ToolError):
        detail = {"kind": exc.kind, "message": str(exc)}
        if isinstance(exc, ParseError):
            detail["line"] = exc.line
            detail["column"] = exc.column
        return JSONResponse(status_code=400, content={"error": detail})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/bench/generate", response_model=GenerateResponse)
    def bench_generate(req: GenerateRequest):
        spec = parse_bench_spec(req.spec, seed=req.seed, width=req.width)
        design = generate(spec)
        counts = count_ops_by_type(design)
        return GenerateResponse(
            name=design.name,
            verilog=emit(design),
            op_count=sum(counts.values()),
            op_counts={op.value: n for op, n in sorted(counts.items(), key=lambda kv: kv[0].value)},
        )

    @app.post("/lock", response_model=LockResponse)
    def lock(req: LockRequest):
        pairs = _pair_table_from(req.pair_table)
        design = parse(req.verilog)
        budget = resolve_budget(req.budget, count_total_ops(design))
        session = lock_with_algorithm(req.algorithm, design, budget, req.seed, pairs)
        locked = session.freeze()
        report = session.metric_report()
        return LockResponse(
            verilog=emit(locked),
            key_hex=session.key().to_hex(),
            key_length=locked.key_length,
            bits_used=session.bits_used,
            budget_bits=budget,
            budget_exceeded=session.budget_exceeded,
            metric=report.to_json_dict(),
            trace_csv=trace_csv(session.trace),
            warnings=session.warnings,
        )

    @app.post("/metric", response_model=MetricResponse)
    def metric_endpoint(req: MetricRequest):
        pairs = _pair_table_from(req.pair_table)
        locked = parse(req.verilog)
        original = parse(req.original_verilog)
        report = metric_for_designs(locked, original, pairs)
        return MetricResponse(metric=report.to_json_dict())

    @app.post("/pairs/validate", response_model=PairsValidateResponse)
    def pairs_validate(req: PairsValidateRequest):
        pairs_raw, codes_raw = split_raw_table(req.pair_table)
        findings = validate_pair_mapping(pairs_raw, codes_raw)
        ok = not findings
        leaks = [f for f in findings if f.kind == "leakage"]
        if ok:
            message = "no leakage"
        elif leaks:
            message = f"{len(leaks)} leakage finding(s)"
        else:
            message = f"{len(findings)} finding(s)"
        return PairsValidateResponse(
            ok=ok,
            message=message,
            findings=[FindingModel(kind=f.kind, message=f.message) for f in findings],
        )

    @app.post("/attack/run", response_model=AttackRunResponse)
    def attack_run(req: AttackRunRequest):
        pairs = _pair_table_from(req.pair_table)
        # Inline benchmarks are written to scratch files so the experiment
        # loader sees one uniform entry type.
        entries = []
        scratch = []
        try:
            for bench in req.benchmarks:
                if isinstance(bench, str):
                    entries.append(bench)
                else:
                    handle = tempfile.NamedTemporaryFile(
                        "w", suffix=".v", delete=False, encoding="utf-8"
                    )
                    handle.write(bench.verilog)
                    handle.close()
                    scratch.append(handle.name)
                    entries.append(handle.name)
            config = ExperimentConfig(
                benchmarks=entries,
                algorithms=list(req.algorithms),
                key_budget=req.key_budget,
                test_copies=req.test_copies,
                train_rounds=req.train_rounds,
                seeds=list(req.seeds),
            )
            rows, _ = run_attack_experiment(config, pairs)
        finally:
            for path in scratch:
                os.unlink(path)
        return AttackRunResponse(
            rows=[TrialRowModel(**row.__dict__) for row in rows],
            runs_csv=runs_csv(rows),
        )

    @app.post("/attack/summarize", response_model=SummarizeResponse)
    def attack_summarize(req: SummarizeRequest):
        rows = [
            TrialResult(r.benchmark, r.algorithm, r.seed, r.copy_index, r.key_bits, r.kpa)
            for r in req.rows
        ]
        summary = summarize(rows)
        return SummarizeResponse(
            summary=[SummaryRowModel(**row.__dict__) for row in summary],
            summary_csv=summary_csv(summary),
        )

    return app


app = create_app()
