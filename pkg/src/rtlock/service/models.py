"""Pydantic request/response schemas for the HTTP service."""

from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field


class GenerateRequest(BaseModel):
    spec: str = Field(description="benchmark spec string, e.g. imbalanced:add:2046")
    seed: int = 0
    width: int = 8


class GenerateResponse(BaseModel):
    name: str
    verilog: str
    op_count: int
    op_counts: dict[str, int]


class LockRequest(BaseModel):
    verilog: str
    algorithm: str
    budget: Union[int, str] = "75%"
    seed: int = 0
    pair_table: Optional[dict] = None


class LockResponse(BaseModel):
    verilog: str
    key_hex: str
    key_length: int
    bits_used: int
    budget_bits: int
    budget_exceeded: bool
    metric: dict[str, float]
    trace_csv: str
    warnings: list[str] = []


class MetricRequest(BaseModel):
    verilog: str
    original_verilog: str
    pair_table: Optional[dict] = None


class MetricResponse(BaseModel):
    metric: dict[str, float]


class PairsValidateRequest(BaseModel):
    pair_table: dict


class FindingModel(BaseModel):
    kind: str
    message: str


class PairsValidateResponse(BaseModel):
    ok: bool
    message: str
    findings: list[FindingModel]


class InlineBenchmark(BaseModel):
    name: str
    verilog: str


class AttackRunRequest(BaseModel):
    benchmarks: list[Union[str, InlineBenchmark]]
    algorithms: list[str]
    key_budget: Union[int, str] = "75%"
    test_copies: int = 10
    train_rounds: int = 100
    seeds: list[int] = [0]
    pair_table: Optional[dict] = None


class TrialRowModel(BaseModel):
    benchmark: str
    algorithm: str
    seed: int
    copy_index: int
    key_bits: int
    kpa: float


class AttackRunResponse(BaseModel):
    rows: list[TrialRowModel]
    runs_csv: str


class SummarizeRequest(BaseModel):
    rows: list[TrialRowModel]


class SummaryRowModel(BaseModel):
    benchmark: str
    algorithm: str
    mean_kpa: float
    runs: int


class SummarizeResponse(BaseModel):
    summary: list[SummaryRowModel]
    summary_csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
