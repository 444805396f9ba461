"""Request models for the HTTP service.

Responses are the report dicts built in ``pkgcsim.reports`` and
``pkgcsim.service.handlers``; they are returned as-is so that the HTTP
body, the CLI output, and the library report stay byte-identical after
canonical serialization.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class SimulateRequest(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)
    seed_override: Optional[int] = None
    include_trace_csv: bool = False


class SweepRequest(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)
    rates: list[float]
    seed_override: Optional[int] = None


class AnalyzeTraceRequest(BaseModel):
    trace_csv: str
    gate: str = "CC1"
    floor_ns: int = 0
    n_cores: Optional[int] = None


class EstimatePowerRequest(BaseModel):
    power_profile: dict[str, Any] = Field(default_factory=dict)
    r_pc1a: float
    r_pc0: float = 0.0
    p_pc0_w: Optional[float] = None


class TransitionBudgetRequest(BaseModel):
    latency_profile: dict[str, Any] = Field(default_factory=dict)


class ExplainFlowRequest(BaseModel):
    scenario: str
    latency_profile: dict[str, Any] = Field(default_factory=dict)


class ReportRequest(BaseModel):
    documents: list[dict[str, Any]] = Field(default_factory=list)
    power_profile: dict[str, Any] = Field(default_factory=dict)
    latency_profile: dict[str, Any] = Field(default_factory=dict)
