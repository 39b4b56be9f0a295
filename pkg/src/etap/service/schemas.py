"""Request and response bodies of the HTTP service."""
from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    error: str  # unknown_rule | malformed_data | schema_mismatch | config_error | transport_error
    detail: str


class RuleCreate(BaseModel):
    config: str = Field(description="rule file text, starting with '# etap-rule v1'")
    batch: Optional[int] = Field(default=None, ge=0)


class FieldInfo(BaseModel):
    name: str
    kind: str
    length: int
    optional: bool


class RuleInfo(BaseModel):
    name: str
    description: str
    trigger_api: str
    action_api: str
    fields: list[FieldInfo]
    outputs: list[str]
    and_gates: int
    gc_bytes: int
    trigger_bits: int
    constant_bits: int
    next_circuit_id: int
    pending: list[int]


class RuleList(BaseModel):
    rules: list[str]
    shipped: list[str]


class GenerateRequest(BaseModel):
    count: int = Field(default=1, ge=0)


class GenerateResponse(BaseModel):
    rule: str
    count: int
    first_j: Optional[int]
    last_j: Optional[int]
    bytes: int


class TriggerRequest(BaseModel):
    data: dict[str, Any] = Field(default_factory=dict)
    payload: str = ""
    payload_hex: Optional[str] = None


class TriggerResponse(BaseModel):
    rule: str
    j: int
    result: str
    reason: Optional[str] = None
    outputs: Optional[dict[str, Any]] = None
    payload: Any = None
    trigger_bytes: int
    action_bytes: int


class CircuitIdResponse(BaseModel):
    rule: str
    j: int


class UploadResponse(BaseModel):
    rule: str
    j: int


class ScenarioRequest(BaseModel):
    script: str
    rule_config: Optional[str] = None
    base_dir: Optional[str] = None


class ScenarioResponse(BaseModel):
    transcript: list[dict[str, Any]]


class AttackRequest(BaseModel):
    runs: int = Field(default=20, ge=1)
    mutations: int = Field(default=100, ge=1)


class AttackResponse(BaseModel):
    rule: str
    runs: int
    mutations: int
    by_result: dict[str, int]
    forgeries: int
    unexpected: int
    ok: bool
    examples: list[dict[str, Any]]


class BenchRequest(BaseModel):
    rules: list[str] = Field(default_factory=list)
    iterations: int = Field(default=5, ge=1)
    micro: bool = False
    day: bool = False


class BenchResponse(BaseModel):
    rules: Optional[list[dict[str, Any]]] = None
    micro: Optional[list[dict[str, Any]]] = None
    day: Optional[dict[str, Any]] = None


class PlainBenchRequest(BaseModel):
    rules: list[str]
    iterations: int = Field(default=100, ge=1)


class PlainBenchResponse(BaseModel):
    rows: list[dict[str, Any]]
