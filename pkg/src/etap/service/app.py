"""HTTP service over the engine.

JSON endpoints drive the simulation; the two ``/tap`` endpoints accept raw
wire-format messages (``application/octet-stream``) the way a deployed
platform would receive them.
"""
from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from ..funclib import SchemaError
from ..harness.config import ConfigError, UnknownRule
from ..harness.engine import Engine, MalformedData
from ..harness.transport import TransportError
from ..protocol import OutOfCircuits, StaleTapError, StoreFull
from . import schemas as s

OCTETS = "application/octet-stream"

# error kind -> HTTP status; the CLI maps the kind to its exit code
_ERRORS = [
    (UnknownRule, "unknown_rule", 404),
    (MalformedData, "malformed_data", 400),
    (ConfigError, "config_error", 422),
    (SchemaError, "schema_mismatch", 422),
    (TransportError, "transport_error", 502),
    (StaleTapError, "stale_platform", 409),
    (OutOfCircuits, "out_of_circuits", 409),
    (StoreFull, "store_full", 507),
]


def _error_response(exc: Exception) -> Optional[JSONResponse]:
    for cls, kind, status in _ERRORS:
        if isinstance(exc, cls):
            detail = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
            return JSONResponse(s.ErrorBody(error=kind, detail=str(detail)).model_dump(), status_code=status)
    return None


def create_app(engine: Engine | None = None) -> FastAPI:
    app = FastAPI(title="etap", version="1.0")
    app.state.engine = engine or Engine()

    def eng(request: Request) -> Engine:
        return request.app.state.engine

    for cls, _, _ in _ERRORS:
        @app.exception_handler(cls)
        async def _handle(request: Request, exc: Exception):
            return _error_response(exc)

    @app.get("/rules", response_model=s.RuleList)
    def list_rules(request: Request):
        return eng(request).list_rules()

    @app.post("/rules", response_model=s.RuleInfo, status_code=201)
    def create_rule(body: s.RuleCreate, request: Request):
        return eng(request).add_rule_text(body.config, body.batch)

    @app.get("/rules/{name}", response_model=s.RuleInfo)
    def get_rule(name: str, request: Request):
        return eng(request).rule_info(name)

    @app.post("/rules/{name}/circuits", response_model=s.GenerateResponse)
    def generate(name: str, body: s.GenerateRequest, request: Request):
        e = eng(request)
        return e.generate(e.ensure_rule(name), body.count)

    @app.post("/rules/{name}/trigger", response_model=s.TriggerResponse)
    def trigger(name: str, body: s.TriggerRequest, request: Request):
        e = eng(request)
        try:
            payload = bytes.fromhex(body.payload_hex) if body.payload_hex is not None else body.payload.encode()
        except ValueError as exc:
            raise MalformedData(f"payload_hex: {exc}") from exc
        return e.trigger(e.ensure_rule(name), body.data, payload)

    @app.get("/rules/{name}/circuit-id", response_model=s.CircuitIdResponse)
    def circuit_id(name: str, request: Request):
        e = eng(request)
        return e.circuit_id(e.ensure_rule(name))

    @app.post("/rules/{name}/attack-suite", response_model=s.AttackResponse)
    def attack(name: str, body: s.AttackRequest, request: Request):
        return eng(request).attack_suite(name, body.runs, body.mutations)

    @app.post("/scenarios", response_model=s.ScenarioResponse)
    def scenario(body: s.ScenarioRequest, request: Request):
        return {"transcript": eng(request).run_scenario(body.script, body.rule_config, body.base_dir)}

    @app.post("/bench", response_model=s.BenchResponse, response_model_exclude_none=True)
    def bench(body: s.BenchRequest, request: Request):
        return eng(request).bench(body.rules, body.iterations, body.micro, body.day)

    @app.post("/plaintap-bench", response_model=s.PlainBenchResponse)
    def plain_bench(body: s.PlainBenchRequest, request: Request):
        return {"rows": eng(request).plaintap_bench(body.rules, body.iterations)}

    @app.post("/tap/{name}/bundle", response_model=s.UploadResponse)
    async def tap_bundle(name: str, request: Request):
        e = eng(request)
        return e.tap_upload(e.ensure_rule(name), await request.body())

    @app.post("/tap/{name}/trigger")
    async def tap_trigger(name: str, request: Request):
        e = eng(request)
        out = e.tap_trigger(e.ensure_rule(name), await request.body())
        if out is None:
            return Response(status_code=204)
        return Response(out, media_type=OCTETS)

    return app


def main() -> None:
    import argparse

    import uvicorn

    ap = argparse.ArgumentParser(description="Serve the etap engine over HTTP.")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8000)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tau", type=float)
    ap.add_argument("--transport", choices=("inproc", "tcp"), default="inproc")
    ap.add_argument("--out", help="state directory")
    args = ap.parse_args()
    app = create_app(Engine(args.seed, args.tau, args.transport, args.out))
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
