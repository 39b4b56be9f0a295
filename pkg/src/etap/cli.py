"""Command-line client.

Talks to a running service with ``--server URL``; otherwise starts the
service in-process.  ``--out DIR`` keeps engine state between runs.

Exit codes: 0 ok, 1 other failure, 2 usage, 3 unknown rule, 4 malformed
data, 5 schema mismatch, 6 config parse error, 7 forgery accepted by the
attack suite, 8 transport error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Optional

from .harness.config import shipped_rule, shipped_rule_names

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_UNKNOWN_RULE = 3
EXIT_MALFORMED = 4
EXIT_SCHEMA = 5
EXIT_CONFIG = 6
EXIT_FORGERY = 7
EXIT_TRANSPORT = 8

_EXIT_FOR_ERROR = {
    "unknown_rule": EXIT_UNKNOWN_RULE,
    "malformed_data": EXIT_MALFORMED,
    "schema_mismatch": EXIT_SCHEMA,
    "config_error": EXIT_CONFIG,
    "transport_error": EXIT_TRANSPORT,
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _client(args):
    if args.server:
        import httpx
        return httpx.Client(base_url=args.server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .harness.engine import Engine
    from .service.app import create_app
    try:
        engine = Engine(args.seed, args.tau, args.transport, args.out)
    except Exception as exc:  # state or transport failures before the service exists
        from .harness.config import ConfigError
        from .harness.transport import TransportError
        if isinstance(exc, TransportError):
            raise CliError(EXIT_TRANSPORT, str(exc)) from exc
        if isinstance(exc, ConfigError):
            raise CliError(EXIT_CONFIG, str(exc)) from exc
        raise
    return TestClient(create_app(engine))


def _call(client, method: str, path: str, **kw) -> Any:
    import httpx
    try:
        resp = client.request(method, path, **kw)
    except httpx.TransportError as exc:
        raise CliError(EXIT_TRANSPORT, f"cannot reach the service: {exc}") from exc
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except ValueError:
            raise CliError(EXIT_FAILURE, f"HTTP {resp.status_code}: {resp.text[:200]}") from None
        kind = body.get("error") if isinstance(body, dict) else None
        detail = body.get("detail", body) if isinstance(body, dict) else body
        code = _EXIT_FOR_ERROR.get(kind, EXIT_MALFORMED if resp.status_code == 422 and kind is None else EXIT_FAILURE)
        raise CliError(code, f"{kind or 'error'}: {detail}")
    return resp.json() if resp.content else None


def _read(path: str, code: int = EXIT_CONFIG) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(code, f"cannot read {path}: {exc}") from exc


def _rule_ref(client, ref: str) -> str:
    """Set up a rule file on the service if given a path; return the rule name."""
    p = Path(ref)
    if p.suffix == ".toml" or p.exists():
        if not p.exists():
            raise CliError(EXIT_UNKNOWN_RULE, f"no such rule file: {ref}")
        text = _read(ref)
        from .harness.config import ConfigError, parse_rule
        try:
            name = parse_rule(text).name
        except ConfigError as exc:
            raise CliError(EXIT_CONFIG, str(exc)) from exc
        known = _call(client, "GET", "/rules")["rules"]
        if name not in known:
            _call(client, "POST", "/rules", json={"config": text})
        return name
    return ref


class Printer:
    def __init__(self, as_json: bool):
        self.as_json = as_json

    def emit(self, record: dict[str, Any], human: Optional[str] = None) -> None:
        if self.as_json:
            print(json.dumps(record, sort_keys=True, default=str))
        elif human is not None:
            print(human)


def cmd_setup_rule(args, client, out: Printer) -> int:
    if not Path(args.config).exists() and args.config in shipped_rule_names():
        text = shipped_rule(args.config).source
    else:
        text = _read(args.config)
    body: dict[str, Any] = {"config": text}
    if args.batch is not None:
        body["batch"] = args.batch
    info = _call(client, "POST", "/rules", json=body)
    out.emit({"command": "setup-rule", **info},
             f"rule {info['name']}: {info['and_gates']} AND gates, {info['gc_bytes']} bytes per circuit, "
             f"{len(info['pending'])} circuits pending")
    return EXIT_OK


def cmd_generate(args, client, out: Printer) -> int:
    name = _rule_ref(client, args.rule)
    res = _call(client, "POST", f"/rules/{name}/circuits", json={"count": args.count})
    out.emit({"command": "generate-circuits", **res},
             f"rule {name}: generated {res['count']} circuits (j {res['first_j']}..{res['last_j']}), "
             f"{res['bytes']} bytes")
    return EXIT_OK


def _load_data(path: str) -> tuple[dict, dict]:
    text = _read(path, EXIT_MALFORMED)
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise CliError(EXIT_MALFORMED, f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise CliError(EXIT_MALFORMED, f"{path}: expected a JSON object")
    if "data" in doc:
        body = {"data": doc["data"], "payload": doc.get("payload", "")}
        if "payload_hex" in doc:
            body["payload_hex"] = doc["payload_hex"]
    else:
        body = {"data": doc, "payload": ""}
    if not isinstance(body["data"], dict) or not isinstance(body.get("payload", ""), str):
        raise CliError(EXIT_MALFORMED, f"{path}: 'data' must be an object and 'payload' a string")
    return body, doc


def cmd_trigger(args, client, out: Printer) -> int:
    name = _rule_ref(client, args.rule)
    body, _ = _load_data(args.data)
    res = _call(client, "POST", f"/rules/{name}/trigger", json=body)
    human = f"rule {name} j={res['j']}: {res['result']}"
    if res.get("outputs"):
        human += " " + json.dumps(res["outputs"], sort_keys=True)
    out.emit({"command": "trigger", **res}, human)
    return EXIT_OK


def cmd_run_scenario(args, client, out: Printer) -> int:
    text = _read(args.script)
    base = Path(args.script).resolve().parent
    body: dict[str, Any] = {"script": text}
    try:
        import tomllib  # type: ignore[import-not-found]
    except ImportError:
        import tomli as tomllib
    try:
        ref = tomllib.loads(text).get("rule", "")
    except tomllib.TOMLDecodeError as exc:
        raise CliError(EXIT_CONFIG, f"{args.script}: {exc}") from exc
    if isinstance(ref, str) and (base / ref).is_file():
        body["rule_config"] = _read(str(base / ref))
    res = _call(client, "POST", "/scenarios", json=body)
    for entry in res["transcript"]:
        desc = f"[{entry['event']}] {entry['type']}"
        if "j" in entry:
            desc += f" j={entry['j']}"
        if "result" in entry:
            desc += f" -> {entry['result']}"
        if entry.get("outputs"):
            desc += " " + json.dumps(entry["outputs"], sort_keys=True)
        out.emit({"command": "run-scenario", **entry}, desc)
    return EXIT_OK


def cmd_attack(args, client, out: Printer) -> int:
    name = _rule_ref(client, args.rule)
    res = _call(client, "POST", f"/rules/{name}/attack-suite",
                json={"runs": args.runs, "mutations": args.mutations})
    out.emit({"command": "attack-suite", **res},
             f"rule {name}: {res['mutations']} mutations over {res['runs']} honest runs; "
             f"results {res['by_result']}; forgeries {res['forgeries']}, unexpected {res['unexpected']}")
    if res["forgeries"]:
        return EXIT_FORGERY
    return EXIT_OK if res["ok"] else EXIT_FAILURE


def _rule_set(client, refs: list[str]) -> list[str]:
    names: list[str] = []
    for ref in refs:
        if ref == "shipped":
            names += _call(client, "GET", "/rules")["shipped"]
        else:
            names += [_rule_ref(client, r) for r in ref.split(",") if r]
    return names


def _fmt_bench_row(row: dict) -> str:
    m = row["median"]
    flag = ""
    if row.get("reference_kb") is not None:
        flag = f" ref {row['reference_kb']} KB {'ok' if row['size_ok'] else 'OUT OF TOLERANCE'}"
    speed = "" if row["under_target"] else (" SLOW" if row["under_ceiling"] else " OVER CEILING")
    return (f"{row['name']:<20} {row['and_count']:>8} AND {row['gc_bytes'] / 1000:>9.1f} KB{flag}; "
            f"TC {m['tc_ms']:.1f} TS {m['ts_ms']:.1f} TAP {m['tap_ms']:.1f} AS {m['as_ms']:.1f} "
            f"PlainTAP {m['plaintap_ms']:.3f} ms{speed}")


def cmd_bench(args, client, out: Printer) -> int:
    names = _rule_set(client, args.rules)
    res = _call(client, "POST", "/bench", json={"rules": names, "iterations": args.iterations,
                                                "micro": args.micro, "day": args.day})
    for section in ("rules", "micro"):
        for row in res.get(section) or []:
            out.emit({"command": "bench", "section": section, **row}, _fmt_bench_row(row))
    if res.get("day"):
        d = res["day"]
        out.emit({"command": "bench", "section": "day", **d},
                 f"day batch: {d['bundles']} bundles in {d['seconds']:.1f} s, {d['total_mb']:.1f} MB "
                 f"(ref {d['reference_mb']} MB {'ok' if d['size_ok'] else 'OUT OF TOLERANCE'})")
    return EXIT_OK


def cmd_plaintap_bench(args, client, out: Printer) -> int:
    names = _rule_set(client, args.rules)
    res = _call(client, "POST", "/plaintap-bench", json={"rules": names, "iterations": args.iterations})
    for row in res["rows"]:
        out.emit({"command": "plaintap-bench", **row},
                 f"{row['rule']:<8} median {row['median_ms']:.3f} ms over {row['iterations']} runs")
    return EXIT_OK


# common flags are accepted on either side of the subcommand, so their
# defaults are filled in after parsing
_COMMON_DEFAULTS = {"seed": None, "tau": None, "transport": "inproc", "out": None, "json": False, "server": None}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (reproducible runs)")
    common.add_argument("--tau", type=float, default=argparse.SUPPRESS, help="freshness window in seconds")
    common.add_argument("--transport", choices=("inproc", "tcp"), default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="state directory kept between runs")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="line-delimited JSON output")
    common.add_argument("--server", default=argparse.SUPPRESS, help="URL of a running etap service")

    p = argparse.ArgumentParser(prog="etap", parents=[common],
                                description="Trigger-action rules over garbled circuits.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=func)
        return sp

    sp = add("setup-rule", cmd_setup_rule, "register a rule file and pre-generate circuits")
    sp.add_argument("config", help="rule file, or the name of a shipped rule")
    sp.add_argument("--batch", type=int)

    sp = add("generate-circuits", cmd_generate, "garble more circuits for a rule")
    sp.add_argument("rule")
    sp.add_argument("--count", type=int, default=1)

    sp = add("trigger", cmd_trigger, "run one trigger event end to end")
    sp.add_argument("rule")
    sp.add_argument("data", help='JSON file: {"data": {...}, "payload": "..."} or a bare record')

    sp = add("run-scenario", cmd_run_scenario, "execute a scenario script")
    sp.add_argument("script")

    sp = add("attack-suite", cmd_attack, "mutate honest action messages and check every result")
    sp.add_argument("rule")
    sp.add_argument("--runs", type=int, default=20)
    sp.add_argument("--mutations", type=int, default=100)

    sp = add("bench", cmd_bench, "per-party timings and sizes")
    sp.add_argument("rules", nargs="*", default=[], help="rule names, files, or 'shipped'")
    sp.add_argument("--iterations", type=int, default=5)
    sp.add_argument("--micro", action="store_true", help="also time the basic operations")
    sp.add_argument("--day", action="store_true", help="also generate a day's batch of circuits")

    sp = add("plaintap-bench", cmd_plaintap_bench, "time the plaintext baseline")
    sp.add_argument("rules", nargs="+")
    sp.add_argument("--iterations", type=int, default=100)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in _COMMON_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    out = Printer(args.json)
    try:
        client = _client(args)
        with client:
            return args.func(args, client, out)
    except CliError as exc:
        if args.json:
            print(json.dumps({"command": args.command, "error": str(exc), "exit_code": exc.code}))
        print(f"etap: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
