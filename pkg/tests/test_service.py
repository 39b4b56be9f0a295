import pytest
from fastapi.testclient import TestClient

from etap.harness.engine import Engine
from etap.protocol import decode_message, encode_message
from etap.service.app import create_app

from test_harness import RULE


@pytest.fixture()
def client():
    with TestClient(create_app(Engine(seed=9))) as c:
        yield c


def test_rule_lifecycle(client):
    r = client.post("/rules", json={"config": RULE})
    assert r.status_code == 201
    info = r.json()
    assert info["name"] == "big-followers" and info["pending"] == [0, 1] and info["and_gates"] == 32
    assert client.get("/rules").json()["rules"] == ["big-followers"]
    r = client.post("/rules/big-followers/circuits", json={"count": 3}).json()
    assert (r["first_j"], r["last_j"], r["count"]) == (2, 4, 3)

    fired = client.post("/rules/big-followers/trigger", json={"data": {"N": 101}, "payload": "go"}).json()
    assert fired["result"] == "Fired" and fired["outputs"] == {"n": 101} and fired["j"] == 0
    quiet = client.post("/rules/big-followers/trigger", json={"data": {"N": 100}}).json()
    assert quiet["result"] == "NotFired" and quiet["j"] == 1
    assert client.get("/rules/big-followers/circuit-id").json() == {"rule": "big-followers", "j": 2}
    assert client.get("/rules/big-followers").json()["pending"] == [2, 3, 4]


def test_shipped_rules_are_loaded_on_demand(client):
    r = client.post("/rules/R2/trigger", json={"data": {"FollowerCount": 6000}, "payload_hex": "00ff"})
    assert r.status_code == 200 and r.json()["result"] == "Fired"
    assert "R2" in client.get("/rules").json()["rules"]


@pytest.mark.parametrize("method,path,body,status,kind", [
    ("get", "/rules/nope", None, 404, "unknown_rule"),
    ("post", "/rules/nope/trigger", {"data": {}}, 404, "unknown_rule"),
    ("post", "/rules/R2/trigger", {"data": {"FollowerCount": "many"}}, 422, "schema_mismatch"),
    ("post", "/rules/R2/trigger", {"data": {"Other": 1}}, 422, "schema_mismatch"),
    ("post", "/rules/R2/trigger", {"data": {"FollowerCount": 1}, "payload_hex": "zz"}, 400, "malformed_data"),
    ("post", "/rules", {"config": "name = 'x'"}, 422, "config_error"),
    ("post", "/scenarios", {"script": "# etap-scenario v1\nrule = 'R404'\n"}, 404, "unknown_rule"),
])
def test_error_kinds(client, method, path, body, status, kind):
    r = getattr(client, method)(path, **({"json": body} if body is not None else {}))
    assert r.status_code == status
    assert r.json()["error"] == kind


def test_duplicate_rule_is_a_config_error(client):
    assert client.post("/rules", json={"config": RULE}).status_code == 201
    r = client.post("/rules", json={"config": RULE})
    assert r.status_code == 422 and r.json()["error"] == "config_error"


def test_raw_wire_endpoints(client):
    client.post("/rules", json={"config": RULE, "batch": 0})
    engine = client.app.state.engine
    sim = engine.sim
    bundle = sim.tc.garble_next("big-followers")
    r = client.post("/tap/big-followers/bundle", content=encode_message(bundle))
    assert r.json() == {"rule": "big-followers", "j": 0}

    msg = sim.ts.send("big-followers", sim.rules["big-followers"].compiled.trigger_bits({"N": 7}), b"")
    r = client.post("/tap/big-followers/trigger", content=encode_message(msg))
    assert r.status_code == 200 and r.headers["content-type"] == "application/octet-stream"
    assert decode_message(r.content).j == 0
    # the circuit was consumed: the platform drops a second use
    assert client.post("/tap/big-followers/trigger", content=encode_message(msg)).status_code == 204

    r = client.post("/tap/big-followers/trigger", content=b"\x07garbage")
    assert r.status_code == 400 and r.json()["error"] == "malformed_data"


def test_scenario_endpoint(client):
    script = '# etap-scenario v1\nrule = "R2"\nseed = 1\n[[events]]\ntype = "trigger"\n[events.data]\nFollowerCount = 5001\n'
    t = client.post("/scenarios", json={"script": script}).json()["transcript"]
    assert [e["result"] for e in t] == ["Fired"]


def test_attack_endpoint(client):
    r = client.post("/rules/R4/attack-suite", json={"runs": 2, "mutations": 20}).json()
    assert r["ok"] and r["forgeries"] == 0 and r["mutations"] == 40
