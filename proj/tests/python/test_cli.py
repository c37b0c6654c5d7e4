"""End-to-end runs of the vilas executable."""
import asyncio
import csv
import json
import subprocess
from pathlib import Path

import pytest

import vilas
from conftest import REPO, Proc

SCHEMA = json.loads((REPO / "schema" / "bridge_messages.schema.json").read_text())


def device_flags(d):
    return ["--arm", d.addr["arm"], "--gripper", d.addr["gripper"], "--camera", d.addr["camera"]]


def test_record_load_export(cli, devices, tmp_path):
    traj = REPO / "data" / "trajectories" / "sweep_40s.json"
    teleop = subprocess.Popen([cli, "teleop", "--source", f"scripted:{traj}", "--duration", "3"] + device_flags(devices),
                              stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    out = subprocess.run([cli, "record", "--prompt", "sweep", "--duration", "2", "--out", str(tmp_path / "eps"),
                          "--episode-id", "ep_test"] + device_flags(devices), capture_output=True, text=True)
    teleop.wait(20)
    assert out.returncode == 0, out.stderr
    ep = vilas.load_episode(tmp_path / "eps" / "ep_test")
    assert ep["meta"]["prompt"] == "sweep"
    assert 55 <= len(ep["frames"]) <= 61

    subprocess.run([cli, "export", str(tmp_path / "eps"), "--out", str(tmp_path / "table"), "--schema", "table"],
                   check=True, capture_output=True)
    with open(tmp_path / "table" / "ep_test.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == len(ep["frames"])
    for row, frame in zip(rows, ep["frames"]):
        assert [float(row[f"state_{i}"]) for i in range(7)] == frame["state"]
        assert [float(row[f"action_{i}"]) for i in range(7)] == frame["action"]

    report = subprocess.run([cli, "verify", str(tmp_path / "eps")], capture_output=True, text=True)
    assert report.returncode == 0
    assert "1 episodes" in report.stdout


def test_deploy_and_stats(cli, devices, tmp_path):
    pd = Proc([cli, "policyd", "--kind", "oracle", "--mq-bind", "127.0.0.1:0", "--ws-bind", "127.0.0.1:0",
               "--horizon", "16", "--arm", devices.addr["arm"]], 2)
    try:
        log = tmp_path / "run.jsonl"
        r = subprocess.run([cli, "deploy", "--protocol", "mq", "--policy", pd.addr["mq"], "--horizon", "16",
                            "--duration", "3", "--log", str(log)] + device_flags(devices),
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        events = [json.loads(l) for l in log.read_text().splitlines()]
        assert sum(e["ev"] == "infer" for e in events) >= 3
        s = subprocess.run([cli, "stats", str(log), "--horizon", "16", "--json"], capture_output=True, text=True,
                           check=True)
        stats = json.loads(s.stdout)
        assert stats["horizon"] == 16
        assert stats["per_step_ms"] * 16 == pytest.approx(stats["mean_ms"])
    finally:
        assert pd.stop() == 0


def test_eval_writes_report(cli, tmp_path):
    r = subprocess.run([cli, "eval", "--policy-kind", "oracle", "--trials", "2", "--protocol", "mq",
                        "--out", str(tmp_path / "rep"), "--multi-any2"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    rep = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert rep["rates"]["single"] == 1.0
    assert "Per-step" in (tmp_path / "rep" / "report.txt").read_text()


jsonschema = pytest.importorskip("jsonschema")
websockets = pytest.importorskip("websockets")


def test_bridge_messages_follow_schema(cli, devices, tmp_path):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    br = Proc([cli, "teleop", "--source", "bridge", "--bridge-bind", "127.0.0.1:0",
               "--record-out", str(tmp_path / "eps")] + device_flags(devices), 1)
    sent = [
        {"t": "lead.set", "id": 1, "body": {"q": [0.05, 1.05, -1.8, -0.83, 0.0, 0.0]}},
        {"t": "lead.grip", "id": 2, "body": {"g": 0.4}},
        {"t": "rec.start", "id": 3, "body": {"prompt": "schema run"}},
        {"t": "ping", "id": 4},
        {"t": "lead.set", "id": 5, "body": {"q": [0.0, 1.0, -1.8]}},
        {"t": "lead.grip", "id": 6, "body": {"g": 3}},
        {"t": "nope", "id": 7},
        {"t": "rec.stop", "id": 8},
    ]

    async def session():
        got = []
        async with websockets.connect(br.addr["bridge"], max_size=None) as ws:
            for m in sent:
                await ws.send(json.dumps(m))
                await asyncio.sleep(0.2)
            while True:
                m = json.loads(await asyncio.wait_for(ws.recv(), 5))
                got.append(m)
                if m.get("id") == 8:
                    break
            async with websockets.connect(br.addr["bridge"]) as second:
                got.append(json.loads(await asyncio.wait_for(second.recv(), 5)))
        return got

    try:
        received = asyncio.run(session())
    finally:
        br.stop()

    for m in sent[:4] + sent[7:]:
        validator.validate(m)
    assert not validator.is_valid(sent[4])
    assert not validator.is_valid(sent[5])
    for m in received:
        validator.validate(m)
    types = {m["t"] for m in received}
    assert {"view.state", "view.frame", "rec.status", "pong", "error"} <= types
    codes = {m["body"]["code"] for m in received if m["t"] == "error"}
    assert {"bad-arity", "g-out-of-range", "unknown-type", "busy"} <= codes
    assert vilas.verify_corpus(tmp_path / "eps")["episodes"] == 1
