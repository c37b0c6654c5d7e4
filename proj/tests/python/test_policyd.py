"""A plain Python client against the policy server, over both protocols."""
import asyncio
import base64
import json
import socket
import struct

import pytest

import vilas

websockets = pytest.importorskip("websockets")


def observation():
    return {
        "joints": [0.0, 1.0, -1.8, -0.8, 0.0, 0.0, 0.0],
        "pad": [0] * 7,
        "images": {"base": base64.b64encode(b"\x89PNG base").decode(),
                   "wrist": base64.b64encode(b"\x89PNG wrist").decode(),
                   "timestamp_ms": 10.0, "width": 224, "height": 224},
        "prompt": "pick up the grapes",
        "timestamp_ms": 12.0,
    }


def request(seq):
    return vilas.canonical_envelope({"t": "infer", "id": seq, "body": {"observation": observation()}}).encode()


def mq_call(addr, payload):
    host, port = addr.rsplit(":", 1)
    with socket.create_connection((host, int(port)), timeout=5) as s:
        s.sendall(vilas.encode_frame(payload))
        head = b""
        while len(head) < 4:
            head += s.recv(4 - len(head))
        n = struct.unpack(">I", head)[0]
        data = b""
        while len(data) < n:
            data += s.recv(n - len(data))
    return data


async def ws_call(url, payload):
    async with websockets.connect(url, max_size=None) as ws:
        await ws.send(payload)
        return await ws.recv()


@pytest.fixture
def stack():
    s = vilas.Stack("zeros", seed=1, horizon=50)
    yield s
    s.close()


def test_zeros_chunk_over_ws(stack):
    reply = json.loads(asyncio.run(ws_call(stack.ws, request(1))))
    assert reply["t"] == "chunk"
    assert reply["id"] == 1
    actions = reply["body"]["actions"]
    assert len(actions) == 50
    assert all(row == [0.0] * 7 for row in actions)


def test_same_bytes_same_reply_on_both_protocols(stack):
    payload = request(7)
    via_mq = mq_call(stack.mq, payload)
    via_ws = asyncio.run(ws_call(stack.ws, payload))
    if isinstance(via_ws, str):
        via_ws = via_ws.encode()
    a, b = json.loads(via_mq), json.loads(via_ws)
    a["body"].pop("issued_at_ms", None)
    b["body"].pop("issued_at_ms", None)
    assert a == b


def test_malformed_observation_gets_error_reply(stack):
    bad = vilas.canonical_envelope({"t": "infer", "id": 2, "body": {"observation": {"joints": [1]}}}).encode()
    reply = json.loads(asyncio.run(ws_call(stack.ws, bad)))
    assert reply["t"] == "error"
    assert reply["body"]["code"] == "bad-observation"
    assert len(json.loads(mq_call(stack.mq, request(3)))["body"]["actions"]) == 50
