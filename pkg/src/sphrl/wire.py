"""Newline-delimited JSON wire protocol for driving an environment from an
external agent process.

Requests:  {"cmd":"reset","seed":<u64>} | {"cmd":"step","action":[f64...]}
           | {"cmd":"close"}
Responses: {"obs":[...]} for reset; {"obs":[...],"reward":f64,
           "terminated":bool,"truncated":bool,"info":{...}} for step;
           {"ok":true} for close; {"error": "..."} on bad input.

Floats serialize through Python's repr (shortest round-trip decimal).
"""

from __future__ import annotations

import json
import socket
import sys


def _sanitize_info(info: dict) -> dict:
    out = {}
    for key, value in info.items():
        if hasattr(value, "item"):
            value = value.item()
        if isinstance(value, (bool, int, float, str)) or value is None:
            out[key] = value
        else:
            out[key] = repr(value)
    return out


def handle_request(env, request: dict) -> tuple[dict, bool]:
    """Returns (response, keep_running)."""
    cmd = request.get("cmd")
    if cmd == "reset":
        seed = request.get("seed")
        obs = env.reset(None if seed is None else int(seed))
        return {"obs": [float(v) for v in obs]}, True
    if cmd == "step":
        action = request.get("action")
        if not isinstance(action, list):
            return {"error": "step requires 'action': [f64...]"}, True
        outcome = env.step(action)
        return {
            "obs": [float(v) for v in outcome.observation],
            "reward": float(outcome.reward),
            "terminated": bool(outcome.terminated),
            "truncated": bool(outcome.truncated),
            "info": _sanitize_info(outcome.info),
        }, True
    if cmd == "close":
        env.close()
        return {"ok": True}, False
    return {"error": f"unknown command {cmd!r}"}, True


def serve_streams(env, rfile, wfile) -> None:
    """Serve one session over a pair of text streams."""
    for line in rfile:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as err:
            response, running = {"error": f"invalid JSON: {err}"}, True
        else:
            response, running = handle_request(env, request)
        wfile.write(json.dumps(response) + "\n")
        wfile.flush()
        if not running:
            return


def serve_stdio(env) -> None:
    serve_streams(env, sys.stdin, sys.stdout)


def serve_socket(env, path: str) -> None:
    """Bind a unix socket, accept a single session, serve it, exit."""
    server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    try:
        server.bind(path)
        server.listen(1)
        conn, _ = server.accept()
        with conn:
            rfile = conn.makefile("r")
            wfile = conn.makefile("w")
            serve_streams(env, rfile, wfile)
    finally:
        server.close()
