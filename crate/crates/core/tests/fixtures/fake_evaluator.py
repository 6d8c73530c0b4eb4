#!/usr/bin/env python3
"""Scripted evaluator for protocol tests.

usage: fake_evaluator.py MODE NUM_TASKS [LOG_PATH]

Metrics are 0.5 + 0.01 * task + 0.001 * (number of rnn edges), so they are a
pure function of the request.

modes:
  ok           answer each request as it arrives
  reverse      buffer a whole batch, answer it in reverse order
  malformed    answer the first request with a line that is not JSON
  flaky        fail the first attempt on every point, succeed afterwards
  fail         always answer with an error
  bad-hello    send a handshake with the wrong protocol version
  wrong-tasks  advertise NUM_TASKS + 1 tasks
When LOG_PATH is given, every received line is appended to it.
"""
import json
import os
import select
import sys

mode, num_tasks = sys.argv[1], int(sys.argv[2])
log_path = sys.argv[3] if len(sys.argv) > 3 else None


def send(obj):
    sys.stdout.write((obj if isinstance(obj, str) else json.dumps(obj)) + "\n")
    sys.stdout.flush()


def log(line):
    if log_path:
        with open(log_path, "a") as f:
            f.write(line + "\n")


def metrics(req):
    rnn = sum(1 for e in req["architecture"]["edges"] if e["op"] == "rnn")
    return {str(t): 0.5 + 0.01 * t + 0.001 * rnn for t in req["tasks"]}


def point_key(req):
    return json.dumps([req["tasks"], req["architecture"]], sort_keys=True)


protocol = 2 if mode == "bad-hello" else 1
advertised = num_tasks + 1 if mode == "wrong-tasks" else num_tasks
send({"type": "hello", "protocol": protocol, "num_tasks": advertised, "metric": "avp"})

seen = set()
answered = 0
pending = []
buf = b""
fd = sys.stdin.fileno()


def answer(req):
    global answered
    answered += 1
    if mode == "malformed" and answered == 1:
        send("this is not json")
        return
    if mode == "fail":
        send({"id": req["id"], "error": "training diverged"})
        return
    if mode == "flaky":
        key = point_key(req)
        if key not in seen:
            seen.add(key)
            send({"id": req["id"], "error": "transient failure"})
            return
    send({"id": req["id"], "metrics": metrics(req)})


while True:
    if mode == "reverse" and pending:
        ready, _, _ = select.select([fd], [], [], 0.3)
        if not ready:
            for req in reversed(pending):
                answer(req)
            pending = []
            continue
    chunk = os.read(fd, 65536)
    if not chunk:
        break
    buf += chunk
    stop = False
    while b"\n" in buf:
        raw, buf = buf.split(b"\n", 1)
        line = raw.decode().strip()
        if not line:
            continue
        log(line)
        msg = json.loads(line)
        if msg.get("type") == "shutdown":
            stop = True
            break
        if mode == "reverse":
            pending.append(msg)
        else:
            answer(msg)
    if stop:
        break
