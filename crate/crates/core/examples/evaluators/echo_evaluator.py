#!/usr/bin/env python3
"""Minimal external evaluator: reports each task's baseline score back.

usage: echo_evaluator.py BASELINES_JSON

Every gain the engine computes from these metrics is zero. Replace the
body of `train_and_score` with a real multi-task training run.
"""
import json
import sys

with open(sys.argv[1]) as f:
    raw = json.load(f)
metric = raw.pop("metric")
baselines = {int(k): float(v) for k, v in raw.items()}


def train_and_score(tasks, architecture, seed):
    return {str(t): baselines[t] for t in tasks}


print(json.dumps({"type": "hello", "protocol": 1, "num_tasks": len(baselines), "metric": metric}), flush=True)
for line in sys.stdin:
    msg = json.loads(line)
    if msg.get("type") == "shutdown":
        break
    try:
        metrics = train_and_score(msg["tasks"], msg["architecture"], msg["seed"])
        print(json.dumps({"id": msg["id"], "metrics": metrics}), flush=True)
    except Exception as exc:  # reported per request, the engine retries
        print(json.dumps({"id": msg["id"], "error": str(exc)}), flush=True)
