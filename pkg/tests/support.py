"""Plumbing shared by the service, CLI, and acceptance tests."""

from __future__ import annotations

import http.client
import json
import socket
import time

import numpy as np

from flowsentinel.flowdata import Dataset, FeatureSchema


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def http_json(port: int, method: str, path: str, body: dict | None = None,
              timeout: float = 10.0):
    """One request against loopback; returns (status, decoded json)."""
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=timeout)
    try:
        payload = None if body is None else json.dumps(body)
        conn.request(method, path, body=payload,
                     headers={"Content-Type": "application/json"})
        resp = conn.getresponse()
        raw = resp.read()
        decoded = json.loads(raw.decode("utf-8")) if raw else None
        return resp.status, decoded
    finally:
        conn.close()


def wait_until(predicate, timeout: float = 5.0, interval: float = 0.02) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


def blob_dataset(seed: int = 0, per_class: int = 40, features: int = 6,
                 spread: float = 0.5, labeled: bool = True) -> Dataset:
    """Well-separated Gaussian blobs, one per class, tiny ad-hoc schema."""
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(tuple(f"f{j}" for j in range(features)))
    centers = rng.normal(scale=4.0, size=(4, features))
    X = np.vstack([centers[c] + rng.normal(scale=spread, size=(per_class, features))
                   for c in range(4)])
    y = np.repeat(np.arange(4), per_class)
    perm = rng.permutation(len(y))
    return Dataset(schema, X[perm], y[perm] if labeled else None)


def feature_payload(d: Dataset, i: int, source: str | None = None,
                    flow_id: int | None = None) -> dict:
    body = {"features": {name: float(v) for name, v in zip(d.schema.names, d.X[i])}}
    if source is not None:
        body["source"] = source
    if flow_id is not None:
        body["flow_id"] = flow_id
    return body
