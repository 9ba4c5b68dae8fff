"""Synthetic flow generator and a paced replay client.

Class profiles are declared constants: one normal or log-normal
distribution per canonical feature per class, clipped to physical
bounds. They encode qualitative attack signatures (DNS amplification:
port 53, inflated backward bytes; NTP amplification: port 123, very
large backward packets; UDP flood: high forward rate, near-silent
backward path) against benign traffic with wide heavy-tailed
marginals. No fidelity to any real corpus is claimed; the profiles are
tuned so the class structure is learnable across seeds.
"""

from __future__ import annotations

import http.client
import json
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping
from urllib.parse import urlsplit

import numpy as np

from .errors import ConnectionFailureError, EmptySpecError
from .flowdata import (CANONICAL_FEATURES, CANONICAL_SCHEMA, CLASS_COUNT, ClassLabel,
                       Dataset)


@dataclass(frozen=True)
class FeatureDistribution:
    """One marginal: normal(loc, scale) or lognormal(log-mean, log-sigma),
    clipped to [low, high], optionally rounded to whole units."""

    shape: str
    loc: float
    scale: float
    low: float = 0.0
    high: float = float("inf")
    integer: bool = False

    def __post_init__(self):
        if self.shape not in ("normal", "lognormal"):
            raise ValueError(f"unknown distribution shape {self.shape!r}")
        if self.scale < 0:
            raise ValueError("scale must be non-negative")
        if self.low > self.high:
            raise ValueError("empty support")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.shape == "normal":
            v = rng.normal(self.loc, self.scale, n)
        else:
            v = rng.lognormal(self.loc, self.scale, n)
        v = np.clip(v, self.low, self.high)
        if self.integer:
            v = np.rint(v)
        return v


@dataclass(frozen=True)
class AttackProfile:
    """Per-feature marginals for one traffic class."""

    label: ClassLabel
    distributions: Mapping

    def __post_init__(self):
        missing = [f for f in CANONICAL_FEATURES if f not in self.distributions]
        if missing:
            raise ValueError(f"profile for class {self.label.id} lacks {missing[:3]}")


def _n(loc, scale, low=0.0, high=float("inf"), integer=False):
    return FeatureDistribution("normal", loc, scale, low, high, integer)


def _ln(loc, scale, low=0.0, high=float("inf")):
    return FeatureDistribution("lognormal", loc, scale, low, high)


_PORT = {"low": 0.0, "high": 65535.0, "integer": True}

# feature -> (BENIGN, DDoS-DNS, DDoS-NTP, DDoS-UDP)
# Benign flows are heavy tailed on volume and timing features while the
# amplification classes sit in narrow bands; the UDP flood is broad and
# overlaps benign ranges the way raw flood captures do.
_PROFILE_TABLE: dict[str, tuple] = {
    "Source Port":
        (_n(32768, 16000, **_PORT), _n(33000, 15000, **_PORT),
         _n(33000, 15000, **_PORT), _n(32768, 16000, **_PORT)),
    "Destination Port":
        (_n(28000, 19000, 1, 65535, True), _n(53, 0.0, **_PORT),
         _n(123, 0.0, **_PORT), _n(32000, 15000, 1024, 65535, True)),
    "Protocol":
        (_n(15, 3, 0, 17), _n(17, 0.0, 0, 17), _n(17, 0.0, 0, 17), _n(17, 0.0, 0, 17)),
    "Flow Duration":
        (_ln(15.5, 2.0, 0, 1.2e8), _ln(11.6, 0.45, 0, 1.2e8),
         _ln(10.2, 0.40, 0, 1.2e8), _ln(13.4, 1.5, 0, 1.2e8)),
    "Total Fwd Packets":
        (_ln(2.3, 1.8, 1, 1e6), _ln(1.0, 0.40, 1, 1e6),
         _ln(0.45, 0.35, 1, 1e6), _ln(0.2, 1.5, 1, 1e6)),
    "Total Backward Packets":
        (_ln(2.2, 1.8, 0, 1e6), _ln(1.35, 0.40, 0, 1e6),
         _ln(1.70, 0.35, 0, 1e6), _ln(0.1, 1.5, 0, 1e6)),
    "Total Length of Fwd Packets":
        (_ln(7.5, 2.0), _ln(4.3, 0.45), _ln(3.6, 0.40), _ln(6.7, 1.5)),
    "Total Length of Bwd Packets":
        (_ln(8.5, 2.0), _ln(8.0, 0.50), _ln(8.8, 0.40), _ln(3.4, 2.2)),
    "Fwd Packet Length Max":
        (_n(900, 420, 40, 1500), _n(105, 18, 40, 300),
         _n(62, 6, 40, 90), _n(850, 380, 40, 1500)),
    "Fwd Packet Length Min":
        (_n(120, 90, 0, 1500), _n(64, 10, 28, 120),
         _n(50, 5, 28, 90), _ln(6.3, 0.7, 0, 1500)),
    "Fwd Packet Length Mean":
        (_n(420, 260, 0, 1500), _n(82, 10, 40, 200),
         _n(56, 4, 40, 90), _n(460, 240, 0, 1500)),
    "Fwd Packet Length Std":
        (_ln(4.6, 1.2, 0, 700), _ln(2.0, 0.5, 0, 700),
         _ln(0.7, 0.5, 0, 700), _ln(4.3, 1.1, 0, 700)),
    "Bwd Packet Length Max":
        (_n(1100, 380, 0, 1500), _n(1180, 60, 900, 1400),
         _n(1462, 12, 1400, 1500), _ln(4.1, 1.6, 0, 1500)),
    "Bwd Packet Length Min":
        (_n(90, 80, 0, 1500), _n(130, 35, 60, 300),
         _n(440, 10, 400, 482), _ln(2.8, 1.2, 0, 1500)),
    "Bwd Packet Length Mean":
        (_n(520, 300, 0, 1500), _n(560, 80, 300, 900),
         _n(452, 6, 430, 474), _ln(3.8, 1.5, 0, 1500)),
    "Flow Bytes/s":
        (_ln(9.0, 2.0, 0, 1e9), _ln(12.9, 0.50, 0, 1e9),
         _ln(14.5, 0.40, 0, 1e9), _ln(10.8, 1.5, 0, 1e9)),
    "Flow Packets/s":
        (_ln(3.2, 2.0, 0, 1e6), _ln(7.0, 0.45, 0, 1e6),
         _ln(8.8, 0.40, 0, 1e6), _ln(5.0, 1.5, 0, 1e6)),
    "Flow IAT Mean":
        (_ln(11.5, 2.0, 0, 1.2e8), _ln(6.8, 0.45, 0, 1.2e8),
         _ln(5.0, 0.40, 0, 1.2e8), _ln(9.4, 1.5, 0, 1.2e8)),
    "Flow IAT Std":
        (_ln(11.0, 2.0, 0, 1.2e8), _ln(5.5, 0.60, 0, 1.2e8),
         _ln(3.8, 0.55, 0, 1.2e8), _ln(8.9, 1.5, 0, 1.2e8)),
    "Flow IAT Max":
        (_ln(13.5, 2.0, 0, 1.2e8), _ln(7.7, 0.50, 0, 1.2e8),
         _ln(6.0, 0.45, 0, 1.2e8), _ln(11.4, 1.5, 0, 1.2e8)),
    "Flow IAT Min":
        (_ln(6.5, 2.0, 0, 1.2e8), _ln(5.0, 0.60, 0, 1.2e8),
         _ln(3.5, 0.55, 0, 1.2e8), _ln(4.4, 1.5, 0, 1.2e8)),
    "Fwd IAT Mean":
        (_ln(11.8, 2.0, 0, 1.2e8), _ln(7.1, 0.50, 0, 1.2e8),
         _ln(5.4, 0.45, 0, 1.2e8), _ln(9.7, 1.5, 0, 1.2e8)),
    "Bwd IAT Mean":
        (_ln(11.6, 2.0, 0, 1.2e8), _ln(7.5, 0.50, 0, 1.2e8),
         _ln(5.9, 0.45, 0, 1.2e8), _ln(9.5, 2.0, 0, 1.2e8)),
    "Packet Length Mean":
        (_n(480, 260, 0, 1500), _n(330, 45, 150, 600),
         _n(415, 8, 380, 450), _n(500, 250, 0, 1500)),
}

DEFAULT_PROFILES: tuple = tuple(
    AttackProfile(
        label=ClassLabel.from_id(c),
        distributions={f: _PROFILE_TABLE[f][c] for f in CANONICAL_FEATURES},
    )
    for c in range(CLASS_COUNT)
)

DEFAULT_CLASS_COUNTS = (16000, 30000, 16000, 35000)


@dataclass(frozen=True)
class GeneratorSpec:
    counts: tuple = DEFAULT_CLASS_COUNTS
    seed: int = 42
    profiles: tuple = DEFAULT_PROFILES

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != CLASS_COUNT or any(c < 0 for c in counts):
            raise EmptySpecError("counts must be four non-negative integers")
        if sum(counts) < 1:
            raise EmptySpecError("generator spec produces no records")
        object.__setattr__(self, "counts", counts)


def generate_dataset(g: GeneratorSpec) -> Dataset:
    """Sample a labeled corpus; identical seeds give identical datasets.

    Sampling order is fixed (class-major, then feature) so the output
    never depends on anything but the GeneratorSpec."""
    rng = np.random.default_rng(g.seed)
    blocks = []
    labels = []
    for c in range(CLASS_COUNT):
        n = g.counts[c]
        profile = g.profiles[c]
        X = np.empty((n, len(CANONICAL_FEATURES)))
        for j, name in enumerate(CANONICAL_FEATURES):
            X[:, j] = profile.distributions[name].sample(rng, n)
        if n:
            blocks.append(X)
            labels.append(np.full(n, c, dtype=np.int64))
    X = np.vstack(blocks)
    y = np.concatenate(labels)
    return Dataset(CANONICAL_SCHEMA, X, y)


@dataclass
class ReplayReport:
    sent: int = 0
    responses: int = 0
    failures: int = 0
    decisions: dict = field(default_factory=lambda: {"ALLOW": 0, "BLOCK": 0})
    per_class_recall: dict = field(default_factory=dict)
    latency_ms: dict = field(default_factory=dict)
    wall_seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "sent": self.sent,
            "responses": self.responses,
            "failures": self.failures,
            "decisions": dict(self.decisions),
            "per_class_recall": dict(self.per_class_recall),
            "latency_ms": dict(self.latency_ms),
            "wall_seconds": self.wall_seconds,
        }


def _parse_target(target: str) -> tuple[str, int]:
    if "//" not in target:
        target = "http://" + target
    parts = urlsplit(target)
    return parts.hostname or "127.0.0.1", parts.port or 80


class _Poster:
    """One persistent connection per worker thread."""

    def __init__(self, host: str, port: int, timeout: float):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.local = threading.local()

    def post(self, body: bytes):
        conn = getattr(self.local, "conn", None)
        if conn is None:
            conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
            self.local.conn = conn
        try:
            conn.request("POST", "/classify", body=body,
                         headers={"Content-Type": "application/json"})
            resp = conn.getresponse()
            data = resp.read()
        except (OSError, http.client.HTTPException):
            try:
                conn.close()
            finally:
                self.local.conn = None
            raise
        return resp.status, data


def replay(d: Dataset, target: str, rate: float, shuffle_seed: int = 0, *,
           max_in_flight: int = 32, timeout: float = 10.0) -> ReplayReport:
    """Post every record to the service's /classify at a fixed rate.

    Record i is released at i/rate seconds; at most `max_in_flight`
    requests are outstanding. Raises ConnectionFailure (with the partial
    report attached) when the target is unreachable up front or no
    request ever succeeds.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    host, port = _parse_target(target)
    report = ReplayReport()

    try:
        probe = socket.create_connection((host, port), timeout=timeout)
        probe.close()
    except OSError as exc:
        raise ConnectionFailureError(
            f"cannot reach {host}:{port}: {exc}", report=report) from exc

    n = len(d)
    if n == 0:
        return report
    order = np.random.default_rng(shuffle_seed).permutation(n)
    labels = d.y[order] if d.labeled else None

    bodies = []
    for pos, i in enumerate(order):
        features = {name: float(v) for name, v in zip(d.schema.names, d.X[i])}
        bodies.append(json.dumps({
            "features": features,
            "flow_id": int(i),
            "source": f"replay-{shuffle_seed}-{int(i)}",
        }).encode("utf-8"))

    poster = _Poster(host, port, timeout)
    lock = threading.Lock()
    gate = threading.Semaphore(max_in_flight)
    latencies = []
    outcomes: list = [None] * n

    def send_one(pos: int):
        try:
            started = time.perf_counter()
            status, payload = poster.post(bodies[pos])
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            if status != 200:
                raise OSError(f"status {status}")
            decision = json.loads(payload.decode("utf-8"))["decision"]
            with lock:
                report.responses += 1
                report.decisions[decision] = report.decisions.get(decision, 0) + 1
                latencies.append(elapsed_ms)
                outcomes[pos] = decision
        except (OSError, ValueError, KeyError, http.client.HTTPException):
            with lock:
                report.failures += 1
        finally:
            gate.release()

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=min(max_in_flight, 32)) as pool:
        for pos in range(n):
            release_at = started + pos / rate
            delay = release_at - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            gate.acquire()
            report.sent += 1
            pool.submit(send_one, pos)
    report.wall_seconds = time.perf_counter() - started

    if latencies:
        lat = np.asarray(latencies)
        report.latency_ms = {
            "p50": float(np.percentile(lat, 50)),
            "p90": float(np.percentile(lat, 90)),
            "p99": float(np.percentile(lat, 99)),
            "max": float(lat.max()),
        }
    if labels is not None:
        for c in range(CLASS_COUNT):
            rows = np.flatnonzero(labels == c)
            if rows.size == 0:
                continue
            wanted = "ALLOW" if c == 0 else "BLOCK"
            hits = sum(1 for r in rows if outcomes[r] == wanted)
            report.per_class_recall[str(c)] = hits / rows.size

    if report.responses == 0:
        raise ConnectionFailureError(
            f"no successful responses from {host}:{port}", report=report)
    return report
