"""Real-time detection service: HTTP endpoints over a single event loop.

The server is a thin asyncio.Protocol with an httptools request parser;
every handler runs synchronously on the loop thread, so model swaps,
blocklist mutations, and stats updates are naturally linearizable and no
response can observe half of one model and half of another. Single-record
inference is a few hundred microseconds, which keeps tail latency low
without worker processes.

Blocklist mutations are persisted to disk before the HTTP response is
written, so an acknowledged entry survives a restart.
"""

from __future__ import annotations

import asyncio
import json
import math
import os
import threading
import time
from dataclasses import dataclass
from urllib.parse import unquote

import httptools
import numpy as np

from .errors import (CorruptFileError, FlowSentinelError, IoFailureError,
                     VersionMismatchError)
from .flowdata import CLASS_COUNT, CLASS_NAMES, ClassLabel
from .learn import TrainedModel, load_model

ALLOW = "ALLOW"
BLOCK = "BLOCK"

MAX_SOURCE_BYTES = 256


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 5000
    model_path: str | None = None
    threshold: float = 0.5
    blocklist_path: str = "blocklist.json"
    window_seconds: int = 60

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if not 1 <= self.port <= 65535:
            raise ValueError("port must lie in [1, 65535]")
        if self.window_seconds < 1:
            raise ValueError("window_seconds must be >= 1")


def decide(label: ClassLabel, proba, source, threshold: float, blocklist) -> str:
    """The decision engine: a pure function of its inputs.

    BLOCK when the source is pre-blocked, or when the predicted class is
    an attack whose attack probability (1 - p_benign) clears the
    threshold; ALLOW otherwise.
    """
    if source is not None and source in blocklist:
        return BLOCK
    if label.is_attack and 1.0 - float(proba[0]) >= threshold:
        return BLOCK
    return ALLOW


class BlockList:
    """Source strings with insertion timestamps, mirrored to a JSON file."""

    def __init__(self, path: str):
        self.path = path
        self.entries: dict[str, float] = {}
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
            self.entries = {str(k): float(v) for k, v in loaded.get("sources", {}).items()}

    def __contains__(self, source: str) -> bool:
        return source in self.entries

    def _persist(self) -> None:
        tmp = f"{self.path}.tmp.{os.getpid()}"
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump({"sources": self.entries}, fh, sort_keys=True)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        except OSError as exc:
            raise IoFailureError(f"cannot persist blocklist: {exc}") from exc

    def add(self, source: str, now: float) -> float:
        """Idempotent insert; returns the entry's timestamp."""
        if source in self.entries:
            return self.entries[source]
        self.entries[source] = now
        self._persist()
        return now

    def remove(self, source: str) -> bool:
        if source not in self.entries:
            return False
        del self.entries[source]
        self._persist()
        return True

    def snapshot(self) -> list:
        rows = sorted(self.entries.items(), key=lambda kv: (kv[1], kv[0]))
        return [{"source": s, "added_at": ts} for s, ts in rows]


class StatsWindow:
    """Per-second buckets of classify traffic, pruned to a sliding window."""

    def __init__(self, max_age: int = 3600):
        self.max_age = max_age
        self.buckets: dict[int, dict] = {}

    def record(self, class_id: int, blocked: bool, now: float) -> None:
        sec = int(now)
        bucket = self.buckets.get(sec)
        if bucket is None:
            bucket = {"count": 0, "blocked": 0, "classes": [0] * CLASS_COUNT}
            self.buckets[sec] = bucket
        bucket["count"] += 1
        bucket["classes"][class_id] += 1
        if blocked:
            bucket["blocked"] += 1
        self._prune(sec)

    def _prune(self, now_sec: int) -> None:
        cutoff = now_sec - self.max_age
        for sec in [s for s in self.buckets if s <= cutoff]:
            del self.buckets[sec]

    def snapshot(self, window_seconds: int, now: float) -> tuple[bool, dict, list]:
        """(any block in window, per-class counts, zero-filled timeline)."""
        now_sec = int(now)
        lo = now_sec - window_seconds + 1
        classes = [0] * CLASS_COUNT
        timeline = []
        any_block = False
        for sec in range(lo, now_sec + 1):
            bucket = self.buckets.get(sec)
            if bucket is None:
                timeline.append({"t": sec, "count": 0, "blocked": 0})
                continue
            timeline.append({"t": sec, "count": bucket["count"], "blocked": bucket["blocked"]})
            for c in range(CLASS_COUNT):
                classes[c] += bucket["classes"][c]
            if bucket["blocked"]:
                any_block = True
        window = {CLASS_NAMES[c]: classes[c] for c in range(CLASS_COUNT)}
        window["total"] = sum(classes)
        return any_block, window, timeline


class _HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class DetectService:
    """Routing and handlers; one instance per server, driven by the loop."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.threshold = config.threshold
        self.window_seconds = config.window_seconds
        self.blocklist = BlockList(config.blocklist_path)
        self.stats = StatsWindow()
        self.model: TrainedModel | None = None
        self.model_path: str | None = None
        if config.model_path is not None:
            self._load_model(config.model_path)

    def _load_model(self, path: str) -> None:
        self.model = load_model(path)
        self.model_path = path

    # ---- handlers --------------------------------------------------------

    def _model_metadata(self) -> dict:
        if self.model is None:
            return {"loaded": False}
        meta = self.model.metadata()
        meta["loaded"] = True
        meta["path"] = self.model_path
        return meta

    def _effective_config(self) -> dict:
        return {
            "threshold": self.threshold,
            "window_seconds": self.window_seconds,
            "listen": f"{self.config.host}:{self.config.port}",
            "blocklist_path": self.config.blocklist_path,
            "model_path": self.model_path,
        }

    def _classify(self, body: bytes) -> tuple[int, dict]:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise _HttpError(400, "request body is not valid JSON")
        if not isinstance(payload, dict):
            raise _HttpError(400, "request body must be a JSON object")
        features = payload.get("features")
        if not isinstance(features, dict):
            raise _HttpError(400, "missing object field 'features'")

        model = self.model  # one reference: the whole response uses this model
        if model is None:
            raise _HttpError(503, "no model loaded")

        names = model.input_schema.names
        vector = np.empty(len(names))
        for j, name in enumerate(names):
            value = features.get(name)
            if value is None or isinstance(value, bool) or not isinstance(value, (int, float)):
                raise _HttpError(400, f"feature {name!r} is missing or not numeric")
            value = float(value)
            if not math.isfinite(value):
                raise _HttpError(400, f"feature {name!r} is not finite")
            vector[j] = value

        source = payload.get("source")
        if source is not None and not isinstance(source, str):
            raise _HttpError(400, "field 'source' must be a string")

        started = time.perf_counter()
        proba = model.predict_proba_one(vector)
        class_id = int(np.argmax(proba))
        label = ClassLabel.from_id(class_id)
        decision = decide(label, proba, source, self.threshold, self.blocklist)
        latency_ms = (time.perf_counter() - started) * 1000.0

        self.stats.record(class_id, decision == BLOCK, time.time())
        return 200, {
            "flow_id": payload.get("flow_id"),
            "class_id": class_id,
            "class_name": label.name,
            "proba": [float(p) for p in proba],
            "ddos": class_id != 0,
            "decision": decision,
            "latency_ms": latency_ms,
            "model_id": model.model_id,
        }

    def _ddos_result(self) -> tuple[int, dict]:
        model = self.model
        any_block, window, timeline = self.stats.snapshot(self.window_seconds, time.time())
        accuracy = 0.0
        calc = 0.0
        if model is not None:
            if model.stored_accuracy is not None:
                accuracy = float(model.stored_accuracy)
            if model.stored_eval_seconds is not None:
                calc = float(model.stored_eval_seconds)
        return 200, {
            "ddos": any_block,
            "accuracy": accuracy,
            "calculation_time_s": calc,
            "window": window,
            "timeline": timeline,
        }

    def _put_model(self, body: bytes) -> tuple[int, dict]:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise _HttpError(400, "request body is not valid JSON")
        path = payload.get("path") if isinstance(payload, dict) else None
        if not isinstance(path, str) or not path:
            raise _HttpError(400, "missing string field 'path'")
        if not os.path.exists(path):
            raise _HttpError(400, f"model file does not exist: {path}")
        try:
            self._load_model(path)
        except (CorruptFileError, VersionMismatchError) as exc:
            raise _HttpError(422, str(exc))
        except FlowSentinelError as exc:
            raise _HttpError(422, str(exc))
        return 200, self._model_metadata()

    def _put_config(self, body: bytes) -> tuple[int, dict]:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise _HttpError(400, "request body is not valid JSON")
        if not isinstance(payload, dict):
            raise _HttpError(400, "request body must be a JSON object")
        if "threshold" in payload:
            t = payload["threshold"]
            if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0.0 <= float(t) <= 1.0:
                raise _HttpError(400, "threshold must be a number in [0, 1]")
        if "window_seconds" in payload:
            w = payload["window_seconds"]
            if isinstance(w, bool) or not isinstance(w, int) or not 1 <= w <= 3600:
                raise _HttpError(400, "window_seconds must be an integer in [1, 3600]")
        if "threshold" in payload:
            self.threshold = float(payload["threshold"])
        if "window_seconds" in payload:
            self.window_seconds = int(payload["window_seconds"])
        return 200, self._effective_config()

    def _blocklist_put(self, source: str) -> tuple[int, dict]:
        if not source or len(source.encode("utf-8")) > MAX_SOURCE_BYTES:
            raise _HttpError(400, "source must be a non-empty string of at most 256 bytes")
        ts = self.blocklist.add(source, time.time())
        return 200, {"source": source, "added_at": ts}

    def _blocklist_delete(self, source: str) -> tuple[int, dict]:
        if not self.blocklist.remove(source):
            raise _HttpError(404, f"source not in blocklist: {source}")
        return 200, {"source": source, "removed": True}

    # ---- routing ---------------------------------------------------------

    def dispatch(self, method: str, path: str, body: bytes) -> tuple[int, dict]:
        try:
            return self._route(method, path, body)
        except _HttpError as exc:
            return exc.status, {"error": exc.message}
        except FlowSentinelError as exc:
            return 500, {"error": str(exc)}
        except Exception as exc:  # noqa: BLE001 - the server must keep serving
            return 500, {"error": f"internal error: {type(exc).__name__}: {exc}"}

    def _route(self, method: str, path: str, body: bytes) -> tuple[int, dict]:
        path = path.split("?", 1)[0]
        if method == "OPTIONS":
            return 204, {}
        if path == "/classify":
            if method != "POST":
                raise _HttpError(405, "use POST")
            return self._classify(body)
        if path == "/ddos/result":
            if method != "GET":
                raise _HttpError(405, "use GET")
            return self._ddos_result()
        if path == "/model":
            if method == "GET":
                return 200, self._model_metadata()
            if method == "PUT":
                return self._put_model(body)
            raise _HttpError(405, "use GET or PUT")
        if path == "/config":
            if method == "GET":
                return 200, self._effective_config()
            if method == "PUT":
                return self._put_config(body)
            raise _HttpError(405, "use GET or PUT")
        if path == "/blocklist":
            if method != "GET":
                raise _HttpError(405, "use GET")
            return 200, {"sources": self.blocklist.snapshot()}
        if path.startswith("/blocklist/"):
            source = unquote(path[len("/blocklist/"):])
            if method == "PUT":
                return self._blocklist_put(source)
            if method == "DELETE":
                return self._blocklist_delete(source)
            raise _HttpError(405, "use PUT or DELETE")
        raise _HttpError(404, f"no such endpoint: {path}")


_STATUS_TEXT = {
    200: "OK", 204: "No Content", 400: "Bad Request", 404: "Not Found",
    405: "Method Not Allowed", 413: "Payload Too Large",
    422: "Unprocessable Entity", 500: "Internal Server Error",
    503: "Service Unavailable",
}

_CORS = (b"Access-Control-Allow-Origin: *\r\n"
         b"Access-Control-Allow-Methods: GET, POST, PUT, DELETE, OPTIONS\r\n"
         b"Access-Control-Allow-Headers: Content-Type\r\n")


def _build_response(status: int, payload: dict, keep_alive: bool) -> bytes:
    body = b"" if status == 204 else json.dumps(payload).encode("utf-8")
    head = (f"HTTP/1.1 {status} {_STATUS_TEXT.get(status, 'Unknown')}\r\n"
            f"Content-Type: application/json\r\n"
            f"Content-Length: {len(body)}\r\n").encode("latin-1")
    conn = b"Connection: keep-alive\r\n" if keep_alive else b"Connection: close\r\n"
    return head + _CORS + conn + b"\r\n" + body


class HttpProtocol(asyncio.Protocol):
    """Minimal HTTP/1.1 request/response handling over httptools."""

    def __init__(self, service: DetectService):
        self.service = service
        self.parser = httptools.HttpRequestParser(self)
        self.transport = None
        self.url = b""
        self.body = bytearray()

    def connection_made(self, transport):
        self.transport = transport

    def data_received(self, data: bytes):
        try:
            self.parser.feed_data(data)
        except httptools.HttpParserError:
            self.transport.close()

    def on_message_begin(self):
        self.url = b""
        self.body = bytearray()

    def on_url(self, url: bytes):
        self.url += url

    def on_body(self, body: bytes):
        self.body += body

    def on_message_complete(self):
        method = self.parser.get_method().decode("latin-1")
        keep_alive = self.parser.should_keep_alive()
        status, payload = self.service.dispatch(method, self.url.decode("latin-1"),
                                                bytes(self.body))
        self.transport.write(_build_response(status, payload, keep_alive))
        if not keep_alive:
            self.transport.close()


class ServiceHandle:
    """A running server plus the machinery to stop it cleanly."""

    def __init__(self, service: DetectService, loop: asyncio.AbstractEventLoop,
                 server: asyncio.AbstractServer, thread: threading.Thread | None):
        self.service = service
        self.loop = loop
        self.server = server
        self.thread = thread
        sock = server.sockets[0].getsockname()
        self.host, self.port = sock[0], sock[1]

    def stop(self) -> None:
        def _shutdown():
            self.server.close()
            self.loop.stop()
        self.loop.call_soon_threadsafe(_shutdown)
        if self.thread is not None:
            self.thread.join(timeout=10)


def start_service(config: ServiceConfig) -> ServiceHandle:
    """Run the service on a daemon thread; returns once it accepts connections."""
    service = DetectService(config)
    loop = asyncio.new_event_loop()
    server = loop.run_until_complete(
        loop.create_server(lambda: HttpProtocol(service), config.host, config.port))

    thread = threading.Thread(target=_run_loop, args=(loop,), daemon=True)
    thread.start()
    return ServiceHandle(service, loop, server, thread)


def _run_loop(loop: asyncio.AbstractEventLoop) -> None:
    asyncio.set_event_loop(loop)
    try:
        loop.run_forever()
    finally:
        pending = asyncio.all_tasks(loop)
        for task in pending:
            task.cancel()
        loop.close()


def run_service(config: ServiceConfig) -> None:
    """Blocking entry point for the CLI: serve until interrupted."""
    service = DetectService(config)
    loop = asyncio.new_event_loop()
    asyncio.set_event_loop(loop)
    server = loop.run_until_complete(
        loop.create_server(lambda: HttpProtocol(service), config.host, config.port))
    addr = server.sockets[0].getsockname()
    print(f"flowsentinel service listening on {addr[0]}:{addr[1]}", flush=True)
    try:
        loop.run_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
        loop.run_until_complete(server.wait_closed())
        loop.close()
