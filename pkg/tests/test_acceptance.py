"""Acceptance gate: one test per shipped guarantee.

Each test asserts a single headline requirement end to end, at its stated
tolerance, so `pytest -v tests/test_acceptance.py` reads as a pass/fail
checklist of everything this package promises. The real-capture check is
environment-dependent and skips unless FSNT_REAL_DATA_CSV points at a
labeled capture.
"""

import gc
import json
import os
import select
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from flowsentinel.cli import main
from flowsentinel.evaluation import class_metrics, confusion_matrix, evaluate, roc_curve
from flowsentinel.features import fit_pca, transform_pca
from flowsentinel.flowdata import CLASS_COUNT, ClassLabel, Dataset, load_csv
from flowsentinel.learn import (KINDS, EstimatorSpec, fit, load_model, predict,
                                predict_matrix, predict_proba_matrix, save_model)
from flowsentinel.learn.linear import logistic_objective
from flowsentinel.learn.tree_models import fit_adaboost, fit_gbt
from flowsentinel.preprocess import (SplitSpec, apply_standardizer, dedup,
                                     drop_invalid, fit_standardizer,
                                     train_test_split)
from flowsentinel.service import ServiceConfig, start_service
from flowsentinel.traffic import GeneratorSpec, generate_dataset

from oracles import (auc_pairwise, central_diff, confusion_loops, jacobi_eigh,
                     prf_exact, tree_predict, exhaustive_tree)
from support import blob_dataset, feature_payload, free_port, http_json, wait_until

_SMALL_HP = {
    "LR": {"max_epochs": 80},
    "NB": {},
    "KNN": {"k": 5},
    "DT": {"max_depth": 10},
    "RF": {"trees": 10, "max_depth": 10},
    "ADABOOST": {"rounds": 10},
    "GBT": {"rounds": 10, "max_depth": 3},
    "SVM": {"epochs": 15},
}


def _small_models(data):
    return {kind: fit(EstimatorSpec(kind=kind, hyperparameters=_SMALL_HP[kind], seed=2),
                      data) for kind in KINDS}


# ---- metrics oracles ---------------------------------------------------------------


def test_metrics_oracle_suite_1000_trials():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        t = rng.integers(0, CLASS_COUNT, size=n)
        p = rng.integers(0, CLASS_COUNT, size=n)

        cm = confusion_matrix(t, p)
        assert cm.counts.tolist() == confusion_loops(t, p, CLASS_COUNT)

        got = class_metrics(cm)
        prec, rec, f1, acc = prf_exact(cm.counts.tolist())
        assert got.precision.tolist() == [float(v) for v in prec]
        assert got.recall.tolist() == [float(v) for v in rec]
        assert got.f1.tolist() == [float(v) for v in f1]
        assert got.accuracy == float(acc)

        c = int(rng.integers(0, CLASS_COUNT))
        if 0 < (t == c).sum() < n:
            # half the trials use a coarse grid so score ties are common
            if rng.integers(0, 2):
                s = rng.integers(0, 8, size=n) / 7.0
            else:
                s = rng.random(n)
            auc = roc_curve(t, s, c).auc
            assert abs(auc - float(auc_pairwise(t.tolist(), s.tolist(), c))) <= 1e-9


# ---- pca ---------------------------------------------------------------------------


def test_pca_suite_matches_independent_eigensolver():
    checked = 0
    seed = 0
    while checked < 8:
        seed += 1
        d = 5 + (seed % 6)
        n = 60
        local = np.random.default_rng(seed)
        base = local.normal(size=(n, d)) @ np.diag(1.0 + 3.0 * local.random(d))
        data = Dataset(tuple_schema(d), base, None)

        pca = fit_pca(data, d)
        centered = base - base.mean(axis=0)
        cov = centered.T @ centered / n
        values, vectors = jacobi_eigh(cov)

        gaps = np.abs(np.diff(values)) / max(1.0, float(np.abs(values).max()))
        if gaps.min() < 1e-4:
            continue  # eigenvector comparison is ill-posed near degeneracy
        checked += 1

        V = pca.components  # rows are components
        assert np.abs(V @ V.T - np.eye(d)).max() < 1e-9
        assert abs(pca.all_eigenvalues.sum() - np.trace(cov)) < 1e-8
        Z = transform_pca(data, pca).X
        recon = Z @ V + pca.means
        assert np.abs(recon - base).max() < 1e-8
        assert np.abs(pca.all_eigenvalues - values).max() < 1e-8
        for j in range(d):
            assert abs(abs(float(V[j] @ vectors[:, j])) - 1.0) < 1e-8
    assert checked == 8


def tuple_schema(d):
    from flowsentinel.flowdata import FeatureSchema
    return FeatureSchema(tuple(f"f{j}" for j in range(d)))


# ---- preprocessing -----------------------------------------------------------------


def test_preprocessing_suite(small_corpus):
    rng = np.random.default_rng(5)
    X = small_corpus.X.copy()
    bad = rng.choice(len(X), size=25, replace=False)
    X[bad[:13], 3] = np.nan
    X[bad[13:], 7] = np.inf
    dirty = Dataset(small_corpus.schema, X, small_corpus.y)

    clean, dropped = drop_invalid(dirty)
    assert dropped == 25
    assert np.isfinite(clean.X).all()

    once, removed_once = dedup(clean)
    twice, removed_twice = dedup(once)
    assert removed_twice == 0
    assert np.array_equal(once.X, twice.X) and np.array_equal(once.y, twice.y)

    train, test = train_test_split(once, SplitSpec(train_fraction=0.6, seed=0))
    assert len(train) + len(test) == len(once)
    whole = {r.tobytes() for r in np.hstack([once.X, once.y[:, None]])}
    parts = [r.tobytes() for r in np.hstack([train.X, train.y[:, None]])]
    parts += [r.tobytes() for r in np.hstack([test.X, test.y[:, None]])]
    assert len(parts) == len(once) and set(parts) == whole

    params = fit_standardizer(train)
    Z = apply_standardizer(train, params).X
    assert np.abs(Z.mean(axis=0)).max() <= 1e-9
    stds = Z.std(axis=0)
    moving = params.stds > 0.0
    assert np.abs(stds[moving] - 1.0).max() <= 1e-9


# ---- classifier properties -----------------------------------------------------------


def test_classifier_property_suite():
    data = blob_dataset(seed=21, per_class=40)
    rng = np.random.default_rng(3)
    queries = rng.normal(scale=3.0, size=(300, data.schema.count))
    models = _small_models(data)
    for kind, model in models.items():
        proba = predict_proba_matrix(model, queries)
        assert proba.shape == (300, CLASS_COUNT)
        assert proba.min() >= 0.0, kind
        assert np.abs(proba.sum(axis=1) - 1.0).max() <= 1e-9, kind
        assert np.array_equal(predict_matrix(model, queries), proba.argmax(axis=1)), kind
        for i in (0, 150, 299):
            assert predict(model, queries[i]) == ClassLabel.from_id(int(proba[i].argmax()))

    # analytic LR gradient vs central differences
    X = rng.normal(size=(40, 5))
    y = rng.integers(0, CLASS_COUNT, size=40)
    W = rng.normal(scale=0.5, size=(CLASS_COUNT, 5))
    b = rng.normal(scale=0.5, size=CLASS_COUNT)
    _, dW, db = logistic_objective(W, b, X, y, l2=0.01)
    num_W = central_diff(lambda P: logistic_objective(P, b, X, y, 0.01)[0], W.copy())
    num_b = central_diff(lambda p: logistic_objective(W, p, X, y, 0.01)[0], b.copy())
    denom = max(1.0, float(np.abs(dW).max()), float(np.abs(db).max()))
    assert np.abs(dW - num_W).max() / denom < 1e-4
    assert np.abs(db - num_b).max() / denom < 1e-4

    # DT agrees with the exhaustive split-search oracle on small instances;
    # integer grids keep both split-scoring routes in exact float arithmetic
    from flowsentinel.learn.tree_models import fit_tree
    for seed in range(6):
        local = np.random.default_rng(seed)
        n = int(local.integers(12, 51))
        Xs = local.integers(0, 6, size=(n, 3)).astype(np.float64)
        ys = local.integers(0, CLASS_COUNT, size=n)
        est, _, _ = fit_tree(Xs, ys, {"max_depth": 20, "min_samples_leaf": 1,
                                      "min_impurity_decrease": 0.0}, seed=0)
        reference = exhaustive_tree(Xs, ys, CLASS_COUNT)
        probe = np.vstack([Xs, local.uniform(-1.0, 7.0, size=(400, 3))])
        want = np.array([tree_predict(reference, z) for z in probe])
        assert np.array_equal(est.proba_matrix(probe), want)

    # a forest of one unbagged full-feature tree is the tree
    dt = models["DT"]
    rf1 = fit(EstimatorSpec(kind="RF", hyperparameters={
        "trees": 1, "bootstrap": False, "max_features": "all", "max_depth": 10},
        seed=2), data)
    assert np.array_equal(predict_proba_matrix(rf1, queries),
                          predict_proba_matrix(dt, queries))

    # boosting diagnostics straight from the training logs
    Xb = rng.normal(size=(160, 4)) + 2.5 * np.eye(4)[np.repeat(np.arange(4), 40)]
    yb = np.repeat(np.arange(4), 40)
    _, gbt_log, _ = fit_gbt(Xb, yb, {"rounds": 30, "learning_rate": 0.1,
                                     "max_depth": 3, "l2": 1.0}, seed=0)
    losses = [e["loss"] for e in gbt_log]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    _, ada_log, _ = fit_adaboost(Xb, yb, {"rounds": 30}, seed=0)
    assert len(ada_log) > 0
    assert all(e["loss"] < (CLASS_COUNT - 1) / CLASS_COUNT for e in ada_log)


# ---- persistence ----------------------------------------------------------------------


def test_persistence_roundtrip_bit_identical_on_1000_inputs(tmp_path):
    data = blob_dataset(seed=22, per_class=40)
    rng = np.random.default_rng(9)
    queries = rng.normal(scale=4.0, size=(1000, data.schema.count))
    for kind, model in _small_models(data).items():
        path = tmp_path / f"{kind.lower()}.fsm"
        save_model(model, str(path))
        loaded = load_model(str(path))
        assert np.array_equal(predict_proba_matrix(loaded, queries),
                              predict_proba_matrix(model, queries)), kind


# ---- service --------------------------------------------------------------------------


def _classify_request(body: dict) -> bytes:
    raw = json.dumps(body).encode("utf-8")
    head = (f"POST /classify HTTP/1.1\r\nHost: 127.0.0.1\r\n"
            f"Content-Type: application/json\r\nContent-Length: {len(raw)}\r\n"
            f"Connection: keep-alive\r\n\r\n").encode("latin-1")
    return head + raw


def _response_complete(buf: bytearray):
    end = buf.find(b"\r\n\r\n")
    if end < 0:
        return None
    head = bytes(buf[:end]).decode("latin-1").split("\r\n")
    status = int(head[0].split(" ")[1])
    length = next(int(line.split(":", 1)[1]) for line in head[1:]
                  if line.lower().startswith("content-length:"))
    if len(buf) < end + 4 + length:
        return None
    payload = bytes(buf[end + 4: end + 4 + length])
    del buf[: end + 4 + length]
    return status, payload


def _concurrent_round(socks, request: bytes) -> list:
    """Send one request on every socket, then collect every response.

    The client is a single thread multiplexing with select, so it never
    competes with the server for the interpreter the way a thread-per-
    request client would; measured latency is the server's own queueing
    plus service time.
    """
    sent_at = {}
    buffers = {s: bytearray() for s in socks}
    for s in socks:
        s.sendall(request)
        sent_at[s] = time.perf_counter()
    latencies = []
    pending = set(socks)
    deadline = time.monotonic() + 30.0
    while pending:
        ready, _, _ = select.select(list(pending), [], [], 1.0)
        if time.monotonic() > deadline:
            raise AssertionError(f"{len(pending)} responses never arrived")
        for s in ready:
            chunk = s.recv(65536)
            if not chunk:
                raise AssertionError("server closed a keep-alive connection")
            buffers[s] += chunk
            parsed = _response_complete(buffers[s])
            if parsed is None:
                continue
            status, _ = parsed
            assert status == 200
            latencies.append((time.perf_counter() - sent_at[s]) * 1000.0)
            pending.discard(s)
    return latencies


@pytest.fixture(scope="module")
def rf100_service(tmp_path_factory):
    """An RF(100 trees) model served on loopback, as the latency target."""
    data = generate_dataset(GeneratorSpec(counts=(800, 1500, 800, 1750), seed=42))
    standardizer = fit_standardizer(data)
    pca = fit_pca(apply_standardizer(data, standardizer), 10)
    model = fit(EstimatorSpec(kind="RF", seed=1), data,
                standardizer=standardizer, pca=pca).with_stored_metrics(0.99, 0.8)
    root = tmp_path_factory.mktemp("rf100")
    model_path = str(root / "rf100.fsm")
    save_model(model, model_path)
    config = ServiceConfig(port=free_port(), model_path=model_path,
                           blocklist_path=str(root / "bl.json"))
    handle = start_service(config)
    yield handle, model_path, data
    handle.stop()


def test_service_result_contract_and_tail_latency(rf100_service):
    handle, _, data = rf100_service

    status, body = http_json(handle.port, "GET", "/ddos/result")
    assert status == 200
    assert set(body) == {"ddos", "accuracy", "calculation_time_s", "window", "timeline"}

    request = _classify_request(feature_payload(data, 0))
    socks = []
    try:
        for _ in range(200):
            s = socket.create_connection(("127.0.0.1", handle.port), timeout=5)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            socks.append(s)
        for _ in range(2):
            _concurrent_round(socks, request)  # warm caches and allocator
        # collection pauses from the rest of the suite's garbage are not
        # service latency; measure with the cycle collector parked
        gc.collect()
        gc.disable()
        samples = []
        for _ in range(5):
            samples.extend(_concurrent_round(socks, request))
    finally:
        gc.enable()
        for s in socks:
            s.close()

    p99 = float(np.percentile(np.asarray(samples), 99))
    assert len(samples) == 1000
    assert p99 < 50.0, f"p99 {p99:.2f} ms under 200 concurrent requests"


def test_model_swap_under_load_never_mixes_models(rf100_service, tmp_path):
    handle, rf_path, data = rf100_service
    dt_model = fit(EstimatorSpec(kind="DT", seed=4), data)
    dt_path = str(tmp_path / "dt.fsm")
    save_model(dt_model, dt_path)

    vector = data.X[5]
    rf = load_model(rf_path)
    expected = {
        rf.model_id: [float(p) for p in rf.predict_proba_one(vector)],
        dt_model.model_id: [float(p) for p in dt_model.predict_proba_one(vector)],
    }
    body = feature_payload(data, 5)

    import threading
    seen = []
    crashes = []
    stop = threading.Event()

    def hammer():
        import http.client
        conn = http.client.HTTPConnection("127.0.0.1", handle.port, timeout=10)
        try:
            while not stop.is_set():
                conn.request("POST", "/classify", body=json.dumps(body),
                             headers={"Content-Type": "application/json"})
                resp = conn.getresponse()
                payload = json.loads(resp.read())
                if resp.status != 200:
                    raise AssertionError(f"classify returned {resp.status}")
                seen.append((payload["model_id"], tuple(payload["proba"])))
        except Exception as exc:  # surfaced in the main thread below
            crashes.append(exc)
        finally:
            conn.close()

    worker = threading.Thread(target=hammer)
    worker.start()
    try:
        for i in range(14):
            path = dt_path if i % 2 == 0 else rf_path
            status, _ = http_json(handle.port, "PUT", "/model", {"path": path})
            assert status == 200
            time.sleep(0.03)
    finally:
        stop.set()
        worker.join(timeout=10)
    assert not crashes, crashes
    # leave the module fixture serving its original model
    http_json(handle.port, "PUT", "/model", {"path": rf_path})

    assert len(seen) > 20
    ids = {mid for mid, _ in seen}
    assert ids == set(expected), "load stream should observe both models"
    for mid, proba in seen:
        assert list(proba) == expected[mid], "response mixes one model's id with another's scores"


# ---- end to end ------------------------------------------------------------------------


def test_end_to_end_detection_rates(capsys, tmp_path):
    csv = tmp_path / "flows.csv"
    assert main(["generate", "--out", str(csv), "--seed", "42",
                 "--counts", "4000,7500,4000,8750"]) == 0

    model_path = tmp_path / "rf.fsm"
    assert main(["train", "--csv", str(csv), "--kind", "RF",
                 "--out-model", str(model_path), "--json"]) == 0
    capsys.readouterr()

    port = free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "flowsentinel.cli", "serve",
         "--listen", f"127.0.0.1:{port}", "--model", str(model_path),
         "--blocklist-file", str(tmp_path / "bl.json")],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)

    def port_open():
        try:
            probe = socket.create_connection(("127.0.0.1", port), timeout=0.2)
            probe.close()
            return True
        except OSError:
            return False

    try:
        assert wait_until(port_open, timeout=30.0), "service never came up"
        code = main(["replay", "--generate", "--counts", "500,500,500,500",
                     "--seed", "99", "--target", f"127.0.0.1:{port}",
                     "--rate", "500", "--json"])
        stdout = capsys.readouterr().out
    finally:
        proc.terminate()
        try:
            proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()

    assert code == 0
    report = json.loads(stdout)
    assert report["sent"] == 2000 and report["failures"] == 0
    recall = report["per_class_recall"]
    attack_recall = np.mean([recall["1"], recall["2"], recall["3"]])
    benign_block_rate = 1.0 - recall["0"]
    assert attack_recall >= 0.95, f"attack recall {attack_recall:.4f}"
    assert benign_block_rate <= 0.05, f"benign block rate {benign_block_rate:.4f}"


# ---- full-corpus comparison -----------------------------------------------------------


def test_surrogate_corpus_comparison_budget_and_ordering(capsys, tmp_path):
    csv = tmp_path / "corpus.csv"
    assert main(["generate", "--out", str(csv), "--seed", "42"]) == 0
    capsys.readouterr()

    started = time.perf_counter()
    code = main(["compare", "--csv", str(csv), "--json"])
    elapsed = time.perf_counter() - started
    stdout = capsys.readouterr().out

    assert code == 0
    assert elapsed < 600.0, f"comparison took {elapsed:.0f}s"
    payload = json.loads(stdout)
    accuracy = {row["kind"]: row["accuracy"] for row in payload["rows"]}
    assert set(accuracy) == set(KINDS)
    assert accuracy["RF"] >= 0.97, f"RF {accuracy['RF']:.4f}"
    assert accuracy["DT"] >= 0.97, f"DT {accuracy['DT']:.4f}"
    others = {k: v for k, v in accuracy.items() if k != "NB"}
    assert all(accuracy["NB"] < v for v in others.values()), \
        f"NB {accuracy['NB']:.4f} must rank strictly last"


# ---- conditional reproduction on real captures ------------------------------------------


def test_conditional_real_capture_reproduction():
    """Environment-dependent: needs a user-supplied labeled capture CSV
    (benign plus the three attack classes, 100k+ rows) via
    FSNT_REAL_DATA_CSV. Targets are the reference operating points for
    this pipeline on real capture data."""
    path = os.environ.get("FSNT_REAL_DATA_CSV")
    if not path:
        pytest.skip("FSNT_REAL_DATA_CSV not set; conditional real-capture check skipped")

    data = load_csv(path)
    data, _ = drop_invalid(data)
    data, _ = dedup(data)
    train, test = train_test_split(data, SplitSpec(train_fraction=0.6, seed=0))
    standardizer = fit_standardizer(train)
    pca = fit_pca(apply_standardizer(train, standardizer), 10)

    targets = {"RF": (0.9880, 0.998), "DT": (0.9850, 0.997), "KNN": (0.9688, 0.996)}
    for kind, (acc_target, auc_target) in targets.items():
        model = fit(EstimatorSpec(kind=kind, seed=0), train,
                    standardizer=standardizer, pca=pca)
        report = evaluate(model, test, repeats=1)
        assert abs(report.metrics.accuracy - acc_target) <= 0.03, \
            f"{kind} accuracy {report.metrics.accuracy:.4f} vs {acc_target}"
        assert abs(report.macro_auc - auc_target) <= 0.01, \
            f"{kind} macro AUC {report.macro_auc:.4f} vs {auc_target}"
