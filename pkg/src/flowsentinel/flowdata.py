"""Flow-record data model, CSV ingestion and the four-class label taxonomy.

A Dataset is a dense float64 matrix (one row per flow) plus an optional
integer label vector, aligned to an ordered FeatureSchema. CSV files use
CICFlowMeter column names with an optional trailing "Label" column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyFileError,
    MissingColumnError,
    NotLabeledError,
    SampleTooLargeError,
    SchemaMismatchError,
    UnknownLabelError,
    UnparsableCellError,
)

CLASS_NAMES = ("BENIGN", "DDoS-DNS", "DDoS-NTP", "DDoS-UDP")
CLASS_COUNT = 4
ATTACK_CLASS_IDS = (1, 2, 3)

# Canonical 24-feature schema used by every downstream stage. Ports and
# protocol ride along as plain reals; durations are microseconds, rates
# bytes/s or packets/s, lengths bytes.
CANONICAL_FEATURES = (
    "Source Port",
    "Destination Port",
    "Protocol",
    "Flow Duration",
    "Total Fwd Packets",
    "Total Backward Packets",
    "Total Length of Fwd Packets",
    "Total Length of Bwd Packets",
    "Fwd Packet Length Max",
    "Fwd Packet Length Min",
    "Fwd Packet Length Mean",
    "Fwd Packet Length Std",
    "Bwd Packet Length Max",
    "Bwd Packet Length Min",
    "Bwd Packet Length Mean",
    "Flow Bytes/s",
    "Flow Packets/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Flow IAT Max",
    "Flow IAT Min",
    "Fwd IAT Mean",
    "Bwd IAT Mean",
    "Packet Length Mean",
)

LABEL_COLUMN = "Label"

_NAME_TO_ID = {name.casefold(): i for i, name in enumerate(CLASS_NAMES)}


@dataclass(frozen=True)
class ClassLabel:
    """One of the four traffic classes; id 0 is the only non-attack class."""

    id: int
    name: str

    def __post_init__(self):
        if not (0 <= self.id < CLASS_COUNT) or CLASS_NAMES[self.id] != self.name:
            raise UnknownLabelError(f"{self.id}/{self.name}")

    @classmethod
    def from_id(cls, class_id: int) -> "ClassLabel":
        if not 0 <= int(class_id) < CLASS_COUNT:
            raise UnknownLabelError(str(class_id))
        return cls(int(class_id), CLASS_NAMES[int(class_id)])

    @property
    def is_attack(self) -> bool:
        return self.id != 0


def encode_label(raw: str) -> ClassLabel:
    """Map a label string to its ClassLabel, case-insensitively after trim."""
    class_id = _NAME_TO_ID.get(raw.strip().casefold())
    if class_id is None:
        raise UnknownLabelError(raw)
    return ClassLabel.from_id(class_id)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, unique feature-column names; fixed for a dataset's lifetime."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise SchemaMismatchError("feature names must be unique")

    @property
    def count(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingColumnError(name) from None


CANONICAL_SCHEMA = FeatureSchema(CANONICAL_FEATURES)


@dataclass(frozen=True)
class FlowRecord:
    """A single flow: feature values aligned to a schema, optional label."""

    values: np.ndarray
    label: ClassLabel | None = None


class Dataset:
    """Immutable matrix view of flow records sharing one schema.

    `X` is (n, schema.count) float64; `y` is (n,) int64 class ids or None
    for unlabeled data. Non-finite cells are only legal before preprocessing.
    """

    def __init__(self, schema: FeatureSchema, X: np.ndarray, y: np.ndarray | None = None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != schema.count:
            raise SchemaMismatchError(
                f"matrix width {X.shape[1] if X.ndim == 2 else '?'} != schema count {schema.count}"
            )
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (X.shape[0],):
                raise SchemaMismatchError("label vector length != record count")
        self.schema = schema
        self.X = X
        self.y = y
        self.X.setflags(write=False)
        if self.y is not None:
            self.y.setflags(write=False)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def labeled(self) -> bool:
        return self.y is not None

    def record(self, i: int) -> FlowRecord:
        label = ClassLabel.from_id(int(self.y[i])) if self.labeled else None
        return FlowRecord(self.X[i].copy(), label)

    def class_counts(self) -> np.ndarray:
        """Per-class record counts (length 4); requires labels."""
        if not self.labeled:
            raise NotLabeledError("dataset has no labels")
        return np.bincount(self.y, minlength=CLASS_COUNT)

    def take(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, self.X[idx], self.y[idx] if self.labeled else None)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.X, y)


@dataclass
class DatasetSummary:
    record_count: int
    class_counts: list[int] | None     # None when the dataset is unlabeled
    feature_min: np.ndarray            # over finite cells only
    feature_max: np.ndarray
    feature_mean: np.ndarray
    non_finite_cells: int
    duplicate_count: int
    schema: FeatureSchema = field(repr=False, default=CANONICAL_SCHEMA)


def load_csv(path, schema_mode: str = "project-to-canonical") -> Dataset:
    """Load a CICFlowMeter-style CSV into a Dataset.

    project-to-canonical keeps only the canonical columns (in canonical
    order) and drops anything else; strict additionally rejects unknown
    feature columns. Both modes need every canonical column present.
    "Infinity"/"inf"/"NaN" cells parse to non-finite floats; a "Label"
    column, when present, is decoded through encode_label.
    """
    if schema_mode not in ("strict", "project-to-canonical"):
        raise ValueError(f"unknown schema_mode: {schema_mode!r}")

    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFileError(f"{path}: no header row") from None

        col_index: dict[str, int] = {}
        for i, name in enumerate(header):
            if name not in col_index:  # first occurrence wins on duplicates
                col_index[name] = i

        for name in CANONICAL_FEATURES:
            if name not in col_index:
                raise MissingColumnError(name)
        if schema_mode == "strict":
            known = set(CANONICAL_FEATURES) | {LABEL_COLUMN}
            extras = [h for h in header if h not in known]
            if extras:
                raise SchemaMismatchError(f"strict mode: unexpected columns {extras}")

        feature_pos = [col_index[name] for name in CANONICAL_FEATURES]
        label_pos = col_index.get(LABEL_COLUMN)

        rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            values = []
            for j, pos in enumerate(feature_pos):
                cell = row[pos].strip() if pos < len(row) else ""
                try:
                    values.append(float(cell))
                except ValueError:
                    raise UnparsableCellError(row_no, CANONICAL_FEATURES[j], cell) from None
            rows.append(values)
            if label_pos is not None:
                raw = row[label_pos] if label_pos < len(row) else ""
                labels.append(encode_label(raw).id)

    if not rows:
        raise EmptyFileError(f"{path}: header but no data rows")

    X = np.array(rows, dtype=np.float64)
    y = np.array(labels, dtype=np.int64) if label_pos is not None else None
    return Dataset(CANONICAL_SCHEMA, X, y)


def write_csv(d: Dataset, path) -> None:
    """Write a Dataset in the same CSV dialect load_csv reads.

    Floats are emitted with repr (shortest text that round-trips the
    exact 64-bit value), so load_csv(write_csv(d)) is the identity.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(d.schema.names) + ([LABEL_COLUMN] if d.labeled else [])
        writer.writerow(header)
        for i in range(len(d)):
            row = [repr(v) for v in d.X[i].tolist()]
            if d.labeled:
                row.append(CLASS_NAMES[d.y[i]])
            writer.writerow(row)


def _duplicate_count(d: Dataset) -> int:
    seen: set[bytes] = set()
    dupes = 0
    has_labels = d.labeled
    for i in range(len(d)):
        key = d.X[i].tobytes() + (bytes([d.y[i]]) if has_labels else b"")
        if key in seen:
            dupes += 1
        else:
            seen.add(key)
    return dupes


def summarize(d: Dataset) -> DatasetSummary:
    """Exact per-class counts plus per-feature stats over finite cells."""
    finite = np.isfinite(d.X)
    non_finite = int(d.X.size - finite.sum())
    masked = np.where(finite, d.X, np.nan)
    with np.errstate(invalid="ignore"):
        fmin = np.nanmin(masked, axis=0) if len(d) else np.full(d.schema.count, np.nan)
        fmax = np.nanmax(masked, axis=0) if len(d) else np.full(d.schema.count, np.nan)
        fmean = np.nanmean(masked, axis=0) if len(d) else np.full(d.schema.count, np.nan)
    counts = d.class_counts().tolist() if d.labeled else None
    return DatasetSummary(
        record_count=len(d),
        class_counts=counts,
        feature_min=fmin,
        feature_max=fmax,
        feature_mean=fmean,
        non_finite_cells=non_finite,
        duplicate_count=_duplicate_count(d),
        schema=d.schema,
    )


def proportional_allocation(counts: np.ndarray, n: int) -> np.ndarray:
    """Split n into per-class quotas proportional to counts, within +-1.

    Largest-remainder method; remainder ties go to the lowest class id.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    exact = counts * (n / total)
    quota = np.floor(exact).astype(np.int64)
    remainder = n - int(quota.sum())
    if remainder > 0:
        fractional = exact - quota
        # stable sort descending on fractional part; ties keep class-id order
        order = np.argsort(-fractional, kind="stable")
        for c in order[:remainder]:
            quota[c] += 1
    return np.minimum(quota, counts)


def stratified_sample(d: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic per-class proportional subsample of a labeled dataset."""
    if not d.labeled:
        raise NotLabeledError("stratified_sample needs labels")
    if n > len(d):
        raise SampleTooLargeError(f"requested {n} of {len(d)} records")
    counts = d.class_counts()
    quotas = proportional_allocation(counts, n)
    rng = np.random.default_rng(seed)
    chosen: list[np.ndarray] = []
    for c in range(CLASS_COUNT):
        idx = np.flatnonzero(d.y == c)
        if idx.size:
            perm = rng.permutation(idx.size)
            chosen.append(idx[perm[: quotas[c]]])
    picked = np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=np.int64)
    return d.take(picked)
