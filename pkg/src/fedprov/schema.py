"""Patient record schema, feature encoding, splitting, standardization, CSV I/O.

The feature column order below is the single global contract: every matrix,
gradient vector, and standardizer in the package indexes columns in this
order. Changing it invalidates saved checkpoints and CSVs.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .rng import substream

logger = logging.getLogger(__name__)

# Fixed encoding order for the 14 predictors.
FEATURE_COLUMNS: tuple[str, ...] = (
    "age",
    "sex_male",
    "sbp",
    "bmi",
    "ldl",
    "hdl",
    "hba1c",
    "tg",
    "hypertension",
    "depression",
    "osteoarthritis",
    "copd",
    "htn_med",
    "corticosteroids",
)
N_FEATURES = len(FEATURE_COLUMNS)

CONTINUOUS_COLUMNS: tuple[str, ...] = ("age", "sbp", "bmi", "ldl", "hdl", "hba1c", "tg")
BINARY_COLUMNS: tuple[str, ...] = tuple(c for c in FEATURE_COLUMNS if c not in CONTINUOUS_COLUMNS)
# The only features that may be missing in a record.
OPTIONAL_COLUMNS: tuple[str, ...] = ("bmi", "ldl", "hdl", "hba1c", "tg")

CONTINUOUS_IDX = np.array([FEATURE_COLUMNS.index(c) for c in CONTINUOUS_COLUMNS])
BINARY_IDX = np.array([FEATURE_COLUMNS.index(c) for c in BINARY_COLUMNS])
OPTIONAL_IDX = np.array([FEATURE_COLUMNS.index(c) for c in OPTIONAL_COLUMNS])

# Valid value ranges for present continuous features.
FEATURE_RANGES: dict[str, tuple[float, float]] = {
    "age": (18.0, 99.0),
    "sbp": (69.0, 218.0),
    "bmi": (11.0, 66.48),
    "ldl": (0.0, 8.81),
    "hdl": (0.18, 6.78),
    "hba1c": (4.0, 17.9),
    "tg": (0.2, 25.57),
}

# The seven provinces that act as federated clients, in canonical order.
FL_PROVINCES: tuple[str, ...] = ("AB", "BC", "MB", "NL", "NS", "ON", "QC")
# Recognized on input but excluded from partitioning (too few samples).
EXCLUDED_PROVINCES: tuple[str, ...] = ("NB", "PE")
KNOWN_PROVINCES: frozenset[str] = frozenset(FL_PROVINCES) | frozenset(EXCLUDED_PROVINCES)
PROVINCE_INDEX: dict[str, int] = {p: i for i, p in enumerate(FL_PROVINCES)}

CSV_HEADER: tuple[str, ...] = FEATURE_COLUMNS + ("diabetes", "province")

_STD_FLOOR = 1e-8


@dataclass(frozen=True, slots=True)
class PatientRecord:
    """One cohort row: 14 predictors, binary diabetes label, province tag.

    Validation runs at construction; an invalid record cannot exist, so
    downstream encoding never re-checks ranges.
    """

    age: float
    sex_male: int
    sbp: float
    bmi: float | None
    ldl: float | None
    hdl: float | None
    hba1c: float | None
    tg: float | None
    hypertension: int
    depression: int
    osteoarthritis: int
    copd: int
    htn_med: int
    corticosteroids: int
    diabetes: int
    province: str

    def __post_init__(self) -> None:
        prov = self.province.upper()
        if prov == "PEI":  # accepted alias for the two-letter code
            prov = "PE"
        if prov not in KNOWN_PROVINCES:
            raise ValidationError(f"unknown province code: {self.province!r}")
        object.__setattr__(self, "province", prov)

        for name in CONTINUOUS_COLUMNS:
            value = getattr(self, name)
            if value is None:
                if name not in OPTIONAL_COLUMNS:
                    raise ValidationError(f"{name} may not be missing")
                continue
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
            lo, hi = FEATURE_RANGES[name]
            if not lo <= value <= hi:
                raise ValidationError(
                    f"{name}={value!r} outside valid range [{lo}, {hi}]"
                )
        for name in BINARY_COLUMNS + ("diabetes",):
            value = getattr(self, name)
            if value not in (0, 1):
                raise ValidationError(f"{name} must be 0 or 1, got {value!r}")


@dataclass(frozen=True, slots=True)
class Dataset:
    """Ordered, reproducible collection of patient records."""

    records: tuple[PatientRecord, ...]
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True, slots=True)
class LabeledMatrix:
    """Dense n x 14 feature matrix with parallel binary label vector.

    Contains no missing entries; this is the training currency after
    imputation.
    """

    x: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...] = FEATURE_COLUMNS

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.x.shape[1] != len(self.column_names):
            raise ValidationError(
                f"feature matrix must be n x {len(self.column_names)}, got {self.x.shape}"
            )
        if self.x.shape[0] != self.y.shape[0]:
            raise ValidationError(
                f"row count mismatch: x has {self.x.shape[0]}, y has {self.y.shape[0]}"
            )
        if np.isnan(self.x).any():
            raise ValidationError("labeled matrix may not contain missing entries")

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True, slots=True)
class Standardizer:
    """Per-column shift/scale fit on training data. Binary columns pass through."""

    mean: np.ndarray
    std: np.ndarray


def encode_features(record: PatientRecord) -> np.ndarray:
    """Encode one record as a 14-slot float vector in FEATURE_COLUMNS order.

    Binary fields map to {0.0, 1.0}; missing optional fields map to NaN,
    the in-matrix missing marker consumed by the imputation stage.
    """
    out = np.empty(N_FEATURES)
    for i, name in enumerate(FEATURE_COLUMNS):
        value = getattr(record, name)
        out[i] = np.nan if value is None else float(value)
    return out


def encode_dataset(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Encode all records: (n x 14 matrix with NaN for missing, label vector)."""
    x = np.empty((len(ds.records), N_FEATURES))
    y = np.empty(len(ds.records))
    for i, rec in enumerate(ds.records):
        x[i] = encode_features(rec)
        y[i] = float(rec.diabetes)
    return x, y


def dataset_to_matrix(ds: Dataset) -> LabeledMatrix:
    """Encode a fully observed dataset as a LabeledMatrix."""
    x, y = encode_dataset(ds)
    return LabeledMatrix(x=x, y=y)


def split_train_test(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle with the seeded RNG, then split; |train| = round(fraction * n)."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"split fraction must be in (0, 1], got {fraction}")
    n = len(ds.records)
    if n == 0:
        raise ValidationError("cannot split an empty dataset")
    rng = substream(seed, "split")
    order = rng.permutation(n)
    n_train = int(round(fraction * n))
    train = tuple(ds.records[i] for i in order[:n_train])
    test = tuple(ds.records[i] for i in order[n_train:])
    return (
        Dataset(records=train, provenance=f"{ds.provenance}/train"),
        Dataset(records=test, provenance=f"{ds.provenance}/test"),
    )


def partition_by_province(ds: Dataset) -> dict[str, Dataset]:
    """Group records by province; NB/PE records are dropped with a logged count."""
    buckets: dict[str, list[PatientRecord]] = {}
    excluded = 0
    for rec in ds.records:
        if rec.province not in KNOWN_PROVINCES:
            raise ValidationError(f"unknown province code: {rec.province!r}")
        if rec.province in EXCLUDED_PROVINCES:
            excluded += 1
            continue
        buckets.setdefault(rec.province, []).append(rec)
    if excluded:
        logger.info("partition_by_province: excluded %d NB/PE record(s)", excluded)
    return {
        prov: Dataset(records=tuple(recs), provenance=f"{ds.provenance}/{prov}")
        for prov, recs in buckets.items()
    }


def standardize_fit(m: LabeledMatrix) -> Standardizer:
    """Fit per-column z-score statistics on the continuous columns.

    Binary columns keep identity statistics (mean 0, std 1). A constant
    continuous column gets its std floored at 1e-8 with a warning.
    """
    mean = np.zeros(N_FEATURES)
    std = np.ones(N_FEATURES)
    cont = m.x[:, CONTINUOUS_IDX]
    mean[CONTINUOUS_IDX] = cont.mean(axis=0)
    col_std = cont.std(axis=0)
    floored = col_std < _STD_FLOOR
    if floored.any():
        names = [CONTINUOUS_COLUMNS[i] for i in np.flatnonzero(floored)]
        warnings.warn(f"constant continuous column(s) {names}; std floored at {_STD_FLOOR}")
        col_std = np.maximum(col_std, _STD_FLOOR)
    std[CONTINUOUS_IDX] = col_std
    return Standardizer(mean=mean, std=std)


def standardize_apply(s: Standardizer, m: LabeledMatrix) -> LabeledMatrix:
    """Transform continuous columns with fit-time statistics; binaries untouched."""
    return LabeledMatrix(x=(m.x - s.mean) / s.std, y=m.y, column_names=m.column_names)


def _format_cell(name: str, value: float | int | None) -> str:
    if value is None:
        return ""
    if name in CONTINUOUS_COLUMNS:
        return repr(float(value))  # shortest round-trip decimal
    return str(int(value))


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write a dataset using the documented 16-column schema (missing = empty)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in ds.records:
            row = [_format_cell(name, getattr(rec, name)) for name in FEATURE_COLUMNS]
            row.append(str(rec.diabetes))
            row.append(rec.province)
            writer.writerow(row)


def _parse_cell(name: str, text: str, line_no: int) -> float | int | None:
    if text == "":
        if name in OPTIONAL_COLUMNS:
            return None
        raise ValidationError(f"line {line_no}: required field {name!r} is empty")
    try:
        if name in CONTINUOUS_COLUMNS:
            return float(text)
        return int(text)
    except ValueError as exc:
        raise ValidationError(f"line {line_no}: bad value {text!r} for {name!r}") from exc


def read_csv(path: str | Path, provenance: str | None = None) -> Dataset:
    """Read a dataset; the header must match CSV_HEADER exactly."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if tuple(header) != CSV_HEADER:
            raise ValidationError(
                f"{path}: header mismatch; expected {list(CSV_HEADER)}, found {header}"
            )
        records: list[PatientRecord] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValidationError(
                    f"line {line_no}: expected {len(CSV_HEADER)} fields, found {len(row)}"
                )
            values = {
                name: _parse_cell(name, cell, line_no)
                for name, cell in zip(FEATURE_COLUMNS, row)
            }
            try:
                records.append(
                    PatientRecord(
                        **values,
                        diabetes=_parse_cell("diabetes", row[-2], line_no),
                        province=row[-1],
                    )
                )
            except ValidationError as exc:
                raise ValidationError(f"line {line_no}: {exc}") from exc
    return Dataset(records=tuple(records), provenance=provenance or str(path))


def with_missing(record: PatientRecord, field_names: tuple[str, ...]) -> PatientRecord:
    """Copy of record with the given optional fields blanked."""
    bad = [f for f in field_names if f not in OPTIONAL_COLUMNS]
    if bad:
        raise ValidationError(f"field(s) {bad} may not be missing")
    return replace(record, **{f: None for f in field_names})


def record_field_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(PatientRecord))
