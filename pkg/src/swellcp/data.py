"""Loading, filtering, encoding and splitting of void-swelling records.

The expected table has 17 continuous inputs (dose, temperature, implanted
gas and 14 alloying-element weight percents), one categorical irradiation
type and the swelling target in percent. Any extra columns (steel names,
record ids, references) are ignored.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._random import substream
from .errors import ConfigError, RowError, SchemaError

ELEMENTS = ("B", "C", "N", "Al", "Si", "P", "S", "Ti", "Cr", "Mn", "Fe", "Ni", "Cu", "Mo")
CONTINUOUS = ("dose", "temperature", "gas") + ELEMENTS
UNITS = {"dose": "dpa", "temperature": "degC", "gas": "appm", **{e: "wt%" for e in ELEMENTS}}
IRRADIATION_CLASSES = ("Ni6+ ion", "Fe2+ ion", "Neutron", "Proton", "Electron")


@dataclass(frozen=True)
class FeatureSchema:
    continuous_names: tuple = CONTINUOUS
    categorical_name: str = "irradiation_type"
    classes: tuple = IRRADIATION_CLASSES
    target_name: str = "void_swelling"
    # canonical name -> header used in the file, for tables with other headers
    column_map: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if len(self.continuous_names) != 17:
            raise SchemaError("schema needs exactly 17 continuous features")
        if len(set(self.classes)) != 5 or len(self.classes) != 5:
            raise SchemaError("schema needs exactly 5 distinct irradiation classes")

    @property
    def n_features(self):
        return len(self.continuous_names) + 1

    @property
    def n_encoded(self):
        return len(self.continuous_names) + len(self.classes)

    def header_for(self, name):
        return self.column_map.get(name, name)

    @classmethod
    def with_column_map(cls, path):
        """Build the default schema with header aliases read from a JSON file.

        The file maps canonical names to file headers, e.g.
        ``{"dose": "Dose (dpa)", "void_swelling": "Swelling (%)"}``.
        """
        try:
            mapping = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read column map {path}: {exc}") from exc
        if not isinstance(mapping, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in mapping.items()
        ):
            raise ConfigError("column map must be a JSON object of string -> string")
        known = set(CONTINUOUS) | {"irradiation_type", "void_swelling"}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"column map has unknown canonical names: {unknown}")
        return cls(column_map=dict(mapping))


DEFAULT_SCHEMA = FeatureSchema()


@dataclass(frozen=True)
class Sample:
    features_continuous: tuple
    irradiation_type: str
    target: float


@dataclass(frozen=True)
class Dataset:
    """Immutable table of samples sharing one schema.

    ``target`` is None for prediction inputs that carry no swelling column.
    ``provenance`` records the source file and every filter applied.
    """

    schema: FeatureSchema
    continuous: np.ndarray
    irradiation_type: tuple
    target: np.ndarray | None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.continuous.setflags(write=False)
        if self.target is not None:
            self.target.setflags(write=False)

    def __len__(self):
        return len(self.irradiation_type)

    def sample(self, i):
        y = float("nan") if self.target is None else float(self.target[i])
        return Sample(tuple(float(v) for v in self.continuous[i]), self.irradiation_type[i], y)

    @property
    def samples(self):
        return [self.sample(i) for i in range(len(self))]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            schema=self.schema,
            continuous=self.continuous[indices].copy(),
            irradiation_type=tuple(self.irradiation_type[i] for i in indices),
            target=None if self.target is None else self.target[indices].copy(),
            provenance=dict(self.provenance),
        )

    @classmethod
    def from_samples(cls, samples, schema=DEFAULT_SCHEMA, provenance=None):
        samples = list(samples)
        k = len(schema.continuous_names)
        cont = np.array([s.features_continuous for s in samples], dtype=float).reshape(len(samples), k)
        for i, s in enumerate(samples):
            if s.irradiation_type not in schema.classes:
                raise RowError(i + 1, f"unknown irradiation type {s.irradiation_type!r}")
        if not np.all(np.isfinite(cont)):
            raise SchemaError("continuous features must be finite")
        return cls(
            schema=schema,
            continuous=cont,
            irradiation_type=tuple(s.irradiation_type for s in samples),
            target=np.array([s.target for s in samples], dtype=float),
            provenance=dict(provenance or {}),
        )


def _parse_float(text, row, column):
    text = text.strip()
    if not text:
        raise RowError(row, f"missing value in column {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise RowError(row, f"cannot parse {text!r} in column {column!r} as a number") from None
    if not math.isfinite(value):
        raise RowError(row, f"non-finite value {text!r} in column {column!r}")
    return value


def load_csv(path, schema=DEFAULT_SCHEMA, require_target=True):
    """Read a comma-separated table into a :class:`Dataset`.

    Headers are matched case-insensitively after trimming whitespace.
    Columns not in the schema are dropped. With ``require_target=False``
    the swelling column may be absent (prediction inputs).

    Raises
    ------
    SchemaError
        If a required column is missing; the message names the column.
    RowError
        If a cell is empty or non-numeric, or an irradiation class is unknown.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, no header row") from None
        lookup = {}
        for pos, name in enumerate(header):
            lookup.setdefault(name.strip().lower(), pos)

        def locate(name, required=True):
            pos = lookup.get(schema.header_for(name).strip().lower())
            if pos is None and required:
                raise SchemaError(f"missing column {schema.header_for(name)!r}")
            return pos

        cont_pos = [locate(name) for name in schema.continuous_names]
        cat_pos = locate(schema.categorical_name)
        tgt_pos = locate(schema.target_name, required=require_target)

        cont_rows, classes, targets = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise RowError(row_no, f"expected {len(header)} cells, found {len(row)}")
            cont_rows.append(
                [_parse_float(row[p], row_no, n) for p, n in zip(cont_pos, schema.continuous_names)]
            )
            label = row[cat_pos].strip()
            if label not in schema.classes:
                raise RowError(row_no, f"unknown irradiation type {label!r}")
            classes.append(label)
            if tgt_pos is not None:
                targets.append(_parse_float(row[tgt_pos], row_no, schema.target_name))

    k = len(schema.continuous_names)
    return Dataset(
        schema=schema,
        continuous=np.array(cont_rows, dtype=float).reshape(len(cont_rows), k),
        irradiation_type=tuple(classes),
        target=np.array(targets, dtype=float) if tgt_pos is not None else None,
        provenance={"source": str(path), "n_loaded": len(classes), "filters": []},
    )


def write_csv(ds, path):
    """Write a dataset with canonical headers, readable back by :func:`load_csv`."""
    schema = ds.schema
    header = list(schema.continuous_names) + [schema.categorical_name]
    if ds.target is not None:
        header.append(schema.target_name)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.continuous[i]] + [ds.irradiation_type[i]]
            if ds.target is not None:
                row.append(repr(float(ds.target[i])))
            writer.writerow(row)


def filter_nonnegative(ds):
    """Drop samples whose swelling target is negative; zero is kept."""
    if ds.target is None:
        raise SchemaError("dataset has no target column to filter on")
    keep = np.flatnonzero(ds.target >= 0)
    out = ds.subset(keep)
    log = list(ds.provenance.get("filters", []))
    log.append({"filter": "nonnegative_target", "removed": len(ds) - len(keep), "kept": len(keep)})
    return replace(out, provenance={**ds.provenance, "filters": log})


def encode(ds):
    """Return the ``(n, 22)`` design matrix and target vector.

    Columns are the 17 continuous features in schema order followed by one
    indicator per irradiation class in schema class order. Nothing is
    rescaled. The target is None when the dataset has none.
    """
    n = len(ds)
    classes = ds.schema.classes
    onehot = np.zeros((n, len(classes)))
    index = {c: j for j, c in enumerate(classes)}
    for i, label in enumerate(ds.irradiation_type):
        onehot[i, index[label]] = 1.0
    X = np.hstack([ds.continuous, onehot]) if n else np.zeros((0, ds.schema.n_encoded))
    y = None if ds.target is None else np.array(ds.target, dtype=float)
    return X, y


@dataclass(frozen=True)
class SplitIndices:
    train: tuple
    calibration: tuple
    test: tuple
    seed: int

    def as_dict(self):
        return {
            "seed": self.seed,
            "train": list(self.train),
            "calibration": list(self.calibration),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["train"]), tuple(d["calibration"]), tuple(d["test"]), int(d["seed"]))

    @property
    def sizes(self):
        return len(self.train), len(self.calibration), len(self.test)


def split_sizes(n, fractions=(0.8, 0.1, 0.1)):
    """Subset sizes: train and calibration rounded half-up, remainder to test."""
    train_f, cal_f, test_f = (float(f) for f in fractions)
    if min(train_f, cal_f, test_f) <= 0:
        raise ConfigError(f"split fractions must be positive, got {fractions}")
    if abs(train_f + cal_f + test_f - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    n_train = math.floor(n * train_f + 0.5)
    n_cal = math.floor(n * cal_f + 0.5)
    n_test = n - n_train - n_cal
    if min(n_train, n_cal, n_test) < 1:
        raise ConfigError(
            f"split of n={n} with fractions {fractions} leaves an empty subset "
            f"(sizes {n_train}, {n_cal}, {n_test})"
        )
    return n_train, n_cal, n_test


def split(ds_or_n, fractions=(0.8, 0.1, 0.1), seed=0):
    """Randomly partition sample indices into train / calibration / test.

    One permutation is drawn from the ``split`` substream of ``seed`` and cut
    into contiguous blocks, so the result depends on nothing but ``(n, seed)``.
    Each block is returned in ascending index order.
    """
    n = ds_or_n if isinstance(ds_or_n, int) else len(ds_or_n)
    n_train, n_cal, _ = split_sizes(n, fractions)
    perm = substream(seed, "split").permutation(n)
    blocks = perm[:n_train], perm[n_train:n_train + n_cal], perm[n_train + n_cal:]
    return SplitIndices(*(tuple(int(i) for i in np.sort(b)) for b in blocks), seed=int(seed))
