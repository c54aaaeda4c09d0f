"""Categorical microdata tables: loading, cleaning, bucketizing and splitting.

A :class:`Table` stores one numpy object array of strings per attribute.
Missing cells hold the :data:`MISSING` sentinel, which is treated as an
ordinary category everywhere except the sensitive attribute (rows with a
missing sensitive value are dropped by :func:`drop_missing_sa`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import ConfigError, DataError

MISSING = "<missing>"


@dataclass(frozen=True)
class Schema:
    """Attribute layout of a table: quasi-identifiers plus one sensitive attribute."""

    attributes: tuple[str, ...]
    qi: tuple[str, ...]
    sa: str
    buckets: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "qi", tuple(self.qi))
        object.__setattr__(
            self, "buckets", {k: tuple(v) for k, v in dict(self.buckets).items()}
        )
        if not self.qi:
            raise ConfigError("schema needs at least one quasi-identifier")
        if self.sa in self.qi:
            raise ConfigError(f"sensitive attribute {self.sa!r} is also listed as a QI")
        if len(set(self.attributes)) != len(self.attributes):
            raise ConfigError("duplicate attribute names in schema")
        for name in (*self.qi, self.sa, *self.buckets):
            if name not in self.attributes:
                raise ConfigError(f"attribute {name!r} is not declared in the schema")
        for name, bounds in self.buckets.items():
            if any(b >= a for b, a in zip(bounds, bounds[1:])) or not bounds:
                raise ConfigError(f"bucket boundaries for {name!r} must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.qi)

    def with_target(self, sa: str, qi: Sequence[str] | None = None) -> "Schema":
        if qi is None:
            qi = [a for a in (*self.qi, self.sa) if a != sa]
        return Schema(self.attributes, tuple(qi), sa, self.buckets)


@dataclass(frozen=True)
class Table:
    schema: Schema
    columns: Mapping[str, np.ndarray]
    row_ids: np.ndarray

    def __post_init__(self):
        n = len(self.row_ids)
        for name in self.schema.attributes:
            if name not in self.columns:
                raise DataError(f"table has no column for attribute {name!r}")
            if len(self.columns[name]) != n:
                raise DataError(f"column {name!r} has {len(self.columns[name])} rows, expected {n}")

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Mapping[str, str]]) -> "Table":
        rows = list(rows)
        cols = {}
        for name in schema.attributes:
            col = np.empty(len(rows), dtype=object)
            for j, r in enumerate(rows):
                col[j] = r[name]
            cols[name] = col
        return cls(schema, cols, np.arange(len(rows), dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.row_ids)

    def __len__(self) -> int:
        return self.n

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ConfigError(f"unknown attribute {name!r}")
        return self.columns[name]

    def row(self, j: int) -> dict[str, str]:
        return {name: self.columns[name][j] for name in self.schema.attributes}

    def rows(self) -> list[dict[str, str]]:
        return [self.row(j) for j in range(self.n)]

    def take(self, idx) -> "Table":
        idx = np.asarray(idx)
        return Table(
            self.schema,
            {k: v[idx] for k, v in self.columns.items()},
            self.row_ids[idx],
        )

    def with_schema(self, schema: Schema) -> "Table":
        return Table(schema, self.columns, self.row_ids)


def load_csv(
    path,
    schema: Schema,
    missing_token: str = "?",
    *,
    header: bool = False,
    delimiter: str = ",",
    comment: str | None = None,
    rstrip: str | None = None,
) -> Table:
    """Read a delimited file into a :class:`Table`.

    Without a header, each line must carry exactly one field per schema
    attribute, in schema order. With a header, schema attributes are looked
    up by name and other columns are ignored. Blank lines and lines starting
    with ``comment`` are skipped. Fields are whitespace-stripped, then
    ``rstrip`` characters are removed (the UCI Adult test file ends each
    income label with a period).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    attrs = schema.attributes
    cols: list[list[str]] = [[] for _ in attrs]
    positions = list(range(len(attrs)))
    width = len(attrs)
    seen_header = not header
    with open(path, newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for fields in reader:
            lineno = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if comment and fields[0].startswith(comment):
                continue
            fields = [f.strip() for f in fields]
            if not seen_header:
                index = {name: j for j, name in enumerate(fields)}
                unknown = [a for a in attrs if a not in index]
                if unknown:
                    raise ConfigError(f"{path}: attributes {unknown} not found in header")
                positions = [index[a] for a in attrs]
                width = len(fields)
                seen_header = True
                continue
            if len(fields) != width:
                raise DataError(
                    f"{path}:{lineno}: expected {width} fields, found {len(fields)}"
                )
            for k, p in enumerate(positions):
                v = fields[p]
                if rstrip:
                    v = v.rstrip(rstrip)
                cols[k].append(MISSING if v == missing_token else v)
    columns = {}
    for name, values in zip(attrs, cols):
        arr = np.empty(len(values), dtype=object)
        arr[:] = values
        columns[name] = arr
    return Table(schema, columns, np.arange(len(cols[0]), dtype=np.int64))


def drop_missing(table: Table, attr: str) -> Table:
    keep = np.flatnonzero(table.column(attr) != MISSING)
    return table.take(keep)


def drop_missing_sa(table: Table) -> Table:
    """Remove rows whose sensitive value is missing; QI gaps are kept."""
    return drop_missing(table, table.schema.sa)


def bucket_labels(boundaries: Sequence[float], lower: float = 0) -> list[str]:
    labels = []
    lo = lower
    for b in boundaries:
        labels.append(f"[{lo:g}-{b:g}]")
        lo = b + 1
    labels.append(f"{boundaries[-1]:g}+")
    return labels


def bucketize(table: Table, attr: str, boundaries: Sequence[float], lower: float = 0) -> Table:
    """Replace numeric values of ``attr`` by interval labels.

    With boundaries ``b1 < b2 < ... < bk`` the buckets are ``[lower-b1]``,
    ``[b1+1-b2]``, ..., ``[b(k-1)+1-bk]`` and ``bk+``; a value ``x`` falls in
    the first bucket whose upper boundary is >= ``x``.
    """
    boundaries = [float(b) for b in boundaries]
    if not boundaries or any(b >= a for b, a in zip(boundaries, boundaries[1:])):
        raise ConfigError(f"bucket boundaries for {attr!r} must be strictly increasing")
    labels = bucket_labels(boundaries, lower)
    col = table.column(attr)
    out = np.empty(len(col), dtype=object)
    for j, v in enumerate(col):
        if v == MISSING:
            out[j] = MISSING
            continue
        try:
            x = float(v)
        except (TypeError, ValueError):
            raise DataError(
                f"row {table.row_ids[j]}: attribute {attr!r} value {v!r} is not numeric"
            ) from None
        if math.isnan(x):
            raise DataError(f"row {table.row_ids[j]}: attribute {attr!r} is NaN")
        out[j] = labels[int(np.searchsorted(boundaries, x, side="left"))]
    cols = dict(table.columns)
    cols[attr] = out
    return Table(table.schema, cols, table.row_ids)


def split_train_test(table: Table, test_fraction: float = 0.3, seed: int = 0) -> tuple[Table, Table]:
    if not 0.0 <= test_fraction <= 1.0:
        raise ConfigError("test_fraction must lie in [0, 1]")
    n = table.n
    n_test = int(math.floor(n * test_fraction + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return table.take(train_idx), table.take(test_idx)


def attribute_domain(table: Table, attr: str) -> tuple[str, ...]:
    """Sorted distinct values of ``attr`` (MISSING included when present)."""
    return tuple(sorted(set(table.column(attr).tolist())))


def encode(column: np.ndarray, domain: Sequence[str]) -> np.ndarray:
    """Map values to their index in ``domain``; values outside it become -1."""
    lookup = {v: k for k, v in enumerate(domain)}
    return np.fromiter((lookup.get(v, -1) for v in column), dtype=np.int32, count=len(column))


# ---------------------------------------------------------------------------
# dataset config files


@dataclass(frozen=True)
class DatasetConfig:
    schema: Schema
    path: Path
    test_path: Path | None = None
    test_fraction: float = 0.3
    missing_token: str = "?"
    header: bool = False
    delimiter: str = ","
    comment: str | None = None
    rstrip: str | None = None
    drop_missing: tuple[str, ...] = ()
    name: str = ""

    def retarget(self, sa: str, qi: Sequence[str] | None = None) -> "DatasetConfig":
        from dataclasses import replace

        return replace(self, schema=self.schema.with_target(sa, qi))


def dataset_config_from_mapping(raw: Mapping, base: Path) -> DatasetConfig:
    """Build a :class:`DatasetConfig`; relative paths resolve against ``base``."""
    try:
        schema = Schema(
            attributes=tuple(raw["attributes"]),
            qi=tuple(raw["qi"]),
            sa=raw["sa"],
            buckets={k: tuple(v) for k, v in (raw.get("buckets") or {}).items()},
        )
        path = base / raw["path"]
    except KeyError as exc:
        raise ConfigError(f"dataset config missing key {exc.args[0]!r}") from None
    test_path = raw.get("test_path")
    return DatasetConfig(
        schema=schema,
        path=path,
        test_path=base / test_path if test_path else None,
        test_fraction=float(raw.get("test_fraction", 0.3)),
        missing_token=str(raw.get("missing_token", "?")),
        header=bool(raw.get("header", False)),
        delimiter=str(raw.get("delimiter", ",")),
        comment=raw.get("comment"),
        rstrip=raw.get("rstrip"),
        drop_missing=tuple(raw.get("drop_missing") or ()),
        name=str(raw.get("name", "")),
    )


def load_dataset_config(path) -> DatasetConfig:
    """Parse a YAML dataset description; relative paths resolve against its folder."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: expected a mapping")
    return dataset_config_from_mapping(raw, path.parent)


def _prepare(table: Table, cfg: DatasetConfig) -> Table:
    for attr in cfg.drop_missing:
        table = drop_missing(table, attr)
    table = drop_missing_sa(table)
    for attr, bounds in cfg.schema.buckets.items():
        table = bucketize(table, attr, bounds)
    return table


def load_dataset(cfg: DatasetConfig, seed: int = 0) -> tuple[Table, Table]:
    """Load, clean and split a dataset into (train, test).

    With ``test_path`` set, that file is the withheld set; otherwise the
    main file is split with ``test_fraction`` and ``seed``.
    """
    opts = dict(
        missing_token=cfg.missing_token,
        header=cfg.header,
        delimiter=cfg.delimiter,
        comment=cfg.comment,
        rstrip=cfg.rstrip,
    )
    table = _prepare(load_csv(cfg.path, cfg.schema, **opts), cfg)
    if cfg.test_path is not None:
        return table, _prepare(load_csv(cfg.test_path, cfg.schema, **opts), cfg)
    return split_train_test(table, cfg.test_fraction, seed)
