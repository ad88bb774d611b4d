"""CSV capture and schema typing of the source dataset."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

from .errors import FairkitError

COLUMN_TYPES = ("string", "integer", "decimal", "boolean", "date", "datetime")
CRF_MODULES = ("admission", "followup", "outcome")


class IngestError(FairkitError):
    module = "ingest"


class ArityMismatch(IngestError):
    def __init__(self, row: int, expected: int, found: int):
        super().__init__(f"row {row}: expected {expected} cells, found {found}")
        self.row = row
        self.expected = expected
        self.found = found


class UnterminatedQuote(IngestError):
    def __init__(self, row: int):
        super().__init__(f"row {row}: quoted field is not terminated")
        self.row = row


class MalformedCsv(IngestError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row


class DuplicateColumn(IngestError):
    def __init__(self, name: str):
        super().__init__(f"duplicate column {name!r}")
        self.name = name


class EncodingError(IngestError):
    pass


class UnknownColumn(IngestError):
    def __init__(self, names):
        names = list(names)
        super().__init__(f"schema names columns absent from the data: {', '.join(names)}")
        self.names = names


class SchemaError(IngestError):
    pass


@dataclass(frozen=True)
class Dialect:
    delimiter: str = ","
    quote: str = '"'
    header: bool = True


@dataclass(frozen=True)
class TabularDataset:
    columns: tuple
    rows: tuple
    source: str
    digest: str

    def __len__(self):
        return len(self.rows)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def parse_csv(data: bytes, dialect: Dialect = Dialect(), source: str = "<bytes>") -> TabularDataset:
    """RFC 4180 parsing of UTF-8 bytes.

    Rows are numbered from 1 over data records (the header is not counted).
    Completely empty lines are ignored.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(f"input is not UTF-8 (byte offset {e.start})") from e
    if text.startswith("\ufeff"):
        text = text[1:]
    reader = csv.reader(
        io.StringIO(text, newline=""),
        delimiter=dialect.delimiter,
        quotechar=dialect.quote,
        doublequote=True,
        strict=True,
    )
    records = []
    row_no = -1 if dialect.header else 0
    try:
        for rec in reader:
            if rec:
                records.append(rec)
                row_no += 1
    except csv.Error as e:
        if "unexpected end of data" in str(e):
            raise UnterminatedQuote(row_no + 1) from e
        raise MalformedCsv(row_no + 1, str(e)) from e

    if dialect.header:
        if not records:
            raise MalformedCsv(0, "missing header row")
        columns = tuple(records[0])
        body = records[1:]
    else:
        width = len(records[0]) if records else 0
        columns = tuple(f"col{i + 1}" for i in range(width))
        body = records
    seen = set()
    for name in columns:
        if name in seen:
            raise DuplicateColumn(name)
        seen.add(name)
    for i, rec in enumerate(body, start=1):
        if len(rec) != len(columns):
            raise ArityMismatch(i, len(columns), len(rec))
    return TabularDataset(columns, tuple(tuple(r) for r in body), source, sha256_hex(data))


def read_csv(path, dialect: Dialect = Dialect()) -> TabularDataset:
    path = Path(path)
    return parse_csv(path.read_bytes(), dialect, source=str(path))


# -- schema --------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    type: str = "string"
    nullable: bool = True
    null_markers: tuple = ("",)
    crf_module: Optional[str] = None


@dataclass(frozen=True)
class ColumnSchema:
    columns: tuple

    def __getitem__(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(c.name == name for c in self.columns)

    @property
    def names(self) -> tuple:
        return tuple(c.name for c in self.columns)

    @classmethod
    def from_dict(cls, doc) -> "ColumnSchema":
        if not isinstance(doc, dict) or not isinstance(doc.get("columns"), list):
            raise SchemaError("schema must be an object with a 'columns' list")
        specs = []
        for i, col in enumerate(doc["columns"]):
            where = f"columns[{i}]"
            if not isinstance(col, dict):
                raise SchemaError(f"{where}: expected an object")
            unknown = set(col) - {"name", "type", "nullable", "null_markers", "crf_module"}
            if unknown:
                raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
            for key in ("name", "type", "nullable"):
                if key not in col:
                    raise SchemaError(f"{where}.{key}: required")
            if col["type"] not in COLUMN_TYPES:
                raise SchemaError(f"{where}.type: {col['type']!r} not one of {COLUMN_TYPES}")
            if not isinstance(col["nullable"], bool):
                raise SchemaError(f"{where}.nullable: expected boolean")
            crf = col.get("crf_module")
            if crf is not None and crf not in CRF_MODULES:
                raise SchemaError(f"{where}.crf_module: {crf!r} not one of {CRF_MODULES}")
            markers = col.get("null_markers", [""])
            if not isinstance(markers, list) or not all(isinstance(m, str) for m in markers):
                raise SchemaError(f"{where}.null_markers: expected a list of strings")
            specs.append(ColumnSpec(col["name"], col["type"], col["nullable"], tuple(markers), crf))
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise SchemaError("schema lists a column twice")
        return cls(tuple(specs))


def load_schema(path) -> ColumnSchema:
    return ColumnSchema.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class RowError:
    row: int
    column: str
    reason: str


@dataclass(frozen=True)
class TypedDataset:
    schema: ColumnSchema
    rows: tuple
    row_errors: tuple = ()
    source: str = ""
    digest: str = ""

    @property
    def columns(self) -> tuple:
        return self.schema.names

    def records(self):
        """Rows as ``{column: value}`` dicts; ``None`` marks a null cell."""
        names = self.columns
        for row in self.rows:
            yield dict(zip(names, row))

    def __len__(self):
        return len(self.rows)


_INT_RE = re.compile(r"[+-]?[0-9]+\Z")
_DEC_RE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)\Z")
_DATE_RE = re.compile(r"[0-9]{4}-[0-9]{2}-[0-9]{2}\Z")
_DATETIME_RE = re.compile(
    r"[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}(?:\.[0-9]+)?(?:Z|[+-][0-9]{2}:[0-9]{2})?\Z"
)
_BOOLEANS = {"true": True, "false": False, "1": True, "0": False}


def parse_cell(raw: str, type_: str):
    """Convert one raw cell; raises ValueError with a short reason."""
    if type_ == "string":
        return raw
    if type_ == "integer":
        if not _INT_RE.match(raw):
            raise ValueError("invalid integer")
        return int(raw)
    if type_ == "decimal":
        if not _DEC_RE.match(raw):
            raise ValueError("invalid decimal")
        try:
            return Decimal(raw)
        except InvalidOperation:
            raise ValueError("invalid decimal") from None
    if type_ == "boolean":
        try:
            return _BOOLEANS[raw.strip().lower()]
        except KeyError:
            raise ValueError("invalid boolean") from None
    if type_ == "date":
        if not _DATE_RE.match(raw):
            raise ValueError("invalid date")
        try:
            return date.fromisoformat(raw)
        except ValueError:
            raise ValueError("invalid date") from None
    if type_ == "datetime":
        if not _DATETIME_RE.match(raw):
            raise ValueError("invalid datetime")
        try:
            return datetime.fromisoformat(raw.replace("Z", "+00:00"))
        except ValueError:
            raise ValueError("invalid datetime") from None
    raise ValueError(f"unknown type {type_!r}")


def apply_schema(ds: TabularDataset, schema: ColumnSchema) -> TypedDataset:
    """Type the schema's columns and drop the rest.

    A bad cell becomes null and is logged in ``row_errors``; it never aborts
    the row or the dataset.
    """
    missing = [n for n in schema.names if n not in ds.columns]
    if missing:
        raise UnknownColumn(missing)
    positions = [ds.columns.index(n) for n in schema.names]
    rows, errors = [], []
    for row_no, raw_row in enumerate(ds.rows, start=1):
        typed = []
        for spec, pos in zip(schema.columns, positions):
            raw = raw_row[pos]
            if raw in spec.null_markers:
                if not spec.nullable:
                    errors.append(RowError(row_no, spec.name, "null in non-nullable column"))
                typed.append(None)
                continue
            try:
                typed.append(parse_cell(raw, spec.type))
            except ValueError as e:
                errors.append(RowError(row_no, spec.name, str(e)))
                typed.append(None)
        rows.append(tuple(typed))
    return TypedDataset(schema, tuple(rows), tuple(errors), ds.source, ds.digest)
