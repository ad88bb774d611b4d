"""Row-to-triples mapping: URI templates, data and object property rules."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime
from decimal import Decimal
from typing import Mapping, Optional, Union
from urllib.parse import quote

from .errors import FairkitError
from .ingest import ColumnSchema
from .rdf import RDF_TYPE, XSD, Iri, Literal, PrefixMap, RdfError, Triple, expand_curie, make_iri
from .rdf import UnknownPrefix as _RdfUnknownPrefix

ON_UNMAPPED = ("error", "skip", "mint")

# schema column type -> datatypes a data rule may declare for it (first is the default)
COMPATIBLE_DATATYPES = {
    "string": (XSD + "string", XSD + "anyURI", XSD + "token", XSD + "normalizedString"),
    "integer": (XSD + "integer", XSD + "int", XSD + "long", XSD + "decimal"),
    "decimal": (XSD + "decimal",),
    "boolean": (XSD + "boolean",),
    "date": (XSD + "date",),
    "datetime": (XSD + "dateTime",),
}

_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")
_ABSOLUTE_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")


class MappingError(FairkitError):
    module = "mapping"


class SchemaViolation(MappingError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class UnknownPrefix(MappingError):
    def __init__(self, prefix: str, path: str):
        super().__init__(f"{path}: unknown prefix {prefix!r}")
        self.prefix = prefix
        self.path = path


class BadIri(MappingError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


class UnknownColumn(MappingError):
    def __init__(self, column: str, path: str):
        super().__init__(f"{path}: column {column!r} is not in the schema")
        self.column = column
        self.path = path


class NullInTemplate(MappingError):
    def __init__(self, column: str, row):
        super().__init__(f"row {row}: template column {column!r} is null")
        self.column = column
        self.row = row


class UnmappedValue(MappingError):
    def __init__(self, column: str, value: str, row):
        super().__init__(f"row {row}: value {value!r} of column {column!r} has no mapping")
        self.column = column
        self.value = value
        self.row = row


@dataclass(frozen=True)
class SubjectRule:
    template: str
    class_: Optional[Iri] = None

    @property
    def columns(self) -> list:
        return _PLACEHOLDER_RE.findall(self.template)


@dataclass(frozen=True)
class DataRule:
    column: str
    predicate: Iri
    datatype: Optional[Iri] = None
    language: Optional[str] = None


@dataclass(frozen=True)
class ObjectRule:
    column: str
    predicate: Iri
    value_map: Mapping[str, Iri] = field(default_factory=dict)
    on_unmapped: str = "error"


@dataclass(frozen=True)
class MappingSpec:
    base_iri: Iri
    prefixes: PrefixMap
    subject: SubjectRule
    data_rules: tuple = ()
    object_rules: tuple = ()

    @property
    def rule_count(self) -> int:
        return len(self.data_rules) + len(self.object_rules)

    def rule_ids(self) -> list:
        return [f"data_rules[{i}]" for i in range(len(self.data_rules))] + [
            f"object_rules[{i}]" for i in range(len(self.object_rules))
        ]


@dataclass
class MappingCounts:
    """Per-run tallies kept by the mapping components."""

    triples: int = 0
    skipped_nulls: int = 0
    skipped_unmapped: int = 0
    per_rule: dict = field(default_factory=dict)

    def bump(self, rule_id: str, outcome: str) -> None:
        self.per_rule.setdefault(rule_id, Counter())[outcome] += 1
        if outcome == "skipped_nulls":
            self.skipped_nulls += 1
        elif outcome == "skipped_unmapped":
            self.skipped_unmapped += 1


# -- parsing -------------------------------------------------------------------


def _resolve(name, prefixes: PrefixMap, path: str) -> Iri:
    if not isinstance(name, str) or not name:
        raise SchemaViolation(path, "expected a non-empty string")
    try:
        if name.startswith("<") and name.endswith(">"):
            return make_iri(name[1:-1])
        label = name.split(":", 1)[0]
        if label not in prefixes and "://" in name:
            return make_iri(name)
        return expand_curie(name, prefixes)
    except _RdfUnknownPrefix as e:
        raise UnknownPrefix(e.prefix, path) from e
    except RdfError as e:
        raise BadIri(path, str(e)) from e


def _require(obj, key: str, path: str, kind=None):
    if not isinstance(obj, dict):
        raise SchemaViolation(path, "expected an object")
    if key not in obj:
        raise SchemaViolation(f"{path}.{key}", "required field missing")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaViolation(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _no_extra(obj: dict, allowed: set, path: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise SchemaViolation(path, f"unknown fields {sorted(extra)}")


def _check_column(column: str, schema: Optional[ColumnSchema], path: str) -> None:
    if schema is not None and column not in schema:
        raise UnknownColumn(column, path)


def parse_mapping_spec(doc: Union[str, dict], schema: Optional[ColumnSchema] = None) -> MappingSpec:
    """Validate a mapping document and expand all of its CURIEs.

    Column references are checked against ``schema`` when one is given.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise SchemaViolation("$", f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaViolation("$", "expected an object")
    _no_extra(doc, {"base_iri", "prefixes", "subject", "data_rules", "object_rules"}, "$")

    base = _require(doc, "base_iri", "$", str)
    try:
        base_iri = Iri(base)
    except RdfError as e:
        raise BadIri("$.base_iri", str(e)) from e

    raw_prefixes = doc.get("prefixes", {})
    if not isinstance(raw_prefixes, dict):
        raise SchemaViolation("$.prefixes", "expected an object")
    prefixes = PrefixMap()
    for label, ns in raw_prefixes.items():
        try:
            prefixes.bind(label, ns)
        except RdfError as e:
            raise BadIri(f"$.prefixes.{label}", str(e)) from e

    subj = _require(doc, "subject", "$", dict)
    _no_extra(subj, {"template", "class"}, "$.subject")
    template = _require(subj, "template", "$.subject", str)
    for col in _PLACEHOLDER_RE.findall(template):
        if not col:
            raise SchemaViolation("$.subject.template", "empty placeholder")
        _check_column(col, schema, "$.subject.template")
    cls = _resolve(subj["class"], prefixes, "$.subject.class") if subj.get("class") is not None else None

    data_rules = []
    for i, rule in enumerate(doc.get("data_rules", [])):
        path = f"$.data_rules[{i}]"
        column = _require(rule, "column", path, str)
        _no_extra(rule, {"column", "predicate", "datatype", "language"}, path)
        _check_column(column, schema, f"{path}.column")
        predicate = _resolve(_require(rule, "predicate", path), prefixes, f"{path}.predicate")
        if "datatype" in rule and "language" in rule:
            raise SchemaViolation(path, "datatype and language are mutually exclusive")
        col_type = schema[column].type if schema is not None else None
        datatype = language = None
        if "language" in rule:
            language = rule["language"]
            try:
                Literal("", language=language)
            except RdfError as e:
                raise SchemaViolation(f"{path}.language", str(e)) from e
            if col_type not in (None, "string"):
                raise SchemaViolation(f"{path}.language", f"language tag on a {col_type} column")
        elif "datatype" in rule:
            datatype = _resolve(rule["datatype"], prefixes, f"{path}.datatype")
            if col_type is not None and datatype.value not in COMPATIBLE_DATATYPES[col_type]:
                raise SchemaViolation(
                    f"{path}.datatype", f"{datatype.value} is not compatible with a {col_type} column"
                )
        else:
            datatype = Iri(COMPATIBLE_DATATYPES[col_type or "string"][0])
        data_rules.append(DataRule(column, predicate, datatype, language))

    object_rules = []
    for i, rule in enumerate(doc.get("object_rules", [])):
        path = f"$.object_rules[{i}]"
        column = _require(rule, "column", path, str)
        _no_extra(rule, {"column", "predicate", "value_map", "on_unmapped"}, path)
        _check_column(column, schema, f"{path}.column")
        predicate = _resolve(_require(rule, "predicate", path), prefixes, f"{path}.predicate")
        raw_map = rule.get("value_map", {})
        if not isinstance(raw_map, dict):
            raise SchemaViolation(f"{path}.value_map", "expected an object")
        value_map = {k: _resolve(v, prefixes, f"{path}.value_map.{k}") for k, v in raw_map.items()}
        on_unmapped = rule.get("on_unmapped", "error")
        if on_unmapped not in ON_UNMAPPED:
            raise SchemaViolation(f"{path}.on_unmapped", f"expected one of {ON_UNMAPPED}")
        object_rules.append(ObjectRule(column, predicate, value_map, on_unmapped))

    return MappingSpec(base_iri, prefixes, SubjectRule(template, cls), tuple(data_rules), tuple(object_rules))


# -- components ----------------------------------------------------------------


def _canonical_decimal(d: Decimal) -> str:
    if d == 0:
        return "0.0"
    s = format(d.normalize(), "f")
    return s if "." in s else s + ".0"


def canonical_lexical(value, datatype: Optional[Iri] = None) -> str:
    """Canonical lexical form of a typed cell value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if datatype is not None and datatype.value == XSD + "decimal" and isinstance(value, (int, Decimal)):
        return _canonical_decimal(Decimal(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Decimal):
        return _canonical_decimal(value)
    if isinstance(value, datetime):
        s = value.isoformat()
        return s[:-6] + "Z" if s.endswith("+00:00") else s
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def percent_encode(value: str) -> str:
    """Keep RFC 3986 unreserved characters, %XX-encode every other UTF-8 byte."""
    return quote(value, safe="")


def expand_uri_template(template: str, row: Mapping, base_iri: Union[str, Iri] = "", row_no=None) -> Iri:
    """Substitute ``{column}`` placeholders with percent-encoded cell values."""

    def repl(m):
        column = m.group(1)
        value = row.get(column)
        if value is None:
            raise NullInTemplate(column, row_no)
        return percent_encode(canonical_lexical(value))

    expanded = _PLACEHOLDER_RE.sub(repl, template)
    if not _ABSOLUTE_RE.match(template):
        expanded = str(base_iri) + expanded
    try:
        return make_iri(expanded)
    except RdfError as e:
        raise BadIri("subject.template", str(e)) from e


def map_data_property(rule: DataRule, subject: Iri, row: Mapping, counts: Optional[MappingCounts] = None,
                      rule_id: str = "data_rule") -> Optional[Triple]:
    value = row.get(rule.column)
    if value is None:
        if counts is not None:
            counts.bump(rule_id, "skipped_nulls")
        return None
    if rule.language is not None:
        obj = Literal(canonical_lexical(value), language=rule.language)
    else:
        obj = Literal(canonical_lexical(value, rule.datatype), datatype=rule.datatype)
    if counts is not None:
        counts.bump(rule_id, "emitted")
    return Triple(subject, rule.predicate, obj)


def mint_term(base_iri: Union[str, Iri], column: str, cell: str) -> Iri:
    return make_iri(str(base_iri).rstrip("/") + "/term/" + percent_encode(column) + "/" + percent_encode(cell))


def map_object_property(rule: ObjectRule, subject: Iri, row: Mapping, base_iri: Union[str, Iri] = "",
                        row_no=None, counts: Optional[MappingCounts] = None,
                        rule_id: str = "object_rule") -> Optional[Triple]:
    value = row.get(rule.column)
    if value is None:
        if counts is not None:
            counts.bump(rule_id, "skipped_nulls")
        return None
    cell = canonical_lexical(value)
    target = rule.value_map.get(cell)
    if target is None:
        if rule.on_unmapped == "error":
            raise UnmappedValue(rule.column, cell, row_no)
        if rule.on_unmapped == "skip":
            if counts is not None:
                counts.bump(rule_id, "skipped_unmapped")
            return None
        target = mint_term(base_iri, rule.column, cell)
        outcome = "minted"
    else:
        outcome = "mapped"
    if counts is not None:
        counts.bump(rule_id, outcome)
    return Triple(subject, rule.predicate, target)


def transform_row(spec: MappingSpec, row: Mapping, row_no=None, counts: Optional[MappingCounts] = None) -> list:
    """Triples for one typed row: type assertion, data rules, object rules, in spec order."""
    subject = expand_uri_template(spec.subject.template, row, spec.base_iri, row_no)
    out = []
    if spec.subject.class_ is not None:
        out.append(Triple(subject, RDF_TYPE, spec.subject.class_))
    for i, rule in enumerate(spec.data_rules):
        t = map_data_property(rule, subject, row, counts, f"data_rules[{i}]")
        if t is not None:
            out.append(t)
    for i, rule in enumerate(spec.object_rules):
        t = map_object_property(rule, subject, row, spec.base_iri, row_no, counts, f"object_rules[{i}]")
        if t is not None:
            out.append(t)
    if counts is not None:
        counts.triples += len(out)
    return out
