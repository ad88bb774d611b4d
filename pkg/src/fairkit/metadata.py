"""FAIR Data Point metadata layers: root, catalog, dataset, distribution."""

from __future__ import annotations

import copy
import html
import json
import re
from dataclasses import dataclass, field, fields
from datetime import date, datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .errors import FairkitError
from .ingest import sha256_hex
from .rdf import RDF, XSD, Graph, Iri, Literal, RdfError, Triple, skolem_iri

DCT = "http://purl.org/dc/terms/"
DCAT = "http://www.w3.org/ns/dcat#"
LDP = "http://www.w3.org/ns/ldp#"
R3D = "http://www.re3data.org/schema/3-0#"
SPDX = "http://spdx.org/rdf/terms#"
MEDIA_TYPES = "https://www.iana.org/assignments/media-types/"

KINDS = ("fdp_root", "catalog", "dataset", "distribution")
PARENT_KIND = {"catalog": "fdp_root", "dataset": "catalog", "distribution": "dataset"}
RDF_CLASS = {
    "fdp_root": R3D + "Repository",
    "catalog": DCAT + "Catalog",
    "dataset": DCAT + "Dataset",
    "distribution": DCAT + "Distribution",
}
ROUTE = {"catalog": "catalog", "dataset": "dataset", "distribution": "distribution"}

REQUIRED = ("title", "version", "publisher")
LICENSED_KINDS = ("dataset", "distribution")
IRI_FIELDS = ("id", "license", "parent", "download_url", "access_url")

_VERSION_RE = re.compile(r"[0-9]+(?:\.[0-9]+)*\Z")
_SHA256_RE = re.compile(r"[0-9a-f]{64}\Z")
_SCHEME_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")


class MetadataError(FairkitError):
    module = "metadata"


class WrongParentKind(MetadataError):
    def __init__(self, kind: str, parent_kind):
        super().__init__(f"a {kind} needs a {PARENT_KIND.get(kind, 'no')} parent, got {parent_kind}")
        self.kind = kind
        self.parent_kind = parent_kind


class MissingRequiredField(MetadataError):
    def __init__(self, name: str, record_id: str = ""):
        super().__init__(f"{record_id or 'record'}: required field {name!r} missing")
        self.field = name


class InvalidRecord(MetadataError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class BadMetadataFile(MetadataError):
    pass


@dataclass
class LayerRecord:
    kind: str
    id: str
    title: Optional[str] = None
    description: Optional[str] = None
    version: Optional[str] = None
    publisher: Optional[str] = None
    license: Optional[str] = None
    issued: Optional[str] = None
    modified: Optional[str] = None
    keywords: list = field(default_factory=list)
    parent: Optional[str] = None
    children: list = field(default_factory=list)
    media_type: Optional[str] = None
    download_url: Optional[str] = None
    access_url: Optional[str] = None
    byte_size: Optional[int] = None
    checksum: Optional[str] = None

    @property
    def route(self) -> str:
        """Path of this record on a FAIR Data Point service."""
        if self.kind == "fdp_root":
            return "/"
        return f"/{ROUTE[self.kind]}/{local_name(self.id)}"

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None or value == []:
                continue
            out[f.name] = list(value) if isinstance(value, list) else value
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerRecord":
        """Lenient: structure is checked here, requiredness by :func:`validate_layer`."""
        if not isinstance(doc, dict):
            raise BadMetadataFile("metadata record must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise BadMetadataFile(f"unknown record fields {sorted(unknown)}")
        if doc.get("kind") not in KINDS:
            raise BadMetadataFile(f"record kind must be one of {KINDS}, got {doc.get('kind')!r}")
        if not isinstance(doc.get("id"), str):
            raise BadMetadataFile("record id must be a string")
        rec = cls(**copy.deepcopy(doc))
        if not isinstance(rec.keywords, list) or not isinstance(rec.children, list):
            raise BadMetadataFile(f"{rec.id}: keywords and children must be lists")
        return rec


def local_name(iri: str) -> str:
    return iri.rstrip("/").rsplit("/", 1)[-1]


def _is_absolute_iri(value) -> bool:
    if not isinstance(value, str):
        return False
    try:
        Iri(value)
    except RdfError:
        return False
    return True


def _today(clock: Optional[Callable]) -> str:
    now = clock() if clock else datetime.now(timezone.utc)
    return now.date().isoformat()


def build_layer(kind: str, fields_: dict, parent: Optional[LayerRecord] = None,
                clock: Optional[Callable] = None) -> LayerRecord:
    """Create a record and install parent/children links on both sides."""
    if kind not in KINDS:
        raise BadMetadataFile(f"record kind must be one of {KINDS}")
    expected = PARENT_KIND.get(kind)
    got = parent.kind if parent is not None else None
    if expected != got:
        raise WrongParentKind(kind, got)
    doc = {k: v for k, v in dict(fields_).items() if k not in ("kind", "parent", "children")}
    doc["kind"] = kind
    required = REQUIRED + (("license",) if kind in LICENSED_KINDS else ())
    for name in ("id",) + required:
        if doc.get(name) in (None, "", []):
            raise MissingRequiredField(name, doc.get("id", ""))
    rec = LayerRecord.from_dict(doc)
    if rec.modified is None:
        rec.modified = _today(clock)
    if parent is not None:
        rec.parent = parent.id
        if rec.id not in parent.children:
            parent.children.append(rec.id)
    return rec


@dataclass(frozen=True)
class ValidationIssue:
    record: str
    field: str
    severity: str  # essential | important
    message: str

    def __str__(self) -> str:
        return f"{self.record} [{self.severity}] {self.field}: {self.message}"


def _check_date(value) -> bool:
    try:
        date.fromisoformat(value)
        return True
    except (TypeError, ValueError):
        return False


def validate_layer(record: LayerRecord) -> list:
    """Issues for one record; an empty list means the record is publishable."""
    issues = []

    def add(name, severity, message):
        issues.append(ValidationIssue(record.id, name, severity, message))

    required = REQUIRED + (("license",) if record.kind in LICENSED_KINDS else ())
    for name in required:
        if getattr(record, name) in (None, ""):
            add(name, "essential", "required field missing")
    if record.version and not _VERSION_RE.match(str(record.version)):
        add("version", "essential", f"{record.version!r} is not a dotted numeral version")
    for name in IRI_FIELDS:
        value = getattr(record, name)
        if value is not None and not _is_absolute_iri(value):
            add(name, "essential", f"{value!r} is not an absolute IRI")
    for child in record.children:
        if not _is_absolute_iri(child):
            add("children", "essential", f"{child!r} is not an absolute IRI")
    if record.kind == "fdp_root":
        if record.parent is not None:
            add("parent", "essential", "the FAIR Data Point root has no parent")
    elif record.parent in (None, ""):
        add("parent", "essential", f"a {record.kind} needs a {PARENT_KIND[record.kind]} parent")
    if record.kind == "distribution":
        if not record.download_url and not record.access_url:
            add("access", "essential", "distribution needs download_url or access_url")
        if not record.media_type:
            add("media_type", "important", "media type missing")
    for name in ("issued", "modified"):
        value = getattr(record, name)
        if value is not None and not _check_date(value):
            add(name, "essential", f"{value!r} is not an ISO-8601 date")
    if record.byte_size is not None and (not isinstance(record.byte_size, int) or record.byte_size < 0):
        add("byte_size", "essential", "byte size must be a non-negative integer")
    if record.checksum is not None and not _SHA256_RE.match(str(record.checksum)):
        add("checksum", "essential", "checksum must be lowercase SHA-256 hex")
    if not record.description:
        add("description", "important", "description missing")
    if record.kind == "dataset" and not record.keywords:
        add("keywords", "important", "no keywords")
    if not all(isinstance(k, str) and k for k in record.keywords):
        add("keywords", "essential", "keywords must be non-empty strings")
    return issues


def essential_issues(record: LayerRecord) -> list:
    return [i for i in validate_layer(record) if i.severity == "essential"]


# -- RDF rendering -------------------------------------------------------------

_T = lambda ns, local: Iri(ns + local)  # noqa: E731
RDF_TYPE = Iri(RDF + "type")
XSD_DATE = Iri(XSD + "date")


def _publisher_term(value: str):
    if _SCHEME_RE.match(value) and _is_absolute_iri(value):
        return Iri(value)
    return Literal(value)


def checksum_node(record: LayerRecord) -> Iri:
    return skolem_iri(record.id, "checksum")


def serialize_layer(record: LayerRecord, check: bool = True) -> Graph:
    """The record as a DCAT / Dublin Core graph.

    With ``check`` (the default) a record with essential issues raises
    :class:`InvalidRecord`; otherwise the fields that can be rendered are.
    """
    if check:
        bad = essential_issues(record)
        if bad:
            raise InvalidRecord(bad)
    g = Graph()
    s = Iri(record.id)

    def add(p, o):
        g.add(Triple(s, p, o))

    add(RDF_TYPE, Iri(RDF_CLASS[record.kind]))
    if record.title:
        add(_T(DCT, "title"), Literal(record.title))
    if record.description:
        add(_T(DCT, "description"), Literal(record.description))
    if record.version:
        add(_T(DCT, "hasVersion"), Literal(str(record.version)))
    if record.publisher:
        add(_T(DCT, "publisher"), _publisher_term(record.publisher))
    if record.license:
        add(_T(DCT, "license"), Iri(record.license))
    if record.issued:
        add(_T(DCT, "issued"), Literal(record.issued, XSD_DATE))
    if record.modified:
        add(_T(DCT, "modified"), Literal(record.modified, XSD_DATE))
    for kw in record.keywords:
        add(_T(DCAT, "keyword"), Literal(kw))
    if record.parent:
        add(_T(DCT, "isPartOf"), Iri(record.parent))
    for child in record.children:
        add(_T(LDP, "contains"), Iri(child))
    if record.media_type:
        add(_T(DCAT, "mediaType"), Iri(MEDIA_TYPES + record.media_type))
    if record.download_url:
        add(_T(DCAT, "downloadURL"), Iri(record.download_url))
    if record.access_url:
        add(_T(DCAT, "accessURL"), Iri(record.access_url))
    if record.byte_size is not None:
        add(_T(DCAT, "byteSize"), Literal(str(record.byte_size), Iri(XSD + "nonNegativeInteger")))
    if record.checksum:
        node = checksum_node(record)
        add(_T(SPDX, "checksum"), node)
        g.add(Triple(node, RDF_TYPE, _T(SPDX, "Checksum")))
        g.add(Triple(node, _T(SPDX, "algorithm"), _T(SPDX, "checksumAlgorithm_sha256")))
        g.add(Triple(node, _T(SPDX, "checksumValue"), Literal(record.checksum, Iri(XSD + "hexBinary"))))
    return g


_KIND_BY_CLASS = {v: k for k, v in RDF_CLASS.items()}


def record_from_graph(g: Graph, record_id: str) -> LayerRecord:
    """Re-extract a record's fields from its serialized graph."""
    s = Iri(record_id)

    def values(ns, local):
        return sorted((t.object for t in g.triples(s, _T(ns, local))), key=lambda o: o.n3())

    def one(ns, local):
        vs = values(ns, local)
        return vs[0] if vs else None

    def text(term):
        if term is None:
            return None
        return term.lexical if isinstance(term, Literal) else term.value

    types = [o.value for o in values(RDF, "type") if o.value in _KIND_BY_CLASS]
    if len(types) != 1:
        raise BadMetadataFile(f"{record_id}: cannot tell the layer kind from rdf:type")
    rec = LayerRecord(kind=_KIND_BY_CLASS[types[0]], id=record_id)
    rec.title = text(one(DCT, "title"))
    rec.description = text(one(DCT, "description"))
    rec.version = text(one(DCT, "hasVersion"))
    rec.publisher = text(one(DCT, "publisher"))
    rec.license = text(one(DCT, "license"))
    rec.issued = text(one(DCT, "issued"))
    rec.modified = text(one(DCT, "modified"))
    rec.keywords = [o.lexical for o in values(DCAT, "keyword")]
    rec.parent = text(one(DCT, "isPartOf"))
    rec.children = [o.value for o in values(LDP, "contains")]
    mt = text(one(DCAT, "mediaType"))
    rec.media_type = mt[len(MEDIA_TYPES):] if mt and mt.startswith(MEDIA_TYPES) else mt
    rec.download_url = text(one(DCAT, "downloadURL"))
    rec.access_url = text(one(DCAT, "accessURL"))
    size = one(DCAT, "byteSize")
    rec.byte_size = int(size.lexical) if size is not None else None
    node = one(SPDX, "checksum")
    if node is not None:
        value = next(iter(g.triples(node, _T(SPDX, "checksumValue"))), None)
        rec.checksum = value.object.lexical if value else None
    return rec


@lru_cache(maxsize=1)
def jsonld_context() -> dict:
    text = resources.files("fairkit").joinpath("data/fdp-context.jsonld").read_text(encoding="utf-8")
    return json.loads(text)["@context"]


def render_jsonld(record: LayerRecord) -> dict:
    """Fixed-context JSON-LD rendering of a record (no JSON-LD processing involved)."""
    doc = {"@context": jsonld_context(), "@id": record.id, "@type": RDF_CLASS[record.kind]}
    for name in ("title", "description"):
        if getattr(record, name):
            doc[name] = getattr(record, name)
    if record.version:
        doc["version"] = str(record.version)
    if record.publisher:
        term = _publisher_term(record.publisher)
        doc["publisher"] = term.value if isinstance(term, Iri) else {"@value": record.publisher}
    for name in ("license", "issued", "modified", "parent", "download_url", "access_url"):
        if getattr(record, name):
            doc[name] = getattr(record, name)
    if record.keywords:
        doc["keywords"] = list(record.keywords)
    if record.children:
        doc["children"] = list(record.children)
    if record.media_type:
        doc["media_type"] = MEDIA_TYPES + record.media_type
    if record.byte_size is not None:
        doc["byte_size"] = str(record.byte_size)
    if record.checksum:
        doc["checksum"] = {
            "@id": checksum_node(record).value,
            "@type": SPDX + "Checksum",
            "algorithm": SPDX + "checksumAlgorithm_sha256",
            "checksum_value": record.checksum,
        }
    return doc


_HTML_FIELDS = ("kind", "title", "description", "version", "publisher", "license", "issued", "modified",
                "keywords", "parent", "children", "media_type", "download_url", "access_url", "byte_size",
                "checksum")


def render_html(record: LayerRecord) -> str:
    """Static, script-free field table for people."""

    def cell(name, value):
        if isinstance(value, list):
            return "<br>".join(cell(name, v) for v in value)
        value = str(value)
        if name in ("parent", "children", "license", "download_url", "access_url") and _is_absolute_iri(value):
            v = html.escape(value, quote=True)
            return f'<a href="{v}">{v}</a>'
        return html.escape(value)

    rows = []
    for name in _HTML_FIELDS:
        value = getattr(record, name)
        if value in (None, []):
            continue
        rows.append(f"<tr><th>{html.escape(name)}</th><td>{cell(name, value)}</td></tr>")
    title = html.escape(record.title or record.id)
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>"
        + title
        + "</title></head><body>\n<h1>"
        + title
        + "</h1>\n<p><code>"
        + html.escape(record.id)
        + "</code></p>\n<table>\n"
        + "\n".join(rows)
        + "\n</table>\n</body></html>\n"
    )


# -- authoring file ------------------------------------------------------------


def parse_metadata(data) -> list:
    """Records from a metadata.json document: a JSON list of record objects."""
    doc = json.loads(data) if isinstance(data, (str, bytes)) else data
    if isinstance(doc, dict) and "records" in doc:
        doc = doc["records"]
    if not isinstance(doc, list):
        raise BadMetadataFile("metadata file must hold a JSON list of records")
    records = [LayerRecord.from_dict(d) for d in doc]
    ids = [r.id for r in records]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise BadMetadataFile(f"duplicate record ids: {sorted(dup)}")
    return records


def read_metadata(path) -> list:
    return parse_metadata(Path(path).read_bytes())


def dump_metadata(records) -> bytes:
    return (json.dumps([r.to_dict() for r in records], indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def link_children(records) -> None:
    """Fill each record's children from the parent links (keeps authored order first)."""
    by_id = {r.id: r for r in records}
    for r in records:
        if r.parent in by_id:
            siblings = by_id[r.parent].children
            if r.id not in siblings:
                siblings.append(r.id)


def rebase(records, new_base: str) -> list:
    """Copies of ``records`` with every IRI under the root's id moved under ``new_base``."""
    roots = [r for r in records if r.kind == "fdp_root"]
    if not roots:
        return [copy.deepcopy(r) for r in records]
    old = roots[0].id
    new = new_base if new_base.endswith("/") or not old.endswith("/") else new_base + "/"

    def move(v):
        return new + v[len(old):] if isinstance(v, str) and v.startswith(old) else v

    out = []
    for r in records:
        c = copy.deepcopy(r)
        for name in IRI_FIELDS:
            setattr(c, name, move(getattr(c, name)))
        c.children = [move(v) for v in c.children]
        out.append(c)
    return out


def attach_data_file(record: LayerRecord, path) -> None:
    """Record the size and SHA-256 of the distributed file on a distribution."""
    data = Path(path).read_bytes()
    record.byte_size = len(data)
    record.checksum = sha256_hex(data)
