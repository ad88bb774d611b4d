"""FAIR maturity indicators and competency questions for a FAIRified bundle."""

from __future__ import annotations

import functools
import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .errors import FairkitError
from .ingest import sha256_hex
from .mapping import parse_mapping_spec
from .metadata import read_metadata, serialize_layer
from .provenance import PROV, FAIRKIT, load_provjson, prov_graph
from .rdf import Iri, Literal, RdfError, parse_ntriples, serialize_ntriples
from .store import StoreError, TripleStore, evaluate, parse_query

log = logging.getLogger(__name__)

RUBRIC_VERSION = "fairkit-rubric/1.0"
EXIT_OK = 0
EXIT_ASSESSMENT_FAILED = 3


class AssessError(FairkitError):
    module = "assess"


class EmptyBundle(AssessError):
    def __init__(self):
        super().__init__("assessment bundle is empty")


class QueryParseError(AssessError):
    def __init__(self, question_id: str, offset: int, reason: str = ""):
        super().__init__(f"{question_id}: query does not parse at offset {offset}: {reason}")
        self.question_id = question_id
        self.offset = offset


@dataclass(frozen=True)
class Indicator:
    id: str
    principle: str
    priority: str
    description: str


INDICATORS = (
    Indicator("F1-M-ID", "F", "essential", "dataset and distribution metadata carry absolute IRIs"),
    Indicator("F2-M-RICH", "F", "essential", "dataset metadata has title, description and keywords"),
    Indicator("F3-M-REF", "F", "essential", "distribution metadata references the data by URL"),
    Indicator("F4-M-SERVED", "F", "important", "metadata service answers at its base URL"),
    Indicator("A1-M-HTTP", "A", "important", "every metadata record is retrievable over HTTP"),
    Indicator("I1-D-RDF", "I", "essential", "data is RDF (parses as N-Triples)"),
    Indicator("I1-M-RDF", "I", "essential", "metadata is expressible as RDF"),
    Indicator("I2-D-VOCAB", "I", "important", "data predicates come from declared vocabularies"),
    Indicator("R1.1-M-LICENSE", "R", "essential", "dataset and distribution metadata state a license"),
    Indicator("R1.2-M-PROV", "R", "important", "provenance exists and identifies the data file"),
)
PRINCIPLES = ("F", "A", "I", "R")


@dataclass
class AssessmentBundle:
    data: Optional[Path] = None
    provenance: Optional[Path] = None
    metadata: Union[Path, list, None] = None
    mapping: Optional[Path] = None
    service_url: Optional[str] = None
    timeout: float = 5.0

    def __post_init__(self):
        if all(getattr(self, n) in (None, "") for n in ("data", "provenance", "metadata", "mapping", "service_url")):
            raise EmptyBundle()


@dataclass(frozen=True)
class IndicatorResult:
    indicator: Indicator
    passed: bool
    evidence: str

    def as_dict(self) -> dict:
        i = self.indicator
        return {"id": i.id, "principle": i.principle, "priority": i.priority, "pass": self.passed,
                "evidence": self.evidence}


@dataclass
class MaturityReport:
    results: list
    rubric_version: str = RUBRIC_VERSION

    def __getitem__(self, indicator_id: str) -> IndicatorResult:
        for r in self.results:
            if r.indicator.id == indicator_id:
                return r
        raise KeyError(indicator_id)

    @property
    def scores(self) -> dict:
        out = {}
        for letter in PRINCIPLES:
            rows = [r for r in self.results if r.indicator.principle == letter]
            out[letter] = sum(r.passed for r in rows) / len(rows) if rows else 0.0
        return out

    @property
    def essential_pass(self) -> bool:
        return all(r.passed for r in self.results if r.indicator.priority == "essential")

    @property
    def passed(self) -> list:
        return [r.indicator.id for r in self.results if r.passed]


@functools.lru_cache(maxsize=8)
def _parse_data(data: bytes):
    # keyed by content; callers never mutate the returned graph
    return parse_ntriples(data.decode("utf-8"))


class _Context:
    """Lazily loaded bundle contents shared by the checks."""

    def __init__(self, bundle: AssessmentBundle):
        self.bundle = bundle
        self.data_bytes = Path(bundle.data).read_bytes() if bundle.data else None
        self._graph = self._graph_error = None
        self.records = None
        self.metadata_error = None
        if isinstance(bundle.metadata, list):
            self.records = bundle.metadata
        elif bundle.metadata:
            try:
                self.records = read_metadata(bundle.metadata)
            except (FairkitError, ValueError) as e:
                self.metadata_error = str(e)

    @property
    def data_graph(self):
        if self._graph is None and self._graph_error is None and self.data_bytes is not None:
            try:
                self._graph = _parse_data(self.data_bytes)
            except (RdfError, UnicodeDecodeError) as e:
                self._graph_error = str(e)
        return self._graph

    def records_of(self, *kinds) -> list:
        return [r for r in self.records or () if r.kind in kinds]

    def get(self, url: str):
        req = urllib.request.Request(url, headers={"Accept": "application/n-triples"})
        try:
            with urllib.request.urlopen(req, timeout=self.bundle.timeout) as resp:
                return resp.status, resp.read()
        except urllib.error.HTTPError as e:
            return e.code, b""
        except (urllib.error.URLError, OSError) as e:
            return None, str(e).encode()


def _no_metadata(ctx) -> Optional[str]:
    if ctx.metadata_error:
        return f"metadata unreadable: {ctx.metadata_error}"
    if ctx.records is None:
        return "metadata not provided"
    return None


def _absolute(value) -> bool:
    try:
        Iri(value)
        return True
    except (RdfError, TypeError):
        return False


def _check_f1(ctx):
    if (why := _no_metadata(ctx)):
        return False, why
    recs = ctx.records_of("dataset", "distribution")
    if not recs:
        return False, "no dataset or distribution records"
    bad = [r.id for r in recs if not _absolute(r.id)]
    if bad:
        return False, f"relative or invalid identifiers: {bad}"
    return True, f"{len(recs)} dataset/distribution records with absolute IRIs"


def _check_f2(ctx):
    if (why := _no_metadata(ctx)):
        return False, why
    datasets = ctx.records_of("dataset")
    if not datasets:
        return False, "no dataset records"
    missing = []
    for r in datasets:
        for name in ("title", "description", "keywords"):
            if not getattr(r, name):
                missing.append(f"{r.id}:{name}")
    if missing:
        return False, f"missing {missing}"
    return True, f"{len(datasets)} dataset(s) with title, description and keywords"


def _check_f3(ctx):
    if (why := _no_metadata(ctx)):
        return False, why
    dists = ctx.records_of("distribution")
    if not dists:
        return False, "no distribution records"
    for r in dists:
        urls = [u for u in (r.download_url, r.access_url) if u]
        if not urls:
            return False, f"{r.id} has neither download_url nor access_url"
        if not all(_absolute(u) for u in urls):
            return False, f"{r.id} has a non-absolute access URL"
    if ctx.data_bytes is not None:
        digest = sha256_hex(ctx.data_bytes)
        with_sum = [r for r in dists if r.checksum]
        if with_sum and not any(r.checksum == digest for r in with_sum):
            return False, "no distribution checksum matches the data file"
        if with_sum:
            return True, "distribution URL present and its checksum matches the data file"
    return True, f"{len(dists)} distribution(s) with access URLs"


def _check_f4(ctx):
    url = ctx.bundle.service_url
    if not url:
        return False, "service not provided"
    status, _ = ctx.get(url)
    if status != 200:
        return False, f"GET {url} returned {status}"
    return True, f"GET {url} returned 200"


def _check_a1(ctx):
    url = ctx.bundle.service_url
    if not url:
        return False, "service not provided"
    if (why := _no_metadata(ctx)):
        return False, why
    base = url.rstrip("/")
    failures = []
    for r in ctx.records:
        status, _ = ctx.get(base + r.route)
        if status != 200:
            failures.append(f"{r.route}={status}")
    if failures:
        return False, f"unreachable routes: {failures}"
    return True, f"{len(ctx.records)} record routes returned 200"


def _check_i1_data(ctx):
    if ctx.data_bytes is None:
        return False, "data not provided"
    g = ctx.data_graph
    if g is None:
        return False, f"data does not parse: {ctx._graph_error}"
    if not len(g):
        return False, "data graph is empty"
    return True, f"{len(g)} triples parsed"


def _check_i1_meta(ctx):
    if (why := _no_metadata(ctx)):
        return False, why
    if not ctx.records:
        return False, "no metadata records"
    for r in ctx.records:
        try:
            g = serialize_layer(r, check=False)
            back = parse_ntriples(serialize_ntriples(g))
        except FairkitError as e:
            return False, f"{r.id} is not expressible as RDF: {e}"
        if back != g or not any(t.subject.value == r.id for t in back):
            return False, f"{r.id} does not round-trip through N-Triples"
    return True, f"{len(ctx.records)} records rendered as RDF"


def _check_i2(ctx):
    if ctx.data_bytes is None:
        return False, "data not provided"
    if not ctx.bundle.mapping:
        return False, "mapping spec not provided; no declared vocabularies"
    g = ctx.data_graph
    if g is None:
        return False, "data does not parse"
    try:
        spec = parse_mapping_spec(Path(ctx.bundle.mapping).read_text(encoding="utf-8"))
    except FairkitError as e:
        return False, f"mapping spec unreadable: {e}"
    namespaces = [ns.value for ns in spec.prefixes.values()]
    foreign = sorted({t.predicate.value for t in g if not any(t.predicate.value.startswith(ns) for ns in namespaces)})
    if foreign:
        return False, f"predicates outside declared vocabularies: {foreign[:5]}"
    preds = {t.predicate for t in g}
    return True, f"{len(preds)} predicates, all in {len(namespaces)} declared namespaces"


def _check_r11(ctx):
    if (why := _no_metadata(ctx)):
        return False, why
    recs = ctx.records_of("dataset", "distribution")
    if not recs:
        return False, "no dataset or distribution records"
    missing = [r.id for r in recs if not r.license or not _absolute(r.license)]
    if missing:
        return False, f"no license IRI on {missing}"
    return True, f"{len(recs)} records licensed"


def _load_prov_graph(path: Path):
    return _parse_prov(path.read_bytes())


@functools.lru_cache(maxsize=8)
def _parse_prov(data: bytes):
    text = data.decode("utf-8")
    if text.lstrip().startswith("{"):
        return prov_graph(load_provjson(text))
    return parse_ntriples(text)


def _check_r12(ctx):
    if not ctx.bundle.provenance:
        return False, "provenance not provided"
    try:
        g = _load_prov_graph(Path(ctx.bundle.provenance))
    except (FairkitError, ValueError, KeyError) as e:
        return False, f"provenance unreadable: {e}"
    if not len(g):
        return False, "provenance document is empty"
    if ctx.data_bytes is None:
        return False, "data not provided; cannot match the generated entity"
    digest = Literal(sha256_hex(ctx.data_bytes))
    sha = Iri(FAIRKIT + "sha256")
    generated = Iri(PROV + "wasGeneratedBy")
    kind = Iri(FAIRKIT + "kind")
    for t in g.triples(None, sha, digest):
        is_file = any(k.object == Literal("file") for k in g.triples(t.subject, kind))
        if is_file and any(g.triples(t.subject, generated)):
            return True, f"{t.subject.value} carries the data digest and has wasGeneratedBy"
    return False, "no generated file entity carries the data file's SHA-256"


_CHECKS = {
    "F1-M-ID": _check_f1,
    "F2-M-RICH": _check_f2,
    "F3-M-REF": _check_f3,
    "F4-M-SERVED": _check_f4,
    "A1-M-HTTP": _check_a1,
    "I1-D-RDF": _check_i1_data,
    "I1-M-RDF": _check_i1_meta,
    "I2-D-VOCAB": _check_i2,
    "R1.1-M-LICENSE": _check_r11,
    "R1.2-M-PROV": _check_r12,
}


def evaluate_indicators(bundle: AssessmentBundle) -> MaturityReport:
    """Run the ten checks; failures are report rows, never exceptions."""
    ctx = _Context(bundle)
    results = []
    for ind in INDICATORS:
        passed, evidence = _CHECKS[ind.id](ctx)
        log.debug("%s %s: %s", ind.id, "pass" if passed else "fail", evidence)
        results.append(IndicatorResult(ind, bool(passed), evidence))
    return MaturityReport(results)


# -- competency questions --------------------------------------------------------


@dataclass(frozen=True)
class CompetencyQuestion:
    id: str
    text: str
    query: str
    min_rows: int = 1


@dataclass(frozen=True)
class CQResult:
    id: str
    text: str
    rows: int
    answered: bool
    sample: tuple = ()


@dataclass
class CQReport:
    results: list = field(default_factory=list)

    @property
    def all_answered(self) -> bool:
        return all(r.answered for r in self.results)


def load_questions(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, list):
        raise AssessError("questions file must hold a JSON list")
    out = []
    for i, q in enumerate(doc):
        try:
            out.append(CompetencyQuestion(q["id"], q.get("text", ""), q["query"], int(q.get("min_rows", 1))))
        except (KeyError, TypeError, ValueError) as e:
            raise AssessError(f"questions[{i}]: {e}") from e
    return out


def run_competency_questions(questions, store: TripleStore) -> CQReport:
    parsed = []
    for q in questions:
        try:
            parsed.append((q, parse_query(q.query)))
        except StoreError as e:
            raise QueryParseError(q.id, getattr(e, "offset", 0), str(e)) from e
    report = CQReport()
    for q, query in parsed:
        table = evaluate(query, store)
        report.results.append(CQResult(q.id, q.text, len(table), len(table) >= q.min_rows, table.rows[:10]))
    return report


# -- rendering -------------------------------------------------------------------


def report_json(report: MaturityReport, cqs: Optional[CQReport] = None) -> dict:
    return {
        "rubric_version": report.rubric_version,
        "indicators": [r.as_dict() for r in report.results],
        "scores": report.scores,
        "essential_pass": report.essential_pass,
        "cqs": [{"id": c.id, "rows": c.rows, "answered": c.answered} for c in (cqs.results if cqs else ())],
    }


def exit_code(report: MaturityReport, cqs: Optional[CQReport] = None) -> int:
    ok = report.essential_pass and (cqs is None or cqs.all_answered)
    return EXIT_OK if ok else EXIT_ASSESSMENT_FAILED


def render_report(report: MaturityReport, cqs: Optional[CQReport] = None):
    """Returns ``(text, json_dict, exit_code)`` carrying the same rows."""
    doc = report_json(report, cqs)
    lines = [f"rubric {doc['rubric_version']}", "",
             f"{'indicator':<16} {'principle':<9} {'priority':<10} {'result':<6} evidence"]
    for row in doc["indicators"]:
        lines.append(f"{row['id']:<16} {row['principle']:<9} {row['priority']:<10} "
                     f"{'PASS' if row['pass'] else 'FAIL':<6} {row['evidence']}")
    lines.append("")
    lines.append("scores " + " ".join(f"{k}={v:.2f}" for k, v in doc["scores"].items()))
    lines.append(f"essential_pass {'true' if doc['essential_pass'] else 'false'}")
    if doc["cqs"]:
        lines += ["", f"{'question':<16} {'rows':>6} answered"]
        for c in doc["cqs"]:
            lines.append(f"{c['id']:<16} {c['rows']:>6} {'yes' if c['answered'] else 'no'}")
    return "\n".join(lines) + "\n", doc, exit_code(report, cqs)
