"""RDF terms, graphs and the N-Triples / N-Quads line formats.

Everything fairkit emits goes through this module. Blank nodes are never
produced or accepted; :func:`skolem_iri` mints stable identifiers instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union

from .errors import FairkitError

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"

SKOLEM_PATH = "/.well-known/skolem/"

_FORBIDDEN = frozenset(' <>"{}|^`\\')
_SCHEME_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")
_LANG_RE = re.compile(r"[a-zA-Z]+(?:-[a-zA-Z0-9]+)*\Z")
_LABEL_RE = re.compile(r"(?:[A-Za-z][A-Za-z0-9_\-]*)?\Z")


class RdfError(FairkitError):
    module = "rdf"


class RelativeIri(RdfError):
    def __init__(self, value: str):
        super().__init__(f"IRI has no scheme: {value!r}")
        self.value = value


class IllegalChar(RdfError):
    """``offset`` is 1-based."""

    def __init__(self, value: str, offset: int):
        super().__init__(f"illegal character {value[offset - 1]!r} at offset {offset} in {value!r}")
        self.value = value
        self.offset = offset


class UnknownPrefix(RdfError):
    def __init__(self, prefix: str):
        super().__init__(f"unknown prefix {prefix!r}")
        self.prefix = prefix


class InvalidCurie(RdfError):
    pass


class InvalidTerm(RdfError):
    pass


class NTriplesSyntaxError(RdfError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def _is_control(ch: str) -> bool:
    cp = ord(ch)
    return cp < 0x20 or 0x7F <= cp <= 0x9F


def _check_iri(value: str) -> None:
    if not isinstance(value, str) or not value:
        raise RelativeIri(value if isinstance(value, str) else repr(value))
    for i, ch in enumerate(value):
        if ch in _FORBIDDEN or _is_control(ch):
            raise IllegalChar(value, i + 1)
    if not _SCHEME_RE.match(value):
        raise RelativeIri(value)


@dataclass(frozen=True, order=True)
class Iri:
    value: str

    def __post_init__(self):
        _check_iri(self.value)

    def n3(self) -> str:
        return f"<{self.value}>"

    def __str__(self) -> str:
        return self.value

    # equality is by value, so a parsed SkolemIri equals the Iri it was minted as
    def __eq__(self, other):
        if isinstance(other, Iri):
            return self.value == other.value
        return NotImplemented

    def __hash__(self):
        return hash(("Iri", self.value))


@dataclass(frozen=True, eq=False)
class SkolemIri(Iri):
    """An IRI minted by fairkit in place of a blank node."""


def skolem_iri(base: str, local: str) -> SkolemIri:
    return SkolemIri(base.rstrip("/") + SKOLEM_PATH + local)


def make_iri(value: str) -> Iri:
    """Build an :class:`Iri`, or :class:`SkolemIri` when the path says so."""
    if SKOLEM_PATH in value:
        return SkolemIri(value)
    return Iri(value)


def validate_iri(s: str) -> Iri:
    """Return ``Iri(s)`` if ``s`` is an absolute IRI; the value is kept verbatim."""
    return Iri(s)


XSD_STRING = Iri(XSD + "string")
RDF_LANGSTRING = Iri(RDF + "langString")
RDF_TYPE = Iri(RDF + "type")


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: Iri = XSD_STRING
    language: Optional[str] = None

    def __init__(self, lexical: str, datatype: Optional[Iri] = None, language: Optional[str] = None):
        if not isinstance(lexical, str):
            raise InvalidTerm(f"literal lexical form must be str, got {type(lexical).__name__}")
        if language is not None:
            if not _LANG_RE.match(language):
                raise InvalidTerm(f"bad language tag {language!r}")
            if datatype is not None and datatype != RDF_LANGSTRING:
                raise InvalidTerm("language-tagged literal must have datatype rdf:langString")
            language = language.lower()
            datatype = RDF_LANGSTRING
        else:
            if datatype is None:
                datatype = XSD_STRING
            elif datatype == RDF_LANGSTRING:
                raise InvalidTerm("rdf:langString literal requires a language tag")
        object.__setattr__(self, "lexical", lexical)
        object.__setattr__(self, "datatype", datatype)
        object.__setattr__(self, "language", language)

    def n3(self) -> str:
        body = '"' + escape_string(self.lexical) + '"'
        if self.language is not None:
            return body + "@" + self.language
        if self.datatype == XSD_STRING:
            return body
        return body + "^^" + self.datatype.n3()


Term = Union[Iri, Literal]

_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_ESCAPE_RE = re.compile(r'["\\\n\r\t]')


def escape_string(s: str) -> str:
    return _ESCAPE_RE.sub(lambda m: _ESCAPES[m.group()], s)


def _check_positions(subject, predicate, obj) -> None:
    if not isinstance(subject, Iri):
        raise InvalidTerm(f"subject must be an IRI, got {subject!r}")
    if not isinstance(predicate, Iri) or isinstance(predicate, SkolemIri):
        raise InvalidTerm(f"predicate must be a non-Skolem IRI, got {predicate!r}")
    if not isinstance(obj, (Iri, Literal)):
        raise InvalidTerm(f"object must be an IRI or literal, got {obj!r}")


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: Term

    def __post_init__(self):
        _check_positions(self.subject, self.predicate, self.object)

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


@dataclass(frozen=True)
class Quad:
    subject: Iri
    predicate: Iri
    object: Term
    graph: Iri

    def __post_init__(self):
        _check_positions(self.subject, self.predicate, self.object)
        if not isinstance(self.graph, Iri):
            raise InvalidTerm(f"graph name must be an IRI, got {self.graph!r}")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object, self.graph))

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} {self.graph.n3()} ."


class Graph:
    """A duplicate-free set of triples."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples = set()
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> bool:
        if not isinstance(t, Triple):
            raise InvalidTerm(f"not a Triple: {t!r}")
        if t in self._triples:
            return False
        self._triples.add(t)
        return True

    def update(self, triples: Iterable[Triple]) -> None:
        for t in triples:
            self.add(t)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, t) -> bool:
        return t in self._triples

    def __eq__(self, other) -> bool:
        if isinstance(other, Graph):
            return self._triples == other._triples
        return NotImplemented

    def __repr__(self) -> str:
        return f"Graph({len(self)} triples)"

    def triples(self, s=None, p=None, o=None) -> Iterator[Triple]:
        for t in self._triples:
            if (s is None or t.subject == s) and (p is None or t.predicate == p) and (o is None or t.object == o):
                yield t

    def subjects(self):
        return {t.subject for t in self._triples}


class PrefixMap(Mapping[str, Iri]):
    """Prefix label to namespace IRI bindings."""

    def __init__(self, bindings: Optional[Mapping[str, Union[str, Iri]]] = None):
        self._map: dict[str, Iri] = {}
        for label, ns in (bindings or {}).items():
            self.bind(label, ns)

    def bind(self, label: str, namespace: Union[str, Iri]) -> None:
        if not _LABEL_RE.match(label):
            raise InvalidCurie(f"bad prefix label {label!r}")
        self._map[label] = namespace if isinstance(namespace, Iri) else Iri(namespace)

    def __getitem__(self, label: str) -> Iri:
        return self._map[label]

    def __iter__(self):
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __repr__(self) -> str:
        return f"PrefixMap({ {k: v.value for k, v in self._map.items()} })"


def expand_curie(name: str, prefixes: Mapping) -> Iri:
    if name.count(":") != 1:
        raise InvalidCurie(f"expected prefix:local, got {name!r}")
    label, local = name.split(":")
    if label not in prefixes:
        raise UnknownPrefix(label)
    ns = prefixes[label]
    return make_iri((ns.value if isinstance(ns, Iri) else ns) + local)


# -- serialization -----------------------------------------------------------


def _join_lines(lines: Iterable[str]) -> str:
    lines = sorted(lines)
    return "\n".join(lines) + "\n" if lines else ""


def serialize_ntriples(g: Iterable[Triple]) -> str:
    """Sorted, one statement per line; byte-identical for equal graphs."""
    return _join_lines({t.n3() for t in g})


def serialize_nquads(quads: Iterable[Quad]) -> str:
    return _join_lines({q.n3() for q in quads})


# -- parsing -----------------------------------------------------------------

_UCHAR = r"\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8}"
_IRIREF_RE = re.compile(r'<((?:[^\x00-\x20<>"{}|^`\\]|' + _UCHAR + r")*)>")
_STRING_RE = re.compile(r'"((?:[^"\\\n\r]|\\[tbnrf"\'\\]|' + _UCHAR + r')*)"')
_LANGTAG_RE = re.compile(r"@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)")
_WS_RE = re.compile(r"[ \t]*")
_UNESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_EOL_RE = re.compile(r"\r\n|\r|\n")


def _unescape(s: str, lineno: int) -> str:
    if "\\" not in s:
        return s

    def repl(m):
        hexdigits = m.group(1) or m.group(2)
        if hexdigits is None:
            return _ECHAR[m.group(3)]
        cp = int(hexdigits, 16)
        if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
            raise NTriplesSyntaxError(lineno, f"escape \\{hexdigits} is not a unicode scalar value")
        return chr(cp)

    return _UNESCAPE_RE.sub(repl, s)


class _LineParser:
    def __init__(self, line: str, lineno: int):
        self.line = line
        self.lineno = lineno
        self.pos = 0

    def fail(self, reason: str):
        raise NTriplesSyntaxError(self.lineno, f"{reason} (column {self.pos + 1})")

    def ws(self):
        self.pos = _WS_RE.match(self.line, self.pos).end()

    def at_end(self) -> bool:
        self.ws()
        return self.pos >= len(self.line) or self.line[self.pos] == "#"

    def iri(self, what: str) -> Iri:
        self.ws()
        if self.line.startswith("_:", self.pos):
            self.fail("blank nodes are not accepted; use Skolem IRIs")
        m = _IRIREF_RE.match(self.line, self.pos)
        if not m:
            self.fail(f"expected IRI for {what}")
        value = _unescape(m.group(1), self.lineno)
        try:
            term = make_iri(value)
        except RdfError as e:
            self.fail(str(e))
        self.pos = m.end()
        return term

    def object(self) -> Term:
        self.ws()
        if self.line.startswith('"', self.pos):
            m = _STRING_RE.match(self.line, self.pos)
            if not m:
                self.fail("unterminated or malformed string literal")
            lexical = _unescape(m.group(1), self.lineno)
            self.pos = m.end()
            if self.line.startswith("^^", self.pos):
                self.pos += 2
                return Literal(lexical, datatype=self.iri("datatype"))
            lm = _LANGTAG_RE.match(self.line, self.pos)
            if lm:
                self.pos = lm.end()
                return Literal(lexical, language=lm.group(1))
            return Literal(lexical)
        return self.iri("object")

    def statement(self, quad: bool):
        s = self.iri("subject")
        p = self.iri("predicate")
        if isinstance(p, SkolemIri):
            self.fail("Skolem IRI in predicate position")
        o = self.object()
        g = self.iri("graph name") if quad else None
        self.ws()
        if not self.line.startswith(".", self.pos):
            self.fail("expected '.' terminating the statement")
        self.pos += 1
        if not self.at_end():
            self.fail("unexpected content after '.'")
        return (s, p, o, g) if quad else (s, p, o)


def _parse_lines(text: str, quad: bool):
    for lineno, line in enumerate(_EOL_RE.split(text), start=1):
        lp = _LineParser(line, lineno)
        if lp.at_end():
            continue
        yield lp.statement(quad)


def parse_ntriples(text: str) -> Graph:
    """Parse N-Triples text; raises :class:`NTriplesSyntaxError` with a 1-based line."""
    return Graph(Triple(*stmt) for stmt in _parse_lines(text, quad=False))


def parse_nquads(text: str) -> set:
    return {Quad(*stmt) for stmt in _parse_lines(text, quad=True)}
