"""In-memory indexed triple store and a conjunctive (basic graph pattern) query engine."""

from __future__ import annotations

import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import FairkitError
from .rdf import Graph, Iri, Literal, PrefixMap, Triple, _unescape, make_iri


class StoreError(FairkitError):
    module = "store"


class QuerySyntaxError(StoreError):
    """``offset`` is the 1-based character position in the query text."""

    def __init__(self, offset: int, reason: str):
        super().__init__(f"offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class UnknownPrefix(StoreError):
    def __init__(self, prefix: str, offset: int):
        super().__init__(f"undeclared prefix {prefix!r} at offset {offset}")
        self.prefix = prefix
        self.offset = offset


class EmptyProjection(StoreError):
    def __init__(self, offset: int):
        super().__init__(f"SELECT names no variables (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Variable:
    name: str

    def n3(self) -> str:
        return "?" + self.name


PatternTerm = Union[Iri, Literal, Variable]


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: Union[Iri, Variable]
    object: PatternTerm

    def __post_init__(self):
        if not isinstance(self.predicate, (Iri, Variable)):
            raise TypeError(f"pattern predicate must be an IRI or variable, got {self.predicate!r}")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def variables(self) -> set:
        return {x for x in self if isinstance(x, Variable)}


class _RWLock:
    """Many readers or one writer."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


# each index stores a nested dict keyed by the positions in this order
_ORDERS = {"spo": (0, 1, 2), "pos": (1, 2, 0), "osp": (2, 0, 1)}


class TripleStore:
    def __init__(self, triples: Iterable[Triple] = ()):
        self._lock = _RWLock()
        self._indexes = {name: {} for name in _ORDERS}
        self._size = 0
        for t in triples:
            self.insert(t)

    def __len__(self) -> int:
        return self._size

    def read(self):
        return self._lock.read()

    def insert(self, t: Triple) -> bool:
        """Add ``t``; True iff it was absent."""
        terms = (t.subject, t.predicate, t.object)
        with self._lock.write():
            spo = self._indexes["spo"]
            if terms[2] in spo.get(terms[0], {}).get(terms[1], ()):
                return False
            for name, (a, b, c) in _ORDERS.items():
                self._indexes[name].setdefault(terms[a], {}).setdefault(terms[b], set()).add(terms[c])
            self._size += 1
            return True

    def _scan(self, index: str, bound: tuple) -> Iterable[Triple]:
        a, b, c = _ORDERS[index]
        top = self._indexes[index]
        firsts = [bound[a]] if bound[a] is not None else list(top)
        for k1 in firsts:
            mid = top.get(k1)
            if not mid:
                continue
            seconds = [bound[b]] if bound[b] is not None else list(mid)
            for k2 in seconds:
                leaves = mid.get(k2)
                if not leaves:
                    continue
                thirds = ([bound[c]] if bound[c] in leaves else []) if bound[c] is not None else list(leaves)
                for k3 in thirds:
                    terms = [None, None, None]
                    terms[a], terms[b], terms[c] = k1, k2, k3
                    yield Triple(*terms)

    @staticmethod
    def _choose_index(bound: tuple) -> str:
        if bound[0] is not None:
            return "spo"
        if bound[1] is not None:
            return "pos"
        if bound[2] is not None:
            return "osp"
        return "spo"

    def _match_unlocked(self, bound: tuple, index: Optional[str] = None) -> Iterable[Triple]:
        # only IRIs can sit in subject/predicate position; anything else matches nothing
        if (bound[0] is not None and not isinstance(bound[0], Iri)) or (
            bound[1] is not None and not isinstance(bound[1], Iri)
        ):
            return iter(())
        return self._scan(index or self._choose_index(bound), bound)

    def match(self, pattern: TriplePattern, index: Optional[str] = None) -> set:
        """Triples unifying with ``pattern``.

        ``index`` forces a traversal order ("spo", "pos" or "osp"); by default the
        index led by the first bound position is used.
        """
        bound = tuple(None if isinstance(x, Variable) else x for x in pattern)
        with self._lock.read():
            return {t for t in self._match_unlocked(bound, index) if _unify(pattern, t, {}) is not None}

    def graph(self) -> Graph:
        with self._lock.read():
            return Graph(self._scan("spo", (None, None, None)))


def _unify(pattern: TriplePattern, t: Triple, binding: dict) -> Optional[dict]:
    out = binding
    for pt, term in zip(pattern, t):
        if isinstance(pt, Variable):
            seen = out.get(pt.name)
            if seen is None:
                if out is binding:
                    out = dict(binding)
                out[pt.name] = term
            elif seen != term:
                return None
        elif pt != term:
            return None
    return out


# -- query language ------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    prefixes: PrefixMap
    projected: tuple
    patterns: tuple

    def variables(self) -> set:
        out = set()
        for p in self.patterns:
            out |= p.variables()
        return out


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<string>"(?:[^"\\\n\r]|\\[tbnrf"'\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*")
  | (?P<dtype>\^\^)
  | (?P<lang>@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<pname>(?:[A-Za-z][A-Za-z0-9_\-]*)?:(?:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)?)
  | (?P<keyword>[A-Za-z]+)
  | (?P<punct>[{}.])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QuerySyntaxError(pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "keyword":
                value = value.upper()
            tokens.append((kind, value, pos + 1))
        pos = m.end()
    tokens.append(("eof", "", len(text) + 1))
    return tokens


class _QueryParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes = PrefixMap()

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, value: Optional[str] = None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise QuerySyntaxError(tok[2], f"expected {want}, found {tok[1] or 'end of query'!r}")
        return tok

    def iri_token(self, tok) -> Iri:
        kind, value, offset = tok
        try:
            if kind == "iri":
                return make_iri(_unescape(value[1:-1], 0))
            label, local = value.split(":", 1)
            if label not in self.prefixes:
                raise UnknownPrefix(label, offset)
            return make_iri(self.prefixes[label].value + local)
        except StoreError:
            raise
        except FairkitError as e:
            raise QuerySyntaxError(offset, str(e)) from e

    def term(self, position: str):
        tok = self.next()
        kind, value, offset = tok
        if kind == "var":
            return Variable(value[1:])
        if kind in ("iri", "pname"):
            return self.iri_token(tok)
        if kind == "string" and position == "object":
            lexical = _unescape(value[1:-1], 0)
            nxt = self.peek()
            if nxt[0] == "dtype":
                self.next()
                dt_tok = self.next()
                if dt_tok[0] not in ("iri", "pname"):
                    raise QuerySyntaxError(dt_tok[2], "expected datatype IRI after ^^")
                return Literal(lexical, datatype=self.iri_token(dt_tok))
            if nxt[0] == "lang":
                self.next()
                return Literal(lexical, language=nxt[1][1:])
            return Literal(lexical)
        raise QuerySyntaxError(offset, f"unexpected {value or 'end of query'!r} in {position} position")

    def parse(self) -> Query:
        while self.peek()[:2] == ("keyword", "PREFIX"):
            self.next()
            label_tok = self.expect("pname")
            label, local = label_tok[1].split(":", 1)
            if local:
                raise QuerySyntaxError(label_tok[2], "prefix declaration must end with ':'")
            iri_tok = self.expect("iri")
            self.prefixes.bind(label, self.iri_token(iri_tok))
        select = self.expect("keyword", "SELECT")
        projected = []
        while self.peek()[0] == "var":
            projected.append(Variable(self.next()[1][1:]))
        if not projected:
            raise EmptyProjection(select[2])
        self.expect("keyword", "WHERE")
        self.expect("punct", "{")
        patterns = [self.pattern()]
        while self.peek()[:2] == ("punct", "."):
            self.next()
            if self.peek()[:2] == ("punct", "}"):
                break
            patterns.append(self.pattern())
        self.expect("punct", "}")
        self.expect("eof")
        seen = set()
        for p in patterns:
            seen |= p.variables()
        for v in projected:
            if v not in seen:
                raise QuerySyntaxError(select[2], f"projected variable ?{v.name} does not occur in WHERE")
        return Query(self.prefixes, tuple(dict.fromkeys(projected)), tuple(patterns))

    def pattern(self) -> TriplePattern:
        s = self.term("subject")
        p = self.term("predicate")
        o = self.term("object")
        return TriplePattern(s, p, o)


def parse_query(text: str) -> Query:
    """Parse ``PREFIX ... SELECT ?v ... WHERE { s p o . ... }``."""
    return _QueryParser(text).parse()


@dataclass(frozen=True)
class ResultTable:
    header: tuple
    rows: tuple

    def __len__(self) -> int:
        return len(self.rows)

    def to_tsv(self) -> str:
        lines = ["\t".join(v.n3() for v in self.header)]
        lines += ["\t".join(t.n3() for t in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {
            "header": [v.name for v in self.header],
            "rows": [[t.n3() for t in row] for row in self.rows],
        }


def _row_key(row) -> str:
    return "\t".join(t.n3() for t in row)


def evaluate(q: Query, store: TripleStore) -> ResultTable:
    """Natural join of the patterns, left to right, projected and deduplicated."""
    solutions = [{}]
    with store.read():
        for pattern in q.patterns:
            extended = []
            for binding in solutions:
                bound = tuple(
                    binding.get(x.name) if isinstance(x, Variable) else x for x in pattern
                )
                for t in store._match_unlocked(bound):
                    b = _unify(pattern, t, binding)
                    if b is not None:
                        extended.append(b)
            solutions = extended
            if not solutions:
                break
    rows = {tuple(b[v.name] for v in q.projected) for b in solutions}
    return ResultTable(tuple(q.projected), tuple(sorted(rows, key=_row_key)))
