"""Reference implementations the tests compare the package against.

Each oracle is deliberately naive and shares no code with the package
beyond the term classes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import re
from datetime import date, datetime
from decimal import Decimal, InvalidOperation

from fairkit.rdf import Iri, Literal, Triple
from fairkit.store import Variable


# -- basic graph patterns ----------------------------------------------------------


def brute_force_bgp(triples, patterns, projected):
    """Try every assignment of one store triple per pattern and keep the consistent ones."""
    triples = list(triples)
    rows = set()
    for combo in itertools.product(triples, repeat=len(patterns)):
        binding = {}
        ok = True
        for pattern, t in zip(patterns, combo):
            for p_term, t_term in zip(pattern, (t.subject, t.predicate, t.object)):
                if isinstance(p_term, Variable):
                    if binding.setdefault(p_term.name, t_term) != t_term:
                        ok = False
                        break
                elif p_term != t_term:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            rows.add(tuple(binding[v.name] for v in projected))
    return rows


def linear_scan(triples, s=None, p=None, o=None):
    return {t for t in triples
            if (s is None or t.subject == s) and (p is None or t.predicate == p) and (o is None or t.object == o)}


# -- counting law ------------------------------------------------------------------

_INT = re.compile(r"[+-]?[0-9]+\Z")
_DEC = re.compile(r"[+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)\Z")


def _typed(raw, type_):
    """Value or None, following the column-type rules directly."""
    if type_ == "string":
        return raw
    if type_ == "integer":
        return int(raw) if _INT.match(raw) else None
    if type_ == "decimal":
        if not _DEC.match(raw):
            return None
        try:
            return Decimal(raw)
        except InvalidOperation:
            return None
    if type_ == "boolean":
        return {"true": True, "false": False, "1": True, "0": False}.get(raw.lower())
    if type_ == "date":
        try:
            return date.fromisoformat(raw) if len(raw) == 10 else None
        except ValueError:
            return None
    if type_ == "datetime":
        try:
            return datetime.fromisoformat(raw.replace("Z", "+00:00"))
        except ValueError:
            return None
    raise ValueError(type_)


def counting_law(csv_bytes: bytes, schema: dict, mapping: dict) -> dict:
    """Expected run tallies computed straight from the fixture files."""
    text = csv_bytes.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(text, newline=""))
    types = {c["name"]: c["type"] for c in schema["columns"]}
    markers = {c["name"]: set(c.get("null_markers", [""])) for c in schema["columns"]}
    has_class = 1 if mapping["subject"].get("class") else 0
    rules = len(mapping["data_rules"]) + len(mapping["object_rules"])
    out = {"rows": 0, "triples": 0, "skipped_nulls": 0, "skipped_unmapped": 0, "mapped": 0, "rules": rules}
    for record in reader:
        out["rows"] += 1
        out["triples"] += has_class

        def value(col):
            raw = record[col]
            return None if raw in markers[col] else _typed(raw, types[col])

        for rule in mapping["data_rules"]:
            if value(rule["column"]) is None:
                out["skipped_nulls"] += 1
            else:
                out["triples"] += 1
                out["mapped"] += 1
        for rule in mapping["object_rules"]:
            v = value(rule["column"])
            if v is None:
                out["skipped_nulls"] += 1
            elif str(v) in rule["value_map"] or rule.get("on_unmapped", "error") == "mint":
                out["triples"] += 1
                out["mapped"] += 1
            elif rule.get("on_unmapped", "error") == "skip":
                out["skipped_unmapped"] += 1
            else:
                raise AssertionError(f"fixture holds an unmapped value for {rule['column']}: {v!r}")
    return out


# -- JSON-LD ------------------------------------------------------------------------


def expand_jsonld(doc: dict) -> set:
    """Triples of a flat JSON-LD node using only the constructs the service emits."""
    ctx = doc["@context"]

    def iri(term: str) -> str:
        if ":" in term and not term.startswith("http"):
            prefix, local = term.split(":", 1)
            if prefix in ctx and isinstance(ctx[prefix], str):
                return ctx[prefix] + local
        return term

    def node(obj: dict) -> set:
        s = Iri(obj["@id"])
        out = {Triple(s, Iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type"), Iri(iri(obj["@type"])))}
        for key, value in obj.items():
            if key.startswith("@"):
                continue
            definition = ctx[key]
            if isinstance(definition, str):
                definition = {"@id": definition}
            pred = Iri(iri(definition["@id"]))
            kind = definition.get("@type")
            for v in value if isinstance(value, list) else [value]:
                if isinstance(v, dict) and "@value" in v:
                    out.add(Triple(s, pred, Literal(v["@value"])))
                elif isinstance(v, dict):
                    out.add(Triple(s, pred, Iri(v["@id"])))
                    out |= node(v)
                elif kind == "@id":
                    out.add(Triple(s, pred, Iri(v)))
                elif kind:
                    out.add(Triple(s, pred, Literal(v, Iri(iri(kind)))))
                else:
                    out.add(Triple(s, pred, Literal(v)))
        return out

    return node(doc)


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
