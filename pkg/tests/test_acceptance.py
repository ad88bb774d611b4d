"""The eight acceptance criteria, one test each.

Every test records its outcome in ``ACCEPTANCE_RESULTS`` so the terminal summary
prints one PASS/FAIL line per criterion. Run directly with
``python tests/test_acceptance.py``.
"""

import hashlib
import json
import random
import re
import subprocess
import sys
import time

import pytest

from fairkit.assess import AssessmentBundle, evaluate_indicators, render_report
from fairkit.ingest import parse_csv
from fairkit.pipeline import OUTPUT_FILES
from fairkit.provenance import load_provjson, prov_graph
from fairkit.rdf import Graph, parse_ntriples, serialize_ntriples
from fairkit.service import load, serve
from fairkit.store import TriplePattern, TripleStore, Variable, evaluate, parse_query

from conftest import ACCEPTANCE_RESULTS, FIXTURE, run_fixture
from crawler import crawl, get
from csv_cases import CASES
from generators import cartesian_patterns, query_text, random_graph, random_patterns, random_store
from monotonicity import run_sequence
from oracles import brute_force_bgp, counting_law, load_json


def record(n, name, ok, detail):
    ACCEPTANCE_RESULTS[n] = (name, ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {n}. {name}: {detail}")
    assert ok, detail


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_1_round_trip():
    rng = random.Random(20260201)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        g = Graph(random_graph(rng, 50))
        bad += parse_ntriples(serialize_ntriples(g)) != g
    elapsed = time.perf_counter() - t0
    record(1, "N-Triples round trip", bad == 0 and elapsed < 10,
           f"1000 graphs, {bad} mismatches, {elapsed:.2f}s (limit 10s)")


def test_2_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_fixture(a, "same-run") == 0
    assert run_fixture(b, "same-run") == 0
    differing = [n for n in OUTPUT_FILES if sha(a / n) != sha(b / n)]
    record(2, "byte-identical reruns", not differing,
           f"{len(OUTPUT_FILES)} files compared by SHA-256, differing: {differing or 'none'}")


def test_3_counting_law(run_dir):
    law = counting_law((FIXTURE / "crf.csv").read_bytes(), load_json(FIXTURE / "schema.json"),
                       load_json(FIXTURE / "mapping.json"))
    report = load_json(run_dir / "run-report.json")
    outcomes = sum(sum(c.values()) for c in report["per_rule"].values())
    ok = (report["triples_out"] == law["triples"]
          and report["skipped_nulls"] == law["skipped_nulls"]
          and report["skipped_unmapped"] == law["skipped_unmapped"]
          and outcomes == law["rows"] * law["rules"])
    record(3, "counting law", ok,
           f"triples_out {report['triples_out']} vs oracle {law['triples']}, "
           f"rule outcomes {outcomes} vs rows*rules {law['rows'] * law['rules']}")


def test_4_query_oracle():
    rng = random.Random(7)
    t0 = time.perf_counter()
    cases, bad = [], 0
    ts = random_store(rng, 30)
    cases.append((ts, cartesian_patterns(), [Variable(n) for n in "abcd"]))
    while len(cases) < 150:
        ts = random_store(rng, 30)
        pats = random_patterns(rng, 3)
        variables = sorted({v for p in pats for v in p.variables()}, key=lambda v: v.name)
        if not variables:
            pats.append(TriplePattern(Variable("a"), Variable("b"), Variable("c")))
            variables = [Variable("a")]
        cases.append((ts, pats, rng.sample(variables, rng.randint(1, len(variables)))))
    for ts, pats, proj in cases:
        store = TripleStore()
        for t in ts:
            store.insert(t)
        bad += set(evaluate(parse_query(query_text(pats, proj)), store).rows) != brute_force_bgp(ts, pats, proj)
    elapsed = time.perf_counter() - t0
    record(4, "query oracle", bad == 0 and elapsed < 10,
           f"{len(cases)} cases incl. Cartesian, {bad} mismatches, {elapsed:.2f}s (limit 10s)")


def test_5_provenance_completeness(run_dir):
    raw = (run_dir / "prov.json").read_bytes()
    doc = load_provjson(raw)
    counts = doc.generation_counts()
    unpinned = [e for e, ent in doc.entities.items() if ent.kind in ("file", "graph") and counts[e] != 1]
    labels_ok = doc.executed_labels() == doc.plan_labels()
    same_facts = parse_ntriples((run_dir / "prov.nt").read_text(encoding="utf-8")) == prov_graph(doc)
    n_files = sum(ent.kind in ("file", "graph") for ent in doc.entities.values())
    record(5, "provenance completeness", not unpinned and labels_ok and same_facts,
           f"{n_files} file/graph entities, {len(unpinned)} without exactly one generation; "
           f"labels equal: {labels_ok}; N-Triples == PROV-JSON: {same_facts}")


def test_6_fdp_crawl():
    proc = subprocess.Popen([sys.executable, "-m", "fairkit", "serve", "--metadata", str(FIXTURE / "metadata.json"),
                             "--bind", "127.0.0.1:0"], stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        url = re.search(r"at (http://\S+)", proc.stdout.readline()).group(1)
        seen = crawl(url)
        all_ok = all(status == 200 and g is not None and any(t.subject.value == u for t in g)
                     for u, (status, g) in seen.items())
        missing = get(url + "dataset/no-such-record")[0]
        wrong = {m: get(url, method=m)[0] for m in ("POST", "PUT", "DELETE")}
    finally:
        proc.terminate()
        proc.wait(timeout=5)
    ok = len(seen) == 4 and all_ok and missing == 404 and set(wrong.values()) == {405}
    record(6, "FDP crawl", ok,
           f"{len(seen)} records reached, self-describing 200s: {all_ok}; unknown id {missing}; "
           f"non-GET {sorted(set(wrong.values()))}")


def test_7_assessment(bundle_dir, tmp_path):
    files = dict(data=bundle_dir / "data.nt", provenance=bundle_dir / "prov.nt",
                 metadata=bundle_dir / "metadata.json", mapping=bundle_dir / "mapping.json")
    srv = serve(load(bundle_dir / "metadata.json"), ("127.0.0.1", 0), data_path=bundle_dir / "data.nt")
    try:
        full = evaluate_indicators(AssessmentBundle(service_url=srv.url, **files))
    finally:
        srv.close()
    passed = sum(r.passed for r in full.results)

    doc = json.loads((bundle_dir / "metadata.json").read_text())
    for rec in doc:
        if rec["kind"] == "dataset":
            del rec["license"]
    (tmp_path / "metadata.json").write_text(json.dumps(doc))
    base = evaluate_indicators(AssessmentBundle(**files))
    cut = evaluate_indicators(AssessmentBundle(**{**files, "metadata": tmp_path / "metadata.json"}))
    flipped = [a.indicator.id for a, b in zip(base.results, cut.results) if a.passed != b.passed]
    code = render_report(cut)[2]

    flips = [f for seed in range(20) for f in run_sequence(bundle_dir, seed)[0]]
    ok = passed == 10 and flipped == ["R1.1-M-LICENSE"] and code == 3 and not flips
    record(7, "assessment", ok,
           f"{passed}/10 with service; license removal flips {flipped}, exit {code}; "
           f"20 addition sequences, {len(flips)} pass-to-fail flips")


def test_8_csv_micro_suite():
    failures = []
    for name, data, expected in CASES:
        if isinstance(expected, tuple):
            exc_type, attrs = expected
            try:
                parse_csv(data)
                failures.append(name)
            except exc_type as e:
                if any(getattr(e, k) != v for k, v in attrs.items()):
                    failures.append(name)
        elif list(parse_csv(data).rows) != expected:
            failures.append(name)
    record(8, "CSV conformance", not failures,
           f"{len(CASES)} cases, failing: {failures or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
