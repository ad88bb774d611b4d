"""Turn the bundled synthetic CRF table into RDF and query it.

Run from the repository root:  python demos/01_triplify.py
"""

import sys
import tempfile
from pathlib import Path

import fairkit
from fairkit.pipeline import PipelineConfig, run_pipeline
from fairkit.provenance import fixed_clock
from fairkit.rdf import parse_ntriples
from fairkit.store import TripleStore, evaluate, parse_query

CRF = Path(fairkit.__file__).parent / "data" / "crf"

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="fairkit-"))
report = run_pipeline(PipelineConfig(CRF / "crf.csv", CRF / "schema.json", CRF / "mapping.json", out,
                                     run_id="demo", clock=fixed_clock("2026-02-01T09:30:00Z")))
print(f"{report.rows_in} rows in, {report.triples_out} triples out, "
      f"{len(report.row_errors)} rows with cell errors (written as nulls)")
print("outputs:", ", ".join(sorted(p.name for p in out.iterdir())), "in", out)

store = TripleStore()
for t in parse_ntriples((out / "data.nt").read_text(encoding="utf-8")):
    store.insert(t)

# who died, and how old were they
q = parse_query("""
PREFIX crf: <http://example.org/synthetic-crf#>
SELECT ?p ?age WHERE { ?p crf:hasOutcome crf:Death . ?p crf:ageAtAdmission ?age }
""")
table = evaluate(q, store)
print(f"\n{len(table)} deaths with a recorded age; first five:")
print("\n".join(table.to_tsv().split("\n")[:6]))
