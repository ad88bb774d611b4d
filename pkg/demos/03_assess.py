"""Score a published bundle against the maturity rubric and the competency questions.

python demos/03_assess.py RUN_DIR   (after 01 and 02)
"""

import sys
from pathlib import Path

import fairkit
from fairkit.assess import (AssessmentBundle, evaluate_indicators, load_questions, render_report,
                            run_competency_questions)
from fairkit.rdf import parse_ntriples
from fairkit.service import load, serve
from fairkit.store import TripleStore

CRF = Path(fairkit.__file__).parent / "data" / "crf"
run_dir = Path(sys.argv[1])

store = TripleStore()
for t in parse_ntriples((run_dir / "data.nt").read_text(encoding="utf-8")):
    store.insert(t)
cqs = run_competency_questions(load_questions(CRF / "questions.json"), store)

srv = serve(load(run_dir / "metadata.json"), ("127.0.0.1", 0), data_path=run_dir / "data.nt")
try:
    bundle = AssessmentBundle(data=run_dir / "data.nt", provenance=run_dir / "prov.nt",
                              metadata=run_dir / "metadata.json", mapping=CRF / "mapping.json",
                              service_url=srv.url)
    text, _, code = render_report(evaluate_indicators(bundle), cqs)
finally:
    srv.close()
print(text)
print("exit code would be", code)
