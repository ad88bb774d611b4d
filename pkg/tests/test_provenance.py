import json
from datetime import datetime, timedelta, timezone

import pytest

from fairkit.provenance import (
    PROV,
    EmptyPipeline,
    IdMinter,
    NotAdmitted,
    ProvDocument,
    ProvRecorder,
    Stage,
    UnknownPlanStep,
    build_plan,
    fixed_clock,
    load_provjson,
    prov_graph,
    record_activity,
    serialize_prov,
)
from fairkit.rdf import RDF, Iri, parse_ntriples

BASE = "http://example.org/base/"
STAGES = (Stage("triplify", "5a", "t"), Stage("describe", "5b", "d"), Stage("publish", "6", "w"))
TYPE = Iri(RDF + "type")


class TickClock:
    def __init__(self):
        self.t = datetime(2026, 1, 1, tzinfo=timezone.utc)

    def __call__(self):
        self.t += timedelta(milliseconds=250)
        return self.t


def facts_from_json(doc_bytes):
    return set(prov_graph(load_provjson(doc_bytes)))


def test_plan_has_one_step_per_stage_chained_in_order():
    doc = build_plan(STAGES, IdMinter(BASE, "r"))
    assert len([e for e in doc.entities.values() if e.kind == "plan"]) == 1
    steps = doc.plan_steps()
    assert [s.labels["stepLabel"] for s in steps] == ["5a", "5b", "6"]
    assert len(doc.derived) == 2
    assert steps[0].id.value == BASE + "prov/r/entity/2"


def test_empty_pipeline():
    with pytest.raises(EmptyPipeline):
        build_plan([])


def test_transform_stage_edges():
    rec = ProvRecorder(BASE, "r", STAGES, clock=TickClock())
    ag = rec.agent("t", "1")
    src, out = rec.entity("dataset", path="in.csv"), rec.entity("graph")
    act = record_activity(rec, "5a", ag, [src], [out])
    doc = rec.document()
    assert doc.used == [(act.id, src.id)]
    assert doc.generated == [(out.id, act.id)]
    assert doc.problems() == []


def test_failed_stage_keeps_no_outputs():
    rec = ProvRecorder(BASE, "r", STAGES)
    act = rec.record_activity("5a", rec.agent("t", "1"), [], [rec.entity("graph")], "failed")
    assert act.status == "failed"
    assert rec.document().generated == []


def test_unknown_step_label():
    rec = ProvRecorder(BASE, "r", STAGES)
    with pytest.raises(UnknownPlanStep):
        rec.record_activity("7", rec.agent("t", "1"))


def test_run_granularity_refuses_step_activities():
    rec = ProvRecorder(BASE, "r", STAGES, granularity="run")
    with pytest.raises(NotAdmitted):
        rec.record_activity("5a", rec.agent("t", "1"), level="step")
    rec.record_activity(["5a", "5b", "6"], rec.agent("t", "1"), level="run")
    doc = rec.document()
    assert len(doc.activities) == 1
    assert doc.executed_labels() == doc.plan_labels()


def test_activity_count_in_ntriples():
    rec = ProvRecorder(BASE, "r", STAGES, clock=TickClock())
    ag = rec.agent("t", "1")
    for label in ("5a", "5b", "6", "5a"):
        rec.record_activity(label, ag)
    g = parse_ntriples(serialize_prov(rec.document(), "ntriples").decode())
    assert len(list(g.triples(None, TYPE, Iri(PROV + "Activity")))) == 4


def test_empty_document():
    doc = ProvDocument()
    assert serialize_prov(doc, "ntriples") == b""
    assert list(json.loads(serialize_prov(doc, "provjson"))) == ["prefix"]


def test_one_generation_record():
    rec = ProvRecorder(BASE, "r", STAGES)
    out = rec.entity("graph")
    act = rec.record_activity("5a", rec.agent("t", "1"), [], [out])
    doc = json.loads(serialize_prov(rec.document(), "provjson"))
    (record,) = doc["wasGeneratedBy"].values()
    assert record == {"prov:entity": "run:entity/5", "prov:activity": "run:activity/1"}
    assert act.id.value.endswith("/activity/1") and out.id.value.endswith("/entity/5")


def test_hadplan_goes_through_a_qualified_association():
    rec = ProvRecorder(BASE, "r", STAGES)
    act = rec.record_activity("5b", rec.agent("d", "1"))
    g = parse_ntriples(serialize_prov(rec.document(), "ntriples").decode())
    (q,) = [t.object for t in g.triples(act.id, Iri(PROV + "qualifiedAssociation"))]
    (plan,) = [t.object for t in g.triples(q, Iri(PROV + "hadPlan"))]
    assert rec.document().entities[plan].labels["stepLabel"] == "5b"
    assert "/.well-known/skolem/" in q.value


def test_serializations_carry_the_same_facts():
    rec = ProvRecorder(BASE, "r", STAGES, granularity="record", clock=TickClock())
    ag = rec.agent("t", "1")
    a = rec.entity("dataset", path="in.csv", sha256="ab")
    b = rec.entity("graph", triples=3)
    c = rec.entity("file", path="data.nt")
    rec.record_activity(None, ag, [a], [], level="run")
    rec.record_activity("5a", ag, [a], [b])
    rec.record_activity("6", rec.agent("w", "1"), [b], [c])
    rec.record_activity("5a", ag, [a], [], level="record", name="batch")
    rec.derive(c, b)
    doc = rec.document()
    nt = set(parse_ntriples(serialize_prov(doc, "ntriples").decode()))
    assert nt == facts_from_json(serialize_prov(doc, "provjson"))
    assert doc.problems() == []


def test_times_are_millisecond_utc():
    rec = ProvRecorder(BASE, "r", STAGES, clock=fixed_clock("2026-03-04T05:06:07.891234+00:00"))
    rec.record_activity("5a", rec.agent("t", "1"))
    doc = json.loads(serialize_prov(rec.document(), "provjson"))
    (act,) = doc["activity"].values()
    assert act["prov:startTime"] == "2026-03-04T05:06:07.891Z"


def test_problems_detects_double_generation():
    rec = ProvRecorder(BASE, "r", STAGES)
    ag = rec.agent("t", "1")
    out = rec.entity("file", path="x")
    rec.record_activity("5a", ag, [], [out])
    rec.record_activity("6", ag, [], [out])
    assert any("wasGeneratedBy" in p for p in rec.document().problems())
