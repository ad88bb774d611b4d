"""Prospective (plan) and retrospective (execution) provenance in PROV terms.

A :class:`ProvRecorder` collects entities, activities and agents while a
pipeline runs; :func:`serialize_prov` renders the finished
:class:`ProvDocument` as PROV-O N-Triples or PROV-JSON.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Optional, Sequence, Union

from .errors import FairkitError
from .rdf import RDF, RDFS, XSD, Graph, Iri, Literal, Triple, serialize_ntriples, skolem_iri

PROV = "http://www.w3.org/ns/prov#"
FAIRKIT = "https://w3id.org/fairkit/ns#"

GRANULARITIES = ("run", "step", "record")
STEP_LABELS = ("1", "2", "3", "4a", "4b", "5a", "5b", "6", "7")
ENTITY_KINDS = ("file", "dataset", "graph", "plan", "plan_step")
STATUSES = ("succeeded", "failed")

_LEVEL_RANK = {"run": 0, "step": 1, "record": 2}


class ProvenanceError(FairkitError):
    module = "provenance"


class EmptyPipeline(ProvenanceError):
    def __init__(self):
        super().__init__("pipeline configuration has no stages")


class UnknownPlanStep(ProvenanceError):
    def __init__(self, label: str):
        super().__init__(f"no plan step carries step label {label!r}")
        self.label = label


class NotAdmitted(ProvenanceError):
    def __init__(self, level: str, granularity: str):
        super().__init__(f"{level}-level event not recorded at granularity {granularity!r}")


class InvalidDocument(ProvenanceError):
    pass


@dataclass(frozen=True)
class Stage:
    name: str
    step_label: str
    agent: str = "fairkit"

    def __post_init__(self):
        if self.step_label not in STEP_LABELS:
            raise ValueError(f"step label {self.step_label!r} not in {STEP_LABELS}")


@dataclass
class ProvEntity:
    id: Iri
    kind: str
    labels: dict = field(default_factory=dict)


@dataclass
class ProvActivity:
    id: Iri
    name: str
    step_labels: tuple
    started: datetime
    ended: datetime
    status: str = "succeeded"
    seq: int = 0

    @property
    def step_label(self) -> Optional[str]:
        return self.step_labels[0] if len(self.step_labels) == 1 else None


@dataclass
class ProvAgent:
    id: Iri
    name: str
    version: str


@dataclass
class ProvDocument:
    base_iri: str = "urn:fairkit:"
    run_id: str = "plan"
    granularity: str = "step"
    entities: dict = field(default_factory=dict)
    activities: dict = field(default_factory=dict)
    agents: dict = field(default_factory=dict)
    used: list = field(default_factory=list)  # (activity, entity)
    generated: list = field(default_factory=list)  # (entity, activity)
    associated: list = field(default_factory=list)  # (activity, agent, plan entity or None)
    derived: list = field(default_factory=list)  # (generated entity, source entity)

    @property
    def namespace(self) -> str:
        return _namespace(self.base_iri, self.run_id)

    def plan_steps(self) -> list:
        steps = [e for e in self.entities.values() if e.kind == "plan_step"]
        return sorted(steps, key=lambda e: int(e.labels.get("order", "0")))

    def plan_labels(self) -> set:
        return {e.labels["stepLabel"] for e in self.plan_steps()}

    def executed_labels(self) -> set:
        out = set()
        for a in self.activities.values():
            out.update(a.step_labels)
        return out

    def generation_counts(self) -> dict:
        counts = {e: 0 for e in self.entities}
        for e, _ in self.generated:
            counts[e] = counts.get(e, 0) + 1
        return counts

    def problems(self) -> list:
        """Invariant violations, as messages; empty for a well-formed document."""
        out = []
        for a, e in self.used:
            if a not in self.activities or e not in self.entities:
                out.append(f"used({a}, {e}) has a dangling endpoint")
        for e, a in self.generated:
            if a not in self.activities or e not in self.entities:
                out.append(f"wasGeneratedBy({e}, {a}) has a dangling endpoint")
        for a, ag, plan in self.associated:
            if a not in self.activities or ag not in self.agents:
                out.append(f"wasAssociatedWith({a}, {ag}) has a dangling endpoint")
            if plan is not None and (plan not in self.entities or self.entities[plan].kind not in ("plan", "plan_step")):
                out.append(f"hadPlan({a}, {plan}) does not point at a plan")
        for e2, e1 in self.derived:
            if e2 not in self.entities or e1 not in self.entities:
                out.append(f"wasDerivedFrom({e2}, {e1}) has a dangling endpoint")
        counts = self.generation_counts()
        for eid, ent in self.entities.items():
            if ent.kind in ("file", "graph") and counts[eid] != 1:
                out.append(f"{eid} ({ent.kind}) has {counts[eid]} wasGeneratedBy edges")
        extra = self.executed_labels() - self.plan_labels()
        if extra:
            out.append(f"executed step labels {sorted(extra)} are not in the plan")
        for a in self.activities.values():
            if a.started > a.ended:
                out.append(f"{a.id} ends before it starts")
        return out


def _namespace(base_iri: str, run_id: str) -> str:
    return str(base_iri).rstrip("/") + "/prov/" + run_id + "/"


class IdMinter:
    """``base/prov/<run_id>/<kind>/<n>`` identifiers with one counter per kind."""

    def __init__(self, base_iri: str = "urn:fairkit:", run_id: str = "plan"):
        self.base_iri = str(base_iri)
        self.run_id = run_id
        self._counters = {}
        self._lock = threading.Lock()

    def __call__(self, kind: str) -> Iri:
        with self._lock:
            n = self._counters.get(kind, 0) + 1
            self._counters[kind] = n
        return Iri(f"{_namespace(self.base_iri, self.run_id)}{kind}/{n}")


def build_plan(stages: Sequence[Stage], minter: Optional[IdMinter] = None) -> ProvDocument:
    """The prospective half: one plan entity and one chained plan_step per stage."""
    stages = list(getattr(stages, "stages", stages))
    if not stages:
        raise EmptyPipeline()
    minter = minter or IdMinter()
    doc = ProvDocument(minter.base_iri, minter.run_id)
    plan = ProvEntity(minter("entity"), "plan", {"name": "pipeline", "stages": str(len(stages))})
    doc.entities[plan.id] = plan
    previous = None
    for order, stage in enumerate(stages, start=1):
        step = ProvEntity(
            minter("entity"),
            "plan_step",
            {"name": stage.name, "stepLabel": stage.step_label, "order": str(order)},
        )
        doc.entities[step.id] = step
        if previous is not None:
            doc.derived.append((step.id, previous.id))
        previous = step
    return doc


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(instant: Union[str, datetime]) -> Callable[[], datetime]:
    if isinstance(instant, str):
        instant = datetime.fromisoformat(instant.replace("Z", "+00:00"))
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return lambda: instant


class ProvRecorder:
    """Collects provenance events; safe to call from several threads."""

    def __init__(self, base_iri, run_id: str, stages: Sequence[Stage], granularity: str = "step",
                 clock: Optional[Callable[[], datetime]] = None):
        if granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        self.granularity = granularity
        self.clock = clock or utc_now
        self._mint = IdMinter(str(base_iri), run_id)
        self._lock = threading.Lock()
        self._seq = 0
        self.doc = build_plan(stages, self._mint)
        self.doc.granularity = granularity
        self.plan = next(e for e in self.doc.entities.values() if e.kind == "plan")
        self.plan.labels["granularity"] = granularity
        self._steps = {e.labels["stepLabel"]: e for e in self.doc.plan_steps()}

    def now(self) -> datetime:
        return self.clock()

    def admits(self, level: str) -> bool:
        return _LEVEL_RANK[level] <= _LEVEL_RANK[self.granularity]

    def entity(self, kind: str, **labels) -> ProvEntity:
        if kind not in ENTITY_KINDS:
            raise ValueError(f"entity kind must be one of {ENTITY_KINDS}")
        ent = ProvEntity(self._mint("entity"), kind, {k: str(v) for k, v in labels.items()})
        with self._lock:
            self.doc.entities[ent.id] = ent
        return ent

    def agent(self, name: str, version: str) -> ProvAgent:
        with self._lock:
            for ag in self.doc.agents.values():
                if ag.name == name:
                    return ag
            ag = ProvAgent(self._mint("agent"), name, version)
            self.doc.agents[ag.id] = ag
            return ag

    def derive(self, generated: ProvEntity, source: ProvEntity) -> None:
        with self._lock:
            self.doc.derived.append((generated.id, source.id))

    def record_activity(self, step_label, agent: ProvAgent, inputs: Iterable[ProvEntity] = (),
                        outputs: Iterable[ProvEntity] = (), status: str = "succeeded", *,
                        started: Optional[datetime] = None, ended: Optional[datetime] = None,
                        level: str = "step", name: Optional[str] = None) -> ProvActivity:
        """Record one executed activity.

        ``step_label`` is a workflow step label, a sequence of them (a
        run-level activity covering several stages), or None for a run
        activity that follows the whole plan.
        """
        if not self.admits(level):
            raise NotAdmitted(level, self.granularity)
        if status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")
        if step_label is None:
            labels = ()
        elif isinstance(step_label, str):
            labels = (step_label,)
        else:
            labels = tuple(step_label)
        for label in labels:
            if label not in self._steps:
                raise UnknownPlanStep(label)
        plans = [self._steps[label].id for label in labels] or [self.plan.id]
        if status == "failed":
            outputs = ()
        started = started or self.now()
        ended = ended or self.now()
        act_id = self._mint("activity")
        with self._lock:
            self._seq += 1
            act = ProvActivity(act_id, name or "+".join(labels) or "run", labels, started, ended, status, self._seq)
            self.doc.activities[act.id] = act
            self.doc.used.extend((act.id, e.id) for e in inputs)
            self.doc.generated.extend((e.id, act.id) for e in outputs)
            self.doc.associated.extend((act.id, agent.id, p) for p in plans)
        return act

    def document(self) -> ProvDocument:
        """Finalize: activities ordered by (start time, sequence number)."""
        with self._lock:
            doc = self.doc
            ordered = sorted(doc.activities.values(), key=lambda a: (a.started, a.seq))
            doc.activities = {a.id: a for a in ordered}
            return doc


def record_activity(recorder: ProvRecorder, step_label, agent: ProvAgent, inputs=(), outputs=(),
                    status: str = "succeeded", **kwargs) -> ProvActivity:
    return recorder.record_activity(step_label, agent, inputs, outputs, status, **kwargs)


# -- serialization -------------------------------------------------------------


def format_time(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


def _parse_time(s: str) -> datetime:
    return datetime.fromisoformat(s.replace("Z", "+00:00"))


def _p(local: str) -> Iri:
    return Iri(PROV + local)


def _f(local: str) -> Iri:
    return Iri(FAIRKIT + local)


_TYPE = Iri(RDF + "type")
_LABEL = Iri(RDFS + "label")
_DATETIME = Iri(XSD + "dateTime")


def _association_id(doc: ProvDocument, n: int) -> Iri:
    return skolem_iri(doc.base_iri, f"prov/{doc.run_id}/association/{n}")


def prov_graph(doc: ProvDocument) -> Graph:
    g = Graph()
    add = lambda s, p, o: g.add(Triple(s, p, o))  # noqa: E731
    for ent in doc.entities.values():
        add(ent.id, _TYPE, _p("Entity"))
        if ent.kind in ("plan", "plan_step"):
            add(ent.id, _TYPE, _p("Plan"))
        add(ent.id, _f("kind"), Literal(ent.kind))
        for key, value in ent.labels.items():
            add(ent.id, _f(key), Literal(value))
    for act in doc.activities.values():
        add(act.id, _TYPE, _p("Activity"))
        add(act.id, _LABEL, Literal(act.name))
        add(act.id, _p("startedAtTime"), Literal(format_time(act.started), _DATETIME))
        add(act.id, _p("endedAtTime"), Literal(format_time(act.ended), _DATETIME))
        add(act.id, _f("status"), Literal(act.status))
        for label in act.step_labels:
            add(act.id, _f("stepLabel"), Literal(label))
    for ag in doc.agents.values():
        add(ag.id, _TYPE, _p("SoftwareAgent"))
        add(ag.id, _LABEL, Literal(ag.name))
        add(ag.id, _f("version"), Literal(ag.version))
    for a, e in doc.used:
        add(a, _p("used"), e)
    for e, a in doc.generated:
        add(e, _p("wasGeneratedBy"), a)
    for e2, e1 in doc.derived:
        add(e2, _p("wasDerivedFrom"), e1)
    for n, (a, ag, plan) in enumerate(doc.associated, start=1):
        add(a, _p("wasAssociatedWith"), ag)
        if plan is not None:
            q = _association_id(doc, n)
            add(a, _p("qualifiedAssociation"), q)
            add(q, _TYPE, _p("Association"))
            add(q, _p("agent"), ag)
            add(q, _p("hadPlan"), plan)
    return g


class _Curies:
    def __init__(self, doc: ProvDocument):
        self.ns = doc.namespace
        self.sk = skolem_iri(doc.base_iri, f"prov/{doc.run_id}/").value

    def __call__(self, iri: Iri) -> str:
        v = iri.value
        if v.startswith(self.sk):
            return "sk:" + v[len(self.sk):]
        if v.startswith(self.ns):
            return "run:" + v[len(self.ns):]
        raise InvalidDocument(f"{v} is outside the document namespace")

    def prefixes(self) -> dict:
        return {"run": self.ns, "sk": self.sk, "prov": PROV, "xsd": XSD, "fairkit": FAIRKIT}


def provjson_dict(doc: ProvDocument) -> dict:
    c = _Curies(doc)
    out = {"prefix": c.prefixes()}
    if doc.entities:
        entities = {}
        for ent in doc.entities.values():
            rec = {"fairkit:kind": ent.kind}
            rec.update({f"fairkit:{k}": v for k, v in ent.labels.items()})
            if ent.kind in ("plan", "plan_step"):
                rec["prov:type"] = {"$": "prov:Plan", "type": "prov:QUALIFIED_NAME"}
            entities[c(ent.id)] = rec
        out["entity"] = entities
    if doc.activities:
        out["activity"] = {
            c(a.id): {
                "prov:label": a.name,
                "prov:startTime": format_time(a.started),
                "prov:endTime": format_time(a.ended),
                "fairkit:status": a.status,
                "fairkit:stepLabel": list(a.step_labels),
            }
            for a in doc.activities.values()
        }
    if doc.agents:
        out["agent"] = {
            c(ag.id): {
                "prov:type": {"$": "prov:SoftwareAgent", "type": "prov:QUALIFIED_NAME"},
                "prov:label": ag.name,
                "fairkit:version": ag.version,
            }
            for ag in doc.agents.values()
        }
    if doc.used:
        out["used"] = {f"run:used/{n}": {"prov:activity": c(a), "prov:entity": c(e)}
                       for n, (a, e) in enumerate(doc.used, start=1)}
    if doc.generated:
        out["wasGeneratedBy"] = {f"run:generation/{n}": {"prov:entity": c(e), "prov:activity": c(a)}
                                 for n, (e, a) in enumerate(doc.generated, start=1)}
    if doc.associated:
        assoc = {}
        for n, (a, ag, plan) in enumerate(doc.associated, start=1):
            rec = {"prov:activity": c(a), "prov:agent": c(ag)}
            if plan is not None:
                rec["prov:plan"] = c(plan)
            assoc[c(_association_id(doc, n))] = rec
        out["wasAssociatedWith"] = assoc
    if doc.derived:
        out["wasDerivedFrom"] = {f"run:derivation/{n}": {"prov:generatedEntity": c(e2), "prov:usedEntity": c(e1)}
                                 for n, (e2, e1) in enumerate(doc.derived, start=1)}
    return out


def dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def serialize_prov(doc: ProvDocument, format: str = "ntriples") -> bytes:
    if format == "ntriples":
        return serialize_ntriples(prov_graph(doc)).encode("utf-8")
    if format == "provjson":
        return dump_json(provjson_dict(doc))
    raise ValueError(f"unknown provenance format {format!r}")


def load_provjson(data: Union[bytes, str]) -> ProvDocument:
    """Rebuild a document from fairkit's own PROV-JSON output."""
    obj = json.loads(data)
    try:
        prefixes = obj["prefix"]
        ns = prefixes["run"]
    except (KeyError, TypeError) as e:
        raise InvalidDocument("PROV-JSON lacks the 'run' prefix") from e
    sk = prefixes.get("sk", "")
    marker = "/prov/"
    head, _, tail = ns.rstrip("/").rpartition(marker)
    doc = ProvDocument(base_iri=head + "/", run_id=tail)

    def iri(curie: str) -> Iri:
        label, local = curie.split(":", 1)
        return Iri((ns if label == "run" else sk) + local)

    for cid, rec in obj.get("entity", {}).items():
        labels = {k.split(":", 1)[1]: v for k, v in rec.items() if k.startswith("fairkit:") and k != "fairkit:kind"}
        doc.entities[iri(cid)] = ProvEntity(iri(cid), rec["fairkit:kind"], labels)
        if rec["fairkit:kind"] == "plan" and "granularity" in labels:
            doc.granularity = labels["granularity"]
    activities = sorted(obj.get("activity", {}).items(), key=lambda kv: int(kv[0].rsplit("/", 1)[1]))
    for seq, (cid, rec) in enumerate(activities, start=1):
        doc.activities[iri(cid)] = ProvActivity(
            iri(cid), rec["prov:label"], tuple(rec.get("fairkit:stepLabel", ())),
            _parse_time(rec["prov:startTime"]), _parse_time(rec["prov:endTime"]),
            rec.get("fairkit:status", "succeeded"), seq,
        )
    for cid, rec in obj.get("agent", {}).items():
        doc.agents[iri(cid)] = ProvAgent(iri(cid), rec["prov:label"], rec.get("fairkit:version", ""))

    def numbered(section):
        items = obj.get(section, {}).items()
        return [rec for _, rec in sorted(items, key=lambda kv: int(kv[0].rsplit("/", 1)[1]))]

    doc.used = [(iri(r["prov:activity"]), iri(r["prov:entity"])) for r in numbered("used")]
    doc.generated = [(iri(r["prov:entity"]), iri(r["prov:activity"])) for r in numbered("wasGeneratedBy")]
    doc.associated = [
        (iri(r["prov:activity"]), iri(r["prov:agent"]), iri(r["prov:plan"]) if "prov:plan" in r else None)
        for r in numbered("wasAssociatedWith")
    ]
    doc.derived = [(iri(r["prov:generatedEntity"]), iri(r["prov:usedEntity"])) for r in numbered("wasDerivedFrom")]
    return doc
