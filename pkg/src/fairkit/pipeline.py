"""End-to-end triplification run: ingest, transform, serialize, write, with provenance."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import __version__
from .ingest import ColumnSchema, Dialect, apply_schema, parse_csv, sha256_hex
from .mapping import MappingCounts, parse_mapping_spec, transform_row
from .provenance import ProvRecorder, Stage, serialize_prov
from .rdf import Graph, serialize_ntriples

log = logging.getLogger(__name__)

DATA_FILE = "data.nt"
PROV_NT_FILE = "prov.nt"
PROV_JSON_FILE = "prov.json"
REPORT_FILE = "run-report.json"
OUTPUT_FILES = (DATA_FILE, PROV_NT_FILE, PROV_JSON_FILE, REPORT_FILE)

DEFAULT_STAGES = (
    Stage("triplify", "5a", "fairkit.triplifier"),
    Stage("describe", "5b", "fairkit.reporter"),
    Stage("publish", "6", "fairkit.writer"),
)
FALLBACK_BASE = "urn:fairkit:"


@dataclass
class PipelineConfig:
    input: Path
    schema: Path
    mapping: Path
    out_dir: Path
    run_id: Optional[str] = None
    granularity: str = "step"
    batch_size: int = 100
    clock: Optional[Callable] = None
    dialect: Dialect = field(default_factory=Dialect)
    stages: tuple = DEFAULT_STAGES


@dataclass
class RunReport:
    rows_in: int
    triples_out: int
    skipped_nulls: int
    skipped_unmapped: int
    row_errors: list
    per_rule: dict
    run_id: str
    output_digests: dict

    def to_json(self) -> bytes:
        return (json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def derive_run_id(*digests: str) -> str:
    return hashlib.sha256("".join(digests).encode("ascii")).hexdigest()[:16]


class _StageRecord:
    def __init__(self, stage: Stage, started):
        self.stage = stage
        self.started = started
        self.ended = started
        self.inputs = []
        self.outputs = []
        self.status = "succeeded"


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Run the whole triplification.

    Writes data.nt, run-report.json, prov.nt and prov.json into ``out_dir``.
    On failure the data outputs are removed, provenance recording the failed
    activity is still written, and the error is re-raised.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = {name: Path(p).read_bytes() for name, p in
           (("input", config.input), ("schema", config.schema), ("mapping", config.mapping))}
    digests = {name: sha256_hex(data) for name, data in raw.items()}
    run_id = config.run_id or derive_run_id(digests["input"], digests["schema"], digests["mapping"])

    spec = schema = None
    setup_error = None
    try:
        schema = ColumnSchema.from_dict(json.loads(raw["schema"].decode("utf-8")))
        spec = parse_mapping_spec(raw["mapping"].decode("utf-8"), schema)
    except Exception as e:  # recorded below, then re-raised
        setup_error = e
    base = spec.base_iri.value if spec is not None else FALLBACK_BASE

    rec = ProvRecorder(base, run_id, config.stages, config.granularity, config.clock)
    run_agent = rec.agent("fairkit", __version__)
    sources = {
        name: rec.entity("dataset", role=name, path=Path(getattr(config, name)).name, sha256=digests[name])
        for name in raw
    }
    run_started = rec.now()
    done = []
    state = {}

    def stage(index: int) -> _StageRecord:
        sr = _StageRecord(config.stages[index], rec.now())
        done.append(sr)
        return sr

    error = setup_error
    if error is None:
        try:
            _triplify(stage(0), rec, config, raw, schema, spec, sources, state)
            _describe(stage(1), rec, state, run_id)
            _publish(stage(2), rec, out_dir, state)
        except Exception as e:
            error = e
            done[-1].status = "failed"
            done[-1].outputs = []
            done[-1].ended = rec.now()
    run_ended = rec.now()

    failed = error is not None
    external_inputs = list(sources.values())
    if rec.granularity == "run":
        produced = [e for sr in done for e in sr.outputs]
        rec.record_activity(
            [sr.stage.step_label for sr in done], run_agent, external_inputs, produced,
            "failed" if failed else "succeeded", started=run_started, ended=run_ended, level="run", name="run",
        )
    else:
        rec.record_activity(None, run_agent, external_inputs, (), "failed" if failed else "succeeded",
                            started=run_started, ended=run_ended, level="run", name="run")
        for sr in done:
            agent = rec.agent(sr.stage.agent, __version__)
            rec.record_activity(sr.stage.step_label, agent, sr.inputs, sr.outputs, sr.status,
                                started=sr.started, ended=sr.ended, name=sr.stage.name)
        if rec.admits("record"):
            agent = rec.agent(config.stages[0].agent, __version__)
            for batch in state.get("batches", ()):
                rec.record_activity(config.stages[0].step_label, agent, [sources["input"]], [batch["entity"]],
                                    started=batch["started"], ended=batch["ended"], level="record",
                                    name=f"{config.stages[0].name} rows {batch['first']}-{batch['last']}")

    doc = rec.document()
    if failed:
        for name in (DATA_FILE, REPORT_FILE):
            (out_dir / name).unlink(missing_ok=True)
    (out_dir / PROV_NT_FILE).write_bytes(serialize_prov(doc, "ntriples"))
    (out_dir / PROV_JSON_FILE).write_bytes(serialize_prov(doc, "provjson"))
    if failed:
        log.error("run %s failed: %s", run_id, error)
        raise error
    log.info("run %s: %d rows -> %d triples", run_id, state["report"].rows_in, state["report"].triples_out)
    return state["report"]


def _triplify(sr, rec, config, raw, schema, spec, sources, state):
    sr.inputs = list(sources.values())
    ds = parse_csv(raw["input"], config.dialect, source=Path(config.input).name)
    typed = apply_schema(ds, schema)
    counts = MappingCounts()
    graph = Graph()
    batches = []
    size = max(1, config.batch_size)
    for start in range(0, len(typed.rows), size):
        batch_started = rec.now()
        batch_graph = Graph()
        stop = min(start + size, len(typed.rows))
        for row_no in range(start + 1, stop + 1):
            row = dict(zip(typed.columns, typed.rows[row_no - 1]))
            batch_graph.update(transform_row(spec, row, row_no, counts))
        graph.update(batch_graph)
        batches.append({"first": start + 1, "last": stop, "triples": len(batch_graph),
                        "started": batch_started, "ended": rec.now()})
    # entities are minted only once the whole stage has succeeded
    if rec.admits("record"):
        for batch in batches:
            batch["entity"] = rec.entity("graph", role="batch", rows=f"{batch['first']}-{batch['last']}",
                                         triples=batch["triples"])
    else:
        batches = []
    text = serialize_ntriples(graph)
    graph_entity = rec.entity("graph", role="data", triples=len(graph), sha256=sha256_hex(text.encode("utf-8")))
    for batch in batches:
        rec.derive(graph_entity, batch["entity"])
    sr.outputs = [graph_entity]
    sr.ended = rec.now()
    state.update(typed=typed, counts=counts, graph=graph, text=text, graph_entity=graph_entity, batches=batches)


def _describe(sr, rec, state, run_id):
    typed, counts = state["typed"], state["counts"]
    sr.inputs = [state["graph_entity"]]
    data_bytes = state["text"].encode("utf-8")
    per_rule = {rid: dict(sorted(c.items())) for rid, c in sorted(counts.per_rule.items())}
    report = RunReport(
        rows_in=len(typed.rows),
        triples_out=counts.triples,
        skipped_nulls=counts.skipped_nulls,
        skipped_unmapped=counts.skipped_unmapped,
        row_errors=[{"row": e.row, "column": e.column, "reason": e.reason} for e in typed.row_errors],
        per_rule=per_rule,
        run_id=run_id,
        output_digests={DATA_FILE: sha256_hex(data_bytes)},
    )
    report_bytes = report.to_json()
    ent = rec.entity("file", role="run-report", path=REPORT_FILE, sha256=sha256_hex(report_bytes))
    sr.outputs = [ent]
    sr.ended = rec.now()
    state.update(report=report, report_bytes=report_bytes, data_bytes=data_bytes)


def _publish(sr, rec, out_dir, state):
    sr.inputs = [state["graph_entity"]]
    data_bytes = state["data_bytes"]
    (out_dir / DATA_FILE).write_bytes(data_bytes)
    (out_dir / REPORT_FILE).write_bytes(state["report_bytes"])
    ent = rec.entity("file", role="data", path=DATA_FILE, sha256=sha256_hex(data_bytes), bytes=len(data_bytes))
    rec.derive(ent, state["graph_entity"])
    sr.outputs = [ent]
    sr.ended = rec.now()
