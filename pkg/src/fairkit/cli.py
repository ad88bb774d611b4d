"""Command-line entry point: one subcommand per FAIRification phase."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import FairkitError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_ASSESS = 3

log = logging.getLogger("fairkit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# required options per command, checked after the config file is merged
REQUIRED = {
    "ingest": ("input", "schema"),
    "run": ("input", "schema", "mapping", "out"),
    "prov-export": ("prov", "format"),
    "metadata-build": ("metadata",),
    "serve": ("metadata",),
    "query": ("query_file", "data"),
    "assess": (),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairkit", description="Tabular data to FAIR RDF, provenance and metadata.")
    p.add_argument("--version", action="version", version=f"fairkit {__version__}")
    p.add_argument("--config", type=Path, help="JSON file of option defaults; flags override it")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse a CSV and check it against a column schema")
    s.add_argument("--in", dest="input", type=Path)
    s.add_argument("--schema", type=Path)
    s.add_argument("--delimiter", default=None)
    s.add_argument("--json", action="store_true", help="print the summary as JSON")

    s = sub.add_parser("run", help="triplify a CSV with provenance")
    s.add_argument("--in", dest="input", type=Path)
    s.add_argument("--schema", type=Path)
    s.add_argument("--map", dest="mapping", type=Path)
    s.add_argument("--out", type=Path)
    s.add_argument("--run-id")
    s.add_argument("--granularity", choices=("run", "step", "record"))
    s.add_argument("--batch-size", type=int)
    s.add_argument("--delimiter", default=None)
    s.add_argument("--fixed-clock", metavar="ISO8601")

    s = sub.add_parser("prov", help="provenance utilities")
    psub = s.add_subparsers(dest="prov_command", parser_class=_Parser)
    e = psub.add_parser("export", help="re-serialize a provenance document")
    e.add_argument("--prov", type=Path, help="prov.nt or prov.json")
    e.add_argument("--format", choices=("ntriples", "provjson"))
    e.add_argument("--out", type=Path, help="output file (default: stdout)")

    s = sub.add_parser("metadata", help="FAIR Data Point metadata")
    msub = s.add_subparsers(dest="metadata_command", parser_class=_Parser)
    b = msub.add_parser("build", help="validate layers and serialize them")
    b.add_argument("--metadata", type=Path)
    b.add_argument("--data", type=Path, help="data file to checksum on each distribution")
    b.add_argument("--base-url", help="move record IRIs under this base")
    b.add_argument("--out", type=Path, help="write the completed metadata.json here")
    b.add_argument("--rdf", type=Path, help="write all layers as N-Quads, one graph per record")

    s = sub.add_parser("serve", help="serve metadata as a FAIR Data Point")
    s.add_argument("--metadata", type=Path)
    s.add_argument("--data", type=Path)
    s.add_argument("--bind", help="host:port (default 127.0.0.1:8080)")
    s.add_argument("--base-url")

    s = sub.add_parser("query", help="evaluate a query file against an N-Triples file")
    s.add_argument("query_file", nargs="?", type=Path)
    s.add_argument("--data", type=Path)

    s = sub.add_parser("assess", help="FAIR maturity indicators and competency questions")
    s.add_argument("--bundle", type=Path, help="directory holding data.nt, prov.nt, metadata.json")
    s.add_argument("--data", type=Path)
    s.add_argument("--prov", type=Path)
    s.add_argument("--metadata", type=Path)
    s.add_argument("--map", dest="mapping", type=Path)
    s.add_argument("--questions", type=Path)
    s.add_argument("--service-url")
    s.add_argument("--timeout", type=float)
    s.add_argument("--report", type=Path, help="also write the JSON report here")
    s.add_argument("--json", action="store_true", help="print JSON instead of the table")
    return p


def _command_key(args) -> str:
    if args.command == "prov":
        return "prov-export" if args.prov_command == "export" else ""
    if args.command == "metadata":
        return "metadata-build" if args.metadata_command == "build" else ""
    return args.command or ""


def _merge_config(args) -> None:
    """Fill unset options from the config file, then from FAIRKIT_* variables."""
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read config file {args.config}: {e}")
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest == "in":
                dest = "input"
            elif dest == "map":
                dest = "mapping"
            if hasattr(args, dest) and getattr(args, dest) in (None, False):
                default = getattr(args, dest)
                if isinstance(value, str) and dest in _PATH_OPTIONS:
                    value = Path(value)
                setattr(args, dest, value if value is not None else default)
    for var, dest in (("FAIRKIT_BIND", "bind"), ("FAIRKIT_BASE_URL", "base_url"),
                      ("FAIRKIT_METADATA", "metadata"), ("FAIRKIT_DATA", "data")):
        if os.environ.get(var) and hasattr(args, dest) and getattr(args, dest) is None:
            value = os.environ[var]
            setattr(args, dest, Path(value) if dest in _PATH_OPTIONS else value)


_FLAG_NAMES = {"input": "--in", "mapping": "--map", "query_file": "QUERY_FILE"}
_PATH_OPTIONS = {"input", "schema", "mapping", "out", "prov", "metadata", "data", "rdf", "query_file",
                 "bundle", "questions", "report"}


def _dialect(args):
    from .ingest import Dialect

    return Dialect(delimiter=args.delimiter) if args.delimiter else Dialect()


# -- commands ----------------------------------------------------------------------


def cmd_ingest(args) -> int:
    from .ingest import apply_schema, load_schema, parse_csv

    ds = parse_csv(Path(args.input).read_bytes(), _dialect(args), source=Path(args.input).name)
    typed = apply_schema(ds, load_schema(args.schema))
    nulls = {c: sum(1 for row in typed.rows if row[i] is None) for i, c in enumerate(typed.columns)}
    summary = {
        "source": typed.source,
        "sha256": typed.digest,
        "rows": len(typed.rows),
        "columns": list(typed.columns),
        "nulls": nulls,
        "row_errors": [{"row": e.row, "column": e.column, "reason": e.reason} for e in typed.row_errors],
    }
    if args.json:
        print(json.dumps(summary, indent=2, ensure_ascii=False))
        return EXIT_OK
    print(f"{summary['source']}: {summary['rows']} rows, {len(typed.columns)} columns, sha256 {typed.digest}")
    for c in typed.columns:
        print(f"  {c:<24} {typed.schema[c].type:<9} nulls={nulls[c]}")
    for e in summary["row_errors"]:
        print(f"  row {e['row']} {e['column']}: {e['reason']}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .pipeline import PipelineConfig, run_pipeline
    from .provenance import fixed_clock

    cfg = PipelineConfig(
        input=args.input, schema=args.schema, mapping=args.mapping, out_dir=args.out,
        run_id=args.run_id, granularity=args.granularity or "step",
        batch_size=args.batch_size or 100,
        clock=fixed_clock(args.fixed_clock) if args.fixed_clock else None,
        dialect=_dialect(args),
    )
    report = run_pipeline(cfg)
    print(f"run {report.run_id}: {report.rows_in} rows -> {report.triples_out} triples "
          f"({report.skipped_nulls} null, {report.skipped_unmapped} unmapped skipped, "
          f"{len(report.row_errors)} row errors) in {args.out}")
    return EXIT_OK


def cmd_prov_export(args) -> int:
    from .provenance import load_provjson, serialize_prov
    from .assess import _load_prov_graph
    from .rdf import serialize_ntriples

    data = Path(args.prov).read_bytes()
    if data.lstrip().startswith(b"{"):
        body = serialize_prov(load_provjson(data), args.format)
    elif args.format == "ntriples":
        body = serialize_ntriples(_load_prov_graph(Path(args.prov))).encode("utf-8")
    else:
        raise UsageError("PROV-JSON export needs a prov.json input")
    if args.out:
        Path(args.out).write_bytes(body)
    else:
        sys.stdout.buffer.write(body)
    return EXIT_OK


def cmd_metadata_build(args) -> int:
    from .metadata import (attach_data_file, dump_metadata, link_children, read_metadata, rebase,
                           serialize_layer, validate_layer)
    from .rdf import Iri, Quad, serialize_nquads
    from .service import build_store

    records = read_metadata(args.metadata)
    if args.base_url:
        records = rebase(records, args.base_url)
    link_children(records)
    if args.data:
        for r in records:
            if r.kind == "distribution":
                attach_data_file(r, args.data)
    for r in records:
        for issue in validate_layer(r):
            if issue.severity != "essential":
                print(f"warning {issue}", file=sys.stderr)
    build_store(records)
    if args.out:
        Path(args.out).write_bytes(dump_metadata(records))
    if args.rdf:
        quads = [Quad(t.subject, t.predicate, t.object, Iri(r.id)) for r in records for t in serialize_layer(r)]
        Path(args.rdf).write_text(serialize_nquads(quads), encoding="utf-8")
    print(f"{len(records)} layer records valid" + (f"; written to {args.out}" if args.out else ""))
    return EXIT_OK


def _parse_bind(value: str):
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--bind must be host:port, got {value!r}")
    return host or "127.0.0.1", int(port)


def cmd_serve(args) -> int:
    from .service import load, serve

    bind = _parse_bind(args.bind or "127.0.0.1:8080")
    server = serve(load(args.metadata), bind, base_url=args.base_url, data_path=args.data, background=False)
    print(f"serving {args.metadata} at {server.url} (Ctrl-C to stop)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
    return EXIT_OK


def _load_store(path):
    from .rdf import parse_ntriples
    from .store import TripleStore

    store = TripleStore()
    for t in parse_ntriples(Path(path).read_text(encoding="utf-8")):
        store.insert(t)
    return store


def cmd_query(args) -> int:
    from .store import evaluate, parse_query

    query = parse_query(Path(args.query_file).read_text(encoding="utf-8"))
    sys.stdout.write(evaluate(query, _load_store(args.data)).to_tsv())
    return EXIT_OK


def cmd_assess(args) -> int:
    from .assess import AssessmentBundle, evaluate_indicators, load_questions, render_report, run_competency_questions

    def pick(explicit, name):
        if explicit is not None:
            return explicit
        if args.bundle and (Path(args.bundle) / name).exists():
            return Path(args.bundle) / name
        return None

    data = pick(args.data, "data.nt")
    bundle = AssessmentBundle(
        data=data,
        provenance=pick(args.prov, "prov.nt"),
        metadata=pick(args.metadata, "metadata.json"),
        mapping=pick(args.mapping, "mapping.json"),
        service_url=args.service_url,
        timeout=args.timeout or 5.0,
    )
    report = evaluate_indicators(bundle)
    cqs = None
    questions = pick(args.questions, "questions.json")
    if questions is not None:
        cqs = run_competency_questions(load_questions(questions), _load_store(data) if data else _empty_store())
    text, doc, code = render_report(report, cqs)
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(json.dumps(doc, indent=2) + "\n" if args.json else text)
    return code


def _empty_store():
    from .store import TripleStore

    return TripleStore()


COMMANDS = {
    "ingest": cmd_ingest,
    "run": cmd_run,
    "prov-export": cmd_prov_export,
    "metadata-build": cmd_metadata_build,
    "serve": cmd_serve,
    "query": cmd_query,
    "assess": cmd_assess,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        key = _command_key(args)
        if key not in COMMANDS:
            raise UsageError(parser.format_usage() + "fairkit: a command is required")
        _merge_config(args)
        missing = [name for name in REQUIRED[key] if getattr(args, name, None) in (None, "")]
        if missing:
            flags = ", ".join(_FLAG_NAMES.get(m, "--" + m.replace("_", "-")) for m in missing)
            raise UsageError(f"fairkit {key.replace('-', ' ')}: missing required option(s) {flags}\n"
                             + parser.format_usage())
    except UsageError as e:
        print(str(e).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[key](args)
    except UsageError as e:
        print(str(e).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except FairkitError as e:
        print(f"ERROR {e.code}: {_one_line(e)}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"ERROR io.FileNotFoundError: {_one_line(e)}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, UnicodeDecodeError) as e:
        print(f"ERROR io.{type(e).__name__}: {_one_line(e)}", file=sys.stderr)
        return EXIT_INPUT


def _one_line(e: BaseException) -> str:
    return " ".join(str(e).split())


if __name__ == "__main__":
    sys.exit(main())
