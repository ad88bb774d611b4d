"""Read-only HTTP FAIR Data Point serving the four metadata layers."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import urlsplit

from .errors import FairkitError
from .ingest import sha256_hex
from .metadata import (
    PARENT_KIND,
    LayerRecord,
    essential_issues,
    link_children,
    parse_metadata,
    rebase,
    render_html,
    render_jsonld,
    serialize_layer,
)
from .rdf import serialize_ntriples

log = logging.getLogger(__name__)

NTRIPLES = "application/n-triples"
JSONLD = "application/ld+json"
HTML = "text/html"
OFFERS = (NTRIPLES, JSONLD, HTML)
CONTENT_TYPES = {NTRIPLES: "application/n-triples", JSONLD: "application/ld+json", HTML: "text/html; charset=utf-8"}


class ServiceError(FairkitError):
    module = "service"


class ValidationFailed(ServiceError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__(f"{len(self.issues)} essential issue(s): " + "; ".join(str(i) for i in self.issues))


class NoRoot(ServiceError):
    def __init__(self, reason="no fdp_root record"):
        super().__init__(reason)


class BrokenChain(ServiceError):
    pass


@dataclass(frozen=True)
class MetadataStore:
    records: dict
    root_id: str
    path: str = ""
    digest: str = ""

    @property
    def root(self) -> LayerRecord:
        return self.records[self.root_id]

    def walk(self) -> list:
        """Records in breadth-first order from the root."""
        out, queue = [], [self.root_id]
        while queue:
            rid = queue.pop(0)
            out.append(self.records[rid])
            queue.extend(self.records[rid].children)
        return out


def check_tree(records) -> str:
    """Verify the parent/children tree; returns the root id."""
    by_id = {r.id: r for r in records}
    roots = [r for r in records if r.kind == "fdp_root"]
    if not roots:
        raise NoRoot()
    if len(roots) > 1:
        raise NoRoot(f"{len(roots)} fdp_root records; exactly one is allowed")
    for r in records:
        if r.kind == "fdp_root":
            continue
        parent = by_id.get(r.parent)
        if parent is None:
            raise BrokenChain(f"{r.id}: parent {r.parent!r} does not exist")
        if parent.kind != PARENT_KIND[r.kind]:
            raise BrokenChain(f"{r.id}: parent {parent.id} is a {parent.kind}, expected {PARENT_KIND[r.kind]}")
        if r.id not in parent.children:
            raise BrokenChain(f"{parent.id} does not list its child {r.id}")
    for r in records:
        for child in r.children:
            c = by_id.get(child)
            if c is None or c.parent != r.id:
                raise BrokenChain(f"{r.id} lists {child} as a child, but it is not its parent")
    seen = set()
    queue = [roots[0].id]
    while queue:
        rid = queue.pop(0)
        if rid in seen:
            raise BrokenChain(f"{rid} is reachable twice from the root")
        seen.add(rid)
        queue.extend(by_id[rid].children)
    unreached = set(by_id) - seen
    if unreached:
        raise BrokenChain(f"records not reachable from the root: {sorted(unreached)}")
    return roots[0].id


def build_store(records, path: str = "", digest: str = "") -> MetadataStore:
    records = list(records)
    link_children(records)
    issues = [i for r in records for i in essential_issues(r)]
    if issues:
        raise ValidationFailed(issues)
    root_id = check_tree(records)
    routes = {}
    for r in records:
        if r.route in routes:
            raise BrokenChain(f"{r.id} and {routes[r.route]} share the route {r.route}")
        routes[r.route] = r.id
    return MetadataStore({r.id: r for r in records}, root_id, path, digest)


def load(path) -> MetadataStore:
    """Load metadata.json, requiring every record to be free of essential issues."""
    data = Path(path).read_bytes()
    return build_store(parse_metadata(data), str(path), sha256_hex(data))


# -- content negotiation ---------------------------------------------------------


def _parse_accept(header: str) -> list:
    ranges = []
    for part in header.split(","):
        items = [p.strip() for p in part.split(";")]
        if not items[0]:
            continue
        q = 1.0
        for param in items[1:]:
            if param.startswith("q="):
                try:
                    q = float(param[2:])
                except ValueError:
                    q = 0.0
        ranges.append((items[0].lower(), q))
    return ranges


def negotiate(accept: Optional[str]) -> Optional[str]:
    """The offered media type that best satisfies ``accept``; None means 406."""
    if not accept or not accept.strip():
        return NTRIPLES
    ranges = _parse_accept(accept)
    best, best_q = None, 0.0
    for offer in OFFERS:
        main = offer.split("/")[0]
        q, specificity = None, -1
        for rng, rq in ranges:
            if rng == offer:
                spec = 2
            elif rng == f"{main}/*":
                spec = 1
            elif rng == "*/*":
                spec = 0
            else:
                continue
            if spec > specificity:
                q, specificity = rq, spec
        if q is not None and q > best_q:
            best, best_q = offer, q
    return best


# -- service -----------------------------------------------------------------------


class _Snapshot:
    def __init__(self, store: MetadataStore, base_url: str, data_path: Optional[str]):
        self.base_url = base_url
        records = rebase(list(store.records.values()), base_url)
        self.store = MetadataStore({r.id: r for r in records}, _root_id(records),
                                   store.path, store.digest)
        self.data_path = data_path
        self.routes = {}
        for r in records:
            graph = serialize_layer(r)
            self.routes[r.route] = {
                NTRIPLES: serialize_ntriples(graph).encode("utf-8"),
                JSONLD: (json.dumps(render_jsonld(r), indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode(
                    "utf-8"
                ),
                HTML: render_html(r).encode("utf-8"),
            }
        self.data_routes = {r.route + "/data" for r in records if r.kind == "distribution"}


def _root_id(records) -> str:
    return next(r.id for r in records if r.kind == "fdp_root")


class FdpService:
    """Request handling independent of sockets; :func:`serve` puts it on the network."""

    def __init__(self, store: MetadataStore, base_url: str, data_path=None):
        self._snapshot = _Snapshot(store, base_url, str(data_path) if data_path else None)

    @property
    def store(self) -> MetadataStore:
        return self._snapshot.store

    @property
    def base_url(self) -> str:
        return self._snapshot.base_url

    def reload(self, path=None, data_path=None) -> None:
        """Swap in a freshly loaded snapshot; requests in flight keep the old one."""
        snap = self._snapshot
        store = load(path or snap.store.path)
        self._snapshot = _Snapshot(store, snap.base_url, str(data_path) if data_path else snap.data_path)

    def handle(self, method: str, target: str, accept: Optional[str] = None):
        """Returns ``(status, headers, body)``."""
        snap = self._snapshot
        path = urlsplit(target).path or "/"
        if len(path) > 1:
            path = path.rstrip("/")
        if method != "GET":
            return 405, {"Allow": "GET", "Content-Type": "text/plain; charset=utf-8"}, b"405 method not allowed\n"
        if path in snap.data_routes:
            if not snap.data_path:
                return _not_found()
            body = Path(snap.data_path).read_bytes()
            return 200, {"Content-Type": NTRIPLES}, body
        bodies = snap.routes.get(path)
        if bodies is None:
            return _not_found()
        media = negotiate(accept)
        if media is None:
            return (406, {"Content-Type": "text/plain; charset=utf-8"},
                    ("406 not acceptable; available: " + ", ".join(OFFERS) + "\n").encode("utf-8"))
        return 200, {"Content-Type": CONTENT_TYPES[media], "Vary": "Accept"}, bodies[media]


def _not_found():
    return 404, {"Content-Type": "text/plain; charset=utf-8"}, b"404 not found\n"


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "fairkit-fdp"

    def _respond(self):
        status, headers, body = self.server.fdp.handle(self.command, self.path, self.headers.get("Accept"))
        self.send_response(status)
        for k, v in headers.items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = do_HEAD = do_OPTIONS = _respond

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)


class FdpServer:
    """A running FAIR Data Point bound to a socket."""

    def __init__(self, service: FdpService, httpd: ThreadingHTTPServer):
        self.service = service
        self.httpd = httpd
        self._thread = None

    @property
    def url(self) -> str:
        return self.service.base_url

    def start(self) -> "FdpServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(store: MetadataStore, bind=("127.0.0.1", 8080), base_url: Optional[str] = None, data_path=None,
          background: bool = True) -> FdpServer:
    """Bind and start serving ``store``.

    Port 0 picks a free port. Without ``base_url`` the bound address is used;
    record IRIs under the root's id are rebased onto the base URL so that every
    link in a response resolves against this service.
    """
    httpd = ThreadingHTTPServer(tuple(bind), _Handler)
    host, port = httpd.server_address[:2]
    if base_url is None:
        base_url = f"http://{host}:{port}/"
    if not base_url.endswith("/"):
        base_url += "/"
    httpd.fdp = FdpService(store, base_url, data_path)
    httpd.daemon_threads = True
    server = FdpServer(httpd.fdp, httpd)
    log.info("FAIR Data Point at %s (%d records)", base_url, len(store.records))
    return server.start() if background else server
