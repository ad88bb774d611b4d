"""Complete the FDP metadata for a pipeline run and serve it over HTTP.

python demos/02_publish_and_serve.py RUN_DIR [--once]   (RUN_DIR is the output folder of 01_triplify.py)

The server answers on an ephemeral port until Ctrl-C; --once stops after the first request. Try:
  curl -H 'Accept: application/ld+json' <url>catalog/crf
"""

import sys
import threading
import urllib.request
from pathlib import Path

import fairkit
from fairkit.metadata import attach_data_file, dump_metadata, link_children, read_metadata
from fairkit.service import build_store, serve

CRF = Path(fairkit.__file__).parent / "data" / "crf"
run_dir = Path(sys.argv[1])

records = read_metadata(CRF / "metadata.json")
link_children(records)
for r in records:
    if r.kind == "distribution":
        attach_data_file(r, run_dir / "data.nt")
(run_dir / "metadata.json").write_bytes(dump_metadata(records))
print("wrote", run_dir / "metadata.json")

srv = serve(build_store(records), ("127.0.0.1", 0), data_path=run_dir / "data.nt")
print("serving at", srv.url)
with urllib.request.urlopen(srv.url) as resp:
    print(resp.headers["Content-Type"])
    print(resp.read().decode())
try:
    if "--once" not in sys.argv:
        threading.Event().wait()
except KeyboardInterrupt:
    pass
finally:
    srv.close()
