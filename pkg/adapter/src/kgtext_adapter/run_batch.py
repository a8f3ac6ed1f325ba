"""File-to-file batch prediction: one response line per request line."""

import logging

from .backends import BackendError
from .protocol import ProtocolError, Response, open_text, read_requests

log = logging.getLogger(__name__)


def run_batch(records_path, out_path, backend, k: int = 50) -> int:
    """Run the backend over every record, in request order.

    Malformed lines are rejected (logged with their line number) and produce
    no response; backend failures produce a response with the echoed
    query_id, empty candidates, and an error note, so one flaky request
    cannot kill the run. Returns the number of response lines written.
    """
    written = 0
    rejected = 0
    with open_text(out_path, "w") as out:
        for line_no, item in read_requests(records_path):
            if isinstance(item, ProtocolError):
                log.warning("rejected record: %s", item)
                rejected += 1
                continue
            try:
                candidates = backend.predict(item, k)[:k]
                response = Response(query_id=item.query_id, candidates=candidates)
            except BackendError as e:
                log.warning("%s: backend failure: %s", item.query_id, e)
                response = Response(query_id=item.query_id, candidates=[], error=str(e))
            out.write(response.to_json() + "\n")
            written += 1
    if rejected:
        log.warning("rejected %d malformed record lines", rejected)
    return written
