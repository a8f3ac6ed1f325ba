"""Line-delimited request/response records exchanged with the harness.

A request line is a dataset record (query_id, input_text, target_text, ...)
or a prompt record (query_id, system_text, user_text). A response line is
``{"query_id": ..., "candidates": [{"text": ..., "log_prob": ...}]}`` with
candidates sorted by descending log probability. Failed requests still get
a response line (empty candidates plus an ``error`` field) so the harness
sees every query_id exactly once.
"""

import gzip
import io
import json
from dataclasses import dataclass, field


class ProtocolError(Exception):
    pass


def open_text(path, mode: str):
    if "w" in mode:
        if str(path).endswith(".gz"):
            raw = gzip.GzipFile(fileobj=open(path, "wb"), mode="wb", filename="", mtime=0)
            return io.TextIOWrapper(raw, encoding="utf-8", newline="\n")
        return open(path, "w", encoding="utf-8", newline="\n")
    if str(path).endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


@dataclass
class Request:
    query_id: str
    input_text: str = ""
    target_text: str = ""
    system_text: str = ""
    user_text: str = ""
    line_no: int = 0

    @classmethod
    def from_json(cls, line: str, line_no: int = 0) -> "Request":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"line {line_no}: invalid JSON ({e})") from None
        if not isinstance(payload, dict) or "query_id" not in payload:
            raise ProtocolError(f"line {line_no}: record must be an object with a query_id")
        return cls(
            query_id=str(payload["query_id"]),
            input_text=str(payload.get("input_text", "")),
            target_text=str(payload.get("target_text", "")),
            system_text=str(payload.get("system_text", "")),
            user_text=str(payload.get("user_text", "")),
            line_no=line_no,
        )


@dataclass
class Response:
    query_id: str
    candidates: list = field(default_factory=list)  # (text, log_prob) pairs
    error: str = ""

    def to_json(self) -> str:
        ordered = sorted(self.candidates, key=lambda c: -c[1])
        payload = {
            "query_id": self.query_id,
            "candidates": [{"text": t, "log_prob": lp} for t, lp in ordered],
        }
        if self.error:
            payload["error"] = self.error
        return json.dumps(payload, ensure_ascii=False)


def read_requests(path):
    """Yield (line_no, Request or ProtocolError) for every nonempty line."""
    with open_text(path, "r") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield line_no, Request.from_json(line, line_no)
            except ProtocolError as e:
                yield line_no, e
