"""Query enumeration and line-delimited dataset emission.

Every triple yields two queries, forward then inverse, so a split with n
triples produces 2n records. Records are self-describing JSON lines; a
``.gz`` suffix switches both reading and writing to gzip (with a zeroed
mtime so identical inputs produce byte-identical archives).
"""

import gzip
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import KgError, ParseError, SchemaError
from .kg_store import KnowledgeGraph
from .neighborhood import DEFAULT_NEIGHBOR_CAP, Neighborhood, Query, form_neighborhood
from .relation_similarity import SimilarityMatrix
from .text_catalog import TextCatalog
from .verbalizer import SEPARATOR, TokenBudget, VerbalizedQuery, assemble_input

log = logging.getLogger(__name__)

_RECORD_FIELDS = ("query_id", "input_text", "target_text", "head_id", "relation_id", "target_id", "inverse")


@dataclass(frozen=True)
class DatasetRecord:
    query_id: str
    input_text: str
    target_text: str
    head_id: str
    relation_id: str
    target_id: str
    inverse: bool

    def to_json(self) -> str:
        return json.dumps(
            {name: getattr(self, name) for name in _RECORD_FIELDS}, ensure_ascii=False
        )

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid record JSON: {e}") from None
        if not isinstance(payload, dict):
            raise SchemaError("record line is not a JSON object")
        missing = [name for name in _RECORD_FIELDS if name not in payload]
        if missing:
            raise SchemaError(f"record is missing fields: {', '.join(missing)}")
        if not isinstance(payload["inverse"], bool):
            raise SchemaError("record field 'inverse' must be a boolean")
        return cls(**{name: payload[name] for name in _RECORD_FIELDS})


def open_text(path, mode: str):
    """Open a UTF-8 text stream, transparently gzipped for ``.gz`` paths."""
    if "w" in mode:
        if str(path).endswith(".gz"):
            raw = gzip.GzipFile(fileobj=open(path, "wb"), mode="wb", filename="", mtime=0)
            return io.TextIOWrapper(raw, encoding="utf-8", newline="\n")
        return open(path, "w", encoding="utf-8", newline="\n")
    if str(path).endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def emit_queries(graph: KnowledgeGraph) -> Iterator[Query]:
    """Forward then inverse query for every triple, in triple order."""
    for triple in graph.triples:
        yield Query(head=triple.head, relation=triple.relation, inverse=False, target=triple.tail)
        yield Query(head=triple.tail, relation=triple.relation, inverse=True, target=triple.head)


def query_id(triple_index: int, inverse: bool) -> str:
    return f"{triple_index}:{'inv' if inverse else 'fwd'}"


def assemble_for_query(
    query: Query,
    graph: KnowledgeGraph,
    catalog: TextCatalog,
    matrix: SimilarityMatrix,
    budget: TokenBudget,
    cap: int = DEFAULT_NEIGHBOR_CAP,
) -> tuple[VerbalizedQuery, Neighborhood]:
    nbh = form_neighborhood(query, graph, matrix, cap=cap)
    return assemble_input(query, nbh, catalog, budget), nbh


def write_dataset(
    queries: Iterable[Query],
    graph: KnowledgeGraph,
    catalog: TextCatalog,
    matrix: SimilarityMatrix,
    budget: TokenBudget,
    out_path,
    cap: int = DEFAULT_NEIGHBOR_CAP,
    workers: int = 0,
    neighborhood_dump_path=None,
) -> int:
    """Verbalize every query against ``graph`` and stream records to disk.

    ``queries`` is expected in emit_queries order (forward/inverse pairs per
    triple); query ids are derived positionally from that order. Per-query
    verbalization failures are logged with their query id and skipped, so a
    single label gap cannot kill a long run. Returns the number of records
    written.
    """

    def build(item):
        index, query = item
        qid = query_id(index // 2, query.inverse)
        try:
            vq, nbh = assemble_for_query(query, graph, catalog, matrix, budget, cap=cap)
            record = DatasetRecord(
                query_id=qid,
                input_text=vq.input_text,
                target_text=vq.target_text,
                head_id=query.head,
                relation_id=query.relation,
                target_id=query.target if query.target is not None else "",
                inverse=query.inverse,
            )
            return qid, record, nbh, None
        except KgError as e:
            return qid, None, None, e

    items = enumerate(queries)
    written = 0
    skipped = 0
    dump = open_text(neighborhood_dump_path, "w") if neighborhood_dump_path else None
    try:
        with open_text(out_path, "w") as out:
            if workers > 0:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    written, skipped = _drain(pool.map(build, items), out, dump)
            else:
                written, skipped = _drain(map(build, items), out, dump)
    finally:
        if dump is not None:
            dump.close()
    if skipped:
        log.warning("skipped %d of %d queries", skipped, written + skipped)
    return written


def _drain(results, out, dump) -> tuple[int, int]:
    from .neighborhood import neighborhood_record

    written = skipped = 0
    for qid, record, nbh, err in results:
        if err is not None:
            log.warning("skipping %s: %s", qid, err)
            skipped += 1
            continue
        out.write(record.to_json() + "\n")
        if dump is not None:
            dump.write(neighborhood_record(nbh) + "\n")
        written += 1
    return written, skipped


def verbalized_from_record(record: DatasetRecord) -> VerbalizedQuery:
    """Recover segment spans from a stored record by splitting on the separator.

    Exact because verbalized segments never contain the separator string.
    """
    segments = record.input_text.split(SEPARATOR)
    spans: list[tuple[int, int]] = []
    offset = len(segments[0])
    for segment in segments[1:]:
        start = offset + len(SEPARATOR)
        spans.append((start, start + len(segment)))
        offset = start + len(segment)
    return VerbalizedQuery(
        input_text=record.input_text,
        target_text=record.target_text,
        task_span=(0, len(segments[0])),
        neighbor_spans=spans,
        included_count=len(spans),
    )


def read_records(path) -> Iterator[DatasetRecord]:
    with open_text(path, "r") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield DatasetRecord.from_json(line)
            except SchemaError as e:
                raise ParseError(path, line_no, str(e)) from None
