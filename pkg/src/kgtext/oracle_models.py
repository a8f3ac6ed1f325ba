"""Deterministic stand-in models for end-to-end testing without a neural model.

The memorizer answers from the training graph; the hint reader answers by
copying entity mentions out of the neighbor segments of the input text; the
constant model always answers the same string. All three are pure functions
of their inputs, so prediction files are bitwise reproducible.
"""

import logging
from dataclasses import dataclass
from typing import Iterable

from .errors import KgError
from .evaluation import Candidate, DEFAULT_SAMPLE_SIZE, PredictionSet, write_predictions
from .kg_store import KnowledgeGraph, known_heads, known_tails
from .text_catalog import TextCatalog
from .verbalizer import INVERSE_MARKER, SEPARATOR

log = logging.getLogger(__name__)

ORACLE_KINDS = ("memorizer", "hint_reader", "constant")


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    constant_text: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"kind must be one of {ORACLE_KINDS}, got {self.kind!r}")


def _ranked_candidates(texts: Iterable[str], k: int) -> list[Candidate]:
    return [Candidate(text=t, log_prob=-float(i)) for i, t in enumerate(texts, 1)][:k]


def memorizer_predict(
    record, graph: KnowledgeGraph, catalog: TextCatalog, k: int = DEFAULT_SAMPLE_SIZE
) -> PredictionSet:
    """Answers seen during training, in catalog order, scored -1, -2, ..."""
    if record.inverse:
        answers = known_heads(record.head_id, record.relation_id, [graph])
    else:
        answers = known_tails(record.head_id, record.relation_id, [graph])
    ordered = sorted(answers, key=catalog.entity_rank)
    texts = [catalog.entity_text[e] for e in ordered]
    return PredictionSet(query_id=record.query_id, candidates=_ranked_candidates(texts, k), k=k)


def hint_reader_candidates(
    input_text: str, catalog: TextCatalog, k: int = DEFAULT_SAMPLE_SIZE
) -> list[Candidate]:
    """Entity-text portion of each neighbor segment, in segment order.

    The relation prefix is stripped by longest match against the catalog's
    relation texts (neighbor segments are relation text followed by entity
    text, with an optional inverse marker in front).
    """
    segments = input_text.split(SEPARATOR)[1:]
    relation_texts = sorted(catalog.relation_text.values(), key=len, reverse=True)
    texts = []
    for segment in segments:
        body = segment
        if body.startswith(INVERSE_MARKER + " "):
            body = body[len(INVERSE_MARKER) + 1 :]
        for rt in relation_texts:
            if body.startswith(rt + " "):
                texts.append(body[len(rt) + 1 :])
                break
        else:
            # No known relation prefix; assume a single-token relation.
            texts.append(body.split(" ", 1)[1] if " " in body else body)
    return _ranked_candidates(texts, k)


def hint_reader_predict(record, catalog: TextCatalog, k: int = DEFAULT_SAMPLE_SIZE) -> PredictionSet:
    return PredictionSet(
        query_id=record.query_id,
        candidates=hint_reader_candidates(record.input_text, catalog, k),
        k=k,
    )


def constant_predict(record, text: str, k: int = DEFAULT_SAMPLE_SIZE) -> PredictionSet:
    return PredictionSet(query_id=record.query_id, candidates=_ranked_candidates([text], k), k=k)


def run_oracle(
    spec: OracleSpec,
    records: Iterable,
    out_path,
    graph: KnowledgeGraph | None = None,
    catalog: TextCatalog | None = None,
    k: int = DEFAULT_SAMPLE_SIZE,
) -> int:
    """Write one prediction line per record; returns the line count."""
    if spec.kind == "memorizer" and (graph is None or catalog is None):
        raise KgError("memorizer oracle needs a train graph and a catalog")
    if spec.kind == "hint_reader" and catalog is None:
        raise KgError("hint_reader oracle needs a catalog")

    def predictions():
        for record in records:
            if spec.kind == "memorizer":
                yield memorizer_predict(record, graph, catalog, k)
            elif spec.kind == "hint_reader":
                yield hint_reader_predict(record, catalog, k)
            else:
                yield constant_predict(record, spec.constant_text, k)

    return write_predictions(predictions(), out_path)
