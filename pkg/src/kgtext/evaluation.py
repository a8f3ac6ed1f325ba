"""Prediction scoring: filtered ranking, Hits@k, exact match, the combined
checkpoint-selection metric, nearest-entity retrieval, target-position
analysis, and neighbor-ablation curves.

Sampled candidates are mapped back to entities through the catalog's reverse
text lookup; every entity no candidate matched scores -inf, so ranks are
never overestimated. Ties rank pessimistically (as if every tied competitor
beat the target).
"""

import json
import logging
import math
import random
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Collection, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import NotFoundError, ParseError, SchemaError
from .kg_store import EntityId, KnowledgeGraph, known_heads, known_tails
from .neighborhood import Neighborhood, Query
from .relation_similarity import parse_vector_file
from .text_catalog import TextCatalog
from .verbalizer import TokenBudget, assemble_input

log = logging.getLogger(__name__)

NEG_INF = float("-inf")

DEFAULT_SAMPLE_SIZE = 50
DEFAULT_HITS_KS = (1, 3, 10)

IN_TASK = "in_task"
IN_NEIGHBORHOOD = "in_neighborhood"
NOT_IN_INPUT = "not_in_input"
TARGET_POSITIONS = (IN_TASK, IN_NEIGHBORHOOD, NOT_IN_INPUT)

RELEVANT_FIRST = "relevant_first"
RANDOM_ORDER = "random"


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


class Candidate(NamedTuple):
    text: str
    log_prob: float


@dataclass
class PredictionSet:
    """Up to k sampled sequences with their summed token log-probabilities."""

    query_id: str
    candidates: list[Candidate]
    k: int = DEFAULT_SAMPLE_SIZE

    def __post_init__(self):
        if len(self.candidates) > self.k:
            raise SchemaError(
                f"{self.query_id}: {len(self.candidates)} candidates exceed sample size {self.k}"
            )
        for c in self.candidates:
            if not math.isfinite(c.log_prob) or c.log_prob > 0.0:
                raise SchemaError(
                    f"{self.query_id}: candidate log_prob must be finite and <= 0, got {c.log_prob!r}"
                )

    def top_text(self) -> str | None:
        """Text of the highest-scoring candidate; earliest wins ties."""
        if not self.candidates:
            return None
        best = max(range(len(self.candidates)), key=lambda i: (self.candidates[i].log_prob, -i))
        return self.candidates[best].text

    def to_json(self) -> str:
        return json.dumps(
            {
                "query_id": self.query_id,
                "candidates": [{"text": c.text, "log_prob": c.log_prob} for c in self.candidates],
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str, k: int = DEFAULT_SAMPLE_SIZE) -> "PredictionSet":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid prediction JSON: {e}") from None
        if not isinstance(payload, dict) or "query_id" not in payload or "candidates" not in payload:
            raise SchemaError("prediction line must carry query_id and candidates")
        candidates = []
        for c in payload["candidates"]:
            if not isinstance(c, dict) or "text" not in c or "log_prob" not in c:
                raise SchemaError("candidate entries must carry text and log_prob")
            candidates.append(Candidate(text=str(c["text"]), log_prob=float(c["log_prob"])))
        return cls(query_id=str(payload["query_id"]), candidates=candidates, k=k)


def read_predictions(path, k: int = DEFAULT_SAMPLE_SIZE) -> Iterator[PredictionSet]:
    from .dataset_pipeline import open_text

    with open_text(path, "r") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield PredictionSet.from_json(line, k=k)
            except SchemaError as e:
                raise ParseError(path, line_no, str(e)) from None


def write_predictions(predictions: Iterable[PredictionSet], path) -> int:
    from .dataset_pipeline import open_text

    n = 0
    with open_text(path, "w") as f:
        for p in predictions:
            f.write(p.to_json() + "\n")
            n += 1
    return n


@dataclass
class EntityScores:
    """Sparse entity scores; entities not present score -inf."""

    finite: dict[EntityId, float] = field(default_factory=dict)

    def score(self, entity: EntityId) -> float:
        return self.finite.get(entity, NEG_INF)


@dataclass(frozen=True)
class RankingResult:
    query_id: str
    rank: int
    filtered: bool


@dataclass
class MetricsReport:
    hits_at: dict[int, float]
    exact_match: float
    combined: float
    n_queries: int

    def as_tsv(self) -> str:
        lines = [f"n_queries\t{self.n_queries}"]
        lines += [f"hits@{k}\t{v:.6f}" for k, v in sorted(self.hits_at.items())]
        lines.append(f"exact_match\t{self.exact_match:.6f}")
        lines.append(f"combined\t{self.combined:.6f}")
        return "\n".join(lines)

    def as_table(self) -> str:
        rows = [("queries", str(self.n_queries))]
        rows += [(f"Hits@{k}", f"{v:.4f}") for k, v in sorted(self.hits_at.items())]
        rows.append(("Exact Match", f"{self.exact_match:.4f}"))
        rows.append(("1000*EM + Hits@1", f"{self.combined:.4f}"))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def exact_match(generated: str, target: str) -> int:
    """1 iff the two strings are byte-equal after NFC and trimming."""
    return int(_nfc(generated).strip() == _nfc(target).strip())


def scores_from_samples(p: PredictionSet, catalog: TextCatalog) -> EntityScores:
    """Map candidate texts to entities by exact reverse lookup.

    Texts matching no entity are dropped; duplicate matches keep their
    maximum log-probability.
    """
    finite: dict[EntityId, float] = {}
    for c in p.candidates:
        entity = catalog.reverse.get(_nfc(c.text).strip())
        if entity is None:
            continue
        if entity not in finite or c.log_prob > finite[entity]:
            finite[entity] = c.log_prob
    return EntityScores(finite=finite)


def filtered_rank(
    target: EntityId,
    scores: EntityScores,
    filter_set: Collection[EntityId],
    entities: Collection[EntityId],
    query_id: str = "",
) -> RankingResult:
    """Pessimistic rank of the target among all non-filtered entities.

    ``entities`` is the scoring universe (normally the catalog's entity set).
    Competitors scoring >= the target count against it, including -inf vs
    -inf ties, so an ungenerated target can never land inside the top k.
    """
    if target in filter_set:
        raise ValueError(f"target {target!r} must not be in the filter set")
    entity_set = entities if isinstance(entities, (set, frozenset, dict)) else set(entities)
    if target not in entity_set:
        raise NotFoundError(f"target {target!r} not in the entity catalog")
    target_score = scores.score(target)
    if target_score == NEG_INF:
        filtered_out = sum(1 for e in filter_set if e in entity_set)
        rank = len(entity_set) - filtered_out
    else:
        rank = 1 + sum(
            1
            for e, s in scores.finite.items()
            if e != target and s >= target_score and e in entity_set and e not in filter_set
        )
    return RankingResult(query_id=query_id, rank=rank, filtered=bool(filter_set))


def hits_at_k(results: Sequence[RankingResult], k: int) -> float:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not results:
        raise ValueError("cannot compute Hits@k over an empty result list")
    return sum(1 for r in results if r.rank <= k) / len(results)


def combined_metric(em: float, hits1: float) -> float:
    """Checkpoint-selection score 1000*EM + Hits@1; EM dominates."""
    if not (0.0 <= em <= 1.0 and 0.0 <= hits1 <= 1.0):
        raise ValueError("both metrics must lie in [0, 1]")
    return 1000.0 * em + hits1


@dataclass
class EntityIndex:
    """Flat (exact, full-scan) index of unit-normalized entity vectors."""

    dim: int
    ids: list[EntityId]
    vectors: np.ndarray

    @classmethod
    def load(cls, path) -> "EntityIndex":
        ids, rows = parse_vector_file(path)
        norms = np.linalg.norm(rows, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-5)
        if bad.size:
            raise SchemaError(
                f"{path}: vector for {ids[bad[0]]!r} has norm {norms[bad[0]]:.6f}, expected 1"
            )
        return cls(dim=rows.shape[1], ids=ids, vectors=rows)


def nearest_entities(
    query_vector, index: EntityIndex, k: int
) -> list[tuple[EntityId, float]]:
    """Exact top-k by inner product (= cosine over unit vectors).

    Full scan, no approximation; ties break by index (catalog) order.
    """
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query vector has shape {q.shape}, index dim is {index.dim}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sims = index.vectors @ q
    order = np.lexsort((np.arange(len(sims)), -sims))[: min(k, len(sims))]
    return [(index.ids[i], float(sims[i])) for i in order]


def classify_target_position(vq, target_text: str) -> str:
    """Which part of the input hints the target: task, neighborhood, or none.

    Case-sensitive substring match after NFC; the answer edge itself is never
    present, but the target label may surface through other edges.
    """
    target = _nfc(target_text)
    if not target:
        return NOT_IN_INPUT
    if target in vq.task_text():
        return IN_TASK
    if any(target in segment for segment in vq.neighbor_texts()):
        return IN_NEIGHBORHOOD
    return NOT_IN_INPUT


# A model handle for ablation: assembled input text -> scored candidates.
AblationModel = Callable[[str], Sequence[Candidate]]


def _metric_value(candidates: Sequence[Candidate], target_text: str, metric: str) -> float:
    if metric == "em":
        if not candidates:
            return 0.0
        best = max(range(len(candidates)), key=lambda i: (candidates[i].log_prob, -i))
        return float(exact_match(candidates[best].text, target_text))
    if metric == "target_log_prob":
        want = _nfc(target_text).strip()
        scores = [c.log_prob for c in candidates if _nfc(c.text).strip() == want]
        return max(scores) if scores else NEG_INF
    raise ValueError(f"unknown ablation metric {metric!r}")


def neighbor_ablation(
    cases: Sequence[tuple[Query, Neighborhood]],
    model: AblationModel,
    catalog: TextCatalog,
    budget: TokenBudget,
    mode: str = RELEVANT_FIRST,
    removals: Sequence[int] = (0,),
    seed: int = 0,
    metric: str = "em",
) -> list[tuple[int, float]]:
    """Metric as a function of how many neighbors are removed from the input.

    Each neighbor's relevance is the leave-one-out drop in the per-query
    metric. ``relevant_first`` removes neighbors in descending relevance;
    ``random`` removes in a seeded shuffled order. For every removal count
    the input is reassembled from the surviving neighbors and rescored;
    the returned curve averages over all cases.
    """
    if mode not in (RELEVANT_FIRST, RANDOM_ORDER):
        raise ValueError(f"mode must be {RELEVANT_FIRST!r} or {RANDOM_ORDER!r}")
    if not cases:
        raise ValueError("cases must be nonempty")

    def run_model(text: str, label: str) -> Sequence[Candidate]:
        try:
            return model(text)
        except Exception as e:
            raise SchemaError(f"model failure for {label}: {e}") from e

    curves: list[dict[int, float]] = []
    for case_idx, (query, nbh) in enumerate(cases):
        label = f"case {case_idx} ({query.head}, {query.relation})"
        n = len(nbh.neighbors)

        def score_without(removed: set[int]) -> float:
            kept = [nb for i, nb in enumerate(nbh.neighbors) if i not in removed]
            vq = assemble_input(query, Neighborhood(query=query, neighbors=kept), catalog, budget)
            return _metric_value(run_model(vq.input_text, label), vq.target_text, metric)

        base = score_without(set())
        if mode == RELEVANT_FIRST:
            relevance = [base - score_without({i}) for i in range(n)]
            order = sorted(range(n), key=lambda i: (-relevance[i], i))
        else:
            order = list(range(n))
            random.Random(f"{seed}:{case_idx}").shuffle(order)

        curve: dict[int, float] = {}
        for m in removals:
            if m < 0:
                raise ValueError(f"removal counts must be nonnegative, got {m}")
            curve[m] = base if m == 0 else score_without(set(order[: min(m, n)]))
        curves.append(curve)

    return [(m, sum(c[m] for c in curves) / len(curves)) for m in removals]


def filter_set_for_record(
    record, filter_graphs: Sequence[KnowledgeGraph]
) -> set[EntityId]:
    """Known true answers for the record's query, minus the target itself."""
    if not filter_graphs:
        return set()
    if record.inverse:
        known = known_heads(record.head_id, record.relation_id, filter_graphs)
    else:
        known = known_tails(record.head_id, record.relation_id, filter_graphs)
    known.discard(record.target_id)
    return known


def score_predictions(
    records: Iterable,
    predictions: Iterable[PredictionSet],
    catalog: TextCatalog,
    filter_graphs: Sequence[KnowledgeGraph] = (),
    ks: Sequence[int] = DEFAULT_HITS_KS,
    entities: Collection[EntityId] | None = None,
) -> tuple[MetricsReport, list[RankingResult]]:
    """Rank every prediction against its record and aggregate the metrics.

    Exact match is computed on the top-scoring candidate text; Hits@k on the
    filtered rank. Passing no filter graphs yields unfiltered (raw) ranks.
    """
    by_id = {r.query_id: r for r in records}
    universe = set(entities) if entities is not None else set(catalog.entity_text)
    results: list[RankingResult] = []
    em_total = 0
    for pred in predictions:
        record = by_id.get(pred.query_id)
        if record is None:
            raise SchemaError(f"prediction for unknown query_id {pred.query_id!r}")
        scores = scores_from_samples(pred, catalog)
        fset = filter_set_for_record(record, filter_graphs)
        results.append(
            filtered_rank(record.target_id, scores, fset, universe, query_id=pred.query_id)
        )
        em_total += exact_match(pred.top_text() or "", record.target_text)
    if not results:
        raise ValueError("no predictions to score")
    hits = {k: hits_at_k(results, k) for k in ks}
    em = em_total / len(results)
    hits1 = hits.get(1, hits_at_k(results, 1))
    report = MetricsReport(
        hits_at=hits, exact_match=em, combined=combined_metric(em, hits1), n_queries=len(results)
    )
    return report, results
