"""Query and neighborhood verbalization with token-budget trimming.

Input strings are assembled as ``predict <head> <relation>`` followed by as
many neighbor segments as fit the token budget, all joined by `` [SEP] ``.
Incoming edges (query entity on the tail side) carry an ``inverse of``
prefix on the relation text.
"""

from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .errors import BudgetError, CatalogError, ParseError
from .kg_store import INCOMING
from .neighborhood import NeighborTriple, Neighborhood, Query
from .text_catalog import TextCatalog

PREDICT_PREFIX = "predict"
INVERSE_MARKER = "inverse of"
SEPARATOR = " [SEP] "

DEFAULT_MAX_TOKENS = 512


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...


class WhitespaceTokenizer:
    """Counts whitespace-delimited tokens; dependency-free default."""

    def count(self, text: str) -> int:
        return len(text.split())


class SubwordTokenizer:
    """Greedy longest-match subword counter over a plain vocabulary file.

    Words are split on whitespace, then each word is consumed left to right
    by the longest vocabulary piece that matches; characters covered by no
    piece count as one unknown token each.
    """

    def __init__(self, vocab: Iterable[str]):
        self.vocab = {v for v in vocab if v}
        if not self.vocab:
            raise ValueError("subword vocabulary is empty")
        self._max_len = max(len(v) for v in self.vocab)
        # Assembly recounts growing prefixes, so word counts repeat heavily.
        self._cache: dict[str, int] = {}

    @classmethod
    def from_file(cls, path) -> "SubwordTokenizer":
        with open(path, encoding="utf-8") as f:
            vocab = [line.strip() for line in f if line.strip()]
        if not vocab:
            raise ParseError(path, 1, "vocabulary file contains no tokens")
        return cls(vocab)

    def _word_tokens(self, word: str) -> int:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        count = 0
        i = 0
        while i < len(word):
            end = min(len(word), i + self._max_len)
            for j in range(end, i, -1):
                if word[i:j] in self.vocab:
                    i = j
                    break
            else:
                i += 1
            count += 1
        self._cache[word] = count
        return count

    def count(self, text: str) -> int:
        return sum(self._word_tokens(w) for w in text.split())


@dataclass
class TokenBudget:
    max_tokens: int = DEFAULT_MAX_TOKENS
    tokenizer: Tokenizer = field(default_factory=WhitespaceTokenizer)


@dataclass
class VerbalizedQuery:
    """Assembled model input, its target, and segment boundaries.

    ``task_span`` and ``neighbor_spans`` are half-open character ranges into
    ``input_text``; slicing them out reproduces the task string and each
    included neighbor string exactly.
    """

    input_text: str
    target_text: str
    task_span: tuple[int, int]
    neighbor_spans: list[tuple[int, int]]
    included_count: int

    def task_text(self) -> str:
        return self.input_text[self.task_span[0] : self.task_span[1]]

    def neighbor_texts(self) -> list[str]:
        return [self.input_text[a:b] for a, b in self.neighbor_spans]


def _entity_text(entity_id: str, catalog: TextCatalog) -> str:
    text = catalog.entity_text.get(entity_id)
    if not text:
        raise CatalogError(f"no text mapping for entity {entity_id!r}")
    return text


def _relation_text(relation_id: str, catalog: TextCatalog) -> str:
    text = catalog.relation_text.get(relation_id)
    if not text:
        raise CatalogError(f"no text mapping for relation {relation_id!r}")
    return text


def verbalize_task(query: Query, catalog: TextCatalog) -> str:
    """``predict <head> <relation>``, with ``inverse of`` before the relation
    for inverse queries."""
    head = _entity_text(query.head, catalog)
    relation = _relation_text(query.relation, catalog)
    if query.inverse:
        return f"{PREDICT_PREFIX} {head} {INVERSE_MARKER} {relation}"
    return f"{PREDICT_PREFIX} {head} {relation}"


def verbalize_neighbor(neighbor: NeighborTriple, catalog: TextCatalog) -> str:
    """Relation text plus the entity on the far side of the edge."""
    relation = _relation_text(neighbor.triple.relation, catalog)
    if neighbor.direction == INCOMING:
        other = _entity_text(neighbor.triple.head, catalog)
        return f"{INVERSE_MARKER} {relation} {other}"
    other = _entity_text(neighbor.triple.tail, catalog)
    return f"{relation} {other}"


def count_tokens(text: str, budget: TokenBudget) -> int:
    return budget.tokenizer.count(text)


def assemble_input(
    query: Query, nbh: Neighborhood, catalog: TextCatalog, budget: TokenBudget
) -> VerbalizedQuery:
    """Greedily append neighbor segments, in neighborhood order, while the
    whole assembled text stays within the budget.

    Inclusion stops at the first neighbor that does not fit; later, smaller
    neighbors are not repacked, preserving the similarity priority order.
    """
    if nbh.query != query:
        raise ValueError("neighborhood was formed for a different query")
    task = verbalize_task(query, catalog)
    if budget.tokenizer.count(task) > budget.max_tokens:
        raise BudgetError(
            f"task segment alone ({budget.tokenizer.count(task)} tokens) exceeds "
            f"the {budget.max_tokens}-token budget"
        )
    text = task
    spans: list[tuple[int, int]] = []
    for neighbor in nbh.neighbors:
        segment = verbalize_neighbor(neighbor, catalog)
        candidate = text + SEPARATOR + segment
        if budget.tokenizer.count(candidate) > budget.max_tokens:
            break
        spans.append((len(text) + len(SEPARATOR), len(candidate)))
        text = candidate
    target_text = _entity_text(query.target, catalog) if query.target is not None else ""
    return VerbalizedQuery(
        input_text=text,
        target_text=target_text,
        task_span=(0, len(task)),
        neighbor_spans=spans,
        included_count=len(spans),
    )
