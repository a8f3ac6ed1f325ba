"""Zero-shot chat prompts, answer parsing, and up-to-3-prediction scoring.

The two system templates are fixed strings; changing a byte changes the
benchmark, so tests pin their hashes. Answer normalization is deliberately
forgiving (case, surrounding punctuation, whitespace) because chat models
decorate their answers freely.
"""

import random
import re
import unicodedata
from dataclasses import dataclass
from typing import Sequence

from .verbalizer import SEPARATOR, VerbalizedQuery

SYSTEM_PROMPT_BARE = (
    "You will be provided with a incomplete triplet from the Wikidata knowledge graph. "
    "Your task is to complete the triplet with a tail (subject) based on the given triplet "
    "head (object) and relation. Your answer must only include the tail of the triplet with "
    "prefix 'Tail:'. Do not include relation into the answer."
)

SYSTEM_PROMPT_NEIGHBORS = (
    "You will be provided with a incomplete triplet from the Wikidata knowledge graph. "
    "Your task is to complete the triplet with a tail (subject) based on the given triplet "
    "head (object) and relation. Triplet to complete IS NOT in the list of related nodes, "
    "but it may contain helpful clues. Your answer must only include the tail of the triplet "
    "with prefix 'Tail:'. Do not include relation into the answer."
)

_TAIL_PREFIX = re.compile(r"\s*tail\s*:\s*", re.IGNORECASE)

MAX_PREDICTIONS = 3


@dataclass(frozen=True)
class PromptPair:
    system_text: str
    user_text: str


def build_prompt(vq: VerbalizedQuery, with_neighbors: bool) -> PromptPair:
    """Chat prompt for one verbalized query.

    With neighbors, the user message lists the neighbor segments first and
    the task line after; an empty neighborhood leaves the list empty but
    keeps the task line intact.
    """
    task = vq.task_text()
    if not with_neighbors:
        return PromptPair(system_text=SYSTEM_PROMPT_BARE, user_text=f"Triplet to complete: {task}.")
    neighbors = SEPARATOR.join(vq.neighbor_texts())
    return PromptPair(
        system_text=SYSTEM_PROMPT_NEIGHBORS,
        user_text=f"Adjacent relations: {neighbors}\nTriplet to complete: {task}.",
    )


def parse_answer(raw: str) -> str:
    """Strip an optional leading 'Tail:' marker and keep the first line."""
    m = _TAIL_PREFIX.match(raw)
    text = raw[m.end() :] if m else raw
    lines = text.splitlines()
    return lines[0].strip() if lines else ""


def normalize(text: str) -> str:
    """NFC, lowercase, strip surrounding punctuation/quotes, collapse whitespace."""
    s = unicodedata.normalize("NFC", text)
    s = unicodedata.normalize("NFC", s.lower())
    start, end = 0, len(s)
    while start < end and (s[start].isspace() or unicodedata.category(s[start]).startswith("P")):
        start += 1
    while end > start and (s[end - 1].isspace() or unicodedata.category(s[end - 1]).startswith("P")):
        end -= 1
    return " ".join(s[start:end].split())


def gpt_hits(predictions: Sequence[str], target_text: str, k: int, seed: int = 0) -> int:
    """1 iff any of k randomly selected predictions matches the target.

    Selection is a seeded shuffle; the k=1 pick is always the first element
    of the k=3 pick, so Hits@1 <= Hits@3 holds query by query.
    """
    if not 1 <= k <= MAX_PREDICTIONS:
        raise ValueError(f"k must be in [1, {MAX_PREDICTIONS}], got {k}")
    if len(predictions) > MAX_PREDICTIONS:
        raise ValueError(f"at most {MAX_PREDICTIONS} predictions allowed, got {len(predictions)}")
    pool = list(predictions)
    random.Random(seed).shuffle(pool)
    want = normalize(target_text)
    return int(any(normalize(p) == want for p in pool[:k]))
