"""Triple files, entity/relation catalogs, and bidirectional adjacency lookups.

A :class:`KnowledgeGraph` is built once (from a triple file or a binary
snapshot) and is immutable afterwards, so any number of readers may share it.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Literal, NamedTuple, Sequence

from .errors import NotFoundError, ParseError, SchemaError

log = logging.getLogger(__name__)

EntityId = str
RelationId = str

Direction = Literal["outgoing", "incoming"]
OUTGOING: Direction = "outgoing"
INCOMING: Direction = "incoming"

SPLIT_TAGS = ("train", "valid", "test", "inference")

# Triple file dialects: "tsv" is strict head<TAB>relation<TAB>tail (the
# Wikidata5M distribution format); "flex" additionally accepts comma- or
# whitespace-separated lines.
DIALECTS = ("tsv", "flex")

_SNAPSHOT_MAGIC = b"KGSNAP01"


class Triple(NamedTuple):
    head: EntityId
    relation: RelationId
    tail: EntityId


@dataclass(frozen=True)
class GraphStats:
    entity_count: int
    relation_count: int
    triple_count: int

    def as_tsv(self) -> str:
        return f"{self.entity_count}\t{self.relation_count}\t{self.triple_count}"


class KnowledgeGraph:
    """Deduplicated triple list plus head/tail position indexes.

    ``extra_entities`` registers entities that carry no edges (e.g. label-only
    ids) so adjacency lookups on them return an empty list instead of failing.
    """

    def __init__(
        self,
        triples: Iterable[Triple],
        split_tag: str = "train",
        extra_entities: Iterable[EntityId] = (),
    ):
        if split_tag not in SPLIT_TAGS:
            raise ValueError(f"split_tag must be one of {SPLIT_TAGS}, got {split_tag!r}")
        self.split_tag = split_tag
        self.triples: list[Triple] = []
        self.head_index: dict[EntityId, list[int]] = {}
        self.tail_index: dict[EntityId, list[int]] = {}
        self._entity_order: list[EntityId] = []
        self._relation_order: list[RelationId] = []
        self.entities: set[EntityId] = set()
        self.relations: set[RelationId] = set()

        seen: set[Triple] = set()
        duplicates = 0
        for t in triples:
            t = Triple(*t)
            if t in seen:
                duplicates += 1
                continue
            seen.add(t)
            pos = len(self.triples)
            self.triples.append(t)
            self._register_entity(t.head)
            self._register_entity(t.tail)
            if t.relation not in self.relations:
                self.relations.add(t.relation)
                self._relation_order.append(t.relation)
            self.head_index.setdefault(t.head, []).append(pos)
            self.tail_index.setdefault(t.tail, []).append(pos)
        for e in extra_entities:
            self._register_entity(e)
        if duplicates:
            log.warning("dropped %d duplicate triples", duplicates)

    def _register_entity(self, entity: EntityId) -> None:
        if entity not in self.entities:
            self.entities.add(entity)
            self._entity_order.append(entity)

    @property
    def entity_order(self) -> list[EntityId]:
        """Entities in first-seen order (triple scan order, then extras)."""
        return self._entity_order

    @property
    def relation_order(self) -> list[RelationId]:
        return self._relation_order

    def __len__(self) -> int:
        return len(self.triples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.split_tag == other.split_tag
            and self.triples == other.triples
            and self._entity_order == other._entity_order
            and self._relation_order == other._relation_order
        )

    def adjacent(self, entity: EntityId) -> list[tuple[Triple, Direction]]:
        """Every triple incident to ``entity``, tagged with its direction.

        Ordered by ascending triple position; a self-loop contributes one
        outgoing and one incoming entry at the same position, outgoing first.
        """
        if entity not in self.entities:
            raise NotFoundError(f"unknown entity: {entity!r}")
        entries = [(p, 0) for p in self.head_index.get(entity, ())]
        entries += [(p, 1) for p in self.tail_index.get(entity, ())]
        entries.sort()
        return [(self.triples[p], OUTGOING if d == 0 else INCOMING) for p, d in entries]


def ingest_triples(path, dialect: str = "tsv", split_tag: str = "train") -> KnowledgeGraph:
    """Parse a triple file into a deduplicated :class:`KnowledgeGraph`."""
    if dialect not in DIALECTS:
        raise ValueError(f"dialect must be one of {DIALECTS}, got {dialect!r}")
    return KnowledgeGraph(_parse_triple_lines(path, dialect), split_tag=split_tag)


def _parse_triple_lines(path, dialect: str) -> Iterator[Triple]:
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if dialect == "tsv":
                parts = line.split("\t")
            elif "\t" in line:
                parts = line.split("\t")
            elif "," in line:
                parts = line.split(",")
            else:
                parts = line.split()
            parts = [p.strip() for p in parts]
            if len(parts) != 3 or not all(parts):
                raise ParseError(path, line_no, f"expected 3 fields, got {len(parts)}: {line!r}")
            yield Triple(*parts)


def stats(graph: KnowledgeGraph) -> GraphStats:
    return GraphStats(len(graph.entities), len(graph.relations), len(graph.triples))


def adjacent(entity: EntityId, graph: KnowledgeGraph) -> list[tuple[Triple, Direction]]:
    return graph.adjacent(entity)


def known_tails(
    head: EntityId, relation: RelationId, graphs: Sequence[KnowledgeGraph]
) -> set[EntityId]:
    """Union of tails t with (head, relation, t) present in any given graph."""
    if not graphs:
        raise ValueError("graphs must be nonempty")
    out: set[EntityId] = set()
    for g in graphs:
        for pos in g.head_index.get(head, ()):
            t = g.triples[pos]
            if t.relation == relation:
                out.add(t.tail)
    return out


def known_heads(
    tail: EntityId, relation: RelationId, graphs: Sequence[KnowledgeGraph]
) -> set[EntityId]:
    """Union of heads h with (h, relation, tail) present in any given graph."""
    if not graphs:
        raise ValueError("graphs must be nonempty")
    out: set[EntityId] = set()
    for g in graphs:
        for pos in g.tail_index.get(tail, ()):
            t = g.triples[pos]
            if t.relation == relation:
                out.add(t.head)
    return out


def merge_graphs(graphs: Sequence[KnowledgeGraph], split_tag: str = "train") -> KnowledgeGraph:
    """Concatenate several graphs into one, deduplicating across them."""
    if not graphs:
        raise ValueError("graphs must be nonempty")

    def _all_triples():
        for g in graphs:
            yield from g.triples

    extra = [e for g in graphs for e in g.entity_order]
    return KnowledgeGraph(_all_triples(), split_tag=split_tag, extra_entities=extra)


def write_triples(graph: KnowledgeGraph, path) -> None:
    """Serialize the triple list back to strict TSV, one triple per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for t in graph.triples:
            f.write(f"{t.head}\t{t.relation}\t{t.tail}\n")


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise SchemaError(f"{self.path}: truncated snapshot")
        chunk = self.data[self.off : self.off + n]
        self.off += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_snapshot(graph: KnowledgeGraph, path) -> None:
    """Write the graph to a compact binary snapshot (little-endian lengths)."""
    ent_pos = {e: i for i, e in enumerate(graph.entity_order)}
    rel_pos = {r: i for i, r in enumerate(graph.relation_order)}
    parts = [_SNAPSHOT_MAGIC, _pack_str(graph.split_tag)]
    parts.append(struct.pack("<I", len(graph.entity_order)))
    parts += [_pack_str(e) for e in graph.entity_order]
    parts.append(struct.pack("<I", len(graph.relation_order)))
    parts += [_pack_str(r) for r in graph.relation_order]
    parts.append(struct.pack("<I", len(graph.triples)))
    for t in graph.triples:
        parts.append(struct.pack("<III", ent_pos[t.head], rel_pos[t.relation], ent_pos[t.tail]))
    Path(path).write_bytes(b"".join(parts))


def load_snapshot(path) -> KnowledgeGraph:
    data = Path(path).read_bytes()
    if data[: len(_SNAPSHOT_MAGIC)] != _SNAPSHOT_MAGIC:
        raise SchemaError(f"{path}: not a snapshot file (bad magic header)")
    r = _Reader(data, path)
    r.take(len(_SNAPSHOT_MAGIC))
    split_tag = r.string()
    entities = [r.string() for _ in range(r.u32())]
    relations = [r.string() for _ in range(r.u32())]
    n_triples = r.u32()
    triples = []
    for _ in range(n_triples):
        h, rel, t = struct.unpack("<III", r.take(12))
        try:
            triples.append(Triple(entities[h], relations[rel], entities[t]))
        except IndexError:
            raise SchemaError(f"{path}: triple references out-of-range catalog index") from None
    if r.off != len(data):
        raise SchemaError(f"{path}: trailing bytes after snapshot payload")
    return KnowledgeGraph(triples, split_tag=split_tag, extra_entities=entities)
