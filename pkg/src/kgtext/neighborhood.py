"""Target-leakage-free, similarity-sorted, capped 1-hop neighborhoods.

For a query on entity h the neighborhood is every triple incident to h,
minus the answer edge itself (in both orientations, since either one would
verbalize the target), sorted by how similar each triple's relation is to
the query relation, and truncated to a fixed cap.
"""

import json
from dataclasses import dataclass

from .errors import NotFoundError
from .kg_store import Direction, EntityId, KnowledgeGraph, RelationId, Triple
from .relation_similarity import SimilarityMatrix

DEFAULT_NEIGHBOR_CAP = 512


@dataclass(frozen=True)
class Query:
    """A tail-prediction query.

    ``inverse`` marks queries rewritten from the original triple's tail side;
    ``head`` then stores that original tail entity. ``target`` is the known
    answer during dataset construction and None at pure inference.
    """

    head: EntityId
    relation: RelationId
    inverse: bool = False
    target: EntityId | None = None


@dataclass(frozen=True)
class NeighborTriple:
    triple: Triple
    direction: Direction
    similarity: float


@dataclass
class Neighborhood:
    query: Query
    neighbors: list[NeighborTriple]

    def __len__(self) -> int:
        return len(self.neighbors)


def excluded_edges(query: Query) -> set[Triple]:
    """The answer edge in both orientations; empty when the target is unknown."""
    if query.target is None:
        return set()
    if query.inverse:
        head, tail = query.target, query.head
    else:
        head, tail = query.head, query.target
    return {Triple(head, query.relation, tail), Triple(tail, query.relation, head)}


def form_neighborhood(
    query: Query,
    graph: KnowledgeGraph,
    matrix: SimilarityMatrix,
    cap: int = DEFAULT_NEIGHBOR_CAP,
) -> Neighborhood:
    """Build the sorted neighborhood for one query.

    Sort order is descending similarity of the neighbor's relation to the
    query relation (the original relation also for inverse queries, which
    have no vectors of their own), with ties broken by ascending adjacency
    position so output is deterministic.
    """
    if cap < 0:
        raise ValueError(f"cap must be nonnegative, got {cap}")
    if query.relation not in matrix:
        raise NotFoundError(f"query relation {query.relation!r} not in similarity matrix")
    excluded = excluded_edges(query)
    rows = []
    for pos, (triple, direction) in enumerate(graph.adjacent(query.head)):
        if triple in excluded:
            continue
        sim = matrix.lookup(triple.relation, query.relation)
        rows.append((-sim, pos, NeighborTriple(triple=triple, direction=direction, similarity=sim)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return Neighborhood(query=query, neighbors=[r[2] for r in rows[:cap]])


def neighborhood_record(nbh: Neighborhood) -> str:
    """One line-delimited JSON record for a neighborhood dump."""
    q = nbh.query
    payload = {
        "head": q.head,
        "relation": q.relation,
        "inverse": q.inverse,
        "target": q.target,
        "neighbors": [
            {
                "head": n.triple.head,
                "relation": n.triple.relation,
                "tail": n.triple.tail,
                "direction": n.direction,
                "similarity": n.similarity,
            }
            for n in nbh.neighbors
        ],
    }
    return json.dumps(payload, ensure_ascii=False)
