"""Relation word vectors, the dense cosine-similarity matrix, and ranking.

Vector files use the standard word-vector text format: a ``count dim`` header
followed by ``id v1 ... v_dim`` lines. The similarity matrix is materialized
densely; relation inventories stay small enough that this is a few megabytes
at most and gives O(1) lookups.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotFoundError, ParseError, SchemaError


def parse_vector_file(path) -> tuple[list[str], np.ndarray]:
    """Parse a word-vector text file into (ids, matrix of shape (count, dim))."""
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        fields = header.split()
        if len(fields) != 2:
            raise ParseError(path, 1, f"expected 'count dim' header, got {header.rstrip()!r}")
        try:
            count, dim = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(path, 1, f"non-integer header fields: {header.rstrip()!r}") from None
        if dim < 1:
            raise ParseError(path, 1, f"vector dimension must be positive, got {dim}")
        if count < 0:
            raise ParseError(path, 1, f"vector count must be nonnegative, got {count}")

        ids: list[str] = []
        rows = np.empty((count, dim), dtype=np.float64)
        index: dict[str, int] = {}
        n = 0
        line_no = 1
        for line_no, line in enumerate(f, 2):
            if not line.strip():
                continue
            if n >= count:
                raise ParseError(path, line_no, f"more vectors than the declared count {count}")
            parts = line.split()
            if len(parts) != dim + 1:
                raise ParseError(
                    path, line_no, f"expected id plus {dim} components, got {len(parts) - 1}"
                )
            ident = parts[0]
            if ident in index:
                raise ParseError(path, line_no, f"duplicate vector id {ident!r}")
            try:
                row = [float(x) for x in parts[1:]]
            except ValueError:
                raise ParseError(path, line_no, "non-numeric vector component") from None
            if not all(math.isfinite(x) for x in row):
                raise ParseError(path, line_no, f"non-finite component in vector for {ident!r}")
            index[ident] = n
            ids.append(ident)
            rows[n] = row
            n += 1
        if n != count:
            raise ParseError(path, line_no, f"expected {count} vectors, found {n}")
    return ids, rows


@dataclass
class RelationEmbeddings:
    dim: int
    ids: list[str]
    matrix: np.ndarray
    _index: dict[str, int]

    def __contains__(self, relation_id: str) -> bool:
        return relation_id in self._index

    def vector(self, relation_id: str) -> np.ndarray:
        try:
            return self.matrix[self._index[relation_id]]
        except KeyError:
            raise NotFoundError(f"no vector for relation {relation_id!r}") from None


def load_vectors(path) -> RelationEmbeddings:
    ids, rows = parse_vector_file(path)
    return RelationEmbeddings(
        dim=rows.shape[1], ids=ids, matrix=rows, _index={r: i for i, r in enumerate(ids)}
    )


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1]; zero vectors are defined to score 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"vector length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class SimilarityMatrix:
    order: list[str]
    values: np.ndarray
    _index: dict[str, int]

    def __contains__(self, relation_id: str) -> bool:
        return relation_id in self._index

    def lookup(self, a: str, b: str) -> float:
        try:
            return float(self.values[self._index[a], self._index[b]])
        except KeyError as e:
            raise NotFoundError(f"relation {e.args[0]!r} not in similarity matrix") from None


def build_matrix(emb: RelationEmbeddings) -> SimilarityMatrix:
    """Pairwise cosine matrix over all relation vectors, file order preserved."""
    if not emb.ids:
        raise ValueError("embeddings are empty")
    norms = np.linalg.norm(emb.matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = emb.matrix / safe
    values = np.clip(unit @ unit.T, -1.0, 1.0)
    return SimilarityMatrix(
        order=list(emb.ids), values=values, _index={r: i for i, r in enumerate(emb.ids)}
    )


def rank_by_similarity(query: str, matrix: SimilarityMatrix) -> list[str]:
    """All relations sorted by descending similarity to the query relation.

    Ties break by ascending position in the matrix order, so the result is
    reproducible across runs.
    """
    if query not in matrix:
        raise NotFoundError(f"relation {query!r} not in similarity matrix")
    sims = matrix.values[matrix._index[query]]
    order = sorted(range(len(matrix.order)), key=lambda j: (-sims[j], j))
    return [matrix.order[j] for j in order]


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_matrix_cache(matrix: SimilarityMatrix, path, checksum: str) -> None:
    """Cache the matrix keyed by a checksum of its source vector file."""
    np.savez(
        path,
        order=np.array(matrix.order, dtype=np.str_),
        values=matrix.values,
        checksum=np.array([checksum], dtype=np.str_),
    )


def load_matrix_cache(path, expected_checksum: str | None = None) -> SimilarityMatrix:
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise SchemaError(f"{path}: not a similarity cache file ({e})") from None
    if not {"order", "values", "checksum"} <= set(data.files):
        raise SchemaError(f"{path}: similarity cache is missing arrays")
    if expected_checksum is not None and str(data["checksum"][0]) != expected_checksum:
        raise SchemaError(f"{path}: similarity cache is stale (checksum mismatch)")
    order = [str(r) for r in data["order"]]
    return SimilarityMatrix(
        order=order, values=data["values"], _index={r: i for i, r in enumerate(order)}
    )
