"""Sentence-vector files for inductive evaluation.

Input is ``key<TAB>text`` TSV (entity id or query_id as the key); output is
the word-vector text format with one unit-normalized vector per input line.
The default encoder hashes character trigrams into a fixed-width vector,
which is dependency-free and bitwise deterministic across runs; a
sentence-transformers encoder can be selected where that package and its
model weights are available.
"""

import hashlib
import logging

import numpy as np

from .protocol import open_text

log = logging.getLogger(__name__)

ENCODERS = ("hash", "sbert")

DEFAULT_DIM = 256
DEFAULT_SBERT_MODEL = "all-MiniLM-L6-v2"


class EncoderError(Exception):
    pass


class HashEncoder:
    """Character-trigram hashing encoder, unit-normalized."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 2:
            raise EncoderError(f"dim must be >= 2, got {dim}")
        self.dim = dim

    def encode(self, text: str) -> np.ndarray:
        padded = f"  {text.lower()}  "
        vec = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            digest = hashlib.blake2b(padded[i : i + 3].encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            index = value % self.dim
            sign = 1.0 if (value >> 63) & 1 else -1.0
            vec[index] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm


class SbertEncoder:
    def __init__(self, model_name: str = DEFAULT_SBERT_MODEL):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            raise EncoderError(f"sentence-transformers is not installed: {e}") from e
        try:
            self.model = SentenceTransformer(model_name)
        except Exception as e:
            raise EncoderError(f"could not load encoder model {model_name!r}: {e}") from e
        self.dim = int(self.model.get_sentence_embedding_dimension())

    def encode(self, text: str) -> np.ndarray:
        vec = np.asarray(self.model.encode([text])[0], dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise EncoderError(f"encoder produced a zero vector for {text!r}")
        return vec / norm


def make_encoder(name: str, dim: int = DEFAULT_DIM, model_name: str = DEFAULT_SBERT_MODEL):
    if name == "hash":
        return HashEncoder(dim=dim)
    if name == "sbert":
        return SbertEncoder(model_name=model_name)
    raise EncoderError(f"unknown encoder {name!r}; expected one of {ENCODERS}")


def embed_texts(texts_path, out_path, encoder) -> int:
    """Encode every key<TAB>text line into the word-vector text format.

    Any encoder failure aborts with the offending line number; a vector file
    with silent gaps would poison the downstream index.
    """
    rows = []
    with open_text(texts_path, "r") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2 or not parts[0].strip():
                raise EncoderError(f"{texts_path}:{line_no}: expected key<TAB>text")
            key = parts[0].strip()
            try:
                rows.append((key, encoder.encode(parts[1])))
            except EncoderError:
                raise
            except Exception as e:
                raise EncoderError(f"{texts_path}:{line_no}: encoder failed: {e}") from e
    with open_text(out_path, "w") as out:
        out.write(f"{len(rows)} {encoder.dim}\n")
        for key, vec in rows:
            out.write(key + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    return len(rows)
