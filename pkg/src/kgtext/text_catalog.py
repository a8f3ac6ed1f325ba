"""Label/description loading and entity text disambiguation.

Entity surface texts must be injective so that a generated string maps back
to exactly one entity. Unique labels pass through untouched; colliding labels
are extended first with the entity description, then with the entity id.
"""

import logging
import unicodedata
from dataclasses import dataclass, field

from .errors import CatalogError, ParseError

log = logging.getLogger(__name__)

# Collisions that survive repeated id suffixing indicate pathological input
# (ids embedded in other labels); bail out instead of looping.
_MAX_SUFFIX_ROUNDS = 8


def _norm(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


@dataclass
class RawCatalog:
    """Labels plus optional descriptions for one id namespace."""

    labels: dict[str, str]
    descriptions: dict[str, str] = field(default_factory=dict)


@dataclass
class TextCatalog:
    entity_text: dict[str, str]
    relation_text: dict[str, str]
    reverse: dict[str, str]
    _entity_rank: dict[str, int] | None = None

    def entity_rank(self, entity_id: str) -> int:
        """Position of the entity in catalog insertion order."""
        if self._entity_rank is None:
            self._entity_rank = {e: i for i, e in enumerate(self.entity_text)}
        return self._entity_rank[entity_id]


def _parse_id_text_file(path) -> dict[str, str]:
    """Parse id<TAB>text lines; extra tab-separated fields (aliases) are ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise ParseError(path, line_no, f"expected id<TAB>text, got {line.rstrip()!r}")
            ident, text = parts[0].strip(), _norm(parts[1])
            if not ident or not text:
                raise ParseError(path, line_no, "empty id or text")
            if ident in out:
                log.warning("%s:%d: duplicate id %s, keeping first occurrence", path, line_no, ident)
                continue
            out[ident] = text
    return out


def load_raw(labels_path, descriptions_path=None) -> RawCatalog:
    """Load a label file and optionally attach descriptions by id."""
    labels = _parse_id_text_file(labels_path)
    descriptions: dict[str, str] = {}
    if descriptions_path is not None:
        unknown = 0
        for ident, text in _parse_id_text_file(descriptions_path).items():
            if ident not in labels:
                unknown += 1
                continue
            descriptions[ident] = text
        if unknown:
            log.warning("ignored %d descriptions for ids absent from the label file", unknown)
    return RawCatalog(labels=labels, descriptions=descriptions)


def disambiguate(
    entities: RawCatalog,
    relations: RawCatalog | None = None,
    use_descriptions: bool = True,
) -> TextCatalog:
    """Build the injective id -> text mapping.

    Entities whose label is shared get their description appended when
    available (and enabled); anything still ambiguous falls back to
    ``<label> <id>``. Entities with a globally unique label always keep it.
    Relation labels must already be pairwise distinct. Collision detection
    is exact equality after NFC normalization and trimming, applied here so
    directly constructed catalogs behave like loaded ones.
    """
    labels = {ident: _norm(label) for ident, label in entities.labels.items()}
    if any(not label for label in labels.values()):
        raise CatalogError("entity labels must be nonempty after trimming")
    descriptions = {ident: _norm(d) for ident, d in entities.descriptions.items()}
    texts = dict(labels)

    by_label: dict[str, list[str]] = {}
    for ident, label in texts.items():
        by_label.setdefault(label, []).append(ident)
    passthrough = {ids[0] for ids in by_label.values() if len(ids) == 1}

    for label, ids in by_label.items():
        if len(ids) == 1:
            continue
        for ident in ids:
            desc = descriptions.get(ident) if use_descriptions else None
            texts[ident] = f"{label} {desc}" if desc else f"{label} {ident}"

    # Residual collisions (including against unique pass-through labels) get
    # the id suffix; pass-through entities never change.
    for _ in range(_MAX_SUFFIX_ROUNDS):
        groups: dict[str, list[str]] = {}
        for ident, text in texts.items():
            groups.setdefault(text, []).append(ident)
        colliding = [ids for ids in groups.values() if len(ids) > 1]
        if not colliding:
            break
        for ids in colliding:
            movable = [i for i in ids if i not in passthrough]
            if not movable:
                raise CatalogError(f"distinct entities share a unique label: {ids}")
            for ident in movable:
                fallback = f"{labels[ident]} {ident}"
                texts[ident] = fallback if texts[ident] != fallback else f"{texts[ident]} {ident}"
    else:
        raise CatalogError("could not disambiguate entity labels (ids embedded in labels?)")

    relation_text: dict[str, str] = {}
    if relations is not None:
        seen: dict[str, str] = {}
        for ident, raw_label in relations.labels.items():
            label = _norm(raw_label)
            if not label:
                raise CatalogError(f"relation {ident!r} has an empty label")
            if label in seen:
                raise CatalogError(
                    f"relation label {label!r} shared by {seen[label]} and {ident}; "
                    "relation texts must be pairwise distinct"
                )
            seen[label] = ident
            relation_text[ident] = label

    reverse = {text: ident for ident, text in texts.items()}
    if len(reverse) != len(texts):
        raise CatalogError("entity texts are not injective after disambiguation")
    return TextCatalog(entity_text=texts, relation_text=relation_text, reverse=reverse)


def write_catalog(catalog: TextCatalog, path) -> None:
    """Dump the disambiguated mapping as id<TAB>text for auditing."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ident, text in catalog.entity_text.items():
            f.write(f"{ident}\t{text}\n")
        for ident, text in catalog.relation_text.items():
            f.write(f"{ident}\t{text}\n")
