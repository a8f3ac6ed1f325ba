import unicodedata

import pytest
from hypothesis import given, settings, strategies as st

from kgtext.errors import CatalogError, ParseError
from kgtext.text_catalog import RawCatalog, disambiguate, load_raw, write_catalog


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


class TestLoadRaw:
    def test_single_label(self, tmp_path):
        f = write_lines(tmp_path / "labels.tsv", ["Q1\tApple"])
        raw = load_raw(f)
        assert raw.labels == {"Q1": "Apple"}
        assert raw.descriptions == {}

    def test_description_attached(self, tmp_path):
        labels = write_lines(tmp_path / "l.tsv", ["Q1\tApple"])
        descs = write_lines(tmp_path / "d.tsv", ["Q1\ttechnology company"])
        raw = load_raw(labels, descs)
        assert raw.descriptions == {"Q1": "technology company"}

    def test_description_for_unknown_id_ignored(self, tmp_path, caplog):
        labels = write_lines(tmp_path / "l.tsv", ["Q1\tApple"])
        descs = write_lines(tmp_path / "d.tsv", ["Q1\tfruit", "Q9\tghost"])
        with caplog.at_level("WARNING"):
            raw = load_raw(labels, descs)
        # Oracle: ids in the description file minus ids in the label file.
        assert set(raw.descriptions) == {"Q1", "Q9"} - ({"Q1", "Q9"} - {"Q1"})
        assert "ignored 1" in caplog.text

    def test_malformed_line_number(self, tmp_path):
        f = write_lines(tmp_path / "l.tsv", ["Q1\tApple", "broken-line"])
        with pytest.raises(ParseError) as exc:
            load_raw(f)
        assert exc.value.line_no == 2

    def test_alias_columns_ignored(self, tmp_path):
        f = write_lines(tmp_path / "l.tsv", ["Q1\tApple\tapple inc\tAAPL"])
        assert load_raw(f).labels == {"Q1": "Apple"}

    def test_duplicate_id_keeps_first(self, tmp_path, caplog):
        f = write_lines(tmp_path / "l.tsv", ["Q1\tfirst", "Q1\tsecond"])
        with caplog.at_level("WARNING"):
            raw = load_raw(f)
        assert raw.labels == {"Q1": "first"}

    def test_text_is_trimmed_and_nfc(self, tmp_path):
        decomposed = "Café"
        f = write_lines(tmp_path / "l.tsv", [f"Q1\t  {decomposed}  "])
        assert load_raw(f).labels == {"Q1": unicodedata.normalize("NFC", decomposed)}


class TestDisambiguate:
    def test_description_then_id_fallback(self):
        raw = RawCatalog(
            labels={"Q1": "Apple", "Q2": "Apple"},
            descriptions={"Q1": "technology company"},
        )
        cat = disambiguate(raw)
        assert cat.entity_text == {"Q1": "Apple technology company", "Q2": "Apple Q2"}
        assert cat.reverse["Apple technology company"] == "Q1"

    def test_unique_labels_pass_through(self):
        raw = RawCatalog(labels={"Q1": "Apple", "Q2": "Banana"}, descriptions={"Q1": "x"})
        assert disambiguate(raw).entity_text == {"Q1": "Apple", "Q2": "Banana"}

    def test_three_way_shared_label_and_description(self):
        raw = RawCatalog(
            labels={"Q1": "Apple", "Q2": "Apple", "Q3": "Apple"},
            descriptions={"Q1": "fruit", "Q2": "fruit", "Q3": "fruit"},
        )
        cat = disambiguate(raw)
        assert cat.entity_text == {"Q1": "Apple Q1", "Q2": "Apple Q2", "Q3": "Apple Q3"}
        # Injectivity: inverting the map loses nothing.
        assert len({v: k for k, v in cat.entity_text.items()}) == 3

    def test_desc_concat_collides_with_passthrough_label(self):
        raw = RawCatalog(
            labels={"QX": "Apple technology company", "Q1": "Apple", "Q2": "Apple"},
            descriptions={"Q1": "technology company"},
        )
        cat = disambiguate(raw)
        assert cat.entity_text["QX"] == "Apple technology company"
        assert cat.entity_text["Q1"] == "Apple Q1"
        assert cat.entity_text["Q2"] == "Apple Q2"

    def test_identical_entities_share_label_and_desc_pairwise(self):
        raw = RawCatalog(
            labels={"Q1": "Apple", "Q2": "Apple"},
            descriptions={"Q1": "fruit", "Q2": "fruit"},
        )
        cat = disambiguate(raw)
        assert cat.entity_text == {"Q1": "Apple Q1", "Q2": "Apple Q2"}

    def test_id_fallback_only_mode(self):
        raw = RawCatalog(
            labels={"Q1": "Apple", "Q2": "Apple"},
            descriptions={"Q1": "technology company"},
        )
        cat = disambiguate(raw, use_descriptions=False)
        assert cat.entity_text == {"Q1": "Apple Q1", "Q2": "Apple Q2"}

    def test_relation_collision_is_fatal(self):
        with pytest.raises(CatalogError):
            disambiguate(
                RawCatalog(labels={"Q1": "x"}),
                RawCatalog(labels={"P1": "part of", "P2": "part of"}),
            )

    def test_relations_pass_through(self):
        cat = disambiguate(
            RawCatalog(labels={"Q1": "x"}),
            RawCatalog(labels={"P1": "part of", "P2": "located in"}),
        )
        assert cat.relation_text == {"P1": "part of", "P2": "located in"}

    def test_nfc_equivalent_labels_collide(self):
        composed = "Café"
        decomposed = unicodedata.normalize("NFD", composed)
        raw = RawCatalog(labels={"Q1": composed, "Q2": decomposed})
        cat = disambiguate(raw)
        assert cat.entity_text["Q1"] == f"{composed} Q1"
        assert cat.entity_text["Q2"] == f"{composed} Q2"

    def test_entity_rank_follows_insertion_order(self):
        cat = disambiguate(RawCatalog(labels={"Q5": "a", "Q2": "b", "Q9": "c"}))
        assert [cat.entity_rank(e) for e in ("Q5", "Q2", "Q9")] == [0, 1, 2]


labels_strategy = st.dictionaries(
    keys=st.from_regex(r"Q[0-9]{1,4}", fullmatch=True),
    values=st.text(
        alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), max_codepoint=0x2FF),
        min_size=1,
        max_size=6,
    ),
    min_size=1,
    max_size=30,
)


class TestProperties:
    @given(labels_strategy, st.data())
    @settings(max_examples=150, deadline=None)
    def test_injectivity(self, labels, data):
        ids = sorted(labels)
        with_desc = data.draw(st.sets(st.sampled_from(ids)))
        descriptions = {i: data.draw(st.text(alphabet="abc", min_size=1, max_size=4)) for i in with_desc}
        cat = disambiguate(RawCatalog(labels=labels, descriptions=descriptions))
        assert len(set(cat.entity_text.values())) == len(cat.entity_text)
        assert set(cat.entity_text) == set(labels)

    @given(labels_strategy)
    @settings(max_examples=60, deadline=None)
    def test_deterministic(self, labels):
        raw = RawCatalog(labels=labels)
        assert disambiguate(raw).entity_text == disambiguate(raw).entity_text

    @given(labels_strategy)
    @settings(max_examples=60, deadline=None)
    def test_unique_labels_unchanged(self, labels):
        counts = {}
        for label in labels.values():
            counts[label] = counts.get(label, 0) + 1
        cat = disambiguate(RawCatalog(labels=labels))
        for ident, label in labels.items():
            if counts[label] == 1:
                assert cat.entity_text[ident] == label


def test_write_catalog(tmp_path):
    cat = disambiguate(
        RawCatalog(labels={"Q1": "Apple"}), RawCatalog(labels={"P1": "part of"})
    )
    out = tmp_path / "catalog.tsv"
    write_catalog(cat, out)
    assert out.read_text(encoding="utf-8") == "Q1\tApple\nP1\tpart of\n"
