import random

import pytest
from hypothesis import given, settings, strategies as st

from kgtext.errors import NotFoundError, ParseError, SchemaError
from kgtext.kg_store import (
    INCOMING,
    OUTGOING,
    GraphStats,
    KnowledgeGraph,
    Triple,
    adjacent,
    ingest_triples,
    known_heads,
    known_tails,
    load_snapshot,
    merge_graphs,
    save_snapshot,
    stats,
    write_triples,
)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


class TestIngest:
    def test_basic_tsv(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", ["a\tr1\tb", "b\tr2\tc"])
        g = ingest_triples(f)
        assert g.triples == [Triple("a", "r1", "b"), Triple("b", "r2", "c")]
        assert g.entities == {"a", "b", "c"}
        assert g.relations == {"r1", "r2"}

    def test_empty_file(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", [])
        assert stats(ingest_triples(f)) == GraphStats(0, 0, 0)

    def test_repeated_triple_deduplicated(self, tmp_path, caplog):
        # Independent oracle: unique line count.
        lines = ["a\tr\tb"] * 5
        assert len(set(lines)) == 1
        f = write_lines(tmp_path / "t.tsv", lines)
        with caplog.at_level("WARNING"):
            g = ingest_triples(f)
        assert len(g.triples) == 1
        assert "duplicate" in caplog.text

    def test_dedup_count_matches_distinct_lines(self, tmp_path):
        rng = random.Random(3)
        lines = [
            f"e{rng.randint(0, 5)}\tr{rng.randint(0, 2)}\te{rng.randint(0, 5)}"
            for _ in range(200)
        ]
        f = write_lines(tmp_path / "t.tsv", lines)
        assert len(ingest_triples(f).triples) == len(set(lines))

    def test_first_occurrence_order_preserved(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", ["a\tr\tb", "c\tr\td", "a\tr\tb", "e\tr\tf"])
        g = ingest_triples(f)
        assert g.triples == [Triple("a", "r", "b"), Triple("c", "r", "d"), Triple("e", "r", "f")]

    def test_malformed_line_reports_number(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", ["a\tr\tb", "missing fields"])
        with pytest.raises(ParseError) as exc:
            ingest_triples(f)
        assert exc.value.line_no == 2

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(OSError):
            ingest_triples(tmp_path / "nope.tsv")

    def test_flex_dialect(self, tmp_path):
        f = write_lines(tmp_path / "t.txt", ["a,r1,b", "c r2 d", "e\tr3\tf"])
        g = ingest_triples(f, dialect="flex")
        assert len(g.triples) == 3

    def test_unknown_dialect(self, tmp_path):
        with pytest.raises(ValueError):
            ingest_triples(tmp_path / "x", dialect="csv")

    def test_blank_lines_skipped(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", ["a\tr\tb", "", "  ", "c\tr\td"])
        assert len(ingest_triples(f).triples) == 2

    def test_self_loops_retained(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", ["a\tr\ta"])
        assert ingest_triples(f).triples == [Triple("a", "r", "a")]

    def test_roundtrip_through_serialization(self, tmp_path):
        f = write_lines(tmp_path / "t.tsv", ["a\tr1\tb", "c\tr2\td", "a\tr1\tb", "a\tr2\ta"])
        g1 = ingest_triples(f)
        out = tmp_path / "out.tsv"
        write_triples(g1, out)
        g2 = ingest_triples(out)
        assert g1 == g2


class TestAdjacent:
    def test_isolated_entity_empty(self):
        g = KnowledgeGraph([Triple("a", "r", "b")], extra_entities=["x"])
        assert g.adjacent("x") == []

    def test_one_head_one_tail(self):
        g = KnowledgeGraph(
            [Triple("a", "r", "b"), Triple("c", "r", "a"), Triple("c", "r", "d")]
        )
        entries = adjacent("a", g)
        assert entries == [
            (Triple("a", "r", "b"), OUTGOING),
            (Triple("c", "r", "a"), INCOMING),
        ]

    def test_star_hub(self):
        triples = [Triple("hub", f"r{i % 7}", f"spoke{i}") for i in range(600)]
        g = KnowledgeGraph(triples)
        entries = g.adjacent("hub")
        # Brute-force scan oracle.
        expected = sum(1 for t in g.triples if t.head == "hub" or t.tail == "hub")
        assert len(entries) == expected == 600

    def test_unknown_entity(self):
        g = KnowledgeGraph([Triple("a", "r", "b")])
        with pytest.raises(NotFoundError):
            g.adjacent("zz")

    def test_self_loop_both_directions(self):
        g = KnowledgeGraph([Triple("a", "r", "a")])
        assert g.adjacent("a") == [
            (Triple("a", "r", "a"), OUTGOING),
            (Triple("a", "r", "a"), INCOMING),
        ]

    @given(
        st.lists(
            st.tuples(
                st.integers(0, 6), st.integers(0, 2), st.integers(0, 6)
            ),
            min_size=1,
            max_size=40,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_completeness_against_scan(self, raw):
        triples = [Triple(f"e{h}", f"r{r}", f"e{t}") for h, r, t in raw]
        g = KnowledgeGraph(triples)
        for entity in g.entities:
            entries = g.adjacent(entity)
            for triple, direction in entries:
                flagged = triple.head if direction == OUTGOING else triple.tail
                assert flagged == entity
            # No incident triple is omitted; self-loops appear twice.
            expected = sum(
                (t.head == entity) + (t.tail == entity) for t in g.triples
            )
            assert len(entries) == expected


class TestKnownTails:
    def test_singleton(self):
        g = KnowledgeGraph([Triple("h", "r", "t")])
        assert known_tails("h", "r", [g]) == {"t"}

    def test_absent(self):
        g = KnowledgeGraph([Triple("h", "r", "t")])
        assert known_tails("h", "zz", [g]) == set()
        assert known_tails("zz", "r", [g]) == set()

    def test_union_across_graphs(self):
        rng = random.Random(9)
        t1 = [Triple(f"h{rng.randint(0, 3)}", f"r{rng.randint(0, 1)}", f"t{rng.randint(0, 9)}") for _ in range(60)]
        t2 = [Triple(f"h{rng.randint(0, 3)}", f"r{rng.randint(0, 1)}", f"t{rng.randint(0, 9)}") for _ in range(60)]
        g1, g2 = KnowledgeGraph(t1), KnowledgeGraph(t2)
        # Brute-force filter over the concatenated triple lists.
        for h in ("h0", "h1", "h2", "h3"):
            for r in ("r0", "r1"):
                expected = {t.tail for t in t1 + t2 if t.head == h and t.relation == r}
                assert known_tails(h, r, [g1, g2]) == expected

    def test_empty_graph_list(self):
        with pytest.raises(ValueError):
            known_tails("h", "r", [])

    def test_known_heads(self):
        g = KnowledgeGraph([Triple("h1", "r", "t"), Triple("h2", "r", "t"), Triple("h3", "q", "t")])
        assert known_heads("t", "r", [g]) == {"h1", "h2"}


class TestStats:
    def test_empty(self):
        assert stats(KnowledgeGraph([])) == GraphStats(0, 0, 0)

    def test_constructed_by_hand(self):
        # 10 distinct triples over 4 entities and 2 relations.
        triples = [
            Triple("a", "r1", "b"),
            Triple("a", "r1", "c"),
            Triple("a", "r2", "d"),
            Triple("b", "r1", "a"),
            Triple("b", "r2", "c"),
            Triple("c", "r1", "d"),
            Triple("c", "r2", "a"),
            Triple("d", "r1", "b"),
            Triple("d", "r2", "a"),
            Triple("d", "r2", "b"),
        ]
        assert stats(KnowledgeGraph(triples)) == GraphStats(4, 2, 10)

    def test_tsv_format(self):
        assert GraphStats(5, 2, 7).as_tsv() == "5\t2\t7"


class TestSnapshot:
    def test_roundtrip(self, tmp_path):
        g = KnowledgeGraph(
            [Triple("a", "r", "b"), Triple("b", "q", "a"), Triple("a", "r", "a")],
            split_tag="valid",
            extra_entities=["isolated"],
        )
        path = tmp_path / "g.snap"
        save_snapshot(g, path)
        g2 = load_snapshot(path)
        assert g2 == g
        assert g2.split_tag == "valid"
        assert g2.adjacent("isolated") == []

    def test_double_roundtrip_stable(self, tmp_path):
        g = KnowledgeGraph([Triple("x", "r", "y")], extra_entities=["z"])
        p1, p2 = tmp_path / "1.snap", tmp_path / "2.snap"
        save_snapshot(g, p1)
        save_snapshot(load_snapshot(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.snap"
        path.write_bytes(b"NOTASNAPxxxx")
        with pytest.raises(SchemaError):
            load_snapshot(path)

    def test_truncated(self, tmp_path):
        g = KnowledgeGraph([Triple("a", "r", "b")])
        path = tmp_path / "g.snap"
        save_snapshot(g, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(SchemaError):
            load_snapshot(path)


class TestMerge:
    def test_dedup_across_graphs(self):
        g1 = KnowledgeGraph([Triple("a", "r", "b")])
        g2 = KnowledgeGraph([Triple("a", "r", "b"), Triple("c", "r", "d")])
        merged = merge_graphs([g1, g2])
        assert len(merged.triples) == 2
        assert merged.entities == {"a", "b", "c", "d"}

    def test_preserves_isolated_entities(self):
        g1 = KnowledgeGraph([], extra_entities=["lonely"])
        g2 = KnowledgeGraph([Triple("a", "r", "b")])
        assert "lonely" in merge_graphs([g1, g2]).entities
