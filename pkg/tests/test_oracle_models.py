import pytest

from kgtext.dataset_pipeline import DatasetRecord, emit_queries, read_records, write_dataset
from kgtext.errors import KgError
from kgtext.evaluation import exact_match, read_predictions, score_predictions
from kgtext.kg_store import KnowledgeGraph, Triple
from kgtext.oracle_models import (
    OracleSpec,
    constant_predict,
    hint_reader_candidates,
    hint_reader_predict,
    memorizer_predict,
    run_oracle,
)

from synth import catalog_from, memorizer_corpus, planted_corpus


def record_for(query_id, input_text, target_text="", **kw):
    return DatasetRecord(
        query_id=query_id,
        input_text=input_text,
        target_text=target_text,
        head_id=kw.get("head_id", "h"),
        relation_id=kw.get("relation_id", "r"),
        target_id=kw.get("target_id", "t"),
        inverse=kw.get("inverse", False),
    )


class TestMemorizer:
    def setup_method(self):
        self.graph = KnowledgeGraph(
            [Triple("h", "r", "t"), Triple("h", "r", "t2"), Triple("x", "r", "t")]
        )
        self.catalog = catalog_from(
            {"h": "H", "t": "T", "t2": "T2", "x": "X"}, {"r": "rel"}
        )

    def test_known_query_hits_its_tail(self):
        record = record_for("0:fwd", "predict H rel", "T")
        p = memorizer_predict(record, self.graph, self.catalog)
        assert [c.text for c in p.candidates] == ["T", "T2"]
        assert p.candidates[0].log_prob == -1.0

    def test_unseen_pair_empty(self):
        record = record_for("9:fwd", "predict X rel", "T", head_id="t2")
        assert memorizer_predict(record, self.graph, self.catalog).candidates == []

    def test_inverse_uses_known_heads(self):
        record = record_for("0:inv", "predict T inverse of rel", "H", head_id="t", inverse=True)
        p = memorizer_predict(record, self.graph, self.catalog)
        assert [c.text for c in p.candidates] == ["H", "X"]

    def test_candidates_in_catalog_order(self):
        catalog = catalog_from({"t2": "T2", "t": "T", "h": "H", "x": "X"}, {"r": "rel"})
        record = record_for("0:fwd", "predict H rel", "T")
        p = memorizer_predict(record, self.graph, catalog)
        assert [c.text for c in p.candidates] == ["T2", "T"]

    def test_end_to_end_unfiltered_hits1(self, tmp_path):
        graph, catalog, matrix, budget = memorizer_corpus(n_triples=50)
        records_path = tmp_path / "records.jsonl"
        write_dataset(emit_queries(graph), graph, catalog, matrix, budget, records_path)
        records = list(read_records(records_path))
        preds_path = tmp_path / "preds.jsonl"
        n = run_oracle(OracleSpec("memorizer"), records, preds_path, graph=graph, catalog=catalog)
        assert n == len(records) == 100
        report, _ = score_predictions(records, read_predictions(preds_path), catalog)
        assert report.hits_at[1] == 1.0
        assert report.exact_match == 1.0


class TestHintReader:
    def test_target_in_only_neighbor_span_is_em_one(self):
        catalog = catalog_from({"h": "H", "t": "Palo Alto"}, {"r": "place of birth", "q": "residence"})
        record = record_for("0:fwd", "predict H place of birth [SEP] residence Palo Alto", "Palo Alto")
        p = hint_reader_predict(record, catalog)
        assert [c.text for c in p.candidates] == ["Palo Alto"]
        assert exact_match(p.candidates[0].text, record.target_text) == 1

    def test_bare_task_input_empty(self):
        catalog = catalog_from({"h": "H"}, {"r": "rel"})
        record = record_for("0:fwd", "predict H rel", "T")
        assert hint_reader_predict(record, catalog).candidates == []

    def test_multiword_relation_prefix_stripped(self):
        catalog = catalog_from(
            {"h": "H", "e": "New York City"}, {"r": "rel", "q": "place of birth"}
        )
        candidates = hint_reader_candidates(
            "predict H rel [SEP] place of birth New York City", catalog
        )
        assert [c.text for c in candidates] == ["New York City"]

    def test_longest_relation_prefix_wins(self):
        catalog = catalog_from(
            {"h": "H"}, {"r": "rel", "a": "place of", "b": "place of birth"}
        )
        candidates = hint_reader_candidates("predict H rel [SEP] place of birth City", catalog)
        assert [c.text for c in candidates] == ["City"]

    def test_inverse_marker_stripped(self):
        catalog = catalog_from({"h": "H", "a": "Apple"}, {"r": "rel", "fb": "founded by"})
        candidates = hint_reader_candidates("predict H rel [SEP] inverse of founded by Apple", catalog)
        assert [c.text for c in candidates] == ["Apple"]

    def test_planted_corpus_em_is_exact_fraction(self, tmp_path):
        train, qgraph, catalog, matrix, budget, planted = planted_corpus(
            n_queries=50, planted_fraction=0.30, n_neighbors=3
        )
        records_path = tmp_path / "records.jsonl"
        write_dataset(emit_queries(qgraph), train, catalog, matrix, budget, records_path)
        forward = [r for r in read_records(records_path) if not r.inverse]
        assert len(forward) == 50
        hits = 0
        for record in forward:
            p = hint_reader_predict(record, catalog)
            top = p.top_text() or ""
            hits += exact_match(top, record.target_text)
        assert hits / len(forward) == pytest.approx(0.30)
        assert hits == 15

    def test_em_equals_first_candidate_match_fraction(self, tmp_path):
        # Cross-reference: corpus EM must equal the fraction of queries whose
        # first hinted candidate matches the target.
        train, qgraph, catalog, matrix, budget, _ = planted_corpus(n_queries=20, n_neighbors=2)
        records_path = tmp_path / "records.jsonl"
        write_dataset(emit_queries(qgraph), train, catalog, matrix, budget, records_path)
        records = [r for r in read_records(records_path) if not r.inverse]
        em = sum(
            exact_match(hint_reader_predict(r, catalog).top_text() or "", r.target_text)
            for r in records
        ) / len(records)
        first_matches = sum(
            1
            for r in records
            if (c := hint_reader_candidates(r.input_text, catalog))
            and exact_match(c[0].text, r.target_text)
        ) / len(records)
        assert em == first_matches


class TestRunOracle:
    def test_bitwise_reproducible(self, tmp_path):
        graph, catalog, matrix, budget = memorizer_corpus(n_triples=10)
        records_path = tmp_path / "records.jsonl"
        write_dataset(emit_queries(graph), graph, catalog, matrix, budget, records_path)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_oracle(OracleSpec("memorizer"), read_records(records_path), p1, graph=graph, catalog=catalog)
        run_oracle(OracleSpec("memorizer"), read_records(records_path), p2, graph=graph, catalog=catalog)
        assert p1.read_bytes() == p2.read_bytes()

    def test_constant(self):
        record = record_for("0:fwd", "predict H rel", "T")
        p = constant_predict(record, "Always This")
        assert [c.text for c in p.candidates] == ["Always This"]

    def test_memorizer_requires_graph(self, tmp_path):
        with pytest.raises(KgError):
            run_oracle(OracleSpec("memorizer"), [], tmp_path / "x.jsonl")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            OracleSpec("psychic")

    def test_candidates_capped_at_k(self):
        graph = KnowledgeGraph([Triple("h", "r", f"t{i}") for i in range(80)])
        catalog = catalog_from(
            {"h": "H", **{f"t{i}": f"T{i}" for i in range(80)}}, {"r": "rel"}
        )
        record = record_for("0:fwd", "predict H rel", "T0")
        p = memorizer_predict(record, graph, catalog, k=50)
        assert len(p.candidates) == 50
