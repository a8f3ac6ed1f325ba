"""Subcommand front-end for batch runs.

Option precedence is flags > config file (--config, JSON) > environment >
built-in defaults. KGTEXT_DATA_ROOT (or the data_root config key) anchors
relative paths. Exit codes: 0 ok, 2 usage, 3 missing/unreadable file,
4 parse or schema error, 5 other data errors.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataset_pipeline, evaluation, kg_store, llm_prompting, oracle_models
from . import relation_similarity as relsim
from . import text_catalog, verbalizer
from .errors import KgError, ParseError, SchemaError
from .neighborhood import form_neighborhood

log = logging.getLogger(__name__)

ENV_DATA_ROOT = "KGTEXT_DATA_ROOT"

EXIT_OK = 0
EXIT_MISSING_FILE = 3
EXIT_BAD_DATA = 4
EXIT_OTHER = 5


class Settings:
    """Merged view of CLI flags, config file values, and environment."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = {}
        config_path = getattr(args, "config", None)
        if config_path:
            with open(config_path, encoding="utf-8") as f:
                data = json.load(f)
            if not isinstance(data, dict):
                raise SchemaError(f"{config_path}: config file must hold a JSON object")
            self.config = data
        root = self.get("data_root", None)
        self.data_root = root if root is not None else os.environ.get(ENV_DATA_ROOT)

    def get(self, key: str, default=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.config:
            return self.config[key]
        return default

    def path(self, key: str, default=None, required: bool = False):
        value = self.get(key, default)
        if value is None:
            if required:
                raise KgError(f"missing required option --{key.replace('_', '-')}")
            return None
        return self._resolve(value)

    def paths(self, key: str, required: bool = False) -> list:
        value = self.get(key)
        if not value:
            if required:
                raise KgError(f"missing required option --{key.replace('_', '-')}")
            return []
        if isinstance(value, str):
            value = [value]
        return [self._resolve(v) for v in value]

    def _resolve(self, p):
        p = Path(p)
        if not p.is_absolute() and self.data_root:
            return Path(self.data_root) / p
        return p


def _load_graph(s: Settings, key: str = "triples", split: str = "train", required: bool = True):
    snapshot = s.path("snapshot_in") if key == "triples" else None
    if snapshot is not None:
        return kg_store.load_snapshot(snapshot)
    paths = s.paths(key, required=required)
    if not paths:
        return None
    dialect = s.get("dialect", "tsv")
    graphs = [kg_store.ingest_triples(p, dialect=dialect, split_tag=split) for p in paths]
    return graphs[0] if len(graphs) == 1 else kg_store.merge_graphs(graphs, split_tag=split)


def _load_catalog(s: Settings) -> text_catalog.TextCatalog:
    labels = s.path("labels", required=True)
    descriptions = s.path("descriptions")
    relation_labels = s.path("relation_labels", required=True)
    entities = text_catalog.load_raw(labels, descriptions)
    relations = text_catalog.load_raw(relation_labels)
    use_desc = not bool(s.get("id_fallback_only", False))
    return text_catalog.disambiguate(entities, relations, use_descriptions=use_desc)


def _load_matrix(s: Settings) -> relsim.SimilarityMatrix:
    vectors_path = s.path("relation_vectors", required=True)
    cache = s.path("sim_cache")
    checksum = relsim.file_checksum(vectors_path)
    if cache is not None and Path(cache).exists():
        try:
            return relsim.load_matrix_cache(cache, expected_checksum=checksum)
        except SchemaError as e:
            log.warning("rebuilding similarity cache: %s", e)
    matrix = relsim.build_matrix(relsim.load_vectors(vectors_path))
    if cache is not None:
        relsim.save_matrix_cache(matrix, cache, checksum)
    return matrix


def _budget(s: Settings) -> verbalizer.TokenBudget:
    kind = s.get("tokenizer", "whitespace")
    if kind == "whitespace":
        tok = verbalizer.WhitespaceTokenizer()
    elif kind == "subword":
        spec_path = s.path("tokenizer_spec", required=True)
        tok = verbalizer.SubwordTokenizer.from_file(spec_path)
    else:
        raise KgError(f"unknown tokenizer {kind!r}")
    return verbalizer.TokenBudget(max_tokens=int(s.get("max_tokens", 512)), tokenizer=tok)


def _neighborhood_graph(s: Settings, query_graph):
    """Graph the neighborhoods are formed over (label leakage is still
    prevented per query by the excluded-edge rule)."""
    base = _load_graph(s, key="graph", split="train")
    selector = s.get("neighborhood_graph", "graph")
    if selector == "graph":
        return base
    if selector == "graph+queries":
        return kg_store.merge_graphs([base, query_graph], split_tag=base.split_tag)
    raise KgError(f"unknown neighborhood graph selector {selector!r}")


def cmd_ingest(s: Settings) -> int:
    graph = _load_graph(s, split=s.get("split", "train"))
    out = s.path("snapshot")
    if out is not None:
        kg_store.save_snapshot(graph, out)
    print(kg_store.stats(graph).as_tsv())
    return EXIT_OK


def cmd_stats(s: Settings) -> int:
    graph = _load_graph(s, split=s.get("split", "train"))
    print(kg_store.stats(graph).as_tsv())
    return EXIT_OK


def cmd_build_sim(s: Settings) -> int:
    vectors_path = s.path("relation_vectors", required=True)
    out = s.path("out", required=True)
    matrix = relsim.build_matrix(relsim.load_vectors(vectors_path))
    relsim.save_matrix_cache(matrix, out, relsim.file_checksum(vectors_path))
    print(f"{len(matrix.order)}")
    return EXIT_OK


def cmd_emit(s: Settings) -> int:
    query_graph = _load_graph(s, key="queries_from", split=s.get("split", "test"))
    graph = _neighborhood_graph(s, query_graph)
    catalog = _load_catalog(s)
    dump_catalog = s.path("dump_catalog")
    if dump_catalog is not None:
        text_catalog.write_catalog(catalog, dump_catalog)
    matrix = _load_matrix(s)
    budget = _budget(s)
    count = dataset_pipeline.write_dataset(
        dataset_pipeline.emit_queries(query_graph),
        graph,
        catalog,
        matrix,
        budget,
        s.path("out", required=True),
        cap=int(s.get("cap", 512)),
        workers=int(s.get("workers", 0)),
        neighborhood_dump_path=s.path("dump_neighborhoods"),
    )
    print(count)
    return EXIT_OK


def cmd_score(s: Settings) -> int:
    records = list(dataset_pipeline.read_records(s.path("records", required=True)))
    k = int(s.get("sample_size", 50))
    predictions = list(evaluation.read_predictions(s.path("predictions", required=True), k=k))
    catalog = _load_catalog(s)
    filter_paths = s.paths("filter_triples")
    dialect = s.get("dialect", "tsv")
    filter_graphs = [kg_store.ingest_triples(p, dialect=dialect) for p in filter_paths]
    if s.get("unfiltered", False):
        filter_graphs = []
    ks = _parse_ks(s)
    report, _ = evaluation.score_predictions(records, predictions, catalog, filter_graphs, ks=ks)
    print(report.as_tsv())
    print()
    print(report.as_table())
    return EXIT_OK


def cmd_eval_inductive(s: Settings) -> int:
    records = list(dataset_pipeline.read_records(s.path("records", required=True)))
    index = evaluation.EntityIndex.load(s.path("entity_vectors", required=True))
    gen_ids, gen_vectors = relsim.parse_vector_file(s.path("generated_vectors", required=True))
    generated = {qid: gen_vectors[i] for i, qid in enumerate(gen_ids)}
    ks = _parse_ks(s)
    max_k = max(ks)
    results = []
    for record in records:
        vector = generated.get(record.query_id)
        if vector is None:
            raise SchemaError(f"no generated vector for query_id {record.query_id!r}")
        top = evaluation.nearest_entities(vector, index, max_k)
        rank = len(index.ids) + 1
        for pos, (entity_id, _) in enumerate(top, 1):
            if entity_id == record.target_id:
                rank = pos
                break
        results.append(evaluation.RankingResult(query_id=record.query_id, rank=rank, filtered=False))
    hits = {k: evaluation.hits_at_k(results, k) for k in ks}
    em = 0.0
    predictions_path = s.path("predictions")
    if predictions_path is not None:
        by_id = {r.query_id: r for r in records}
        total = 0
        for pred in evaluation.read_predictions(predictions_path, k=int(s.get("sample_size", 50))):
            record = by_id.get(pred.query_id)
            if record is None:
                raise SchemaError(f"prediction for unknown query_id {pred.query_id!r}")
            total += evaluation.exact_match(pred.top_text() or "", record.target_text)
        em = total / len(records)
    else:
        log.warning("no --predictions given; exact match reported as 0")
    hits1 = hits.get(1, evaluation.hits_at_k(results, 1))
    report = evaluation.MetricsReport(
        hits_at=hits,
        exact_match=em,
        combined=evaluation.combined_metric(em, hits1),
        n_queries=len(results),
    )
    print(report.as_tsv())
    print()
    print(report.as_table())
    return EXIT_OK


def cmd_analyze_target(s: Settings) -> int:
    counts = {pos: 0 for pos in evaluation.TARGET_POSITIONS}
    total = 0
    for record in dataset_pipeline.read_records(s.path("records", required=True)):
        vq = dataset_pipeline.verbalized_from_record(record)
        counts[evaluation.classify_target_position(vq, record.target_text)] += 1
        total += 1
    if total == 0:
        raise KgError("no records to analyze")
    for pos in evaluation.TARGET_POSITIONS:
        print(f"{pos}\t{counts[pos]}\t{counts[pos] / total:.6f}")
    return EXIT_OK


def cmd_ablate(s: Settings) -> int:
    query_graph = _load_graph(s, key="queries_from", split=s.get("split", "test"))
    graph = _neighborhood_graph(s, query_graph)
    catalog = _load_catalog(s)
    matrix = _load_matrix(s)
    budget = _budget(s)
    cap = int(s.get("cap", 512))
    limit = int(s.get("limit", 100))
    cases = []
    for query in dataset_pipeline.emit_queries(query_graph):
        if len(cases) >= limit:
            break
        cases.append((query, form_neighborhood(query, graph, matrix, cap=cap)))
    removals = [int(x) for x in str(s.get("removals", "0")).split(",")]

    def model(text):
        return oracle_models.hint_reader_candidates(text, catalog)

    curve = evaluation.neighbor_ablation(
        cases,
        model,
        catalog,
        budget,
        mode=s.get("mode", evaluation.RELEVANT_FIRST),
        removals=removals,
        seed=int(s.get("seed", 0)),
        metric=s.get("metric", "em"),
    )
    for removed, value in curve:
        print(f"{removed}\t{value:.6f}")
    return EXIT_OK


def cmd_prompt(s: Settings) -> int:
    with_neighbors = bool(s.get("with_neighbors", False))
    out_path = s.path("out", required=True)
    n = 0
    with dataset_pipeline.open_text(out_path, "w") as out:
        for record in dataset_pipeline.read_records(s.path("records", required=True)):
            vq = dataset_pipeline.verbalized_from_record(record)
            pair = llm_prompting.build_prompt(vq, with_neighbors)
            out.write(
                json.dumps(
                    {
                        "query_id": record.query_id,
                        "system_text": pair.system_text,
                        "user_text": pair.user_text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            n += 1
    print(n)
    return EXIT_OK


def cmd_oracle(s: Settings) -> int:
    kind = s.get("kind", "memorizer")
    spec = oracle_models.OracleSpec(kind=kind, constant_text=s.get("constant_text", ""))
    records = dataset_pipeline.read_records(s.path("records", required=True))
    graph = _load_graph(s, required=(kind == "memorizer"))
    catalog = _load_catalog(s) if kind in ("memorizer", "hint_reader") else None
    count = oracle_models.run_oracle(
        spec,
        records,
        s.path("out", required=True),
        graph=graph,
        catalog=catalog,
        k=int(s.get("sample_size", 50)),
    )
    print(count)
    return EXIT_OK


def _parse_ks(s: Settings) -> list[int]:
    raw = s.get("ks", "1,3,10")
    if isinstance(raw, (list, tuple)):
        return [int(x) for x in raw]
    return [int(x) for x in str(raw).split(",")]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--data-root", dest="data_root", help=f"base dir for relative paths (or ${ENV_DATA_ROOT})")
    p.add_argument("--dialect", choices=kg_store.DIALECTS, help="triple file dialect (default tsv)")


def _add_catalog(p: argparse.ArgumentParser) -> None:
    p.add_argument("--labels", help="entity label TSV (id<TAB>text)")
    p.add_argument("--descriptions", help="entity description TSV")
    p.add_argument("--relation-labels", dest="relation_labels", help="relation label TSV")
    p.add_argument(
        "--id-fallback-only",
        dest="id_fallback_only",
        action="store_true",
        default=None,
        help="disambiguate colliding labels with id suffixes only, skipping descriptions",
    )


def _add_pipeline(p: argparse.ArgumentParser) -> None:
    p.add_argument("--queries-from", dest="queries_from", nargs="+", help="triple file(s) to emit queries for")
    p.add_argument("--graph", nargs="+", help="triple file(s) forming neighborhoods")
    p.add_argument(
        "--neighborhood-graph",
        dest="neighborhood_graph",
        choices=("graph", "graph+queries"),
        help="which graph supplies neighborhoods (default: --graph files only)",
    )
    p.add_argument("--relation-vectors", dest="relation_vectors", help="relation word-vector file")
    p.add_argument("--sim-cache", dest="sim_cache", help="similarity matrix cache path (.npz)")
    p.add_argument("--cap", type=int, help="neighborhood size cap (default 512)")
    p.add_argument("--max-tokens", dest="max_tokens", type=int, help="token budget (default 512)")
    p.add_argument("--tokenizer", choices=("whitespace", "subword"), help="token counter")
    p.add_argument("--tokenizer-spec", dest="tokenizer_spec", help="vocabulary file for the subword tokenizer")
    p.add_argument("--split", help="split tag for ingested query triples")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgtext", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse triple files and write a binary snapshot")
    _add_common(p)
    p.add_argument("--triples", nargs="+", help="triple file(s)")
    p.add_argument("--split", help="split tag (default train)")
    p.add_argument("--snapshot", help="snapshot output path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="print entity/relation/triple counts as TSV")
    _add_common(p)
    p.add_argument("--triples", nargs="+", help="triple file(s)")
    p.add_argument("--snapshot-in", dest="snapshot_in", help="read a snapshot instead of triple files")
    p.add_argument("--split", help="split tag (default train)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-sim", help="build and cache the relation similarity matrix")
    _add_common(p)
    p.add_argument("--relation-vectors", dest="relation_vectors", help="relation word-vector file")
    p.add_argument("--out", help="cache output path (.npz)")
    p.set_defaults(func=cmd_build_sim)

    p = sub.add_parser("emit", help="write the verbalized dataset records")
    _add_common(p)
    _add_catalog(p)
    _add_pipeline(p)
    p.add_argument("--out", help="records output path (.jsonl or .jsonl.gz)")
    p.add_argument("--dump-neighborhoods", dest="dump_neighborhoods", help="optional neighborhood dump path")
    p.add_argument("--dump-catalog", dest="dump_catalog", help="write the disambiguated catalog TSV for auditing")
    p.add_argument("--workers", type=int, help="parallel verbalization workers")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("score", help="score sampled predictions with filtered ranking")
    _add_common(p)
    _add_catalog(p)
    p.add_argument("--records", help="dataset records file")
    p.add_argument("--predictions", help="prediction records file")
    p.add_argument("--filter-triples", dest="filter_triples", nargs="+", help="graphs supplying known true answers")
    p.add_argument("--unfiltered", action="store_true", default=None, help="skip the filtering step")
    p.add_argument("--ks", help="comma-separated Hits@k cutoffs (default 1,3,10)")
    p.add_argument("--sample-size", dest="sample_size", type=int, help="max candidates per query (default 50)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval-inductive", help="nearest-entity evaluation over vector files")
    _add_common(p)
    p.add_argument("--records", help="dataset records file")
    p.add_argument("--entity-vectors", dest="entity_vectors", help="unit-normalized entity vector file")
    p.add_argument("--generated-vectors", dest="generated_vectors", help="vectors of generated strings, keyed by query_id")
    p.add_argument("--predictions", help="prediction records (for exact match)")
    p.add_argument("--ks", help="comma-separated Hits@k cutoffs (default 1,3,10)")
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.set_defaults(func=cmd_eval_inductive)

    p = sub.add_parser("analyze-target", help="classify where each target surfaces in its input")
    _add_common(p)
    p.add_argument("--records", help="dataset records file")
    p.set_defaults(func=cmd_analyze_target)

    p = sub.add_parser("ablate", help="neighbor ablation curve with the hint-reader oracle")
    _add_common(p)
    _add_catalog(p)
    _add_pipeline(p)
    p.add_argument("--mode", choices=(evaluation.RELEVANT_FIRST, evaluation.RANDOM_ORDER))
    p.add_argument("--removals", help="comma-separated removal counts (default 0)")
    p.add_argument("--seed", type=int, help="shuffle seed for random mode")
    p.add_argument("--limit", type=int, help="number of queries to ablate (default 100)")
    p.add_argument("--metric", choices=("em", "target_log_prob"))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("prompt", help="emit zero-shot chat prompts for records")
    _add_common(p)
    p.add_argument("--records", help="dataset records file")
    p.add_argument("--with-neighbors", dest="with_neighbors", action="store_true", default=None)
    p.add_argument("--out", help="prompt records output path")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("oracle", help="run a deterministic oracle model over records")
    _add_common(p)
    _add_catalog(p)
    p.add_argument("--records", help="dataset records file")
    p.add_argument("--kind", choices=oracle_models.ORACLE_KINDS, help="oracle kind (default memorizer)")
    p.add_argument("--triples", nargs="+", help="train graph for the memorizer")
    p.add_argument("--constant-text", dest="constant_text", help="answer for the constant oracle")
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--out", help="predictions output path")
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args)
        return args.func(settings)
    except (ParseError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (KgError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
