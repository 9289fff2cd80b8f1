"""Command-line interface: ingest -> index -> build-data -> train -> probe/evaluate.

Every subcommand reads and writes only declared artifact paths and leaves a
manifest echoing the resolved configuration and seed in its output
directory, so a run is reproducible from the artifacts alone.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data_builder, index_io, metrics, model as model_mod, probes
from .config import ExperimentConfig, read_config_file, resolve_config, subsystem_seed, write_manifest
from .corpus import Corpus, read_ids_json, read_jsonl_file, write_corpus_jsonl, write_ids_json
from .data_builder import BuilderConfig, build_mode_examples, build_signals, build_training_set
from .decode import StudentSearcher
from .errors import ConfigError, DependencyError, GenretError
from .ranking import read_trec_run, write_trec_run
from .retrievers import (
    Bm25Index,
    Bm25Searcher,
    DenseIndex,
    DenseSearcher,
    ReferenceScorer,
    build_bm25_index,
    build_dense_index,
)
from .semantic_ids import assign_semantic_ids
from .trie import DocidTrie

CONFIG_FLAGS = (
    "id_scheme",
    "semantic_branching",
    "semantic_leaf_size",
    "teacher",
    "bm25_k1",
    "bm25_b",
    "dense_dim",
    "segment_len",
    "overlap",
    "n_variants",
    "pq_max_len",
    "dropout_p",
    "k_segment",
    "k_pseudo",
    "fanout",
    "filter_fragments",
    "mode",
    "emb_dim",
    "hidden_dim",
    "max_positions",
    "learning_rate",
    "momentum",
    "clip_norm",
    "steps",
    "batch_size",
    "dm_index_fraction",
    "beam",
    "seed",
    "threads",
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file; flags override it")
    for key in CONFIG_FLAGS:
        flag = "--" + key.replace("_", "-")
        if key == "filter_fragments":
            parser.add_argument(flag, default=None, choices=("true", "false"))
        else:
            parser.add_argument(flag, default=None)


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else None
    overrides = {key: getattr(args, key) for key in CONFIG_FLAGS}
    return resolve_config(file_values, overrides)


def _load_corpus(directory) -> Corpus:
    path = Path(directory)
    corpus_file = path / "corpus.jsonl"
    ids_file = path / "ids.json"
    if not corpus_file.exists():
        raise DependencyError(f"missing corpus file: {corpus_file}")
    corpus = read_jsonl_file(corpus_file)
    if ids_file.exists():
        corpus = read_ids_json(corpus, ids_file)
    return corpus


def _load_checkpoint_dir(directory) -> model_mod.TinyGenModel:
    return model_mod.load_checkpoint(Path(directory) / "checkpoint.bin")


def _load_searcher(kind: str, cfg: ExperimentConfig, corpus: Corpus, index_dir=None, checkpoint=None, task=None):
    if kind in ("bm25", "dense"):
        if index_dir is None:
            raise DependencyError(f"--index is required for system {kind!r}")
        index = index_io.load_index(index_dir)
        if kind == "bm25":
            if not isinstance(index, Bm25Index):
                raise ConfigError(f"{index_dir} is not a bm25 index")
            return Bm25Searcher(index)
        if not isinstance(index, DenseIndex):
            raise ConfigError(f"{index_dir} is not a dense index")
        return DenseSearcher(index)
    if kind == "student":
        if checkpoint is None:
            raise DependencyError("--checkpoint is required for system 'student'")
        trained = _load_checkpoint_dir(checkpoint)
        trie = DocidTrie(corpus.id_string(i) for i in range(len(corpus)))
        return StudentSearcher(trained, trie, task=task or "index", beam=cfg.beam)
    raise ConfigError(f"unknown system {kind!r}; expected bm25, dense or student")


def _load_reference(name: str, index_dir) -> ReferenceScorer:
    if index_dir is None:
        raise DependencyError("--reference-index is required")
    index = index_io.load_index(index_dir)
    if name == "bm25":
        if not isinstance(index, Bm25Index):
            raise ConfigError(f"{index_dir} is not a bm25 index")
        return ReferenceScorer("bm25", bm25_index=index)
    if name in ("dense", "dense-cosine"):
        if not isinstance(index, DenseIndex):
            raise ConfigError(f"{index_dir} is not a dense index")
        return ReferenceScorer("dense-cosine", dense_index=index)
    raise ConfigError(f"unknown reference scorer {name!r}")


def _read_eval_queries(path) -> list[tuple[str, str]]:
    """`qid<TAB>query_text` lines for run export and evaluation."""
    queries = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            qid, _, text = line.partition("\t")
            queries.append((qid, text))
    return queries


def cmd_ingest(args) -> int:
    cfg = _resolve(args)
    corpus = read_jsonl_file(args.input)
    if cfg.id_scheme == "naive":
        from .corpus import assign_naive_ids

        corpus = assign_naive_ids(corpus)
    elif cfg.id_scheme == "semantic":
        from .corpus import assign_naive_ids

        embeddings_index = build_dense_index(
            assign_naive_ids(corpus), dimension=cfg.dense_dim, seed=subsystem_seed(cfg.seed, "dense-projection")
        )
        corpus = assign_semantic_ids(
            corpus,
            embeddings_index.doc_vectors,
            branching=cfg.semantic_branching,
            leaf_size=cfg.semantic_leaf_size,
            seed=subsystem_seed(cfg.seed, "semantic-ids"),
        )
    else:
        raise ConfigError(f"unknown id scheme {cfg.id_scheme!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus_jsonl(corpus, out / "corpus.jsonl")
    write_ids_json(corpus, out / "ids.json")
    write_manifest(out, "ingest", cfg, {"n_docs": len(corpus), "input": str(args.input)})
    print(f"ingested {len(corpus)} documents -> {out}")
    return 0


def cmd_index(args) -> int:
    cfg = _resolve(args)
    corpus = _load_corpus(args.corpus)
    extra = {"command": "index", "config": cfg.as_dict(), "seed": cfg.seed}
    if args.type == "bm25":
        index = build_bm25_index(corpus, k1=cfg.bm25_k1, b=cfg.bm25_b)
        index_io.save_bm25_index(index, args.out, extra=extra)
    elif args.type == "dense":
        index = build_dense_index(corpus, dimension=cfg.dense_dim, seed=subsystem_seed(cfg.seed, "dense-projection"))
        index_io.save_dense_index(index, args.out, extra=extra)
    else:
        raise ConfigError(f"unknown index type {args.type!r}")
    print(f"built {args.type} index over {len(corpus)} docs -> {args.out}")
    return 0


def cmd_build_data(args) -> int:
    cfg = _resolve(args)
    corpus = _load_corpus(args.corpus)
    teacher = _load_searcher(cfg.teacher, cfg, corpus, index_dir=args.teacher_index)
    builder_cfg = BuilderConfig(
        segment_len=cfg.segment_len,
        overlap=cfg.overlap,
        n_variants=cfg.n_variants,
        pq_max_len=cfg.pq_max_len,
        dropout_p=cfg.dropout_p,
        k_segment=cfg.k_segment,
        k_pseudo=cfg.k_pseudo,
        fanout=cfg.fanout,
        filter_fragments=cfg.filter_fragments,
        seed=subsystem_seed(cfg.seed, "pseudo-queries"),
    )
    user_queries = data_builder.read_queries_tsv(args.queries) if args.queries else None
    overrides = data_builder.read_pseudo_query_tsv(args.pq_overrides) if args.pq_overrides else None
    pool, report = build_training_set(corpus, teacher, builder_cfg, user_queries, overrides)
    signals = build_signals(pool, teacher, fanout=cfg.fanout)
    phases = build_mode_examples(pool, signals, cfg.mode, seed=subsystem_seed(cfg.seed, "task-mixer"))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fragments.jsonl", "w", encoding="utf-8") as handle:
        for fragment in pool.entries:
            handle.write(
                json.dumps(
                    {"text": fragment.text, "owner": fragment.owner_docid, "kind": fragment.kind},
                    ensure_ascii=False,
                )
                + "\n"
            )
    phase_files = []
    for i, phase in enumerate(phases, start=1):
        name = f"examples_phase{i}.jsonl"
        data_builder.write_examples_jsonl(phase, out / name)
        phase_files.append(name)
    write_manifest(
        out,
        "build-data",
        cfg,
        {"counts": report, "phases": phase_files, "n_examples": sum(len(p) for p in phases)},
    )
    print(f"built {sum(len(p) for p in phases)} examples ({cfg.mode}) -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    corpus = _load_corpus(args.corpus)
    data_dir = Path(args.data)
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise DependencyError(f"missing training-data manifest: {manifest_path}")
    data_manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    phases = [
        data_builder.read_examples_jsonl(data_dir / name) for name in data_manifest.get("phases", [])
    ]
    if not phases:
        raise DependencyError(f"no example phases listed in {manifest_path}")

    vocab = model_mod.build_vocab(corpus)
    trained = model_mod.new_model(
        vocab,
        model_mod.ModelConfig(
            emb_dim=cfg.emb_dim,
            hidden_dim=cfg.hidden_dim,
            max_positions=cfg.max_positions,
            learning_rate=cfg.learning_rate,
            momentum=cfg.momentum,
            clip_norm=cfg.clip_norm,
            seed=subsystem_seed(cfg.seed, "model-init"),
        ),
    )
    trie = DocidTrie(corpus.id_string(i) for i in range(len(corpus)))
    if len(phases) == 1:
        phase_steps = [cfg.steps]
    else:
        first = int(round(cfg.steps * cfg.dm_index_fraction))
        phase_steps = [first, cfg.steps - first]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for phase_no, (examples, steps) in enumerate(zip(phases, phase_steps), start=1):
        reports.extend(
            model_mod.train(
                trained,
                examples,
                steps=steps,
                batch_size=cfg.batch_size,
                seed=subsystem_seed(cfg.seed, f"train-batches-{phase_no}"),
                trie=trie,
            )
        )
    model_mod.save_checkpoint(trained, out / "checkpoint.bin")
    with open(out / "train_log.tsv", "w", encoding="utf-8") as handle:
        handle.write("step\tloss\tindex_examples\tretrieve_examples\n")
        for report in reports:
            handle.write(
                f"{report.step}\t{report.loss:.6f}\t{report.task_mix_counts[0]}\t{report.task_mix_counts[1]}\n"
            )
    write_manifest(
        out,
        "train",
        cfg,
        {
            "final_loss": reports[-1].loss if reports else None,
            "total_steps": len(reports),
            "phases": phase_steps,
            "mode": data_manifest["config"]["mode"],
        },
    )
    print(f"trained {len(reports)} steps (final loss {reports[-1].loss:.4f}) -> {out}")
    return 0


def cmd_probe(args) -> int:
    cfg = _resolve(args)
    corpus = _load_corpus(args.corpus)
    system = _load_searcher(
        args.system, cfg, corpus, index_dir=args.index, checkpoint=args.checkpoint, task=args.task
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.which == "exclusivity":
        cutoffs = tuple(int(c) for c in str(args.cutoffs).split(","))
        pseudo = data_builder.read_queries_tsv(args.pseudo_queries) if args.pseudo_queries else None
        report = probes.exclusivity_probe(
            system,
            corpus,
            cutoffs=cutoffs,
            pseudo_queries=pseudo,
            sample_size=args.sample,
            seed=subsystem_seed(cfg.seed, "exclusivity-sample"),
            threads=cfg.threads,
        )
        (out / "exclusivity.tsv").write_text(report.to_tsv(), encoding="utf-8")
    elif args.which == "completeness":
        if not args.queries:
            raise DependencyError("completeness probe needs --queries")
        reference = _load_reference(args.reference, args.reference_index)
        pairs = data_builder.read_queries_tsv(args.queries)
        report = probes.completeness_probe(
            system,
            corpus,
            pairs,
            reference,
            chunk_len=args.chunk_len,
            overlap=args.chunk_overlap,
            top_chunks=args.top_chunks,
            threads=cfg.threads,
        )
        (out / "completeness.tsv").write_text(report.to_tsv(), encoding="utf-8")
    elif args.which == "ros":
        if not args.queries:
            raise DependencyError("ros probe needs --queries")
        reference = _load_reference(args.reference, args.reference_index)
        texts = [text for text, _ in data_builder.read_queries_tsv(args.queries)]
        curve = probes.ros_probe(
            system,
            reference,
            texts,
            corpus,
            p_max=args.p_max,
            n_random=args.n_random,
            seed=subsystem_seed(cfg.seed, "ros-random-docs"),
        )
        (out / "ros.tsv").write_text(curve.to_tsv(), encoding="utf-8")
    else:
        raise ConfigError(f"unknown probe {args.which!r}")
    write_manifest(out, f"probe-{args.which}", cfg, {"system": args.system})
    print(f"probe {args.which} ({args.system}) -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    runs = read_trec_run(args.run)
    qrels = metrics.read_qrels_file(args.qrels)
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    means = {}
    tables = {}
    for name in names:
        table = metrics.evaluate_runs(runs, qrels, name)
        tables[name] = table
        means[name] = table.mean
        (out / f"{name.replace('@', '_at_')}.tsv").write_text(table.to_tsv(), encoding="utf-8")
    extra = {"means": means, "run": str(args.run)}
    if args.compare:
        other_runs = read_trec_run(args.compare)
        lines = ["metric\tt\tp"]
        for name in names:
            other = metrics.evaluate_runs(other_runs, qrels, name)
            a, b = metrics.align_for_test(tables[name], other)
            t, p = metrics.paired_t_test(a, b)
            lines.append(f"{name}\t{t:.6f}\t{p:.6g}")
        (out / "ttest.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        extra["compare"] = str(args.compare)
    write_manifest(out, "evaluate", cfg, extra)
    for name in names:
        print(f"{name}: {means[name]:.4f} over {len(tables[name].per_query)} queries")
    return 0


def cmd_export_run(args) -> int:
    cfg = _resolve(args)
    corpus = _load_corpus(args.corpus)
    system = _load_searcher(
        args.system, cfg, corpus, index_dir=args.index, checkpoint=args.checkpoint, task=args.task
    )
    queries = _read_eval_queries(args.queries)
    runs = []
    for qid, text in queries:
        result = system.search(text, args.k)
        runs.append(
            result if result.query_key == qid else type(result)(query_key=qid, entries=result.entries)
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trec_run(runs, out / "run.trec", tag=args.tag)
    write_manifest(out, "export-run", cfg, {"system": args.system, "n_queries": len(queries), "k": args.k})
    print(f"wrote {len(queries)} query runs -> {out / 'run.trec'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genret", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="JSONL documents -> corpus directory with docids")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="corpus directory -> bm25 or dense index directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--type", required=True, choices=("bm25", "dense"))
    _add_config_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("build-data", help="corpus + teacher index -> training examples")
    p.add_argument("--corpus", required=True)
    p.add_argument("--teacher-index", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--queries", help="user queries TSV: query_text<TAB>owner_docid")
    p.add_argument("--pq-overrides", help="pseudo-query override TSV: doc_key<TAB>query_text")
    _add_config_flags(p)
    p.set_defaults(func=cmd_build_data)

    p = sub.add_parser("train", help="training examples -> model checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="run an ability probe against a system")
    p.add_argument("which", choices=("exclusivity", "completeness", "ros"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--system", required=True, choices=("bm25", "dense", "student"))
    p.add_argument("--index", help="index directory for bm25/dense systems")
    p.add_argument("--checkpoint", help="checkpoint directory for the student system")
    p.add_argument("--task", default="index", choices=("index", "retrieve"))
    p.add_argument("--out", required=True)
    p.add_argument("--cutoffs", default="16,32,64,128")
    p.add_argument("--sample", type=int, default=None)
    p.add_argument("--pseudo-queries", help="TSV: query_text<TAB>owner_docid")
    p.add_argument("--queries", help="TSV: query_text<TAB>owner_docid")
    p.add_argument("--reference", default="dense")
    p.add_argument("--reference-index")
    p.add_argument("--chunk-len", type=int, default=16)
    p.add_argument("--chunk-overlap", type=int, default=4)
    p.add_argument("--top-chunks", type=int, default=3)
    p.add_argument("--p-max", type=int, default=10)
    p.add_argument("--n-random", type=int, default=10)
    _add_config_flags(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("evaluate", help="TREC run + qrels -> metric tables")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default="hits@1,hits@10,ndcg@10,p@10")
    p.add_argument("--compare", help="second TREC run for a paired t-test")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-run", help="search a query file and write a TREC run")
    p.add_argument("--corpus", required=True)
    p.add_argument("--system", required=True, choices=("bm25", "dense", "student"))
    p.add_argument("--index")
    p.add_argument("--checkpoint")
    p.add_argument("--task", default="index", choices=("index", "retrieve"))
    p.add_argument("--queries", required=True, help="TSV: qid<TAB>query_text")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--tag", default="genret")
    _add_config_flags(p)
    p.set_defaults(func=cmd_export_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GenretError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
