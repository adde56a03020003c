"""Operator surface: subcommands wiring the pipeline end to end.

    amrkit preprocess --amr F --conllu F --out DIR
    amrkit oracle     --archive DIR --out DIR [embedding flags]
    amrkit train      --samples F --out DIR [hyperparameters | --search N]
    amrkit parse      --model-dir DIR --input F --out F [embedding flags]
    amrkit evaluate   --pred F --gold F [--metrics ...]

Every subcommand is deterministic given --seed.  Artifacts land in the out
directory together with a resolved-config snapshot and a manifest of output
hashes.  Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import aligner as aligner_mod
from .corpus import (
    CorpusError,
    load_alignment_file,
    load_amr_file,
    load_conllu_annotations,
    read_archive,
    write_archive,
    zip_examples,
)
from .embeddings import (
    EmbeddingConfig,
    EmbeddingError,
    Embeddings,
    MissingEmbedding,
    load_contextual,
    load_static,
)
from .features import FeatureTemplate, Tagsets
from .graph import normalize_inverse_edges, reentrancy_count, serialize_penman
from .network import (
    SearchSpace,
    TrainConfig,
    TrainingError,
    load_model,
    per_class_recall,
    random_search,
    save_model,
    train as train_model,
)
from .oracle import CLASSIFIERS, OracleError, emit_training_samples, run_oracle
from .parser import GreedyParser, ModelMismatch, ParserError, Predictor, parse_corpus
from .samplefile import (
    DENSE,
    INDEXED,
    SampleFileError,
    materialize_rows,
    read_samples,
    write_samples,
)
from .smatch import METRIC_NAMES, corpus_score, format_records, format_report
from .transition import ConceptTable, build_concept_table

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

SAMPLE_FILES = {name: f"samples.{name}.bin" for name in CLASSIFIERS}
MODEL_FILES = {name: f"model.{name}.bin" for name in CLASSIFIERS}


class DataError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# Run-directory bookkeeping
# ---------------------------------------------------------------------------

def _write_config_snapshot(out_dir, command, args):
    skip = {"func", "config"}
    lines = [
        f"{key}={getattr(args, key)}"
        for key in sorted(vars(args))
        if key not in skip
    ]
    (out_dir / f"{command}.config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_manifest(out_dir, command, artifacts):
    lines = []
    for name in sorted(artifacts):
        digest = hashlib.sha256(Path(name).read_bytes()).hexdigest()
        lines.append(f"{digest}  {Path(name).name}")
    (out_dir / f"{command}.manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Embedding plumbing shared by oracle/parse
# ---------------------------------------------------------------------------

def _add_embedding_flags(sub):
    sub.add_argument("--embeddings", choices=["static", "contextual"], default="static",
                     help="word-vector source")
    sub.add_argument("--static-table", help="GloVe-format text file")
    sub.add_argument("--contextual-store", help="AMRE embedding file")
    sub.add_argument("--concept-embeddings", choices=["static", "none"], default="static")
    sub.add_argument("--concept-dim", type=int, default=None,
                     help="concept width when --concept-embeddings none")


def _build_embeddings(args, config=None):
    config = config or EmbeddingConfig(
        word_source=args.embeddings,
        concept_source=args.concept_embeddings,
        concept_dim=args.concept_dim,
    )
    static = None
    contextual = None
    if config.word_source == "static" or config.concept_source == "static":
        if not args.static_table:
            raise DataError("--static-table is required for static embeddings")
        static = load_static(args.static_table)
    if config.word_source == "contextual":
        if not args.contextual_store:
            raise DataError("--contextual-store is required for contextual embeddings")
        contextual = load_contextual(args.contextual_store)
    return Embeddings(config, static=static, contextual=contextual)


def _check_contextual_coverage(embeddings, examples_or_sentences):
    if embeddings.config.word_source != "contextual":
        return
    missing = []
    for item in examples_or_sentences:
        sentence = getattr(item, "sentence", item)
        if not embeddings.contextual.has_sentence(sentence.sentence_id):
            missing.append(sentence.sentence_id)
        elif embeddings.contextual.token_count(sentence.sentence_id) < len(sentence.tokens):
            missing.append(sentence.sentence_id)
    if missing:
        raise DataError(
            "contextual store does not cover sentences: " + " ".join(sorted(missing))
        )


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def cmd_preprocess(args):
    out = _out_dir(args)
    records, errors = load_amr_file(args.amr)
    try:
        annotations = load_conllu_annotations(args.conllu)
    except CorpusError as exc:
        raise DataError(f"{args.conllu}: {exc}")
    external = load_alignment_file(args.alignments) if args.alignments else None
    examples, zip_errors = zip_examples(records, annotations, alignments=external)
    errors = errors + zip_errors
    if errors:
        for error in errors:
            print(f"error: {error}", file=sys.stderr)
        raise DataError(f"{len(errors)} ingest errors")

    aligned_by_tool = 0
    for example in examples:
        if len(example.alignment) == 0 and len(example.graph.nodes) > 0:
            example.alignment = aligner_mod.align(example.sentence, example.graph)
            aligned_by_tool += 1

    table = build_concept_table(examples)
    archive = out / "examples.jsonl"
    write_archive(examples, archive)
    table_path = out / "concept_table.tsv"
    table.write(table_path)

    total_nodes = sum(len(ex.graph.nodes) for ex in examples)
    aligned_nodes = sum(len(ex.alignment) for ex in examples)
    reentrant = sum(1 for ex in examples if reentrancy_count(ex.graph) > 0)
    nonprojective = sum(1 for ex in examples if _is_nonprojective(ex))
    stats = [
        f"examples: {len(examples)}",
        f"alignment-coverage: {aligned_nodes / total_nodes:.4f}" if total_nodes else
        "alignment-coverage: 0.0",
        f"heuristically-aligned-sentences: {aligned_by_tool}",
        f"reentrancy-incidence: {reentrant / len(examples):.4f}" if examples else
        "reentrancy-incidence: 0.0",
        f"non-projectivity-incidence: {nonprojective / len(examples):.4f}" if examples else
        "non-projectivity-incidence: 0.0",
    ]
    stats_path = out / "stats.txt"
    stats_path.write_text("\n".join(stats) + "\n", encoding="utf-8")
    _write_config_snapshot(out, "preprocess", args)
    _write_manifest(out, "preprocess", [archive, table_path, stats_path])
    print("\n".join(stats))
    return EXIT_OK


def _is_nonprojective(example):
    """Crossing aligned gold edges, judged on token positions."""
    norm = normalize_inverse_edges(example.graph)
    spans = []
    for edge in norm.edges:
        a = example.alignment.token_for(edge.source)
        b = example.alignment.token_for(edge.target)
        if a is None or b is None or a == b:
            continue
        spans.append((min(a, b), max(a, b)))
    for i, (a1, b1) in enumerate(spans):
        for a2, b2 in spans[i + 1 :]:
            if a1 < a2 < b1 < b2 or a2 < a1 < b2 < b1:
                return True
    return False


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args):
    out = _out_dir(args)
    archive = Path(args.archive) / "examples.jsonl"
    if not archive.exists():
        raise DataError(f"no examples.jsonl under {args.archive}")
    examples = read_archive(archive)
    if not examples:
        raise DataError("archive holds no examples")
    embeddings = _build_embeddings(args)
    _check_contextual_coverage(embeddings, examples)

    if args.manifest_from:
        source = Path(args.manifest_from) / "feature_manifest.txt"
        if not source.exists():
            raise DataError(f"no feature_manifest.txt under {args.manifest_from}")
        template, _ = FeatureTemplate.from_manifest(source.read_text(encoding="utf-8"))
        if template.use_dependency == args.no_dependency_features:
            raise DataError("--no-dependency-features disagrees with the reused manifest")
    else:
        tagsets = Tagsets.from_sentences([ex.sentence for ex in examples])
        template = FeatureTemplate(tagsets, use_dependency=not args.no_dependency_features)
    manifest_text = template.manifest(embeddings)
    manifest_hash = template.manifest_hash(embeddings)
    (out / "feature_manifest.txt").write_text(manifest_text, encoding="utf-8")

    storage = INDEXED if (args.storage == "indexed" or
                          (args.storage == "auto" and args.embeddings == "static")) else DENSE
    if storage == INDEXED and embeddings.config.word_source != "static":
        raise DataError("indexed sample storage needs static word vectors")
    blocks = [(offset, width, kind) for offset, width, kind, _ in
              template.embedded_blocks(embeddings)]

    def make_extractor(example):
        def extract(config):
            dense = template.extract(embeddings, config, example.sentence)
            if storage == INDEXED:
                return template.compress(embeddings, config, example.sentence, dense)
            return dense
        return extract

    def run_one(example):
        result = run_oracle(example)
        return result, emit_training_samples(example, result, make_extractor(example))

    outcomes = []
    if args.jobs <= 1:
        for example in examples:
            try:
                outcomes.append(("ok", run_one(example)))
            except OracleError as exc:
                outcomes.append(("err", f"{example.id}: {exc}"))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_one, example) for example in examples]
            for example, future in zip(examples, futures):
                try:
                    outcomes.append(("ok", future.result()))
                except OracleError as exc:
                    outcomes.append(("err", f"{example.id}: {exc}"))

    per_classifier = {name: ([], []) for name in CLASSIFIERS}
    loss_totals = {}
    failures = []
    for status, payload in outcomes:  # merged in example order regardless of jobs
        if status == "err":
            failures.append(payload)
            continue
        result, samples = payload
        for key, value in result.loss.as_dict().items():
            loss_totals[key] = loss_totals.get(key, 0) + int(value)
        for sample in samples:
            rows, labels = per_classifier[sample.classifier]
            rows.append(sample.features)
            labels.append(sample.label)

    artifacts = [out / "feature_manifest.txt"]
    dense_width = template.width(embeddings)
    row_floats = template.indexed_width(embeddings) if storage == INDEXED else dense_width
    for name in CLASSIFIERS:
        rows, labels = per_classifier[name]
        path = out / SAMPLE_FILES[name]
        matrix = np.stack(rows) if rows else np.zeros((0, row_floats), dtype=np.float32)
        write_samples(path, name, matrix, labels, dense_width=dense_width,
                      storage=storage, manifest_hash=manifest_hash, blocks=blocks)
        artifacts.append(path)

    report = {"failures": failures, **loss_totals}
    loss_path = out / "loss_report.txt"
    loss_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts.append(loss_path)
    _write_config_snapshot(out, "oracle", args)
    _write_manifest(out, "oracle", artifacts)
    if failures:
        for failure in failures:
            print(f"error: {failure}", file=sys.stderr)
        raise DataError(f"oracle failed on {len(failures)} examples")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args):
    out = _out_dir(args)
    try:
        sample_file = read_samples(args.samples)
    except (SampleFileError, FileNotFoundError) as exc:
        raise DataError(str(exc))
    if sample_file.count == 0:
        raise DataError(f"{args.samples}: no samples")
    static = load_static(args.static_table) if args.static_table else None
    try:
        x = materialize_rows(sample_file, static)
    except SampleFileError as exc:
        raise DataError(str(exc))
    y = sample_file.label_ids
    n_classes = len(sample_file.labels)

    dev = None
    if args.dev_samples:
        dev_file = read_samples(args.dev_samples)
        if dev_file.manifest_hash != sample_file.manifest_hash:
            raise DataError("dev samples were built with a different feature manifest")
        dev_x = materialize_rows(dev_file, static)
        remap = [sample_file.labels.index(lbl) if lbl in sample_file.labels else -1
                 for lbl in dev_file.labels]
        dev_y = np.array([remap[i] for i in dev_file.label_ids], dtype=np.int64)
        keep = dev_y >= 0
        dev = (dev_x[keep], dev_y[keep])

    config = TrainConfig(
        hidden_layers=args.hidden_layers,
        hidden_width=args.hidden_width,
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        patience=args.patience,
    )
    if args.search:
        space = SearchSpace(trials=args.search, epochs=args.epochs,
                            hidden_layers=(1, 2, 6), hidden_width=(32, 64, 128),
                            batch_size=(16, 32, 64))
        if dev is None:
            rng = np.random.default_rng(args.seed)
            order = rng.permutation(len(x))
            n_dev = max(1, len(x) // 10)
            dev = (x[order[:n_dev]], y[order[:n_dev]])
            x, y = x[order[n_dev:]], y[order[n_dev:]]
        config, trial_log = random_search(space, x, y, n_classes, dev, seed=args.seed)
        (out / f"search.{sample_file.classifier}.jsonl").write_text(
            "\n".join(
                json.dumps({"trial": t["trial"], "dev_accuracy": t["dev_accuracy"],
                            "config": vars(t["config"])})
                for t in trial_log
            ) + "\n",
            encoding="utf-8",
        )

    try:
        model, metrics = train_model(x, y, n_classes, config, dev=dev)
    except TrainingError as exc:
        raise DataError(str(exc))
    model_path = out / MODEL_FILES[sample_file.classifier]
    save_model(model_path, model, sample_file.classifier, sample_file.manifest_hash,
               sample_file.labels)
    metrics_path = out / f"metrics.{sample_file.classifier}.jsonl"
    metrics_path.write_text(
        "\n".join(json.dumps(m) for m in metrics) + "\n", encoding="utf-8"
    )
    _write_config_snapshot(out, f"train.{sample_file.classifier}", args)
    _write_manifest(out, f"train.{sample_file.classifier}", [model_path, metrics_path])
    final = metrics[-1] if metrics else {}
    recall_x, recall_y = dev if dev is not None else (x, y)
    summary = {
        "classifier": sample_file.classifier,
        "epochs_run": len(metrics),
        "dev_accuracy": final.get("dev_accuracy"),
        "per_class_recall": per_class_recall(model, recall_x, recall_y, sample_file.labels),
    }
    print(json.dumps(summary))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parse
# ---------------------------------------------------------------------------

def cmd_parse(args):
    model_dir = Path(args.model_dir)
    manifest_path = model_dir / "feature_manifest.txt"
    if not manifest_path.exists():
        raise DataError(f"no feature_manifest.txt under {model_dir}")
    template, meta = FeatureTemplate.from_manifest(manifest_path.read_text(encoding="utf-8"))
    described = meta["embedding"]
    config = EmbeddingConfig(
        word_source=described["word-source"],
        concept_source=described["concept-source"],
        pooling=described.get("pooling", "span-average"),
        layer=described.get("layer", "penultimate"),
        concept_dim=None if described.get("concept-dim") in (None, "None")
        else int(described["concept-dim"]),
    )
    embeddings = _build_embeddings(args, config=config)

    table_path = model_dir / "concept_table.tsv"
    if not table_path.exists():
        raise DataError(f"no concept_table.tsv under {model_dir}")
    concept_table = ConceptTable.read(table_path)

    predictors = {}
    hashes = {}
    for name in CLASSIFIERS:
        path = model_dir / MODEL_FILES[name]
        if not path.exists():
            raise DataError(f"missing model file {path}")
        model, classifier, manifest_hash, labels = load_model(path)
        if classifier != name:
            raise DataError(f"{path} holds a {classifier} model, expected {name}")
        predictors[name] = Predictor(model, labels)
        hashes[name] = manifest_hash

    try:
        annotations = load_conllu_annotations(args.input)
    except CorpusError as exc:
        raise DataError(f"{args.input}: {exc}")
    sentences = list(annotations.values())
    _check_contextual_coverage(embeddings, sentences)

    try:
        parser = GreedyParser(predictors, concept_table, template, embeddings,
                              reentrancy_threshold=args.reentrancy_threshold,
                              expected_hash=hashes)
    except ModelMismatch as exc:
        raise DataError(str(exc))

    results, failures, stats = parse_corpus(sentences, parser, jobs=args.jobs)
    blocks = []
    for sentence_id, graph in results:
        sentence = annotations[sentence_id]
        text = " ".join(t.surface for t in sentence.tokens)
        blocks.append(
            f"# ::id {sentence_id}\n# ::snt {text}\n# ::tok {text}\n"
            + serialize_penman(graph)
        )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    for sentence_id, message in failures:
        print(f"error: {sentence_id}: {message}", file=sys.stderr)
    print(json.dumps({"parsed": len(results), "failed": len(failures),
                      "repairs": stats["repairs"]}))
    return EXIT_OK if results or not failures else EXIT_DATA


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args):
    pred_records, pred_errors = load_amr_file(args.pred)
    gold_records, gold_errors = load_amr_file(args.gold)
    if pred_errors or gold_errors:
        for error in pred_errors + gold_errors:
            print(f"error: {error}", file=sys.stderr)
        raise DataError("could not read the AMR banks")
    metrics = args.metrics.split(",") if args.metrics else list(METRIC_NAMES)
    unknown = [m for m in metrics if m not in METRIC_NAMES]
    if unknown:
        raise DataError(f"unknown metrics: {', '.join(unknown)}")
    pred = [(r.id, r.graph) for r in pred_records]
    gold = [(r.id, r.graph) for r in gold_records]
    results, errors = corpus_score(pred, gold, metrics=metrics,
                                   restarts=args.restarts, seed=args.seed)
    print(format_report(results))
    if args.out:
        Path(args.out).write_text(format_records(results) + "\n", encoding="utf-8")
    if errors:
        for error in errors:
            print(f"error: {error}", file=sys.stderr)
        raise DataError(f"{len(errors)} id mismatches")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="amrkit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="key=value defaults file; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="ingest corpus files into an archive")
    p.add_argument("--amr", required=True)
    p.add_argument("--conllu", required=True)
    p.add_argument("--alignments", help="external id<TAB>jamr-string file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("oracle", help="derive actions and training samples")
    p.add_argument("--archive", required=True, help="preprocess output directory")
    p.add_argument("--out", required=True)
    _add_embedding_flags(p)
    p.add_argument("--manifest-from", help="reuse a training run's feature manifest "
                                           "(frozen tagsets) for this archive")
    p.add_argument("--storage", choices=["auto", "dense", "indexed"], default="auto")
    p.add_argument("--no-dependency-features", action="store_true",
                   help="ablation: zero all dependency-derived feature coordinates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("train", help="train one classifier")
    p.add_argument("--samples", required=True)
    p.add_argument("--dev-samples")
    p.add_argument("--out", required=True)
    p.add_argument("--static-table", help="needed to materialize indexed samples")
    p.add_argument("--hidden-layers", type=int, default=2)
    p.add_argument("--hidden-width", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--search", type=int, default=0, help="random-search trial count")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse sentences with trained models")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--input", required=True, help="CoNLL-U file of annotated sentences")
    p.add_argument("--out", required=True, help="output AMR bank path")
    _add_embedding_flags(p)
    p.add_argument("--reentrancy-threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("evaluate", help="score predictions against gold graphs")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--metrics", help="comma-separated subset of " + ",".join(METRIC_NAMES))
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--out", help="write machine-readable records here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _coerce(value):
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def _apply_config_file(parser, argv):
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    defaults = {}
    for lineno, line in enumerate(Path(known.config).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{known.config}: line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        defaults[key.strip().replace("-", "_")] = _coerce(value.strip())
    for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        usable = {k: v for k, v in defaults.items()
                  if any(a.dest == k for a in action._actions)}  # noqa: SLF001
        action.set_defaults(**usable)
    return argv


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CorpusError, EmbeddingError, MissingEmbedding, OracleError, ParserError,
            SampleFileError, TrainingError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

