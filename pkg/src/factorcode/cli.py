"""Command-line entry point driving the full annotation pipeline.

Subcommands: ingest, select, train, predict, verify-import, retrain,
evaluate, irr, fairness, synth gen, synth gate, serve.  Exit codes:
0 success, 1 usage error, 2 data error.  Every file-writing run also
writes a manifest recording its inputs (content hashes), configuration
hash, and package version, so identical invocations are byte-reproducible.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence

from . import annotator, corpus, evaluation, fairness, reports, selection, synthtest
from .annotator import AnnotatorError
from .corpus import CorpusError
from .fairness import FairnessError, NoCommonConcepts
from .synthtest import SynthError
from .taxonomy import Taxonomy, TaxonomyError, load_default_taxonomy, load_taxonomy
from .workflow import Store, WorkflowError

DATA_ERRORS = (CorpusError, TaxonomyError, AnnotatorError, FairnessError,
               SynthError, WorkflowError, evaluation.EvaluationError,
               FileNotFoundError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fp:
        for chunk in iter(lambda: fp.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _package_version() -> str:
    try:
        return metadata.version("factorcode")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out_dir: Path, command: str, args: dict,
                   inputs: Sequence[Path], outputs: Sequence[str],
                   seed: int, config: dict | None = None) -> None:
    config_blob = json.dumps(
        {"command": command, "args": args, "seed": seed, "config": config or {}},
        sort_keys=True)
    manifest = {
        "command": command,
        "args": args,
        "seed": seed,
        "config_hash": hashlib.sha256(config_blob.encode("utf-8")).hexdigest(),
        "inputs": {str(p): _sha256(Path(p)) for p in sorted(map(str, inputs))},
        "outputs": sorted(outputs),
        "package_version": _package_version(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_taxonomy_arg(path: str | None) -> Taxonomy:
    return load_taxonomy(path) if path else load_default_taxonomy()


def _config_data(ns: argparse.Namespace) -> dict:
    return getattr(ns, "_config_data", None) or {}


def _corpus_config(ns: argparse.Namespace) -> corpus.CorpusConfig:
    """CorpusConfig from the optional --config JSON.

    Recognized keys: strip_chars (string), abbreviations, heading_patterns,
    ethnic_groups, outcomes (lists).
    """
    data = _config_data(ns)
    normalize = corpus.NormalizeConfig(
        strip_chars=frozenset(data["strip_chars"])
    ) if "strip_chars" in data else corpus.NormalizeConfig()
    segment = corpus.SegmentConfig(
        abbreviations=tuple(data["abbreviations"])
    ) if "abbreviations" in data else corpus.SegmentConfig()
    sections = corpus.SectionConfig(
        heading_patterns=tuple(data.get("heading_patterns", ())))
    return corpus.CorpusConfig(
        normalize=normalize,
        segment=segment,
        sections=sections,
        ethnic_groups=frozenset(data.get("ethnic_groups",
                                         corpus.DEFAULT_ETHNIC_GROUPS)),
        outcomes=frozenset(data.get("outcomes", corpus.DEFAULT_OUTCOMES)),
    )


def _negation_config(ns: argparse.Namespace) -> selection.NegationConfig:
    """NegationConfig from the optional --config JSON.

    Recognized keys: negation_cues, affirmation_phrases (lists).
    """
    data = _config_data(ns)
    return selection.NegationConfig(
        cues=tuple(data.get("negation_cues", selection.DEFAULT_NEGATION_CUES)),
        affirmation_phrases=tuple(data.get(
            "affirmation_phrases", selection.DEFAULT_AFFIRMATION_PHRASES)),
    )


def _say(ns: argparse.Namespace, message: str) -> None:
    if not ns.quiet:
        print(message)


# -- readers -----------------------------------------------------------------

def read_predictions_jsonl(path: str | Path, taxonomy: Taxonomy
                           ) -> dict[tuple[str, int], set[str]]:
    out: dict[tuple[str, int], set[str]] = {}
    with Path(path).open(encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            codes = {
                taxonomy.resolve(a["code"] if isinstance(a, dict) else a).code
                for a in row.get("assigned", row.get("concepts", []))
            }
            out[(row["doc_id"], int(row["idx"]))] = codes
    return out


def read_gold_jsonl(path: str | Path, taxonomy: Taxonomy
                    ) -> dict[tuple[str, int], set[str]]:
    examples = annotator.examples_from_jsonl(path, taxonomy)
    return {ex.sentence_id: set(ex.concepts) for ex in examples}


def read_annotator_jsonl(path: str | Path, taxonomy: Taxonomy
                         ) -> dict[tuple[str, int], frozenset[str]]:
    out: dict[tuple[str, int], frozenset[str]] = {}
    with Path(path).open(encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            codes = frozenset(
                taxonomy.require_annotatable(c).code for c in row["concepts"])
            out[(row["doc_id"], int(row["idx"]))] = codes
    return out


def read_metadata_groups(path: str | Path) -> dict[str, str]:
    groups: dict[str, str] = {}
    with Path(path).open(newline="", encoding="utf-8") as fp:
        for row in csv.DictReader(fp):
            doc_id = (row.get("doc_id") or "").strip()
            group = (row.get("ethnic_group") or "").strip()
            if doc_id:
                groups[doc_id] = group or "Data not received"
    return groups


def read_batches_csv(path: str | Path) -> dict[str, list[str]]:
    batches: dict[str, list[str]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fp:
        for row in csv.DictReader(fp):
            bid = (row.get("batch_id") or "").strip()
            doc = (row.get("doc_id") or "").strip()
            if bid and doc and doc not in batches.setdefault(bid, []):
                batches[bid].append(doc)
    return batches


def _predictions_to_jsonl(preds: Iterable[annotator.Prediction],
                          model: annotator.AnnotationModel) -> str:
    lines = []
    for p in preds:
        lines.append(json.dumps({
            "doc_id": p.sentence_id[0],
            "idx": p.sentence_id[1],
            "assigned": [
                {"code": c, "label": model.label_of(c), "score": round(s, 4)}
                for c, s in p.assigned
            ],
            "model_version": p.model_version,
        }, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


# -- subcommands ---------------------------------------------------------------

def cmd_ingest(ns: argparse.Namespace) -> int:
    paths: list[Path] = []
    for raw in ns.reports:
        p = Path(raw)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.txt")))
        else:
            paths.append(p)
    loaded = corpus.load_corpus(paths, metadata_file=ns.metadata,
                                batches_file=ns.batches,
                                config=_corpus_config(ns))
    for warning in loaded.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "sentences.jsonl").open("w", encoding="utf-8") as fp:
        n = loaded.dump_jsonl(fp)
    inputs = list(paths)
    for extra in (ns.metadata, ns.batches):
        if extra:
            inputs.append(Path(extra))
    write_manifest(out_dir, "ingest",
                   {"reports": sorted(map(str, paths)), "metadata": ns.metadata,
                    "batches": ns.batches},
                   inputs, ["sentences.jsonl"], ns.seed,
                   config=_config_data(ns))
    _say(ns, f"ingested {len(paths)} reports -> {n} sentences")
    return 0


def cmd_select(ns: argparse.Namespace) -> int:
    sentences = corpus.read_sentences_jsonl(ns.sentences)
    if ns.lexicon:
        lexicons = [selection.load_lexicon(spec.split("=", 1)[1],
                                           name=spec.split("=", 1)[0])
                    for spec in ns.lexicon]
    elif "lexicons" in _config_data(ns):
        lexicons = [selection.load_lexicon(path, name=name)
                    for name, path in sorted(_config_data(ns)["lexicons"].items())]
    else:
        lexicons = selection.default_lexicons()
    flags = selection.select_batch(sentences, lexicons, _negation_config(ns))
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "flags.csv").open("w", newline="", encoding="utf-8") as fp:
        selection.write_flags_csv(flags, fp)
    selected_ids = {f.sentence_id for f in flags if f.selected}
    with (out_dir / "selected.jsonl").open("w", encoding="utf-8") as fp:
        for s in sentences:
            if s.sentence_id in selected_ids:
                fp.write(json.dumps(
                    {"doc_id": s.doc_id, "idx": s.idx,
                     "section": s.section, "text": s.text},
                    ensure_ascii=False) + "\n")
    write_manifest(out_dir, "select",
                   {"sentences": ns.sentences, "lexicon": ns.lexicon or []},
                   [Path(ns.sentences)], ["flags.csv", "selected.jsonl"], ns.seed,
                   config=_config_data(ns))
    _say(ns, f"selected {len(selected_ids)} of {len(sentences)} sentences")
    return 0


def cmd_train(ns: argparse.Namespace) -> int:
    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    examples = annotator.examples_from_jsonl(ns.examples, taxonomy)
    model = annotator.train(examples, taxonomy, batch_id=ns.batch_id)
    out = Path(ns.model_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    annotator.save_model(model, out)
    write_manifest(out.parent, "train",
                   {"examples": ns.examples, "batch_id": ns.batch_id,
                    "taxonomy": ns.taxonomy},
                   [Path(ns.examples)], [out.name], ns.seed)
    _say(ns, f"trained model v{model.version}: {len(model.prototypes)} concepts "
             f"from {len(examples)} examples -> {out}")
    return 0


def cmd_predict(ns: argparse.Namespace) -> int:
    model = annotator.load_model(ns.model)
    sentences = corpus.read_sentences_jsonl(ns.sentences)
    preds = [annotator.predict(model, s.text, s.sentence_id) for s in sentences]
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_predictions_to_jsonl(preds, model), encoding="utf-8")
    write_manifest(out.parent, "predict",
                   {"model": ns.model, "sentences": ns.sentences},
                   [Path(ns.model), Path(ns.sentences)], [out.name], ns.seed)
    assigned = sum(1 for p in preds if p.assigned)
    _say(ns, f"predicted {len(preds)} sentences ({assigned} with concepts) -> {out}")
    return 0


def _open_store(ns: argparse.Namespace, taxonomy: Taxonomy) -> Store:
    doc_groups = read_metadata_groups(ns.metadata) if ns.metadata else {}
    batches = read_batches_csv(ns.batches) if ns.batches else {}
    return Store(ns.store, taxonomy, doc_groups=doc_groups, batches=batches)


def cmd_verify_import(ns: argparse.Namespace) -> int:
    """Register a model, enqueue its predictions, and apply CSV verdicts.

    Verdict rows: ``doc_id,idx,annotator_id,concept,decision`` with decision
    one of correct/incorrect/add; rows are grouped per sentence into one
    verdict per open task.
    """
    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    store = _open_store(ns, taxonomy)
    model = annotator.load_model(ns.model)
    if model.version not in store.versions:
        store.register_model(model, training_batches=[b for b, _ in model.training_log])
    sentences = corpus.read_sentences_jsonl(ns.sentences)
    texts = {s.sentence_id: s.text for s in sentences}
    preds = [annotator.predict(model, s.text, s.sentence_id) for s in sentences]
    created = store.enqueue_predictions(preds, texts)

    rows_by_sentence: dict[tuple[str, int], list[dict]] = {}
    with Path(ns.verdicts).open(newline="", encoding="utf-8") as fp:
        for row in csv.DictReader(fp):
            key = ((row.get("doc_id") or "").strip(), int(row["idx"]))
            rows_by_sentence.setdefault(key, []).append(row)

    applied = 0
    for (doc_id, idx), rows in sorted(rows_by_sentence.items()):
        task_id = f"v{model.version}:{doc_id}:{idx}"
        if task_id not in store.tasks:
            print(f"warning: no open task for {doc_id}:{idx}, skipping",
                  file=sys.stderr)
            continue
        decisions: dict[str, str] = {}
        added: list[str] = []
        annotator_id = "import"
        for row in rows:
            annotator_id = (row.get("annotator_id") or "import").strip()
            concept = taxonomy.resolve((row.get("concept") or "").strip()).code
            decision = (row.get("decision") or "").strip().lower()
            if decision == "add":
                added.append(concept)
            else:
                decisions[concept] = decision
        store.record_verdict(task_id, annotator_id, decisions, added)
        applied += 1
    _say(ns, f"enqueued {created} tasks, applied {applied} verdicts")
    return 0


def cmd_retrain(ns: argparse.Namespace) -> int:
    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    store = _open_store(ns, taxonomy)
    info = store.trigger_retrain(batch_id=ns.batch_id)
    if ns.model_out:
        out = Path(ns.model_out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(Path(info.path).read_text(encoding="utf-8"),
                       encoding="utf-8")
        write_manifest(out.parent, "retrain",
                       {"store": ns.store, "batch_id": ns.batch_id},
                       [Path(info.path)], [out.name], ns.seed)
    _say(ns, f"retrained -> model v{info.version} ({info.path})")
    return 0


def cmd_evaluate(ns: argparse.Namespace) -> int:
    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    pred = read_predictions_jsonl(ns.pred, taxonomy)
    gold = read_gold_jsonl(ns.gold, taxonomy)
    labels = {n.code: n.canonical_label for n in taxonomy.nodes()}
    universe = {c for s in list(pred.values()) + list(gold.values()) for c in s}

    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = evaluation.summarize_metrics(
        evaluation.per_sentence_metrics(pred, gold, universe))
    with (out_dir / "overall.csv").open("w", newline="", encoding="utf-8") as fp:
        reports.write_overall_csv(summary, fp)
    concept_table = evaluation.per_concept_table(pred, gold, universe)
    with (out_dir / "per_concept.csv").open("w", newline="", encoding="utf-8") as fp:
        reports.write_per_concept_csv(concept_table, fp, labels)

    outputs = ["overall.csv", "per_concept.csv"]
    inputs = [Path(ns.pred), Path(ns.gold)]
    if ns.metadata:
        groups = read_metadata_groups(ns.metadata)
        group_table = evaluation.per_group_table(pred, gold, groups)
        with (out_dir / "per_group.csv").open("w", newline="", encoding="utf-8") as fp:
            reports.write_per_group_csv(group_table, fp)
        by_group = evaluation.per_concept_by_group(pred, gold, groups)
        with (out_dir / "per_concept_by_group.csv").open(
                "w", newline="", encoding="utf-8") as fp:
            reports.write_concept_by_group_csv(by_group, fp, labels)
        gold_by_doc: dict[str, list[str]] = {}
        for (doc_id, _idx), codes in gold.items():
            gold_by_doc.setdefault(doc_id, []).extend(sorted(codes))
        dist = fairness.group_distribution_report(groups, gold_by_doc)
        with (out_dir / "group_distribution.csv").open(
                "w", newline="", encoding="utf-8") as fp:
            reports.write_group_distribution_csv(dist, fp)
        outputs += ["per_group.csv", "per_concept_by_group.csv",
                    "group_distribution.csv"]
        inputs.append(Path(ns.metadata))

    write_manifest(out_dir, "evaluate",
                   {"pred": ns.pred, "gold": ns.gold, "metadata": ns.metadata,
                    "taxonomy": ns.taxonomy},
                   inputs, outputs, ns.seed)
    _say(ns, f"evaluation tables written to {out_dir}")
    return 0


def cmd_irr(ns: argparse.Namespace) -> int:
    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    per_annotator = {
        f"annotator{i + 1}": read_annotator_jsonl(path, taxonomy)
        for i, path in enumerate(ns.annotations)
    }
    annotations = evaluation.MultiAnnotatorSet.build(per_annotator)
    result = evaluation.inter_rater_reliability(annotations, mode=ns.mode)
    print(f"IRR: {100 * result.irr:.2f}%")
    _say(ns, f"agreements: {result.agreements}; total concepts: "
             f"{result.total_concepts}; annotators: {result.n_annotators}; "
             f"mode: {result.mode}")
    if ns.out:
        out = Path(ns.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="", encoding="utf-8") as fp:
            reports.write_irr_csv(annotations, result, fp)
        write_manifest(out.parent, "irr",
                       {"annotations": list(ns.annotations), "mode": ns.mode},
                       [Path(p) for p in ns.annotations], [out.name], ns.seed)
    return 0


def cmd_fairness(ns: argparse.Namespace) -> int:
    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    gold = read_gold_jsonl(ns.gold, taxonomy)
    groups = read_metadata_groups(ns.metadata)
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[tuple[str, fairness.GroupComparison | None]] = []
    if ns.pred_a and ns.pred_b:
        # Per-ethnicity comparison of two prediction runs over shared concepts.
        pred_a = read_predictions_jsonl(ns.pred_a, taxonomy)
        pred_b = read_predictions_jsonl(ns.pred_b, taxonomy)
        table_a = evaluation.per_concept_by_group(pred_a, gold, groups)
        table_b = evaluation.per_concept_by_group(pred_b, gold, groups)
        all_groups = sorted({g for row in table_a.values() for g in row}
                            | {g for row in table_b.values() for g in row})
        for group in all_groups:
            merged = {
                concept: {"before": table_a.get(concept, {}).get(group),
                          "after": table_b.get(concept, {}).get(group)}
                for concept in set(table_a) | set(table_b)
            }
            try:
                rows.append((group, fairness.compare_groups(merged, "before", "after")))
            except NoCommonConcepts:
                rows.append((group, None))
        inputs = [Path(ns.pred_a), Path(ns.pred_b), Path(ns.gold), Path(ns.metadata)]
        args = {"pred_a": ns.pred_a, "pred_b": ns.pred_b, "gold": ns.gold,
                "metadata": ns.metadata}
    elif ns.pred and ns.group_a and ns.group_b:
        pred = read_predictions_jsonl(ns.pred, taxonomy)
        table = evaluation.per_concept_by_group(pred, gold, groups)
        comparison = fairness.compare_groups(table, ns.group_a, ns.group_b)
        rows.append((f"{ns.group_a} vs {ns.group_b}", comparison))
        _say(ns, f"{ns.group_a}: median {comparison.median_a:.2f}%, "
                 f"SD {comparison.sd_a:.2f}%; {ns.group_b}: median "
                 f"{comparison.median_b:.2f}%, SD {comparison.sd_b:.2f}%")
        z = comparison.result.z
        _say(ns, f"W = {comparison.result.w:.1f}, "
                 f"Z = {'-' if z is None else f'{z:.3f}'}, "
                 f"p = {comparison.result.p_value:.2f} "
                 f"({comparison.result.method})")
        inputs = [Path(ns.pred), Path(ns.gold), Path(ns.metadata)]
        args = {"pred": ns.pred, "gold": ns.gold, "metadata": ns.metadata,
                "group_a": ns.group_a, "group_b": ns.group_b}
    else:
        raise UsageError("fairness needs either --pred-a/--pred-b or "
                         "--pred with --group-a/--group-b")

    with (out_dir / "wilcoxon.csv").open("w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(["ethnicity", "W", "p"])
        for name, comparison in rows:
            if comparison is None:
                writer.writerow([name, "-", "-"])
            else:
                writer.writerow([name, f"{comparison.result.w:.1f}",
                                 f"{comparison.result.p_value:.2f}"])
    write_manifest(out_dir, "fairness", args, inputs, ["wilcoxon.csv"], ns.seed)
    _say(ns, f"wilcoxon table written to {out_dir / 'wilcoxon.csv'}")
    return 0


def cmd_synth_gen(ns: argparse.Namespace) -> int:
    sentences = corpus.read_sentences_jsonl(ns.sentences)
    table = synthtest.load_synonyms(ns.synonyms)
    cfg = synthtest.ParaphraseConfig(max_fraction=ns.max_fraction, seed=ns.seed)
    pairs = []
    unchanged = 0
    for s in sentences:
        result = synthtest.generate_paraphrase(s.text, table, cfg)
        pairs.append((s.text, result.text))
        if not result.changed:
            unchanged += 1
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fp:
        synthtest.write_pairs_csv(pairs, fp)
    write_manifest(out.parent, "synth-gen",
                   {"sentences": ns.sentences, "synonyms": ns.synonyms,
                    "max_fraction": ns.max_fraction},
                   [Path(ns.sentences), Path(ns.synonyms)], [out.name], ns.seed)
    _say(ns, f"generated {len(pairs)} pairs ({unchanged} unchanged) -> {out}")
    return 0


def cmd_synth_gate(ns: argparse.Namespace) -> int:
    pairs = synthtest.read_pairs_csv(ns.pairs)
    train_texts = [orig for orig, _ in pairs]
    if ns.train_sentences:
        train_texts = [s.text for s in corpus.read_sentences_jsonl(ns.train_sentences)]
    cfg = synthtest.EmbeddingConfig(window=ns.window, min_count=ns.min_count,
                                    dim=ns.dim)
    model = synthtest.train_embeddings(train_texts, cfg)
    scored = synthtest.score_pairs(model, pairs)
    report = synthtest.gate_report(scored, threshold=ns.threshold)
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fp:
        synthtest.write_gate_csv(report, fp)
    inputs = [Path(ns.pairs)]
    if ns.train_sentences:
        inputs.append(Path(ns.train_sentences))
    write_manifest(out.parent, "synth-gate",
                   {"pairs": ns.pairs, "threshold": ns.threshold,
                    "dim": ns.dim, "window": ns.window,
                    "min_count": ns.min_count,
                    "train_sentences": ns.train_sentences},
                   inputs, [out.name], ns.seed)
    frac = "-" if report.pass_fraction is None else f"{report.pass_fraction:.4f}"
    _say(ns, f"gate: {report.pair_count} pairs, fraction >= "
             f"{report.threshold:.2f}: {frac} -> {out}")
    return 0


def cmd_serve(ns: argparse.Namespace) -> int:
    from .server import serve

    taxonomy = _load_taxonomy_arg(ns.taxonomy)
    store = _open_store(ns, taxonomy)
    _say(ns, f"serving on http://{ns.host}:{ns.port}")
    serve(store, host=ns.host, port=ns.port, static_dir=ns.static)
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="factorcode", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed recorded in manifests and used by synth gen")
    parser.add_argument("--quiet", action="store_true")
    # Same globals accepted after the subcommand; SUPPRESS keeps a
    # subcommand-level absence from overwriting a value given up front.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="normalize and segment report text files")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--metadata", default=None)
    p.add_argument("--batches", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select", parents=[common], help="flag sentences for annotation")
    p.add_argument("--sentences", required=True)
    p.add_argument("--lexicon", action="append",
                   help="NAME=PATH; repeatable (default: bundled lexicons)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", parents=[common], help="train an annotation model")
    p.add_argument("--examples", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--batch-id", default="train")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="annotate sentences with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify-import", parents=[common],
                       help="enqueue predictions and apply batch verdicts from CSV")
    p.add_argument("--store", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--metadata", default=None)
    p.add_argument("--batches", default=None)
    p.set_defaults(func=cmd_verify_import)

    p = sub.add_parser("retrain", parents=[common], help="retrain from new verdicts in the store")
    p.add_argument("--store", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--metadata", default=None)
    p.add_argument("--batches", default=None)
    p.add_argument("--batch-id", default=None)
    p.add_argument("--model-out", default=None)
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--metadata", default=None)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("irr", parents=[common], help="inter-rater reliability across annotators")
    p.add_argument("--annotations", nargs="+", required=True)
    p.add_argument("--mode", choices=["assignments", "per_annotator"],
                   default="assignments")
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_irr)

    p = sub.add_parser("fairness", parents=[common], help="signed-rank comparison of groups or runs")
    p.add_argument("--gold", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--pred", default=None)
    p.add_argument("--group-a", default=None)
    p.add_argument("--group-b", default=None)
    p.add_argument("--pred-a", default=None, help="before-run predictions")
    p.add_argument("--pred-b", default=None, help="after-run predictions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fairness)

    p = sub.add_parser("synth", help="synthetic-sentence tooling")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)

    g = synth_sub.add_parser("gen", parents=[common], help="generate paraphrase pairs")
    g.add_argument("--sentences", required=True)
    g.add_argument("--synonyms", required=True)
    g.add_argument("--max-fraction", type=float, default=0.2)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_synth_gen)

    g = synth_sub.add_parser("gate", parents=[common], help="score pairs and report the gate")
    g.add_argument("--pairs", required=True)
    g.add_argument("--threshold", type=float, default=0.8)
    g.add_argument("--dim", type=int, default=50)
    g.add_argument("--window", type=int, default=4)
    g.add_argument("--min-count", type=int, default=1)
    g.add_argument("--train-sentences", default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_synth_gate)

    p = sub.add_parser("serve", parents=[common], help="run the review HTTP API")
    p.add_argument("--store", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--metadata", default=None)
    p.add_argument("--batches", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--static", default=None,
                   help="directory of built UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def _apply_config_file(ns: argparse.Namespace) -> None:
    if not ns.config:
        return
    overrides = json.loads(Path(ns.config).read_text(encoding="utf-8"))
    ns._config_data = overrides
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if hasattr(ns, attr) and getattr(ns, attr) in (None, [], False):
            setattr(ns, attr, value)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        _apply_config_file(ns)
        return ns.func(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
