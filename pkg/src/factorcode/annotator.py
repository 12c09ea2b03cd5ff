"""Trainable multi-label sentence classifier over taxonomy concepts.

Sentences become TF-IDF vectors; each concept gets a prototype: the
normalized mean of its positive example vectors, lightly augmented with
terms from the concept's own name and aliases, plus a decision threshold
on cosine similarity calibrated by per-concept grid search maximizing
F-score (ties resolved toward the higher, more precise threshold).

Training is fully deterministic: fixed iteration orders, no randomness.
Models are immutable snapshots; retraining returns a new model with the
version incremented and the old one untouched.
"""
from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import SentenceId
from .taxonomy import Taxonomy

DEFAULT_STOPWORDS = frozenset(
    """a an and are as at be been by for from had has have he her his i in is
    it its of on or our she that the their them there these they this those
    to was we were which while who will with would""".split()
)


class AnnotatorError(Exception):
    pass


class EmptyTrainingSet(AnnotatorError):
    pass


class UnresolvableConcept(AnnotatorError):
    def __init__(self, code: str) -> None:
        self.code = code
        super().__init__(f"concept {code!r} is not a known annotatable concept")


class UntrainedModel(AnnotatorError):
    pass


class CorruptModelFile(AnnotatorError):
    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        suffix = f" (at offset {offset})" if offset is not None else ""
        super().__init__(message + suffix)


class CalibrationConflictWarning(UserWarning):
    """Raised when a retrained model still misses a corrected example."""


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    token_pattern: str = r"[a-z0-9]+"
    min_token_len: int = 2
    stopwords: frozenset[str] = DEFAULT_STOPWORDS


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    cfg = config or TokenizerConfig()
    if cfg.lowercase:
        text = text.lower()
    toks = re.findall(cfg.token_pattern, text)
    return [t for t in toks if len(t) >= cfg.min_token_len and t not in cfg.stopwords]


@dataclass(frozen=True)
class SentenceVector:
    """Sparse term-weight map with its Euclidean norm precomputed."""
    weights: Mapping[str, float]
    norm: float

    @classmethod
    def from_weights(cls, weights: Mapping[str, float]) -> "SentenceVector":
        return cls(dict(weights), math.sqrt(sum(w * w for w in weights.values())))

    def is_zero(self) -> bool:
        return self.norm == 0.0

    def dot(self, other: "SentenceVector") -> float:
        small, large = self.weights, other.weights
        if len(small) > len(large):
            small, large = large, small
        return sum(w * large[t] for t, w in small.items() if t in large)

    def cosine(self, other: "SentenceVector") -> float | None:
        if self.norm == 0.0 or other.norm == 0.0:
            return None
        return self.dot(other) / (self.norm * other.norm)

    def unit(self) -> "SentenceVector":
        if self.norm == 0.0:
            return self
        return SentenceVector({t: w / self.norm for t, w in self.weights.items()}, 1.0)


@dataclass(frozen=True)
class TrainingExample:
    doc_id: str
    idx: int
    text: str
    concepts: frozenset[str]  # concept codes
    source: str = "expert"    # "expert" | "verdict"

    @property
    def sentence_id(self) -> SentenceId:
        return (self.doc_id, self.idx)


@dataclass(frozen=True)
class ConceptPrototype:
    concept: str
    label: str
    centroid: SentenceVector
    threshold: float
    support: int
    seed_terms: tuple[str, ...]


@dataclass(frozen=True)
class TrainConfig:
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    grid_step: float = 0.05
    seed_term_weight_scale: float = 0.1


@dataclass(frozen=True)
class Prediction:
    sentence_id: SentenceId
    assigned: tuple[tuple[str, float], ...]  # (code, cosine score), sorted by code
    model_version: int

    def codes(self) -> set[str]:
        return {c for c, _ in self.assigned}


@dataclass(frozen=True)
class AnnotationModel:
    config: TrainConfig
    idf: Mapping[str, float]
    prototypes: Mapping[str, ConceptPrototype]
    catalog: Mapping[str, tuple[str, tuple[str, ...]]]  # code -> (label, seed terms)
    version: int
    training_log: tuple[tuple[str, int], ...]
    examples: tuple[TrainingExample, ...]

    def label_of(self, code: str) -> str:
        if code in self.prototypes:
            return self.prototypes[code].label
        if code in self.catalog:
            return self.catalog[code][0]
        return code


def featurize(model: AnnotationModel, text: str) -> SentenceVector:
    """TF-IDF vector of a sentence under the model vocabulary.

    Out-of-vocabulary terms are dropped; an all-OOV sentence yields the
    zero vector.
    """
    counts: dict[str, int] = {}
    for tok in tokenize(text, model.config.tokenizer):
        counts[tok] = counts.get(tok, 0) + 1
    weights = {
        t: c * model.idf[t] for t, c in sorted(counts.items()) if t in model.idf
    }
    return SentenceVector.from_weights(weights)


def _build_catalog(taxonomy: Taxonomy, tokenizer: TokenizerConfig
                   ) -> dict[str, tuple[str, tuple[str, ...]]]:
    catalog: dict[str, tuple[str, tuple[str, ...]]] = {}
    for node in taxonomy.nodes():
        if not node.annotatable:
            continue
        seed_text = " ".join((node.name,) + node.aliases)
        seeds = tuple(sorted(set(tokenize(seed_text, tokenizer))))
        catalog[node.code] = (node.canonical_label, seeds)
    return dict(sorted(catalog.items()))


def _idf_table(texts: Sequence[str], extra_terms: Iterable[str],
               tokenizer: TokenizerConfig) -> dict[str, float]:
    n_docs = len(texts)
    df: dict[str, int] = {}
    for text in texts:
        for tok in set(tokenize(text, tokenizer)):
            df[tok] = df.get(tok, 0) + 1
    for term in extra_terms:
        df.setdefault(term, 0)
    return {
        t: math.log((1 + n_docs) / (1 + df_t)) + 1.0
        for t, df_t in sorted(df.items())
    }


def _grid(step: float) -> list[float]:
    n = int(round(1.0 / step))
    return [round(i * step, 10) for i in range(n + 1)]


def _f_score(tp: int, fp: int, fn: int) -> float | None:
    if tp + fp == 0:
        return None
    precision = tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else None
    if recall is None or precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def calibrate_thresholds(model: AnnotationModel,
                         examples: Sequence[TrainingExample]) -> AnnotationModel:
    """Per-concept threshold by grid search maximizing training F-score.

    Candidates run over a fixed grid on [0, 1]; equal F-scores resolve to
    the higher threshold.  A concept no candidate can score (for instance
    when every positive example vectorizes to zero) falls back to 0.0 with
    a CalibrationConflictWarning.
    """
    scored: list[tuple[frozenset[str], SentenceVector]] = [
        (ex.concepts, featurize(model, ex.text)) for ex in examples
    ]
    new_prototypes: dict[str, ConceptPrototype] = {}
    for code in sorted(model.prototypes):
        proto = model.prototypes[code]
        scores: list[tuple[float | None, bool]] = [
            (vec.cosine(proto.centroid), code in concepts)
            for concepts, vec in scored
        ]
        best_thr: float | None = None
        best_f = -1.0
        for thr in _grid(model.config.grid_step):
            tp = sum(1 for s, pos in scores if pos and s is not None and s >= thr)
            fp = sum(1 for s, pos in scores if not pos and s is not None and s >= thr)
            fn = sum(1 for s, pos in scores if pos and (s is None or s < thr))
            f = _f_score(tp, fp, fn)
            if f is not None and f >= best_f:
                best_f = f
                best_thr = thr
        if best_thr is None:
            warnings.warn(
                f"concept {code}: no calibratable threshold, falling back to 0.0",
                CalibrationConflictWarning,
            )
            best_thr = 0.0
        new_prototypes[code] = replace(proto, threshold=best_thr)
    return replace(model, prototypes=new_prototypes)


def _validate_examples(examples: Sequence[TrainingExample],
                       catalog: Mapping[str, tuple[str, tuple[str, ...]]]) -> None:
    if not examples:
        raise EmptyTrainingSet("no training examples")
    for ex in examples:
        if not ex.concepts:
            raise EmptyTrainingSet(
                f"example {ex.sentence_id} has no concepts")
        for code in sorted(ex.concepts):
            if code not in catalog:
                raise UnresolvableConcept(code)


def _train_from_catalog(examples: Sequence[TrainingExample],
                        catalog: Mapping[str, tuple[str, tuple[str, ...]]],
                        config: TrainConfig,
                        version: int,
                        training_log: tuple[tuple[str, int], ...]) -> AnnotationModel:
    _validate_examples(examples, catalog)
    trained_codes = sorted({c for ex in examples for c in ex.concepts})
    seed_terms_in_play = [
        t for code in trained_codes for t in catalog[code][1]
    ]
    idf = _idf_table([ex.text for ex in examples], seed_terms_in_play,
                     config.tokenizer)

    model = AnnotationModel(
        config=config, idf=idf, prototypes={}, catalog=dict(catalog),
        version=version, training_log=training_log, examples=tuple(examples),
    )

    prototypes: dict[str, ConceptPrototype] = {}
    vectors = [featurize(model, ex.text) for ex in examples]
    for code in trained_codes:
        members = [vec for ex, vec in zip(examples, vectors) if code in ex.concepts]
        acc: dict[str, float] = {}
        for vec in members:
            for t, w in vec.weights.items():
                acc[t] = acc.get(t, 0.0) + w
        mean = {t: w / len(members) for t, w in sorted(acc.items())}
        centroid = SentenceVector.from_weights(mean).unit()

        label, seeds = catalog[code]
        base = max(centroid.weights.values(), default=1.0)
        seed_w = config.seed_term_weight_scale * base
        augmented = dict(centroid.weights)
        for t in seeds:
            augmented[t] = augmented.get(t, 0.0) + seed_w
        centroid = SentenceVector.from_weights(augmented).unit()

        prototypes[code] = ConceptPrototype(
            concept=code, label=label, centroid=centroid,
            threshold=0.0, support=len(members), seed_terms=seeds,
        )

    model = replace(model, prototypes=prototypes)
    return calibrate_thresholds(model, examples)


def train(examples: Sequence[TrainingExample], taxonomy: Taxonomy,
          config: TrainConfig | None = None, batch_id: str = "train"
          ) -> AnnotationModel:
    """Train a fresh model (version 1) from expert-labeled sentences.

    Every concept present in the examples must resolve to an annotatable
    taxonomy node and automatically gets a prototype (support >= 1).
    """
    cfg = config or TrainConfig()
    catalog = _build_catalog(taxonomy, cfg.tokenizer)
    return _train_from_catalog(
        examples, catalog, cfg, version=1,
        training_log=((batch_id, len(examples)),),
    )


def predict(model: AnnotationModel, text: str,
            sentence_id: SentenceId = ("", 0)) -> Prediction:
    """Assign every concept whose prototype cosine clears its threshold.

    A sentence with no in-vocabulary terms has no defined similarity and
    receives no concepts.
    """
    if not model.prototypes:
        raise UntrainedModel("model has no trained prototypes")
    vec = featurize(model, text)
    assigned: list[tuple[str, float]] = []
    if not vec.is_zero():
        for code in sorted(model.prototypes):
            proto = model.prototypes[code]
            score = vec.cosine(proto.centroid)
            if score is not None and score >= proto.threshold:
                assigned.append((code, score))
    return Prediction(sentence_id, tuple(assigned), model.version)


def update_with_verdicts(model: AnnotationModel,
                         verdicts: Sequence[TrainingExample],
                         batch_id: str | None = None) -> AnnotationModel:
    """Retrain on the model's own examples plus verdict-derived ones.

    A verdict example supersedes any earlier verdict example for the same
    sentence; expert-sourced examples are never replaced.  Returns a new
    model with version + 1; the input model is unchanged.  Corrected
    sentences the new model still misses raise CalibrationConflictWarning.
    """
    if not model.prototypes:
        raise UntrainedModel("cannot retrain an untrained model")
    for v in verdicts:
        if v.source != "verdict":
            raise ValueError(f"expected source='verdict', got {v.source!r}")

    combined: list[TrainingExample] = list(model.examples)
    index = {
        (ex.doc_id, ex.idx): i
        for i, ex in enumerate(combined) if ex.source == "verdict"
    }
    for v in verdicts:
        key = (v.doc_id, v.idx)
        if key in index:
            combined[index[key]] = v
        else:
            index[key] = len(combined)
            combined.append(v)

    version = model.version + 1
    stamp = batch_id if batch_id is not None else f"verdicts-v{version}"
    new_model = _train_from_catalog(
        combined, model.catalog, model.config, version=version,
        training_log=model.training_log + ((stamp, len(verdicts)),),
    )
    for v in verdicts:
        got = predict(new_model, v.text, v.sentence_id).codes()
        missing = sorted(v.concepts - got)
        if missing:
            warnings.warn(
                f"retrained model misses {missing} on corrected sentence "
                f"{v.sentence_id}",
                CalibrationConflictWarning,
            )
    return new_model


# -- persistence -----------------------------------------------------------

_FORMAT = "factorcode-model"
_FORMAT_VERSION = 1


def save_model(model: AnnotationModel, path: str | Path) -> None:
    payload = {
        "format": _FORMAT,
        "format_version": _FORMAT_VERSION,
        "version": model.version,
        "config": {
            "tokenizer": {
                "lowercase": model.config.tokenizer.lowercase,
                "token_pattern": model.config.tokenizer.token_pattern,
                "min_token_len": model.config.tokenizer.min_token_len,
                "stopwords": sorted(model.config.tokenizer.stopwords),
            },
            "grid_step": model.config.grid_step,
            "seed_term_weight_scale": model.config.seed_term_weight_scale,
        },
        "idf": dict(sorted(model.idf.items())),
        "catalog": {
            code: {"label": label, "seed_terms": list(seeds)}
            for code, (label, seeds) in sorted(model.catalog.items())
        },
        "prototypes": {
            code: {
                "label": p.label,
                "centroid": dict(sorted(p.centroid.weights.items())),
                "centroid_norm": p.centroid.norm,
                "threshold": p.threshold,
                "support": p.support,
                "seed_terms": list(p.seed_terms),
            }
            for code, p in sorted(model.prototypes.items())
        },
        "training_log": [list(entry) for entry in model.training_log],
        "examples": [
            {
                "doc_id": ex.doc_id, "idx": ex.idx, "text": ex.text,
                "concepts": sorted(ex.concepts), "source": ex.source,
            }
            for ex in model.examples
        ],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path) -> AnnotationModel:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptModelFile(f"{path}: {exc.msg}", offset=exc.pos) from None
    try:
        if payload["format"] != _FORMAT or payload["format_version"] != _FORMAT_VERSION:
            raise CorruptModelFile(
                f"{path}: unsupported format "
                f"{payload.get('format')!r} v{payload.get('format_version')!r}")
        tok = payload["config"]["tokenizer"]
        config = TrainConfig(
            tokenizer=TokenizerConfig(
                lowercase=tok["lowercase"],
                token_pattern=tok["token_pattern"],
                min_token_len=tok["min_token_len"],
                stopwords=frozenset(tok["stopwords"]),
            ),
            grid_step=payload["config"]["grid_step"],
            seed_term_weight_scale=payload["config"]["seed_term_weight_scale"],
        )
        catalog = {
            code: (entry["label"], tuple(entry["seed_terms"]))
            for code, entry in payload["catalog"].items()
        }
        prototypes = {
            code: ConceptPrototype(
                concept=code,
                label=entry["label"],
                centroid=SentenceVector(dict(entry["centroid"]),
                                        entry["centroid_norm"]),
                threshold=entry["threshold"],
                support=entry["support"],
                seed_terms=tuple(entry["seed_terms"]),
            )
            for code, entry in payload["prototypes"].items()
        }
        examples = tuple(
            TrainingExample(
                doc_id=ex["doc_id"], idx=ex["idx"], text=ex["text"],
                concepts=frozenset(ex["concepts"]), source=ex["source"],
            )
            for ex in payload["examples"]
        )
        return AnnotationModel(
            config=config,
            idf=payload["idf"],
            prototypes=dict(sorted(prototypes.items())),
            catalog=dict(sorted(catalog.items())),
            version=payload["version"],
            training_log=tuple((b, n) for b, n in payload["training_log"]),
            examples=examples,
        )
    except (KeyError, TypeError) as exc:
        raise CorruptModelFile(f"{path}: missing or malformed field ({exc})") from None


# -- training-set files ------------------------------------------------------

def examples_to_jsonl(examples: Iterable[TrainingExample],
                      label_of: Mapping[str, str] | None = None) -> str:
    """Serialize examples as JSON Lines with concept labels when available."""
    lines = []
    for ex in examples:
        concepts = [
            (label_of or {}).get(code, code) for code in sorted(ex.concepts)
        ]
        lines.append(json.dumps(
            {"doc_id": ex.doc_id, "idx": ex.idx, "text": ex.text,
             "concepts": concepts, "source": ex.source},
            ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def examples_from_jsonl(path: str | Path, taxonomy: Taxonomy,
                        default_source: str = "expert") -> list[TrainingExample]:
    """Read a training-set file, resolving concept labels or codes."""
    out: list[TrainingExample] = []
    with Path(path).open(encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            codes = frozenset(
                taxonomy.require_annotatable(c).code for c in row["concepts"]
            )
            out.append(TrainingExample(
                doc_id=row["doc_id"], idx=int(row["idx"]), text=row["text"],
                concepts=codes, source=row.get("source", default_source),
            ))
    return out
