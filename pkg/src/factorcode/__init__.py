"""Human-in-the-loop concept annotation for safety-investigation reports.

The package covers the full loop: ingest report text, select sentences
worth annotating, train a multi-label concept annotator, queue predictions
for expert verification, retrain from verdicts, and monitor performance,
inter-rater reliability, and demographic fairness.
"""
from .annotator import (
    AnnotationModel,
    Prediction,
    TrainConfig,
    TrainingExample,
    load_model,
    predict,
    save_model,
    train,
    update_with_verdicts,
)
from .corpus import (
    Corpus,
    CorpusConfig,
    Document,
    Sentence,
    load_corpus,
    normalize_text,
    segment_sentences,
)
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    MultiAnnotatorSet,
    accumulate_confusion,
    compute_metrics,
    inter_rater_reliability,
    per_concept_table,
    per_group_table,
)
from .fairness import (
    PairedSample,
    WilcoxonResult,
    compare_groups,
    group_distribution_report,
    wilcoxon_signed_rank,
)
from .selection import (
    Lexicon,
    SelectionFlags,
    affirmation_scope,
    default_lexicons,
    detect_negation,
    select_batch,
)
from .synthtest import (
    EmbeddingConfig,
    EmbeddingModel,
    cosine_similarity,
    gate_report,
    generate_paraphrase,
    sentence_vector,
    train_embeddings,
)
from .taxonomy import ConceptNode, Taxonomy, load_default_taxonomy, load_taxonomy
from .workflow import Store

__version__ = "0.1.0"

__all__ = [
    "AnnotationModel", "ConceptNode", "ConfusionCounts", "Corpus",
    "CorpusConfig", "Document", "EmbeddingConfig", "EmbeddingModel",
    "Lexicon", "MetricsReport", "MultiAnnotatorSet", "PairedSample",
    "Prediction", "SelectionFlags", "Sentence", "Store", "Taxonomy",
    "TrainConfig", "TrainingExample", "WilcoxonResult",
    "accumulate_confusion", "affirmation_scope", "compare_groups",
    "compute_metrics", "cosine_similarity", "default_lexicons",
    "detect_negation", "gate_report", "generate_paraphrase",
    "group_distribution_report", "inter_rater_reliability", "load_corpus",
    "load_default_taxonomy", "load_model", "load_taxonomy", "normalize_text",
    "per_concept_table", "per_group_table", "predict", "save_model",
    "segment_sentences", "select_batch", "sentence_vector", "train",
    "train_embeddings", "update_with_verdicts", "wilcoxon_signed_rank",
]
