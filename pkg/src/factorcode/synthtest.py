"""Synthetic-sentence tooling: corpus embeddings, paraphrase generation,
and the cosine-similarity admission gate.

Word vectors come from a positive-PMI co-occurrence matrix (symmetric
window), optionally reduced with a truncated SVD; there is no stochastic
training, so every similarity is exactly repeatable.  Sentences are scored
as the mean of their word vectors.  Paraphrases are one-for-one synonym
substitutions driven by a seeded generator.
"""
from __future__ import annotations

import csv
import hashlib
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .annotator import TokenizerConfig, tokenize


class SynthError(Exception):
    pass


class EmptyCorpus(SynthError):
    pass


class DimensionMismatch(SynthError):
    pass


@dataclass(frozen=True)
class EmbeddingConfig:
    window: int = 4
    min_count: int = 1
    dim: int | None = 50  # None keeps raw PPMI rows
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise SynthError("window must be >= 1")
        if self.min_count < 1:
            raise SynthError("min_count must be >= 1")
        if self.dim is not None and self.dim < 1:
            raise SynthError("dim must be >= 1 (or None for raw vectors)")


@dataclass
class EmbeddingModel:
    vocabulary: dict[str, int]
    vectors: np.ndarray  # (len(vocabulary), d)
    config: EmbeddingConfig

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


_DENSE_SVD_LIMIT = 2000


def train_embeddings(sentences: Iterable[str],
                     config: EmbeddingConfig | None = None) -> EmbeddingModel:
    """Deterministic word vectors from windowed co-occurrence counts.

    Counts within a symmetric window become positive pointwise mutual
    information values; with ``dim`` set, a truncated SVD maps them to
    dense vectors scaled by the singular values.
    """
    cfg = config or EmbeddingConfig()
    token_lists = [tokenize(s, cfg.tokenizer) for s in sentences]
    token_lists = [t for t in token_lists if t]
    if not token_lists:
        raise EmptyCorpus("no tokenizable sentences")

    freq: dict[str, int] = {}
    for toks in token_lists:
        for t in toks:
            freq[t] = freq.get(t, 0) + 1
    vocab = {t: i for i, t in enumerate(sorted(t for t, c in freq.items()
                                               if c >= cfg.min_count))}
    if not vocab:
        raise EmptyCorpus(f"no term reaches min_count={cfg.min_count}")
    v = len(vocab)

    pair_counts: dict[tuple[int, int], float] = {}
    for toks in token_lists:
        ids = [vocab[t] for t in toks if t in vocab]
        for i, wi in enumerate(ids):
            for j in range(max(0, i - cfg.window), min(len(ids), i + cfg.window + 1)):
                if j == i:
                    continue
                key = (wi, ids[j])
                pair_counts[key] = pair_counts.get(key, 0.0) + 1.0

    if not pair_counts:
        # Single-token sentences only: fall back to identity-style vectors.
        vectors = np.eye(v, dtype=np.float64)
        return EmbeddingModel(vocab, _reduce(vectors, cfg.dim), cfg)

    keys = sorted(pair_counts)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    vals = np.array([pair_counts[k] for k in keys], dtype=np.float64)
    counts = sp.csr_matrix((vals, (rows, cols)), shape=(v, v))

    total = counts.sum()
    row_sums = np.asarray(counts.sum(axis=1)).ravel()
    col_sums = np.asarray(counts.sum(axis=0)).ravel()
    coo = counts.tocoo()
    ppmi_vals = np.log(coo.data * total / (row_sums[coo.row] * col_sums[coo.col]))
    ppmi_vals = np.maximum(ppmi_vals, 0.0)
    ppmi = sp.csr_matrix((ppmi_vals, (coo.row, coo.col)), shape=(v, v))

    return EmbeddingModel(vocab, _reduce(ppmi, cfg.dim), cfg)


def _reduce(matrix, dim: int | None) -> np.ndarray:
    """Truncated SVD of the PPMI matrix, sign-fixed for reproducibility."""
    v = matrix.shape[0]
    if dim is None or dim >= v:
        return np.asarray(matrix.todense() if sp.issparse(matrix) else matrix,
                          dtype=np.float64)
    if v <= _DENSE_SVD_LIMIT:
        dense = np.asarray(matrix.todense() if sp.issparse(matrix) else matrix,
                           dtype=np.float64)
        u, s, _ = np.linalg.svd(dense, full_matrices=False)
        u, s = u[:, :dim], s[:dim]
    else:
        k = min(dim, v - 1)
        u, s, _ = svds(matrix.astype(np.float64), k=k, v0=np.ones(v))
        order = np.argsort(s)[::-1]
        u, s = u[:, order], s[order]
    for j in range(u.shape[1]):
        pivot = np.argmax(np.abs(u[:, j]))
        if u[pivot, j] < 0:
            u[:, j] = -u[:, j]
    return u * s


def sentence_vector(model: EmbeddingModel, text: str) -> np.ndarray:
    """Mean of the in-vocabulary word vectors; zero vector when all OOV."""
    ids = [model.vocabulary[t] for t in tokenize(text, model.config.tokenizer)
           if t in model.vocabulary]
    if not ids:
        return np.zeros(model.dim, dtype=np.float64)
    return model.vectors[ids].mean(axis=0)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float | None:
    """dot(u, v) / (|u||v|); None when either norm is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes differ: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return None
    return float(np.dot(u, v) / (nu * nv))


@dataclass(frozen=True)
class SynonymTable:
    mapping: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        for term, repls in self.mapping.items():
            if term != term.strip().lower():
                raise ValueError(f"synonym key {term!r} must be lowercase/trimmed")
            for r in repls:
                if " " in r or not r:
                    raise ValueError(f"replacement {r!r} for {term!r} must be one token")
                if r.lower() == term:
                    raise ValueError(f"{term!r} lists itself as a synonym")


def load_synonyms(path: str | Path) -> SynonymTable:
    """CSV ``term,synonym1|synonym2`` (header optional, ``#`` comments)."""
    mapping: dict[str, tuple[str, ...]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fp:
        for row in csv.reader(fp):
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip().lower() == "term":
                continue
            term = row[0].strip().lower()
            repls = tuple(r.strip() for r in (row[1] if len(row) > 1 else "").split("|")
                          if r.strip())
            if term and repls:
                mapping[term] = repls
    return SynonymTable(mapping)


@dataclass(frozen=True)
class ParaphraseConfig:
    max_fraction: float = 0.2
    seed: int = 0
    stopwords: frozenset[str] = TokenizerConfig().stopwords


@dataclass(frozen=True)
class ParaphraseResult:
    text: str
    substitutions: tuple[tuple[str, str], ...]  # (original token, replacement)
    changed: bool


_PARA_WORD = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)*")


def generate_paraphrase(sentence: str, table: SynonymTable,
                        config: ParaphraseConfig | None = None) -> ParaphraseResult:
    """One-for-one synonym substitution on a bounded share of content tokens.

    The substitution budget is max(1, floor(max_fraction * content tokens)),
    applied to a seeded pseudo-random selection of eligible tokens, so the
    output differs from the input whenever any substitution is possible.
    Sentence-initial capitalization is preserved.
    """
    cfg = config or ParaphraseConfig()
    spans = list(_PARA_WORD.finditer(sentence))
    content = [m for m in spans if m.group().lower() not in cfg.stopwords]
    eligible = [m for m in content if m.group().lower() in table.mapping]
    if not eligible:
        return ParaphraseResult(sentence, (), False)

    budget = max(1, math.floor(cfg.max_fraction * len(content)))
    digest = hashlib.sha256(f"{cfg.seed}:{sentence}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    order = list(range(len(eligible)))
    rng.shuffle(order)
    chosen = sorted(order[:min(budget, len(eligible))])

    subs: list[tuple[str, str]] = []
    out = sentence
    for k in reversed(chosen):  # splice right-to-left so spans stay valid
        m = eligible[k]
        original = m.group()
        repl = rng.choice(table.mapping[original.lower()])
        if m.start() == spans[0].start() and original[:1].isupper():
            repl = repl[:1].upper() + repl[1:]
        out = out[:m.start()] + repl + out[m.end():]
        subs.append((original, repl))
    subs.reverse()
    return ParaphraseResult(out, tuple(subs), True)


@dataclass(frozen=True)
class PairSimilarity:
    original: str
    synthetic: str
    cosine: float | None


def score_pairs(model: EmbeddingModel,
                pairs: Sequence[tuple[str, str]]) -> list[PairSimilarity]:
    out = []
    for original, synthetic in pairs:
        u = sentence_vector(model, original)
        v = sentence_vector(model, synthetic)
        out.append(PairSimilarity(original, synthetic, cosine_similarity(u, v)))
    return out


@dataclass(frozen=True)
class GateReport:
    pair_count: int
    bin_width: float
    bins: tuple[int, ...]          # histogram over [-1, 1]
    undefined_count: int
    threshold: float
    pass_fraction: float | None    # share of defined cosines >= threshold

    def __post_init__(self) -> None:
        if sum(self.bins) + self.undefined_count != self.pair_count:
            raise ValueError("histogram does not account for every pair")


def gate_report(pairs: Sequence[PairSimilarity], threshold: float = 0.8,
                bin_width: float = 0.05) -> GateReport:
    """Histogram of pair cosines plus the admission fraction at a threshold.

    Pairs with undefined cosine (a zero sentence vector) go to a separate
    bucket and are excluded from the fraction.
    """
    n_bins = int(round(2.0 / bin_width))
    bins = [0] * n_bins
    undefined = 0
    passed = 0
    defined = 0
    for p in pairs:
        if p.cosine is None:
            undefined += 1
            continue
        defined += 1
        idx = min(int((p.cosine + 1.0) / bin_width), n_bins - 1)
        bins[max(0, idx)] += 1
        if p.cosine >= threshold:
            passed += 1
    fraction = passed / defined if defined else None
    return GateReport(len(pairs), bin_width, tuple(bins), undefined,
                      threshold, fraction)


def write_pairs_csv(pairs: Iterable[tuple[str, str]], fp: IO[str]) -> int:
    writer = csv.writer(fp)
    writer.writerow(["original", "synthetic"])
    n = 0
    for original, synthetic in pairs:
        writer.writerow([original, synthetic])
        n += 1
    return n


def read_pairs_csv(path: str | Path) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    with Path(path).open(newline="", encoding="utf-8") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is not None and [h.strip().lower() for h in header[:2]] != ["original", "synthetic"]:
            out.append((header[0], header[1]))
        for row in reader:
            if len(row) >= 2:
                out.append((row[0], row[1]))
    return out


def write_gate_csv(report: GateReport, fp: IO[str]) -> None:
    """Histogram rows then a summary line."""
    writer = csv.writer(fp)
    writer.writerow(["bin_low", "bin_high", "count"])
    for i, count in enumerate(report.bins):
        lo = -1.0 + i * report.bin_width
        writer.writerow([f"{lo:.2f}", f"{lo + report.bin_width:.2f}", count])
    writer.writerow(["undefined", "", report.undefined_count])
    frac = "-" if report.pass_fraction is None else f"{report.pass_fraction:.4f}"
    writer.writerow([f"fraction>={report.threshold:.2f}", "", frac])
