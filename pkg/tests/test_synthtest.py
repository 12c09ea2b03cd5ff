from __future__ import annotations

import io
import random

import numpy as np
import pytest

from factorcode.annotator import TokenizerConfig
from factorcode.synthtest import (
    DimensionMismatch,
    EmbeddingConfig,
    EmptyCorpus,
    PairSimilarity,
    ParaphraseConfig,
    SynonymTable,
    cosine_similarity,
    gate_report,
    generate_paraphrase,
    load_synonyms,
    read_pairs_csv,
    score_pairs,
    sentence_vector,
    train_embeddings,
    write_gate_csv,
    write_pairs_csv,
)

RAW_TOKENIZER = TokenizerConfig(min_token_len=1, stopwords=frozenset())


def _small_config(**kw):
    defaults = dict(window=4, min_count=1, dim=None, tokenizer=RAW_TOKENIZER)
    defaults.update(kw)
    return EmbeddingConfig(**defaults)


def _template_corpus(n=200, seed=5):
    """Deterministic sentence fixture where synonym pairs share contexts."""
    rng = random.Random(seed)
    subjects = ["mother", "woman", "midwife", "team", "consultant"]
    verbs = ["reviewed", "checked", "discussed", "explained", "monitored",
             "recorded", "documented"]
    objects = ["plan", "record", "scan", "risk", "guidance", "policy",
               "appointment", "visit", "pathway", "transfer"]
    tails = ["during labour", "at booking", "after the transfer",
             "on the ward", "before discharge"]
    out = []
    for _ in range(n):
        out.append("The {} {} the {} {}".format(
            rng.choice(subjects), rng.choice(verbs), rng.choice(objects),
            rng.choice(tails)))
    return out


class TestEmbeddings:
    def test_cooccurrence_partners_are_close(self):
        # "a b" repeated inside a sentence puts a and b in shared contexts;
        # x/y live in a disjoint context so they stay dissimilar from a.
        sentences = ["a b a b a b"] * 5 + ["x y x y x y"] * 5
        model = train_embeddings(sentences, _small_config())
        va = sentence_vector(model, "a")
        vb = sentence_vector(model, "b")
        vx = sentence_vector(model, "x")
        assert cosine_similarity(va, vb) > 0.5
        assert cosine_similarity(va, vb) > cosine_similarity(va, vx)

    def test_min_count_excludes_rare_terms(self):
        model = train_embeddings(["common common rare"] ,
                                 _small_config(min_count=2))
        assert "common" in model.vocabulary
        assert "rare" not in model.vocabulary

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            train_embeddings([], _small_config())
        with pytest.raises(EmptyCorpus):
            train_embeddings(["", "   "], _small_config())

    def test_reduced_dimension(self):
        model = train_embeddings(_template_corpus(), _small_config(dim=20))
        assert model.dim == 20

    def test_determinism_bit_identical(self):
        corpus = _template_corpus()
        cfg = _small_config(dim=16)
        m1 = train_embeddings(corpus, cfg)
        m2 = train_embeddings(corpus, cfg)
        assert m1.vocabulary == m2.vocabulary
        assert np.array_equal(m1.vectors, m2.vectors)
        target = sentence_vector(m1, "guidance")

        def nearest(model, term):
            scores = {}
            for other, i in model.vocabulary.items():
                if other == term:
                    continue
                scores[other] = cosine_similarity(
                    sentence_vector(model, term), model.vectors[i])
            return max(sorted(scores), key=lambda t: scores[t])

        assert nearest(m1, "guidance") == nearest(m2, "guidance")
        assert np.array_equal(target, sentence_vector(m2, "guidance"))


class TestSentenceVector:
    def test_single_word_is_its_vector(self):
        model = train_embeddings(["alpha beta gamma"], _small_config())
        idx = model.vocabulary["alpha"]
        assert np.array_equal(sentence_vector(model, "alpha"),
                              model.vectors[idx])

    def test_all_oov_zero(self):
        model = train_embeddings(["alpha beta"], _small_config())
        assert not sentence_vector(model, "zzz yyy").any()

    def test_order_invariance(self):
        model = train_embeddings(_template_corpus(50), _small_config())
        a = sentence_vector(model, "the mother reviewed the plan")
        b = sentence_vector(model, "plan the reviewed mother the")
        assert np.allclose(a, b)

    def test_stopword_removal_invariance(self):
        # with the default tokenizer, dropping its own stopwords from the
        # text cannot change the sentence vector
        model = train_embeddings(_template_corpus(50), EmbeddingConfig(dim=None))
        with_stops = sentence_vector(model, "the mother reviewed the plan")
        without = sentence_vector(model, "mother reviewed plan")
        assert np.array_equal(with_stops, without)


class TestCosine:
    def test_identical_vectors(self):
        v = np.array([0.3, -0.2, 1.5])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]),
                                 np.array([0.0, 1.0])) == 0.0

    def test_collinear(self):
        assert cosine_similarity(np.array([1.0, 2.0, 3.0]),
                                 np.array([2.0, 4.0, 6.0])) == pytest.approx(1.0)

    def test_zero_vector_undefined(self):
        assert cosine_similarity(np.zeros(3), np.ones(3)) is None

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity(np.ones(3), np.ones(4))

    def test_bounds_random(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            u = rng.normal(size=8)
            v = rng.normal(size=8)
            c = cosine_similarity(u, v)
            assert abs(c) <= 1 + 1e-12
            assert c == pytest.approx(cosine_similarity(v, u), abs=1e-12)


class TestParaphrase:
    def test_forced_single_substitution(self):
        table = SynonymTable({"discussion": ("talk",)})
        result = generate_paraphrase(
            "The Mother was given the opportunity for a discussion", table)
        assert result.changed
        assert result.text == "The Mother was given the opportunity for a talk"

    def test_empty_table_flags_unchanged(self):
        result = generate_paraphrase("Nothing to replace here", SynonymTable({}))
        assert not result.changed
        assert result.text == "Nothing to replace here"

    def test_seeded_determinism(self):
        table = SynonymTable({"quick": ("fast", "rapid"), "lazy": ("idle",),
                              "dog": ("hound",)})
        cfg = ParaphraseConfig(seed=7)
        text = "The quick brown fox jumped over the lazy dog"
        assert generate_paraphrase(text, table, cfg) == \
            generate_paraphrase(text, table, cfg)

    def test_token_count_preserved(self):
        table = SynonymTable({"mother": ("woman",), "plan": ("pathway",),
                              "reviewed": ("checked",)})
        for text in _template_corpus(40):
            result = generate_paraphrase(text, table, ParaphraseConfig(seed=3))
            assert len(result.text.split()) == len(text.split())

    def test_sentence_initial_capitalization(self):
        table = SynonymTable({"monitoring": ("observation",)})
        result = generate_paraphrase("Monitoring was commenced late", table)
        assert result.text.startswith("Observation")

    def test_substitution_budget(self):
        # 10 content words, max_fraction 0.2 -> at most 2 substitutions
        table = SynonymTable({w: (w + "x",) for w in
                              "one two three four five six seven eight nine ten".split()})
        cfg = ParaphraseConfig(max_fraction=0.2, seed=1,
                               stopwords=frozenset())
        result = generate_paraphrase(
            "one two three four five six seven eight nine ten", table, cfg)
        assert 1 <= len(result.substitutions) <= 2

    def test_self_synonym_rejected(self):
        with pytest.raises(ValueError):
            SynonymTable({"team": ("team",)})

    def test_multi_token_replacement_rejected(self):
        with pytest.raises(ValueError):
            SynonymTable({"team": ("care team",)})


class TestGate:
    def test_identity_pairs_pass(self):
        pairs = [PairSimilarity("x", "x", 1.0)] * 100
        report = gate_report(pairs, threshold=0.8)
        assert report.pass_fraction == 1.0
        assert sum(report.bins) == 100

    def test_ratio(self):
        pairs = [PairSimilarity("a", "b", 0.9)] * 39 + [PairSimilarity("a", "b", 0.5)]
        report = gate_report(pairs, threshold=0.8)
        assert report.pass_fraction == pytest.approx(0.975)

    def test_undefined_bucket(self):
        pairs = [PairSimilarity("a", "b", 0.9), PairSimilarity("a", "b", None)]
        report = gate_report(pairs)
        assert report.undefined_count == 1
        assert report.pass_fraction == 1.0
        assert sum(report.bins) + report.undefined_count == report.pair_count

    def test_extreme_values_binned(self):
        pairs = [PairSimilarity("a", "b", -1.0), PairSimilarity("a", "b", 1.0)]
        report = gate_report(pairs)
        assert report.bins[0] == 1
        assert report.bins[-1] == 1

    def test_paraphrase_fixture_passes_gate(self):
        sentences = _template_corpus(200)
        table = SynonymTable({
            "mother": ("woman",), "woman": ("mother",),
            "reviewed": ("checked",), "checked": ("reviewed",),
            "plan": ("pathway",), "visit": ("appointment",),
            "appointment": ("visit",), "policy": ("guidance",),
            "guidance": ("policy",), "recorded": ("documented",),
            "documented": ("recorded",),
        })
        cfg = ParaphraseConfig(max_fraction=0.2, seed=13)
        pairs = [(s, generate_paraphrase(s, table, cfg).text) for s in sentences]
        model = train_embeddings(sentences, EmbeddingConfig(dim=None))
        scored = score_pairs(model, pairs)
        report = gate_report(scored, threshold=0.8)
        assert report.pair_count == 200
        assert sum(report.bins) + report.undefined_count == 200
        assert report.pass_fraction >= 0.95


class TestFiles:
    def test_pairs_csv_round_trip(self, tmp_path):
        pairs = [("one, with comma", "two"), ("three", "four")]
        path = tmp_path / "pairs.csv"
        with path.open("w", newline="", encoding="utf-8") as fp:
            n = write_pairs_csv(pairs, fp)
        assert n == 2
        assert read_pairs_csv(path) == pairs

    def test_synonyms_csv(self, tmp_path):
        path = tmp_path / "syn.csv"
        path.write_text("term,synonyms\nmother,woman|patient\nteam,staff\n")
        table = load_synonyms(path)
        assert table.mapping["mother"] == ("woman", "patient")
        assert table.mapping["team"] == ("staff",)

    def test_gate_csv(self):
        report = gate_report([PairSimilarity("a", "a", 1.0)], threshold=0.8)
        out = io.StringIO()
        write_gate_csv(report, out)
        lines = out.getvalue().splitlines()
        assert lines[0] == "bin_low,bin_high,count"
        assert lines[-1].startswith("fraction>=0.80")
