from __future__ import annotations

import json
import random
import warnings

import pytest

from factorcode import annotator as A
from factorcode.annotator import (
    AnnotationModel,
    CalibrationConflictWarning,
    ConceptPrototype,
    CorruptModelFile,
    EmptyTrainingSet,
    SentenceVector,
    TokenizerConfig,
    TrainConfig,
    TrainingExample,
    UnresolvableConcept,
    UntrainedModel,
    calibrate_thresholds,
    examples_from_jsonl,
    examples_to_jsonl,
    featurize,
    load_model,
    predict,
    save_model,
    tokenize,
    train,
    update_with_verdicts,
)

from conftest import TOY_TOPICS


class TestTokenizer:
    def test_lowercase_and_min_length(self):
        assert tokenize("The CTG Was Abnormal a b") == ["ctg", "abnormal"]

    def test_stopwords_removed(self):
        assert tokenize("the care of the mother") == ["care", "mother"]

    def test_custom_config(self):
        cfg = TokenizerConfig(min_token_len=1, stopwords=frozenset())
        assert tokenize("a b c", cfg) == ["a", "b", "c"]


class TestFeaturize:
    def test_deterministic_same_as_training(self, toy_model, toy_examples):
        for ex in toy_examples[:5]:
            v1 = featurize(toy_model, ex.text)
            v2 = featurize(toy_model, ex.text)
            assert v1 == v2

    def test_empty_text_zero_vector(self, toy_model):
        assert featurize(toy_model, "").is_zero()

    def test_stopword_insensitive(self, toy_model):
        a = featurize(toy_model, "the team worked")
        b = featurize(toy_model, "team worked")
        assert a == b

    def test_oov_dropped(self, toy_model):
        v = featurize(toy_model, "xylophone zygote")
        assert v.is_zero()


class TestTrain:
    def test_counting_contract(self, toy_model):
        assert len(toy_model.prototypes) == 4
        assert all(p.support == 5 for p in toy_model.prototypes.values())
        assert toy_model.version == 1
        assert toy_model.training_log == (("toy", 20),)

    def test_empty_training_set(self, taxonomy):
        with pytest.raises(EmptyTrainingSet):
            train([], taxonomy)

    def test_unresolvable_concept(self, taxonomy):
        bad = [TrainingExample("d", 0, "text here", frozenset({"9.9.9"}))]
        with pytest.raises(UnresolvableConcept):
            train(bad, taxonomy)

    def test_non_annotatable_concept_rejected(self, taxonomy):
        bad = [TrainingExample("d", 0, "text here", frozenset({"3"}))]
        with pytest.raises(UnresolvableConcept):
            train(bad, taxonomy)

    def test_unit_norm_centroids(self, toy_model):
        for proto in toy_model.prototypes.values():
            assert proto.centroid.norm == pytest.approx(1.0, abs=1e-12)

    def test_determinism_bit_identical(self, toy_examples, taxonomy):
        m1 = train(toy_examples, taxonomy, batch_id="toy")
        m2 = train(toy_examples, taxonomy, batch_id="toy")
        assert m1 == m2

    def test_cold_start_single_example(self, taxonomy):
        examples = [
            TrainingExample("d", 0, "team worked together", frozenset({"3.3"})),
            TrainingExample("d", 1, "record keeping was poor", frozenset({"3.5"})),
        ]
        model = train(examples, taxonomy)
        assert model.prototypes["3.3"].support == 1
        assert "3.3" in predict(model, "team worked together").codes()

    def test_seed_terms_from_concept_name(self, toy_model):
        proto = toy_model.prototypes["3.3"]
        assert "teamworking" in proto.seed_terms
        assert "teamworking" in proto.centroid.weights


class TestCalibration:
    def test_tie_break_prefers_higher_threshold(self, taxonomy):
        # Synthetic prototype with known example scores: positives >= 0.9,
        # negatives <= 0.1, so every grid point in (0.1, 0.9] is optimal.
        examples = [
            TrainingExample("d", 0, "alpha alpha", frozenset({"3.3"})),
            TrainingExample("d", 1, "alpha alpha", frozenset({"3.3"})),
            TrainingExample("d", 2, "beta beta", frozenset({"3.5"})),
        ]
        model = train(examples, taxonomy)
        # the positives hit their own centroid near 1, negatives near 0
        assert model.prototypes["3.3"].threshold >= 0.5

    def test_single_positive_keeps_recall(self, taxonomy):
        examples = [
            TrainingExample("d", 0, "unique vocabulary sentence", frozenset({"3.3"})),
            TrainingExample("d", 1, "different words entirely", frozenset({"3.5"})),
        ]
        model = train(examples, taxonomy)
        proto = model.prototypes["3.3"]
        self_score = featurize(model, "unique vocabulary sentence").cosine(proto.centroid)
        assert proto.threshold <= self_score

    def test_matches_exhaustive_grid_oracle(self, taxonomy):
        """Thresholds equal an independent exhaustive search on a random fixture."""
        rng = random.Random(2024)
        vocab = ["care", "team", "record", "risk", "scan", "review", "ward",
                 "plan", "notes", "guidance", "covid", "monitor", "triage",
                 "clinic", "labour", "theatre", "transfer", "booking"]
        codes = ["3.3", "3.5", "4.5"]
        examples = []
        for i in range(50):
            words = rng.choices(vocab, k=rng.randint(3, 8))
            concepts = frozenset(rng.sample(codes, rng.randint(1, 2)))
            examples.append(TrainingExample("d", i, " ".join(words), concepts))
        model = train(examples, taxonomy)

        def oracle_threshold(code):
            proto = model.prototypes[code]
            scores = [(featurize(model, ex.text).cosine(proto.centroid),
                       code in ex.concepts) for ex in examples]
            best = None
            best_f = -1.0
            for i in range(21):
                thr = round(i * 0.05, 10)
                tp = sum(1 for s, pos in scores if pos and s is not None and s >= thr)
                fp = sum(1 for s, pos in scores if not pos and s is not None and s >= thr)
                fn = sum(1 for s, pos in scores if pos and (s is None or s < thr))
                if tp + fp == 0:
                    continue
                p = tp / (tp + fp)
                r = tp / (tp + fn)
                if p + r == 0:
                    continue
                f = 2 * p * r / (p + r)
                if f >= best_f:
                    best_f = f
                    best = thr
            return best

        for code in codes:
            assert model.prototypes[code].threshold == oracle_threshold(code), code

    def test_recalibration_is_functional(self, toy_model, toy_examples):
        recal = calibrate_thresholds(toy_model, list(toy_examples))
        assert recal.prototypes == toy_model.prototypes
        assert recal is not toy_model


class TestPredict:
    def test_memorization(self, toy_model, toy_examples):
        tp = fn = 0
        for ex in toy_examples:
            got = predict(toy_model, ex.text, ex.sentence_id).codes()
            tp += len(got & ex.concepts)
            fn += len(ex.concepts - got)
        assert tp / (tp + fn) >= 0.95

    def test_empty_text_empty_assignment(self, toy_model):
        assert predict(toy_model, "").assigned == ()

    def test_scores_within_bounds_and_above_threshold(self, toy_model, toy_examples):
        for ex in toy_examples:
            pred = predict(toy_model, ex.text, ex.sentence_id)
            for code, score in pred.assigned:
                assert -1.0 - 1e-12 <= score <= 1.0 + 1e-12
                assert score >= toy_model.prototypes[code].threshold

    def test_untrained_model_raises(self, toy_model):
        from dataclasses import replace
        empty = replace(toy_model, prototypes={})
        with pytest.raises(UntrainedModel):
            predict(empty, "anything")

    def test_topic_transfer(self, toy_model):
        got = predict(toy_model, "the covid pandemic restrictions").codes()
        assert "1.4" in got


class TestUpdateWithVerdicts:
    def test_empty_verdicts_bump_version_only(self, toy_model):
        updated = update_with_verdicts(toy_model, [])
        assert updated.version == toy_model.version + 1
        assert updated.prototypes == toy_model.prototypes
        assert updated.training_log[:-1] == toy_model.training_log

    def test_correction_learned(self, toy_model):
        verdicts = [TrainingExample(
            "new", 0, "the team escalation call was cooperative and well coordinated",
            frozenset({"3.3"}), source="verdict")]
        updated = update_with_verdicts(toy_model, verdicts)
        assert "3.3" in predict(updated, verdicts[0].text).codes()
        assert updated.version == 2

    def test_original_model_unchanged(self, toy_model):
        before = toy_model.version
        update_with_verdicts(toy_model, [])
        assert toy_model.version == before

    def test_wrong_source_rejected(self, toy_model):
        with pytest.raises(ValueError):
            update_with_verdicts(toy_model, [
                TrainingExample("d", 0, "text", frozenset({"3.3"}), source="expert")])

    def test_later_verdict_supersedes(self, toy_model):
        first = TrainingExample("new", 5, "risk assessment was skipped entirely",
                                frozenset({"4.5"}), source="verdict")
        second = TrainingExample("new", 5, "risk assessment was skipped entirely",
                                 frozenset({"3.5"}), source="verdict")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CalibrationConflictWarning)
            m2 = update_with_verdicts(toy_model, [first])
            m3 = update_with_verdicts(m2, [second])
        verdict_examples = [ex for ex in m3.examples if ex.source == "verdict"
                            and ex.sentence_id == ("new", 5)]
        assert len(verdict_examples) == 1
        assert verdict_examples[0].concepts == frozenset({"3.5"})

    def test_calibration_conflict_warns_not_fails(self, taxonomy):
        # every token is filtered by the tokenizer, so the corrected sentence
        # vectorizes to zero even after retraining and cannot be memorized
        examples = [
            TrainingExample("d", 0, "team cooperation went well", frozenset({"3.3"})),
            TrainingExample("d", 1, "records were incomplete", frozenset({"3.5"})),
        ]
        model = train(examples, taxonomy)
        hopeless = TrainingExample("d", 9, "of the an a", frozenset({"3.3"}),
                                   source="verdict")
        with pytest.warns(CalibrationConflictWarning):
            update_with_verdicts(model, [hopeless])


class TestPersistence:
    def test_round_trip_equality(self, toy_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(toy_model, path)
        assert load_model(path) == toy_model

    def test_round_trip_predictions_bit_identical(self, toy_model, toy_examples,
                                                  tmp_path):
        path = tmp_path / "model.json"
        save_model(toy_model, path)
        loaded = load_model(path)
        texts = [ex.text for ex in toy_examples] * 5  # 100 sentences
        for i, text in enumerate(texts):
            assert predict(loaded, text, ("t", i)) == predict(toy_model, text, ("t", i))

    def test_truncated_file(self, toy_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(toy_model, path)
        raw = path.read_text()
        path.write_text(raw[: len(raw) // 2])
        with pytest.raises(CorruptModelFile):
            load_model(path)

    def test_wrong_format_marker(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "something-else", "format_version": 1}))
        with pytest.raises(CorruptModelFile):
            load_model(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "factorcode-model", "format_version": 1}))
        with pytest.raises(CorruptModelFile):
            load_model(path)


class TestExampleFiles:
    def test_jsonl_round_trip(self, taxonomy, toy_examples, tmp_path):
        labels = {n.code: n.canonical_label for n in taxonomy.nodes()}
        path = tmp_path / "examples.jsonl"
        path.write_text(examples_to_jsonl(toy_examples, labels), encoding="utf-8")
        loaded = examples_from_jsonl(path, taxonomy)
        assert loaded == list(toy_examples)

    def test_codes_accepted_too(self, taxonomy, tmp_path):
        path = tmp_path / "examples.jsonl"
        path.write_text(json.dumps({
            "doc_id": "d", "idx": 0, "text": "team worked",
            "concepts": ["3.3"], "source": "expert"}) + "\n")
        loaded = examples_from_jsonl(path, taxonomy)
        assert loaded[0].concepts == frozenset({"3.3"})


class TestSentenceVector:
    def test_cosine_identity(self):
        v = SentenceVector.from_weights({"a": 1.0, "b": 2.0})
        assert v.cosine(v) == pytest.approx(1.0)

    def test_cosine_zero_vector_undefined(self):
        v = SentenceVector.from_weights({"a": 1.0})
        z = SentenceVector.from_weights({})
        assert v.cosine(z) is None

    def test_unit(self):
        v = SentenceVector.from_weights({"a": 3.0, "b": 4.0})
        assert v.norm == pytest.approx(5.0)
        assert v.unit().norm == 1.0
