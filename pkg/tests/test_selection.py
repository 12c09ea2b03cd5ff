from __future__ import annotations

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorcode.corpus import Sentence
from factorcode.selection import (
    Lexicon,
    NegationConfig,
    affirmation_scope,
    default_lexicons,
    detect_negation,
    load_lexicon,
    match_lexicon,
    select_batch,
    write_flags_csv,
)

# Expert-annotated sample sentences used throughout the selection tests.
SAMPLE_1 = ("This meant that during pregnancy the Mother did not have an "
            "anaesthetic review, referral to a dietitian, or information shared "
            "regarding the risks associated with raised BMI during pregnancy and "
            "the need for high dose folic acid.")
SAMPLE_2 = ("The abnormal CTG was not recognised and did not prompt escalation "
            "to the obstetric team, in line with local guidance.")
SAMPLE_3 = ("Obstetric reviews of the Mother whilst in labour were not carried "
            "out in line with local guidance, these would have provided an "
            "earlier opportunity for a holistic review of the Mother's risk "
            "status and care pathway.")


def _sent(text, idx=0, doc="d"):
    return Sentence(doc, idx, "", text, (0, 0))


class TestNegation:
    def test_multiword_cues_reported_once(self):
        negated, cues = detect_negation(
            "The abnormal CTG was not recognised and did not prompt escalation")
        assert negated
        assert [c for c, _ in cues] == ["was not", "did not"]

    def test_affirmative_sentence(self):
        negated, cues = detect_negation(
            "The Mother was appropriately risk assessed at booking")
        assert not negated and cues == []

    def test_empty_string(self):
        assert detect_negation("") == (False, [])

    def test_configurable_cues(self):
        config = NegationConfig(cues=("omitted",))
        negated, cues = detect_negation("the check was omitted", config)
        assert negated and cues == [("omitted", 3)]

    def test_cue_inside_scope_suppressed(self):
        negated, cues = detect_negation(
            "the plan was made in line with no formal protocol")
        assert not negated and cues == []

    def test_cue_after_scope_boundary_fires(self):
        negated, cues = detect_negation(
            "offered in line with guidance, but was not performed")
        assert negated
        assert cues == [("was not", 6)]


class TestAffirmationScope:
    def test_scope_to_sentence_end(self):
        scopes = affirmation_scope("which was offered in line with national guidance.")
        assert scopes == [(3, 8)]

    def test_scope_ends_at_comma(self):
        text = "were not carried out in line with local guidance, these would have"
        scopes = affirmation_scope(text)
        assert len(scopes) == 1
        start, end = scopes[0]
        # scope covers "in line with local guidance" and stops at the comma
        assert start == 4 and end == 9
        negated, cues = detect_negation(text)
        assert negated and cues == [("were not", 0)]

    def test_no_phrase_no_scope(self):
        assert affirmation_scope("nothing matches here") == []

    def test_multiple_scopes(self):
        text = "done in line with policy, reviewed in line with guidance"
        assert len(affirmation_scope(text)) == 2


class TestLexicons:
    def test_load_and_match(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("# comment\nbmi\nfolic acid\n")
        lex = load_lexicon(path, name="demo")
        assert match_lexicon("Raised BMI was noted", lex) == ("bmi",)
        assert match_lexicon("high dose folic acid given", lex) == ("folic acid",)
        assert match_lexicon("nothing here", lex) == ()

    def test_phrase_needs_every_token(self):
        lex = Lexicon("demo", frozenset({"blood pressure"}))
        assert match_lexicon("blood was taken and pressure rose", lex) == ()
        assert match_lexicon("the blood pressure rose", lex) == ("blood pressure",)

    def test_token_mode_ignores_phrases(self):
        lex = Lexicon("demo", frozenset({"bmi", "folic acid"}), match_mode="token")
        assert match_lexicon("folic acid and bmi", lex) == ("bmi",)

    def test_empty_lexicon_rejected(self):
        with pytest.raises(ValueError):
            Lexicon("demo", frozenset())

    def test_default_lexicons_load(self):
        lexicons = default_lexicons()
        names = {l.name for l in lexicons}
        assert names == {"physical_characteristics", "medications"}


class TestSelectBatch:
    def test_sample_sentences_all_selected(self):
        sentences = [_sent(t, i) for i, t in enumerate([SAMPLE_1, SAMPLE_2, SAMPLE_3])]
        flags = select_batch(sentences, default_lexicons())
        assert all(f.selected for f in flags)
        assert all(f.negated for f in flags)
        # the first sentence is also caught by both lexicons
        assert "bmi" in flags[0].lexicon_hits["physical_characteristics"]
        assert "folic acid" in flags[0].lexicon_hits["medications"]

    def test_sample_sentences_carry_scopes(self):
        assert affirmation_scope(SAMPLE_2) != []
        assert affirmation_scope(SAMPLE_3) != []
        assert affirmation_scope(SAMPLE_1) == []

    def test_affirmative_unflagged(self):
        flags = select_batch([_sent("The care pathway went well")], default_lexicons())
        assert not flags[0].selected
        assert not flags[0].negated

    def test_lexicon_only_selection(self):
        flags = select_batch([_sent("She was prescribed folic acid daily")],
                             default_lexicons())
        assert flags[0].selected and not flags[0].negated
        assert flags[0].lexicon_hits["medications"] == ("folic acid",)

    def test_affirmed_override_reported(self):
        flags = select_batch(
            [_sent("monitoring happened in line with no concerns raised")],
            default_lexicons())
        assert flags[0].affirmed_override
        assert not flags[0].negated
        assert not flags[0].selected

    def test_invariant_holds(self):
        sentences = [_sent(t, i) for i, t in enumerate([
            SAMPLE_1, SAMPLE_2, SAMPLE_3,
            "all went well", "bmi recorded", "done in line with no issue"])]
        for f in select_batch(sentences, default_lexicons()):
            assert f.selected == ((f.negated and not f.affirmed_override)
                                  or bool(f.lexicon_hits))

    def test_output_order_matches_input(self):
        sentences = [_sent(f"sentence {i} was not done", i) for i in range(5)]
        flags = select_batch(sentences, [])
        assert [f.sentence_id for f in flags] == [s.sentence_id for s in sentences]

    def test_determinism(self):
        sentences = [_sent(t, i) for i, t in enumerate([SAMPLE_1, SAMPLE_2])]
        a = select_batch(sentences, default_lexicons())
        b = select_batch(sentences, default_lexicons())
        assert a == b

    def test_monotonicity_adding_entries(self):
        sentences = [_sent(t, i) for i, t in enumerate([
            "the bmi was high", "weight was recorded", "all fine"])]
        small = Lexicon("phys", frozenset({"bmi"}))
        large = Lexicon("phys", frozenset({"bmi", "weight"}))
        before = select_batch(sentences, [small])
        after = select_batch(sentences, [large])
        for b, a in zip(before, after):
            assert not (b.selected and not a.selected)

    @given(st.lists(st.sampled_from(
        ["not done", "in line with guidance", "bmi high", "fine care",
         "no issue, in line with policy", "was not escalated"]),
        min_size=1, max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_scope_soundness(self, parts):
        text = ", ".join(parts)
        negated, cues = detect_negation(text)
        scopes = affirmation_scope(text)
        for _, idx in cues:
            assert not any(s <= idx < e for s, e in scopes)


def test_flags_csv_export():
    sentences = [_sent(SAMPLE_1, 0), _sent("all good", 1)]
    flags = select_batch(sentences, default_lexicons())
    out = io.StringIO()
    n = write_flags_csv(flags, out)
    assert n == 2
    lines = out.getvalue().splitlines()
    assert lines[0] == "doc_id,idx,negated,affirmed_override,lexicon_hits,selected"
    assert lines[1].startswith("d,0,true,false,")
    assert lines[2] == "d,1,false,false,,false"
