"""Synonym-replacement augmentation: offsets, determinism, skip rules."""

import pytest

from sintoma.augment import (
    AugmentPlan,
    SynonymLexicon,
    read_lexicon,
    synonym_replace,
)
from sintoma.errors import ParseError
from sintoma.spans import Mention, TaggedSentence, encode_iob2

from tagging_helpers import make_sentence


def example_dataset():
    sent = make_sentence(["refiere", "fiebre", "alta", "y", "tos"], doc_id="d1")
    mentions = (
        Mention("d1", 8, 14, "fiebre", "SINTOMA", "C1"),
        Mention("d1", 22, 25, "tos", "SINTOMA", "C2"),
    )
    return [TaggedSentence(sent, mentions)]


def lexicon(**entries):
    return SynonymLexicon({k: tuple(v) for k, v in entries.items()})


class TestSynonymReplace:
    def test_replacement_shifts_downstream_offsets(self):
        out = synonym_replace(
            example_dataset(), lexicon(C1=["pirexia"]), AugmentPlan(seed=3)
        )
        assert len(out) == 2
        new = out[1]
        assert new.sentence.text == "refiere pirexia alta y tos"
        target, other = new.mentions
        # "pirexia" is one character longer than "fiebre".
        assert (target.start, target.end, target.text) == (8, 15, "pirexia")
        assert (other.start, other.end, other.text) == (23, 26, "tos")
        assert target.code == "C1" and other.code == "C2"

    def test_shorter_synonym_shifts_left(self):
        out = synonym_replace(example_dataset(), lexicon(C1=["tos"]), AugmentPlan())
        new = out[1]
        assert new.sentence.text == "refiere tos alta y tos"
        assert (new.mentions[0].start, new.mentions[0].end) == (8, 11)
        assert (new.mentions[1].start, new.mentions[1].end) == (19, 22)

    def test_probability_zero_is_identity(self):
        data = example_dataset()
        out = synonym_replace(
            data, lexicon(C1=["pirexia"]), AugmentPlan(replacement_probability=0.0)
        )
        assert out == data

    def test_originals_retained_first(self):
        data = example_dataset()
        out = synonym_replace(data, lexicon(C1=["pirexia"], C2=["tusígeno"]), AugmentPlan())
        assert out[: len(data)] == data
        assert len(out) == 3

    def test_deterministic(self):
        data = example_dataset()
        lex = lexicon(C1=["pirexia", "hipertermia", "calentura"])
        plan = AugmentPlan(replacement_probability=0.7, seed=11)
        assert synonym_replace(data, lex, plan) == synonym_replace(data, lex, plan)

    def test_mention_without_lexicon_entry_skipped(self):
        out = synonym_replace(example_dataset(), lexicon(C9=["otra"]), AugmentPlan())
        assert len(out) == 1

    def test_mention_without_code_skipped(self):
        sent = make_sentence(["fiebre"], doc_id="d")
        data = [TaggedSentence(sent, (Mention("d", 0, 6, "fiebre", "SINTOMA", None),))]
        assert synonym_replace(data, lexicon(C1=["pirexia"]), AugmentPlan()) == data

    def test_synonym_equal_to_surface_not_used(self):
        out = synonym_replace(example_dataset(), lexicon(C1=["fiebre"]), AugmentPlan())
        assert len(out) == 1

    def test_budget_caps_new_sentences(self):
        lex = lexicon(C1=["pirexia"], C2=["tusígeno"])
        out = synonym_replace(example_dataset(), lex, AugmentPlan(max_new_sentences=1))
        assert len(out) == 2
        out0 = synonym_replace(example_dataset(), lex, AugmentPlan(max_new_sentences=0))
        assert len(out0) == 1

    def test_new_doc_ids_unique(self):
        lex = lexicon(C1=["pirexia"], C2=["tusígeno"])
        out = synonym_replace(example_dataset() * 2, lex, AugmentPlan())
        ids = [ts.sentence.doc_id for ts in out]
        assert len(ids) == len(set(ids)) + 1  # the two originals share "d1"
        assert all("#aug" in ts.sentence.doc_id for ts in out[2:])

    def test_offset_integrity_and_iob2(self):
        lex = lexicon(C1=["pirexia", "t", "hipertermia prolongada"], C2=["tusígeno"])
        out = synonym_replace(example_dataset() * 3, lex, AugmentPlan(seed=5))
        for ts in out:
            for m in ts.mentions:
                assert ts.sentence.text[m.start - ts.sentence.start : m.end - ts.sentence.start] == m.text
            encode_iob2(ts.sentence, ts.mentions, strict_boundaries=True)

    def test_misaligned_candidate_skipped(self, caplog):
        # Replacing "fiebre" inside the single token "fiebre2" would leave
        # the new mention ending mid-token, so the candidate is dropped.
        sent = make_sentence(["fiebre2"], doc_id="d")
        data = [TaggedSentence(sent, (Mention("d", 0, 6, "fiebre", "SINTOMA", "C1"),))]
        with caplog.at_level("WARNING", logger="sintoma.augment"):
            out = synonym_replace(data, lexicon(C1=["tos"]), AugmentPlan())
        assert out == data
        assert any("skipping augmentation" in r.message for r in caplog.records)

    def test_multiple_mentions_one_substitution_each(self):
        lex = lexicon(C1=["pirexia"], C2=["tusígeno"])
        out = synonym_replace(example_dataset(), lex, AugmentPlan())
        texts = sorted(ts.sentence.text for ts in out[1:])
        assert texts == [
            "refiere fiebre alta y tusígeno",
            "refiere pirexia alta y tos",
        ]

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            AugmentPlan(replacement_probability=1.5)
        with pytest.raises(ValueError):
            AugmentPlan(replacement_probability=-0.1)
        with pytest.raises(ValueError):
            AugmentPlan(max_new_sentences=-1)


class TestLexicon:
    def test_from_pairs_dedup_keeps_order(self):
        lex = SynonymLexicon.from_pairs(
            [("C1", "b"), ("C1", "a"), ("C1", "b"), ("C2", "x")]
        )
        assert lex.synonyms_for("C1") == ("b", "a")
        assert lex.synonyms_for("C2") == ("x",)
        assert lex.synonyms_for("C3") == ()
        assert len(lex) == 2

    def test_from_pairs_strips_and_drops_empty(self):
        lex = SynonymLexicon.from_pairs([(" C1 ", " tos "), ("", "x"), ("C2", " ")])
        assert lex.synonyms_for("C1") == ("tos",)
        assert len(lex) == 1

    def test_read_lexicon(self, tmp_path):
        p = tmp_path / "lex.tsv"
        p.write_text(
            "code\tsynonym\nC1\tpirexia\nC1\thipertermia\nC2\ttusígeno\n",
            encoding="utf-8",
        )
        lex = read_lexicon(p)
        assert lex.synonyms_for("C1") == ("pirexia", "hipertermia")

    def test_read_lexicon_missing_column(self, tmp_path):
        p = tmp_path / "lex.tsv"
        p.write_text("code\tterm\nC1\tx\n", encoding="utf-8")
        with pytest.raises(ParseError):
            read_lexicon(p)

    def test_read_lexicon_short_row(self, tmp_path):
        p = tmp_path / "lex.tsv"
        p.write_text("code\tsynonym\nC1\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            read_lexicon(p)
        assert exc.value.line == 2
