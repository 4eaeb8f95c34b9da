import io
import json

import pytest
from hypothesis import given, strategies as hst

from convalign.errors import (EmptyCorpus, MalformedDocument,
                              MultipartyConversation)
from convalign.transcript import (DEFAULT_NORMALIZATION, Conversation,
                                  EncounterMetadata, Sentence, Speaker,
                                  corpus_stats, normalize_sentence,
                                  parse_transcript, serialize_transcript)


def doc(utterances, conv_id="c1", metadata=None):
    lines = [json.dumps({"id": conv_id, "metadata": metadata or {}})]
    for speaker, text in utterances:
        lines.append(json.dumps({"speaker": speaker, "text": text}))
    return "\n".join(lines) + "\n"


class TestNormalize:
    def test_annotation_removed(self):
        assert normalize_sentence("Well, [laughs] okay.") == "Well, okay."

    def test_parenthesized_annotation(self):
        assert normalize_sentence("So (pause) anyway.") == "So anyway."

    def test_preserved_contraction(self):
        assert normalize_sentence("'cause it helps") == "'cause it helps"

    def test_rewrite_and_abbreviation(self):
        assert normalize_sentence("goin' home at 3 p.m.") == "going home at 3 PM"

    def test_rewrite_keeps_capitalization(self):
        assert normalize_sentence("Goin' home") == "Going home"

    def test_abbreviation_keeps_trailing_punctuation(self):
        assert normalize_sentence("at 3 p.m.?") == "at 3 PM?"
        assert normalize_sentence("on St. Mary") == "on Saint Mary"

    def test_unknown_bracket_span_preserved(self):
        assert normalize_sentence("the [warfarin] dose") == "the [warfarin] dose"

    def test_annotation_only_yields_empty(self):
        assert normalize_sentence("[pause]") == ""
        assert normalize_sentence(" [laughs] [pause] ") == ""

    def test_punctuation_preserved(self):
        out = normalize_sentence("Wait -- really?! Yes; fine: ok, done.")
        for ch in "-?!;:,.":
            assert ch in out

    def test_custom_keywords(self):
        rules = DEFAULT_NORMALIZATION.with_extra(annotation_keywords=["beep"])
        assert normalize_sentence("so [beep] then", rules) == "so then"
        assert normalize_sentence("so [beep] then") == "so [beep] then"

    @given(hst.text(alphabet=hst.characters(codec="ascii"), max_size=80))
    def test_idempotent(self, raw):
        once = normalize_sentence(raw)
        assert normalize_sentence(once) == once


class TestParse:
    def test_round_length(self):
        utterances = [("doctor", f"word{i} stuff here.") for i in range(6)] + \
                     [("patient", "Right.") for _ in range(6)]
        conversation = parse_transcript(doc(utterances))
        assert len(conversation) == 12
        assert [s.index for s in conversation.sentences] == list(range(1, 13))

    def test_multiparty_rejected(self):
        with pytest.raises(MultipartyConversation):
            parse_transcript(doc([("doctor", "Hi."), ("caregiver", "Hello.")]))

    def test_annotation_only_sentence_dropped_and_reindexed(self):
        conversation = parse_transcript(doc([
            ("doctor", "Hello."), ("patient", "[pause]"), ("patient", "Hi."),
        ]))
        assert len(conversation) == 2
        assert [s.index for s in conversation.sentences] == [1, 2]
        assert conversation.sentences[1].text == "Hi."

    def test_malformed_header(self):
        with pytest.raises(MalformedDocument):
            parse_transcript('{"no_id": 1}\n{"speaker": "doctor", "text": "x"}\n')

    def test_malformed_missing_text(self):
        with pytest.raises(MalformedDocument):
            parse_transcript(doc([("doctor", "Hi.")]) +
                             json.dumps({"speaker": "doctor"}) + "\n")

    def test_metadata_range_check(self):
        with pytest.raises(MalformedDocument):
            parse_transcript(doc([("doctor", "Hi.")],
                                 metadata={"option12": 140}))

    def test_metadata_parsed(self):
        conversation = parse_transcript(doc(
            [("doctor", "Hi.")],
            metadata={"age": 70, "sex": "female", "race": "white",
                      "arm": "decision-aid", "clinician_id": "c9",
                      "option12": 55.5, "dcs": 20, "duration_min": 31.5}))
        meta = conversation.metadata
        assert meta.patient_age == 70
        assert meta.option12 == 55.5
        assert meta.clinician_id == "c9"

    def test_bytes_input(self):
        conversation = parse_transcript(doc([("doctor", "Hi.")]).encode("utf-8"))
        assert len(conversation) == 1

    def test_roundtrip_identity(self):
        original = parse_transcript(doc([
            ("doctor", "Well, [laughs] okay."),
            ("patient", "goin' home at 3 p.m."),
            ("doctor", "See you St. Paul."),
        ], metadata={"age": 64, "option12": 70}))
        buf = io.StringIO()
        serialize_transcript(original, buf)
        reparsed = parse_transcript(buf.getvalue())
        assert reparsed == original


class TestCorpusStats:
    def build(self, doctor_words, patient_words):
        sentences = []
        index = 1
        for words in doctor_words:
            sentences.append(Sentence(index, Speaker.DOCTOR,
                                      " ".join(["w"] * words), "raw"))
            index += 1
        for words in patient_words:
            sentences.append(Sentence(index, Speaker.PATIENT,
                                      " ".join(["w"] * words), "raw"))
            index += 1
        return Conversation(id=f"conv{index}", sentences=tuple(sentences),
                            metadata=EncounterMetadata())

    def test_single_conversation_means(self):
        stats = corpus_stats([self.build([5, 5], [4])])
        assert stats.doctor.mean_words == 10
        assert stats.patient.mean_words == 4
        assert stats.doctor.mean_sentences == 2
        assert stats.patient.mean_sentences == 1

    def test_patient_dominance_count(self):
        stats = corpus_stats([self.build([2], [9]), self.build([3], [8]),
                              self.build([9], [1])])
        assert stats.patient_dominant_count == 2

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            corpus_stats([])

    def test_corpus_fixture_fields(self, small_corpus):
        conversations, _ = small_corpus
        stats = corpus_stats(conversations)
        assert stats.n_conversations == len(conversations)
        assert stats.doctor.mean_words > 0
        assert stats.mean_duration is not None
