"""
Transcript parsing and normalization
====================================

Parse a dyadic transcript, watch the normalization rules fire, and summarize
a small corpus the way a study's descriptive table would.
"""

import json

from convalign.transcript import (DEFAULT_NORMALIZATION, corpus_stats,
                                  normalize_sentence, parse_transcript)

# Each rule family in one line: annotation removal, preserved contractions,
# g-dropping rewrites, abbreviation expansion.
for raw in ["Well, [laughs] okay.",
            "'cause it helps with the AFib",
            "goin' home at 3 p.m.",
            "see you on St. Mary street (pause) tomorrow"]:
    print(f"{raw!r:55} -> {normalize_sentence(raw)!r}")

document = "\n".join([
    json.dumps({"id": "demo01", "metadata": {
        "age": 71, "sex": "male", "race": "white", "arm": "decision-aid",
        "clinician_id": "clin001", "option12": 62.5, "dcs": 18.0,
        "duration_min": 24.0}}),
    json.dumps({"speaker": "doctor", "text": "So let's look at your numbers."}),
    json.dumps({"speaker": "patient", "text": "[pause]"}),
    json.dumps({"speaker": "patient", "text": "Okay, goin' over it now."}),
    json.dumps({"speaker": "doctor", "text": "This is the stroke risk part."}),
])

conversation = parse_transcript(document)
print(f"\nparsed {conversation.id}: {len(conversation)} sentences "
      f"(the annotation-only line was dropped and indices re-packed)")
for sentence in conversation.sentences:
    print(f"  {sentence.index}. [{sentence.speaker.value}] {sentence.text}")

stats = corpus_stats([conversation])
print(f"\ndoctor: mean {stats.doctor.mean_words:.0f} words over "
      f"{stats.doctor.mean_sentences:.0f} sentences")
print(f"patient: mean {stats.patient.mean_words:.0f} words over "
      f"{stats.patient.mean_sentences:.0f} sentences")
print(f"patient-dominant conversations: {stats.patient_dominant_count}")

# The rule tables are configuration, not code:
rules = DEFAULT_NORMALIZATION.with_extra(annotation_keywords=["beep"],
                                         rewrites={"nothin'": "nothing"})
print("\ncustom keyword:", normalize_sentence("so [beep] nothin' else", rules))
