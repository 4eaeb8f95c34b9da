"""Transcript parsing and sentence normalization for dyadic conversations.

A transcript file (JSONL) holds one conversation: a header line with id and
encounter metadata, followed by one utterance per line in spoken order.
Parsing normalizes each sentence, drops sentences that normalize to nothing,
and re-packs indices to 1..T.
"""

from __future__ import annotations

import enum
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping

from .errors import EmptyCorpus, MalformedDocument, MultipartyConversation


class Speaker(enum.Enum):
    DOCTOR = "doctor"
    PATIENT = "patient"


class TranscriptFormat(enum.Enum):
    JSONL = "jsonl"


# Paralinguistic annotations the transcribers wrap in [] or (). The shipped
# list is a superset guess and fully configurable; spans whose content is not
# on the list are kept verbatim.
DEFAULT_ANNOTATION_KEYWORDS = frozenset({
    "laugh", "laughs", "laughing", "laughter", "chuckle", "chuckles",
    "pause", "pauses", "long pause", "short pause", "sigh", "sighs",
    "sighing", "cough", "coughs", "coughing", "sneeze", "sneezes",
    "clears throat", "throat clearing", "inaudible", "unintelligible",
    "crosstalk", "cross talk", "overlapping", "overlap", "silence",
    "noise", "background noise", "phone rings", "phone ringing",
    "knock", "knocking", "applause", "mumbles", "mumbling",
    "whisper", "whispers", "crying", "breath", "breathing",
})

# Spoken contractions that carry style and must never be rewritten.
DEFAULT_PRESERVE = frozenset({
    "'cause", "afib", "gonna", "wanna", "gotta", "kinda", "sorta",
    "lemme", "gimme", "y'all", "'em", "ain't",
})

# Perception-dependent g-droppings: what the transcriber heard, mapped back
# to the canonical form. Values inherit capitalization from the source token.
DEFAULT_REWRITES: Mapping[str, str] = {
    "goin'": "going", "doin'": "doing", "gettin'": "getting",
    "comin'": "coming", "takin'": "taking", "talkin'": "talking",
    "lookin'": "looking", "somethin'": "something", "nothin'": "nothing",
    "anythin'": "anything", "workin'": "working", "makin'": "making",
    "tryin'": "trying", "thinkin'": "thinking", "sayin'": "saying",
    "havin'": "having", "givin'": "giving", "feelin'": "feeling",
    "bein'": "being", "seein'": "seeing", "runnin'": "running",
}

# Abbreviations normalized to their spoken/elongated form. Values are used
# as written (canonical case).
DEFAULT_ABBREVIATIONS: Mapping[str, str] = {
    "p.m.": "PM", "a.m.": "AM", "st.": "Saint", "dr.": "Doctor",
    "vs.": "versus", "etc.": "etcetera",
}

_TRAILING_PUNCT = set(".,!?;:\"'")
_ANNOTATION_RE = re.compile(r"\[([^\[\]]*)\]|\(([^()]*)\)")
_SPACE_BEFORE_PUNCT_RE = re.compile(r" +([.,!?;:])")


@dataclass(frozen=True)
class NormalizationConfig:
    """Rules applied by normalize_sentence, all user-extensible."""

    annotation_keywords: frozenset = DEFAULT_ANNOTATION_KEYWORDS
    preserve: frozenset = DEFAULT_PRESERVE
    rewrites: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_REWRITES))
    abbreviations: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_ABBREVIATIONS))

    def with_extra(self, *, annotation_keywords: Iterable[str] = (),
                   rewrites: Mapping[str, str] | None = None,
                   abbreviations: Mapping[str, str] | None = None) -> "NormalizationConfig":
        return NormalizationConfig(
            annotation_keywords=self.annotation_keywords | frozenset(
                k.lower() for k in annotation_keywords),
            preserve=self.preserve,
            rewrites={**self.rewrites, **(rewrites or {})},
            abbreviations={**self.abbreviations, **(abbreviations or {})},
        )


DEFAULT_NORMALIZATION = NormalizationConfig()


@dataclass(frozen=True)
class Sentence:
    """One transcribed sentence; index is the 1-based position after drops."""

    index: int
    speaker: Speaker
    text: str
    raw_text: str


@dataclass(frozen=True)
class EncounterMetadata:
    patient_age: float | None = None
    sex: str | None = None
    race: str | None = None
    trial_arm: str | None = None
    clinician_id: str | None = None
    option12: float | None = None
    dcs: float | None = None
    duration: float | None = None

    def __post_init__(self):
        for name in ("option12", "dcs"):
            value = getattr(self, name)
            if value is not None and not (0.0 <= value <= 100.0):
                raise MalformedDocument(f"{name}={value} outside [0, 100]")


@dataclass(frozen=True)
class Conversation:
    id: str
    sentences: tuple
    metadata: EncounterMetadata = EncounterMetadata()

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def speakers(self) -> set:
        return {s.speaker for s in self.sentences}

    def is_dyadic_complete(self) -> bool:
        """Both roles actually speak (required for alignment scoring)."""
        return self.speakers == {Speaker.DOCTOR, Speaker.PATIENT}


def _strip_annotations(text: str, cfg: NormalizationConfig) -> str:
    def repl(match: re.Match) -> str:
        content = match.group(1) if match.group(1) is not None else match.group(2)
        key = re.sub(r"\s+", " ", content.strip().lower())
        return "" if key in cfg.annotation_keywords else match.group(0)

    return _ANNOTATION_RE.sub(repl, text)


def _map_token(token: str, cfg: NormalizationConfig) -> str:
    # Peel trailing punctuation one character at a time so "p.m.?" still
    # finds the "p.m." table entry and keeps its question mark.
    for cut in range(len(token)):
        core, suffix = token[: len(token) - cut], token[len(token) - cut:]
        if cut and suffix[0] not in _TRAILING_PUNCT:
            break
        low = core.lower()
        if low in cfg.preserve:
            return token
        if low in cfg.abbreviations:
            return cfg.abbreviations[low] + suffix
        if low in cfg.rewrites:
            repl = cfg.rewrites[low]
            if core.isupper() and len(core) > 1:
                repl = repl.upper()
            elif core[:1].isupper():
                repl = repl[:1].upper() + repl[1:]
            return repl + suffix
    return token


def normalize_sentence(raw: str, rules: NormalizationConfig = DEFAULT_NORMALIZATION) -> str:
    """Normalize one transcribed utterance.

    Removes bracketed/parenthesized paralinguistic annotations on the keyword
    list, applies the g-dropping rewrite table and the abbreviation table,
    and tidies whitespace. Preserve-listed contractions and all punctuation
    outside removed annotations are left intact. Idempotent. Returns "" when
    nothing survives (callers drop such sentences).
    """
    text = _strip_annotations(raw, rules)
    text = re.sub(r"\s+", " ", text).strip()
    text = _SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)
    if not text:
        return ""
    return " ".join(_map_token(tok, rules) for tok in text.split(" "))


def _read_metadata(obj: dict) -> EncounterMetadata:
    def num(key):
        value = obj.get(key)
        if value is None:
            return None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise MalformedDocument(f"metadata field {key!r} must be numeric, got {value!r}")
        return float(value)

    def cat(key):
        value = obj.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            raise MalformedDocument(f"metadata field {key!r} must be a string, got {value!r}")
        return value

    return EncounterMetadata(
        patient_age=num("age"), sex=cat("sex"), race=cat("race"),
        trial_arm=cat("arm"), clinician_id=cat("clinician_id"),
        option12=num("option12"), dcs=num("dcs"), duration=num("duration_min"),
    )


def parse_transcript(document: bytes | str | Path | IO,
                     format: TranscriptFormat = TranscriptFormat.JSONL,
                     rules: NormalizationConfig = DEFAULT_NORMALIZATION) -> Conversation:
    """Parse one JSONL transcript into a normalized Conversation.

    Raises MalformedDocument on schema violations and MultipartyConversation
    when any speaker beyond the doctor/patient dyad appears.
    """
    if format is not TranscriptFormat.JSONL:
        raise MalformedDocument(f"unsupported transcript format: {format}")
    if isinstance(document, Path):
        text = document.read_text(encoding="utf-8")
    elif isinstance(document, bytes):
        text = document.decode("utf-8")
    elif isinstance(document, str):
        text = document
    else:
        raw = document.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedDocument("empty transcript document")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "id" not in header:
        raise MalformedDocument("header line must be an object with an 'id' field")
    conv_id = header["id"]
    if not isinstance(conv_id, str) or not conv_id:
        raise MalformedDocument("conversation id must be a non-empty string")
    meta_obj = header.get("metadata", {})
    if not isinstance(meta_obj, dict):
        raise MalformedDocument("'metadata' must be an object")
    metadata = _read_metadata(meta_obj)

    sentences = []
    index = 0
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "speaker" not in rec or "text" not in rec:
            raise MalformedDocument(f"line {lineno}: expected 'speaker' and 'text' fields")
        label = rec["speaker"]
        if not isinstance(label, str):
            raise MalformedDocument(f"line {lineno}: speaker must be a string")
        try:
            speaker = Speaker(label.strip().lower())
        except ValueError:
            raise MultipartyConversation(
                f"line {lineno}: speaker {label!r} is neither doctor nor patient"
            ) from None
        raw_text = rec["text"]
        if not isinstance(raw_text, str):
            raise MalformedDocument(f"line {lineno}: text must be a string")
        normalized = normalize_sentence(raw_text, rules)
        if not normalized:
            continue
        index += 1
        sentences.append(Sentence(index=index, speaker=speaker,
                                  text=normalized, raw_text=raw_text))

    if not sentences:
        raise MalformedDocument("transcript has no sentences surviving normalization")
    return Conversation(id=conv_id, sentences=tuple(sentences), metadata=metadata)


def serialize_transcript(conversation: Conversation, stream: IO[str] | None = None) -> str:
    """Write a Conversation back to the JSONL transcript format.

    Emits each sentence's raw text, so parse -> serialize -> parse is an
    identity (normalization is idempotent and drops nothing the second time).
    """
    meta = conversation.metadata
    header = {"id": conversation.id, "metadata": {
        "age": meta.patient_age, "sex": meta.sex, "race": meta.race,
        "arm": meta.trial_arm, "clinician_id": meta.clinician_id,
        "option12": meta.option12, "dcs": meta.dcs, "duration_min": meta.duration,
    }}
    header["metadata"] = {k: v for k, v in header["metadata"].items() if v is not None}
    buf = io.StringIO()
    buf.write(json.dumps(header, ensure_ascii=False) + "\n")
    for sentence in conversation.sentences:
        buf.write(json.dumps({"speaker": sentence.speaker.value,
                              "text": sentence.raw_text}, ensure_ascii=False) + "\n")
    out = buf.getvalue()
    if stream is not None:
        stream.write(out)
    return out


@dataclass(frozen=True)
class RoleStats:
    mean_words: float
    sd_words: float
    mean_sentences: float
    sd_sentences: float


@dataclass(frozen=True)
class CorpusStats:
    n_conversations: int
    doctor: RoleStats
    patient: RoleStats
    mean_duration: float | None
    sd_duration: float | None
    patient_dominant_count: int


def _mean_sd(values) -> tuple:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def corpus_stats(conversations: Iterable[Conversation]) -> CorpusStats:
    """Per-role word/sentence summaries across conversations."""
    convs = list(conversations)
    if not convs:
        raise EmptyCorpus("corpus_stats needs at least one conversation")

    words = {Speaker.DOCTOR: [], Speaker.PATIENT: []}
    counts = {Speaker.DOCTOR: [], Speaker.PATIENT: []}
    durations = []
    dominant = 0
    for conv in convs:
        per_words = {Speaker.DOCTOR: 0, Speaker.PATIENT: 0}
        per_counts = {Speaker.DOCTOR: 0, Speaker.PATIENT: 0}
        for sentence in conv.sentences:
            per_words[sentence.speaker] += len(sentence.text.split())
            per_counts[sentence.speaker] += 1
        for role in (Speaker.DOCTOR, Speaker.PATIENT):
            words[role].append(per_words[role])
            counts[role].append(per_counts[role])
        if conv.metadata.duration is not None:
            durations.append(conv.metadata.duration)
        if per_words[Speaker.PATIENT] > per_words[Speaker.DOCTOR]:
            dominant += 1

    def role_stats(role):
        mw, sw = _mean_sd(words[role])
        mc, sc = _mean_sd(counts[role])
        return RoleStats(mean_words=mw, sd_words=sw, mean_sentences=mc, sd_sentences=sc)

    mean_dur, sd_dur = (_mean_sd(durations) if durations else (None, None))
    return CorpusStats(
        n_conversations=len(convs),
        doctor=role_stats(Speaker.DOCTOR),
        patient=role_stats(Speaker.PATIENT),
        mean_duration=mean_dur, sd_duration=sd_dur,
        patient_dominant_count=dominant,
    )
