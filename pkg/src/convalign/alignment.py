"""Conversational-alignment scores from per-sentence predictions.

A conversation is cut into token-balanced intervals (never splitting a
sentence), each interval gets a mean prediction per speaker, the per-interval
team difference measures how far apart the speakers are, and the four
convergence summaries (Max/Min/AbsMax/AbsMin) compare team differences across
all ordered interval pairs. Scores that cannot be computed stay blank (None).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import InvalidInterval, TooShort
from .transcript import Conversation, Speaker

DEFAULT_N_INTERVALS = 10
# Team difference divides by |team|*(|team|-1); for a dyad that is 2. The
# unordered-pair reading would divide by 1 instead — a global rescale that
# changes no test statistic, exposed for completeness.
DEFAULT_TDIFF_DENOMINATOR = 2.0


@dataclass(frozen=True)
class Interval:
    """Sentences [start..end] (1-based, inclusive); empty when start > end."""

    index: int
    start: int
    end: int
    token_span: int

    @property
    def is_empty(self) -> bool:
        return self.start > self.end

    def sentence_indices(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class IntervalScore:
    index: int
    mean_doctor: float | None
    mean_patient: float | None

    @property
    def valid(self) -> bool:
        return self.mean_doctor is not None and self.mean_patient is not None


@dataclass(frozen=True)
class TeamDifference:
    index: int
    tdiff: float


@dataclass(frozen=True)
class AlignmentScores:
    conversation_id: str
    max: float | None
    min: float | None
    absmax: float | None
    absmin: float | None

    def as_dict(self) -> dict:
        return {"max": self.max, "min": self.min,
                "absmax": self.absmax, "absmin": self.absmin}


def segment_intervals(conversation: Conversation,
                      token_counts: Sequence[int],
                      n_intervals: int = DEFAULT_N_INTERVALS) -> list:
    """Token-balanced interval boundaries at sentence granularity.

    With W total tokens, boundary i (1 <= i < n) falls after the first
    sentence whose cumulative token count reaches i*W/n; a sentence is never
    split, the last interval absorbs any remainder, and two boundaries
    landing on the same sentence leave the interval between them empty.
    """
    sentences = conversation.sentences
    if len(token_counts) != len(sentences):
        raise ValueError("token_counts must align with conversation sentences")
    if len(sentences) < n_intervals:
        raise TooShort(
            f"{conversation.id}: {len(sentences)} sentences < {n_intervals} intervals")
    total = int(sum(token_counts))
    if total < 1:
        raise TooShort(f"{conversation.id}: conversation has no tokens")

    cumulative = []
    acc = 0
    for c in token_counts:
        acc += int(c)
        cumulative.append(acc)

    t = len(sentences)
    boundaries = [0]
    j = 0
    for i in range(1, n_intervals):
        threshold = i * total / n_intervals
        while j < t and cumulative[j] < threshold:
            j += 1
        boundaries.append(min(j + 1, t))
    boundaries.append(t)

    intervals = []
    for k in range(1, n_intervals + 1):
        start, end = boundaries[k - 1] + 1, boundaries[k]
        span = cumulative[end - 1] - (cumulative[start - 2] if start >= 2 else 0) \
            if start <= end else 0
        intervals.append(Interval(index=k, start=start, end=end, token_span=span))
    return intervals


def mean_speaker_scores(interval: Interval, conversation: Conversation,
                        predictions: Mapping[int, float]) -> IntervalScore:
    """Mean prediction per speaker over the interval's scored sentences.

    Sentences without a prediction (the first context window) contribute
    nothing. A speaker with no scored sentence in the interval has no mean,
    which makes the interval invalid.
    """
    sums = {Speaker.DOCTOR: 0.0, Speaker.PATIENT: 0.0}
    counts = {Speaker.DOCTOR: 0, Speaker.PATIENT: 0}
    if not interval.is_empty:
        for sentence in conversation.sentences[interval.start - 1: interval.end]:
            prob = predictions.get(sentence.index)
            if prob is None:
                continue
            sums[sentence.speaker] += prob
            counts[sentence.speaker] += 1

    def mean(role):
        return sums[role] / counts[role] if counts[role] else None

    return IntervalScore(index=interval.index,
                         mean_doctor=mean(Speaker.DOCTOR),
                         mean_patient=mean(Speaker.PATIENT))


def team_difference(score: IntervalScore,
                    denominator: float = DEFAULT_TDIFF_DENOMINATOR) -> TeamDifference:
    if not score.valid:
        raise InvalidInterval(f"interval {score.index} lacks both speakers")
    gap = abs(score.mean_patient - score.mean_doctor)
    return TeamDifference(index=score.index, tdiff=gap / denominator)


def alignment_scores(tdiffs: Sequence[float],
                     conversation_id: str = "") -> AlignmentScores:
    """Four convergence summaries over all ordered interval pairs.

    For valid intervals a < b the pairwise score is tdiff_a - tdiff_b
    (positive means the speakers moved closer). Max/Min summarize the
    positive scores only and stay blank when none exist; AbsMax/AbsMin
    summarize magnitudes. Fewer than two valid intervals leaves all four
    blank.
    """
    values = [float(v) for v in tdiffs]
    if len(values) < 2:
        return AlignmentScores(conversation_id, None, None, None, None)
    positive = []
    magnitudes = []
    for a in range(len(values)):
        for b in range(a + 1, len(values)):
            score = values[a] - values[b]
            magnitudes.append(abs(score))
            if score > 0:
                positive.append(score)
    return AlignmentScores(
        conversation_id=conversation_id,
        max=max(positive) if positive else None,
        min=min(positive) if positive else None,
        absmax=max(magnitudes),
        absmin=min(magnitudes),
    )


@dataclass(frozen=True)
class ConversationTrace:
    """Everything needed to audit one conversation's alignment score."""

    conversation_id: str
    model_id: str
    tokenizer_id: str
    n_intervals: int
    tdiff_denominator: float
    intervals: tuple            # of Interval
    predictions: Mapping[int, float]
    interval_scores: tuple      # of IntervalScore
    tdiffs: tuple               # of TeamDifference (valid intervals only)
    scores: AlignmentScores

    def to_json(self) -> str:
        payload = {
            "conversation_id": self.conversation_id,
            "model_id": self.model_id,
            "tokenizer_id": self.tokenizer_id,
            "n_intervals": self.n_intervals,
            "tdiff_denominator": self.tdiff_denominator,
            "intervals": [
                {"index": iv.index, "start": iv.start, "end": iv.end,
                 "token_span": iv.token_span, "empty": iv.is_empty}
                for iv in self.intervals],
            "predictions": {str(k): v for k, v in sorted(self.predictions.items())},
            "interval_means": [
                {"index": s.index, "doctor": s.mean_doctor,
                 "patient": s.mean_patient, "valid": s.valid}
                for s in self.interval_scores],
            "tdiffs": [{"index": td.index, "tdiff": td.tdiff} for td in self.tdiffs],
            "scores": self.scores.as_dict(),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def score_conversation(conversation: Conversation,
                       predictions: Mapping[int, float],
                       token_counts: Sequence[int],
                       n_intervals: int = DEFAULT_N_INTERVALS,
                       tdiff_denominator: float = DEFAULT_TDIFF_DENOMINATOR,
                       model_id: str = "", tokenizer_id: str = "") -> ConversationTrace:
    """Full per-conversation pipeline: segment, average, difference, summarize."""
    intervals = segment_intervals(conversation, token_counts, n_intervals)
    scores = [mean_speaker_scores(iv, conversation, predictions) for iv in intervals]
    tdiffs = tuple(team_difference(s, tdiff_denominator) for s in scores if s.valid)
    summary = alignment_scores([td.tdiff for td in tdiffs], conversation.id)
    return ConversationTrace(
        conversation_id=conversation.id, model_id=model_id,
        tokenizer_id=tokenizer_id, n_intervals=n_intervals,
        tdiff_denominator=tdiff_denominator, intervals=tuple(intervals),
        predictions=dict(predictions), interval_scores=tuple(scores),
        tdiffs=tdiffs, scores=summary)


def n_valid_intervals(trace: ConversationTrace) -> int:
    return len(trace.tdiffs)


def render_scores_csv(traces: Sequence[ConversationTrace]) -> str:
    """CA score table; blank cells mark scores that could not be computed."""
    buf = io.StringIO()
    buf.write("conversation_id,model_id,tokenizer_id,n_valid_intervals,"
              "max,min,absmax,absmin\n")
    for tr in traces:
        s = tr.scores

        def cell(value):
            return "" if value is None else repr(value)

        buf.write(",".join([
            tr.conversation_id, tr.model_id, tr.tokenizer_id,
            str(len(tr.tdiffs)), cell(s.max), cell(s.min),
            cell(s.absmax), cell(s.absmin)]) + "\n")
    return buf.getvalue()
