"""Byte-pair subword tokenizer trained from scratch, plus merge-file IO.

Pre-tokenization is lossless: text is split into word, punctuation-run and
whitespace-run pieces whose concatenation reproduces the input exactly, so
decode(encode(x)) == x whenever every character of x is in the alphabet.
Merges never cross pre-token boundaries.

The same interface also describes externally reported token counts (an
external scorer may tokenize differently); see ExternalTokenCounter.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Protocol, Sequence

from .errors import VocabTooSmall

PAD, UNK, CLS, SEP = "<pad>", "<unk>", "<cls>", "<sep>"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP)

# Words keep internal apostrophes ("'cause", "goin'"); punctuation marks and
# whitespace form their own runs. Concatenating the pieces restores the text.
_PRETOKEN_RE = re.compile(r"[\w']+|[^\w'\s]+|\s+")

# Merge files need a printable stand-in for the space character.
_SPACE_MARK = "▁"


def pretokenize(text: str) -> list[str]:
    return _PRETOKEN_RE.findall(text)


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple

    @property
    def length(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)


class SubwordVocab:
    """Immutable BPE vocabulary: ordered merges plus a dense id table.

    Case is preserved by default; a lowercasing vocabulary folds input at
    encode time (decode then returns the folded text).
    """

    def __init__(self, alphabet: Sequence[str], merges: Sequence[tuple],
                 lowercase: bool = False):
        self.lowercase = lowercase
        self.alphabet = tuple(alphabet)
        self.merges = tuple(tuple(m) for m in merges)
        tokens = list(SPECIAL_TOKENS) + list(self.alphabet)
        for left, right in self.merges:
            tokens.append(left + right)
        self.token_to_id = {tok: i for i, tok in enumerate(tokens)}
        if len(self.token_to_id) != len(tokens):
            raise ValueError("duplicate token produced by merge list")
        self.id_to_token = tokens
        self.pad_id, self.unk_id, self.cls_id, self.sep_id = range(4)
        self._ranks = {m: r for r, m in enumerate(self.merges)}
        self._alphabet_set = frozenset(self.alphabet)
        self._word_cache: dict = {}

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_token)

    def _bpe(self, piece: str) -> tuple:
        cached = self._word_cache.get(piece)
        if cached is not None:
            return cached
        symbols = [c if c in self._alphabet_set else UNK for c in piece]
        while len(symbols) > 1:
            best_rank, best_pos = None, None
            for i in range(len(symbols) - 1):
                rank = self._ranks.get((symbols[i], symbols[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pos = rank, i
            if best_pos is None:
                break
            symbols[best_pos: best_pos + 2] = [symbols[best_pos] + symbols[best_pos + 1]]
        ids = tuple(self.token_to_id[s] for s in symbols)
        self._word_cache[piece] = ids
        return ids

    def encode(self, text: str) -> TokenSeq:
        if self.lowercase:
            text = text.lower()
        ids: list[int] = []
        for piece in pretokenize(text):
            ids.extend(self._bpe(piece))
        return TokenSeq(ids=tuple(ids))

    def decode(self, seq: TokenSeq | Iterable[int]) -> str:
        ids = seq.ids if isinstance(seq, TokenSeq) else tuple(seq)
        return "".join(self.id_to_token[i] for i in ids
                       if i not in (self.pad_id, self.cls_id, self.sep_id))

    def token_count(self, text: str) -> int:
        return self.encode(text).length

    def save(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            self.dump(fh)

    def dump(self, fh: IO[str]) -> None:
        fh.write(f"#version=1 vocab_size={self.vocab_size} "
                 f"pad={self.pad_id} unk={self.unk_id} cls={self.cls_id} "
                 f"sep={self.sep_id} lowercase={int(self.lowercase)}\n")
        fh.write("#alphabet " + "".join(_escape(c) for c in self.alphabet) + "\n")
        for left, right in self.merges:
            fh.write(f"{_escape(left)} {_escape(right)}\n")

    @classmethod
    def load(cls, path: Path | str) -> "SubwordVocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("#version=1"):
            raise ValueError("unrecognized merge-rule file header")
        if len(lines) < 2 or not lines[1].startswith("#alphabet "):
            raise ValueError("merge-rule file missing alphabet line")
        lowercase = "lowercase=1" in lines[0]
        alphabet = [_unescape_char(c) for c in lines[1][len("#alphabet "):]]
        merges = []
        for line in lines[2:]:
            if not line:
                continue
            left, right = line.split(" ")
            merges.append((_unescape(left), _unescape(right)))
        return cls(alphabet=alphabet, merges=merges, lowercase=lowercase)


def _escape(token: str) -> str:
    return token.replace(" ", _SPACE_MARK)


def _unescape(token: str) -> str:
    return token.replace(_SPACE_MARK, " ")


def _unescape_char(char: str) -> str:
    return " " if char == _SPACE_MARK else char


def train_bpe(corpus: Iterable[str], target_vocab: int, seed: int = 0,
              lowercase: bool = False) -> SubwordVocab:
    """Learn merge rules until the vocabulary reaches target_vocab.

    Deterministic given (corpus, target_vocab): pair-frequency ties break
    lexicographically. The seed parameter exists for interface uniformity
    and is unused. Raises VocabTooSmall when target_vocab cannot even hold
    the corpus alphabet plus the special tokens.
    """
    del seed
    texts = list(corpus)
    if not texts:
        raise VocabTooSmall("cannot train a vocabulary on an empty corpus")

    piece_freq: Counter = Counter()
    for text in texts:
        piece_freq.update(pretokenize(text.lower() if lowercase else text))

    alphabet = sorted({c for piece in piece_freq for c in piece})
    base = len(SPECIAL_TOKENS) + len(alphabet)
    if target_vocab < base:
        raise VocabTooSmall(
            f"target_vocab={target_vocab} below alphabet+specials={base}")

    words = {piece: list(piece) for piece in piece_freq}
    merges: list[tuple] = []
    while base + len(merges) < target_vocab:
        pair_freq: Counter = Counter()
        for piece, symbols in words.items():
            freq = piece_freq[piece]
            for i in range(len(symbols) - 1):
                pair_freq[(symbols[i], symbols[i + 1])] += freq
        if not pair_freq:
            break
        best = min(pair_freq.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        merges.append(best)
        merged = best[0] + best[1]
        for piece, symbols in words.items():
            i = 0
            while i < len(symbols) - 1:
                if symbols[i] == best[0] and symbols[i + 1] == best[1]:
                    symbols[i: i + 2] = [merged]
                else:
                    i += 1
    return SubwordVocab(alphabet=alphabet, merges=merges, lowercase=lowercase)


class TokenCounter(Protocol):
    """Anything that can report a token count for a sentence."""

    def token_count(self, text: str) -> int: ...


class ExternalTokenCounter:
    """Adapter for scorers that report their own token counts.

    Interval segmentation must use the same tokenizer as the scorer, so when
    an external scorer is active its reported counts are used instead of the
    in-process BPE.
    """

    def __init__(self, count_fn, name: str = "external"):
        self._count_fn = count_fn
        self.name = name
        self._cache: dict = {}

    def token_count(self, text: str) -> int:
        if text not in self._cache:
            self._cache[text] = int(self._count_fn(text))
        return self._cache[text]
