"""Subword tokenization: BPE merge learning and WordPiece segmentation.

Two tokenizers cooperate here.  A byte-pair-encoding (BPE) trainer learns a
merge table from a word-frequency corpus; its emitted vocabulary is rendered
in the WordPiece convention (word-internal pieces prefixed ``"##"``) so that
the pieces can later be spliced into a pretrained model's vocabulary.  A
WordPiece segmenter applies such a vocabulary with greedy longest-match-first
lookup and classifies each word at two levels:

* word-level OOV: the word is not itself a vocabulary token;
* subword-level OOV: no segmentation into vocabulary pieces exists at all,
  so the word collapses to the unknown token.

Pre-tokenization is whitespace splitting only; words are never altered.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import lru_cache

from .embeddings import Vocabulary
from .errors import EmptyCorpus, MalformedHeader, MalformedLine, ValidationError

MERGES_HEADER = "#version: vocab-bridge-1"
DEFAULT_UNK = "[UNK]"
DEFAULT_MAX_CHARS = 100


class SegmentStatus(enum.Enum):
    IN_VOCAB = "IN_VOCAB"
    WORD_OOV_SUBWORD_OK = "WORD_OOV_SUBWORD_OK"
    SUBWORD_OOV = "SUBWORD_OOV"


@dataclass(frozen=True)
class Segmentation:
    """One word and its subword pieces.

    Unless the word fell back to the unknown token, concatenating the pieces
    (continuation prefixes removed) reproduces the word exactly.
    """

    word: str
    pieces: tuple[str, ...]
    status: SegmentStatus


@dataclass(frozen=True)
class BpeModel:
    """A learned BPE merge table.

    ``merges`` are (left, right) symbol pairs in learned order; earlier pairs
    have priority during application.  The end-of-word marker is fused onto a
    word's final character, so word-final symbols carry a ``"</w>"`` suffix
    internally; application output strips it.  ``wordpiece_vocab`` holds the
    subword inventory observed when segmenting the training corpus, rendered
    in the WordPiece convention and ordered by descending frequency (ties by
    ascending token).
    """

    merges: tuple[tuple[str, str], ...]
    vocab_size_target: int
    end_of_word_marker: str = "</w>"
    wordpiece_vocab: tuple[str, ...] = ()


def _check_word(word: str) -> None:
    if not word or any(ch.isspace() for ch in word):
        raise ValidationError(f"invalid word {word!r}: empty or contains whitespace")


def _symbolize(word: str, marker: str) -> tuple[str, ...]:
    # "abc" -> ('a', 'b', 'c</w>'); single-char words become ('a</w>',)
    return tuple(word[:-1]) + (word[-1] + marker,)


def _merge_pair(symbols: tuple[str, ...], left: str, right: str) -> tuple[str, ...]:
    """Merge non-overlapping (left, right) occurrences, left to right."""
    merged = left + right
    out: list[str] = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def _pair_counts(words: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in words.items():
        for pair in zip(symbols, symbols[1:]):
            counts[pair] += freq
    return counts


def bpe_train(
    corpus: Mapping[str, int],
    target_vocab: int,
    *,
    end_of_word_marker: str = "</w>",
    continuation_prefix: str = "##",
) -> BpeModel:
    """Learn BPE merges from a word-frequency table.

    Repeatedly merges the most frequent adjacent symbol pair, breaking ties
    by the lexicographically smallest (left, right) pair, until the number of
    distinct symbols reaches ``target_vocab`` or no pair occurs at least
    twice.  Identical inputs always produce identical models.

    Raises ``EmptyCorpus`` if the table has no word with positive frequency.
    """
    if target_vocab < 1:
        raise ValidationError(f"target_vocab must be positive, got {target_vocab}")
    words: dict[tuple[str, ...], int] = {}
    corpus_words: list[tuple[str, int]] = []
    for word, freq in corpus.items():
        if freq <= 0:
            continue
        _check_word(word)
        words[_symbolize(word, end_of_word_marker)] = freq
        corpus_words.append((word, freq))
    if not words:
        raise EmptyCorpus("no words with positive frequency")

    merges: list[tuple[str, str]] = []
    while True:
        types = {s for symbols in words for s in symbols}
        if len(types) >= target_vocab:
            break
        counts = _pair_counts(words)
        if not counts:
            break
        best_freq = max(counts.values())
        if best_freq < 2:
            break
        pair = min(p for p, c in counts.items() if c == best_freq)
        merges.append(pair)
        words = {_merge_pair(symbols, *pair): freq for symbols, freq in words.items()}

    model = BpeModel(
        merges=tuple(merges),
        vocab_size_target=target_vocab,
        end_of_word_marker=end_of_word_marker,
    )
    entry_counts: Counter = Counter()
    for word, freq in corpus_words:
        rendered = wordpiece_style(bpe_apply(model, word), continuation_prefix)
        for piece in rendered:
            entry_counts[piece] += freq
    entries = tuple(sorted(entry_counts, key=lambda t: (-entry_counts[t], t)))
    return BpeModel(
        merges=model.merges,
        vocab_size_target=target_vocab,
        end_of_word_marker=end_of_word_marker,
        wordpiece_vocab=entries,
    )


@lru_cache(maxsize=8)
def _merge_ranks(model: BpeModel) -> dict[tuple[str, str], int]:
    return {pair: rank for rank, pair in enumerate(model.merges)}


def bpe_apply(model: BpeModel, word: str) -> list[str]:
    """Segment one word with the learned merges, in priority order.

    Always succeeds: with no applicable merge the word falls back to single
    characters.  The end-of-word marker is stripped from the output.
    """
    _check_word(word)
    marker = model.end_of_word_marker
    symbols = list(_symbolize(word, marker))
    ranks = _merge_ranks(model)
    while len(symbols) > 1:
        best: tuple[str, str] | None = None
        best_rank = len(model.merges)
        for pair in zip(symbols, symbols[1:]):
            rank = ranks.get(pair, -1)
            if rank >= 0 and rank < best_rank:
                best_rank = rank
                best = pair
        if best is None:
            break
        symbols = list(_merge_pair(tuple(symbols), *best))
    symbols[-1] = symbols[-1][: -len(marker)]
    return symbols


def wordpiece_style(pieces: list[str], continuation_prefix: str = "##") -> list[str]:
    """Render a piece sequence in the WordPiece convention."""
    return [pieces[0]] + [continuation_prefix + p for p in pieces[1:]]


def save_bpe_model(model: BpeModel, path) -> None:
    """Write merges as ``left right`` lines under a version header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MERGES_HEADER + "\n")
        for left, right in model.merges:
            fh.write(f"{left} {right}\n")


def load_bpe_model(path, *, vocab_size_target: int = 0) -> BpeModel:
    """Read a merges file written by :func:`save_bpe_model`.

    The training-time vocabulary target and emitted vocabulary are not stored
    in the merges format; the loaded model carries only the merge table.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MERGES_HEADER:
        raise MalformedHeader(f"expected {MERGES_HEADER!r} header", line=1)
    merges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for offset, line in enumerate(lines[1:]):
        lineno = offset + 2
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise MalformedLine(f"expected 'left right', got {line!r}", line=lineno)
        pair = (parts[0], parts[1])
        if pair in seen:
            raise MalformedLine(f"duplicate merge pair {pair!r}", line=lineno)
        seen.add(pair)
        merges.append(pair)
    return BpeModel(merges=tuple(merges), vocab_size_target=vocab_size_target)


def wordpiece_segment(
    vocab: Vocabulary,
    unk: str,
    word: str,
    max_chars: int = DEFAULT_MAX_CHARS,
) -> Segmentation:
    """Segment one word by greedy longest-match-first vocabulary lookup.

    The first piece is matched bare; subsequent pieces are matched with the
    vocabulary's continuation prefix.  Words longer than ``max_chars`` or
    with no complete segmentation collapse to ``(unk,)`` with status
    ``SUBWORD_OOV``.
    """
    _check_word(word)
    if len(word) > max_chars:
        return Segmentation(word, (unk,), SegmentStatus.SUBWORD_OOV)
    prefix = vocab.continuation_prefix
    pieces: list[str] = []
    start = 0
    n = len(word)
    while start < n:
        end = n
        found: str | None = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = prefix + piece
            if piece in vocab:
                found = piece
                break
            end -= 1
        if found is None:
            return Segmentation(word, (unk,), SegmentStatus.SUBWORD_OOV)
        pieces.append(found)
        start = end
    if len(pieces) == 1 and pieces[0] == word:
        status = SegmentStatus.IN_VOCAB
    else:
        status = SegmentStatus.WORD_OOV_SUBWORD_OK
    return Segmentation(word, tuple(pieces), status)


def classify_corpus(
    vocab: Vocabulary,
    unk: str,
    lines: Iterable[str],
    max_chars: int = DEFAULT_MAX_CHARS,
) -> Iterator[Segmentation]:
    """Yield one :class:`Segmentation` per whitespace-separated word."""
    for line in lines:
        for word in line.split():
            yield wordpiece_segment(vocab, unk, word, max_chars)
