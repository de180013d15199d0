"""Deterministic sentence segmentation and word normalization.

The boundary rule is intentionally rigid so that the embedder and the
detector always agree: a sentence ends at a run of '.', '!' or '?' that
is followed by whitespace and then an uppercase letter or a digit, or by
the end of the text.  A fixed abbreviation list guards endings such as
"Dr." or "e.g." from terminating a sentence.  A trailing fragment with
no terminal punctuation is emitted as a final sentence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

from .datafiles import data_path

SEGMENTATION_VERSION = "1"

_TERMINALS = ".!?"

# Word pieces: runs of word characters plus internal hyphens/apostrophes.
_WORD_RE = re.compile(r"[\w'-]+")
_EDGE_STRIP = "'-_"


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document.

    ``text`` is the original substring with surrounding whitespace
    trimmed; ``start``/``end`` index into the source document so the
    document can be reconstructed from the sentence list.
    """

    text: str
    index: int
    start: int
    end: int
    words: tuple[str, ...] = field(repr=False)
    first_alpha: str | None = field(repr=False)


def token_words(text: str) -> tuple[str, ...]:
    """Normalize raw text to word tokens.

    Split on whitespace and on any character that is not a word
    character, hyphen or apostrophe; strip leading/trailing hyphen,
    apostrophe and underscore; case-fold; drop empties.  Digit-led
    tokens such as "2009" are kept.
    """
    out = []
    for piece in _WORD_RE.findall(text):
        piece = piece.strip(_EDGE_STRIP).casefold()
        if piece:
            out.append(piece)
    return tuple(out)


def first_alpha_of(words: tuple[str, ...]) -> str | None:
    """First character of the first letter-initial word, or None."""
    for w in words:
        if w[0].isalpha():
            return w[0]
    return None


@lru_cache(maxsize=1)
def default_abbreviations() -> frozenset[str]:
    return load_abbreviations(data_path("abbreviations.txt"))


def load_abbreviations(path) -> frozenset[str]:
    """Load the abbreviation guard list (one token per line, '#' comments)."""
    entries = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            entries.add(line.casefold())
    return frozenset(entries)


def _trailing_chunk(text: str, end: int) -> str:
    """The non-whitespace run ending at ``end`` (exclusive), normalized
    for abbreviation matching: leading non-alphanumerics are stripped
    and the result is case-folded."""
    i = end
    while i > 0 and not text[i - 1].isspace():
        i -= 1
    chunk = text[i:end]
    j = 0
    while j < len(chunk) and not chunk[j].isalnum():
        j += 1
    return chunk[j:].casefold()


def ends_sentence(text: str, abbreviations: frozenset[str] | None = None) -> bool:
    """True when ``text`` ends a complete sentence, i.e. the next word
    appended after whitespace would begin a new sentence."""
    if abbreviations is None:
        abbreviations = default_abbreviations()
    stripped = text.rstrip()
    if not stripped or stripped[-1] not in _TERMINALS:
        return False
    chunk = _trailing_chunk(stripped, len(stripped))
    return chunk not in abbreviations


def _opens_sentence(ch: str) -> bool:
    # Uppercase letters and digits both open sentences; everything else
    # (lowercase, punctuation) continues the current one.
    return ch.isupper() or ch.isdigit()


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[Sentence]:
    """Split ``text`` into sentences.

    Deterministic and idempotent: re-splitting the concatenation of the
    returned sentence texts yields the same sentence texts.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()
    n = len(text)
    boundaries = []  # end offsets (exclusive) of complete sentences
    i = 0
    while i < n:
        if text[i] in _TERMINALS:
            j = i
            while j < n and text[j] in _TERMINALS:
                j += 1
            chunk = _trailing_chunk(text, j)
            if chunk not in abbreviations:
                k = j
                while k < n and text[k].isspace():
                    k += 1
                if k == n:
                    boundaries.append(j)
                elif k > j and _opens_sentence(text[k]):
                    boundaries.append(j)
            i = j
        else:
            i += 1

    sentences: list[Sentence] = []
    cursor = 0
    for end in boundaries:
        piece = text[cursor:end]
        sentences.append(_make(piece, cursor, len(sentences)))
        cursor = end
    tail = text[cursor:]
    if tail.strip():
        sentences.append(_make(tail, cursor, len(sentences)))
    return sentences


def _make(piece: str, offset: int, index: int) -> Sentence:
    lead = len(piece) - len(piece.lstrip())
    trimmed = piece.strip()
    start = offset + lead
    words = token_words(trimmed)
    return Sentence(
        text=trimmed,
        index=index,
        start=start,
        end=start + len(trimmed),
        words=words,
        first_alpha=first_alpha_of(words),
    )
