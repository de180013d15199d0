"""Watermark-removal attacks for resilience evaluation.

All attacks are pure functions of (text, spec, seed).  The synthetic
attacks (pseudo-translation, synonym swap, sentence drop/shuffle) are
fully deterministic and run offline; cyclic translation goes through a
pluggable client with an on-disk transcript cache so real round trips
can be recorded once and replayed forever.
"""

from __future__ import annotations

import hashlib
import json
import re
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence
from weakref import WeakKeyDictionary

import numpy as np

from .errors import AttackError, ProtocolError, TransportError
from .lexicon import N_CATEGORIES, NormLexicon, SensorCategory
from .segmenter import split_sentences

KIND_CYCLIC = "cyclic-translation"
KIND_PSEUDO = "pseudo-translation"
KIND_DROP = "drop-sentences"
KIND_SHUFFLE = "shuffle-sentences"
KIND_SYNONYM = "synonym-swap"
ATTACK_KINDS = (KIND_CYCLIC, KIND_PSEUDO, KIND_DROP, KIND_SHUFFLE, KIND_SYNONYM)

DEFAULT_PIVOT = "es"

_WORD_SPAN_RE = re.compile(r"[\w'-]+")


@dataclass(frozen=True)
class AttackSpec:
    """One attack, fully described: kind, strength, and seed."""

    kind: str
    intensity: float | None = None  # pseudo-translation / synonym-swap
    fraction: float | None = None  # drop-sentences
    pivot: str | None = None  # cyclic-translation
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        for name in ("intensity", "fraction"):
            value = getattr(self, name)
            if value is not None and not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.kind == KIND_DROP and self.fraction is None:
            raise ValueError("drop-sentences requires a fraction")
        if self.kind in (KIND_PSEUDO, KIND_SYNONYM) and self.intensity is None:
            raise ValueError(f"{self.kind} requires an intensity")

    @classmethod
    def parse(cls, spec: str, seed: int = 0) -> "AttackSpec":
        """Parse ``kind`` or ``kind:parameter`` (e.g. pseudo-translation:0.2)."""
        kind, _, param = spec.partition(":")
        kind = kind.strip()
        param = param.strip()
        if kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {kind!r}")
        if kind == KIND_CYCLIC:
            return cls(kind=kind, pivot=param or DEFAULT_PIVOT, seed=seed)
        if kind == KIND_SHUFFLE:
            if param:
                raise ValueError("shuffle-sentences takes no parameter")
            return cls(kind=kind, seed=seed)
        if not param:
            raise ValueError(f"{kind} requires a parameter, e.g. {kind}:0.2")
        try:
            value = float(param)
        except ValueError:
            raise ValueError(f"bad numeric parameter {param!r} for {kind}") from None
        if kind == KIND_DROP:
            return cls(kind=kind, fraction=value, seed=seed)
        return cls(kind=kind, intensity=value, seed=seed)

    def describe(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed}
        if self.intensity is not None:
            out["intensity"] = self.intensity
        if self.fraction is not None:
            out["fraction"] = self.fraction
        if self.pivot is not None:
            out["pivot"] = self.pivot
        return out


# --------------------------------------------------------------------------
# Lexicon neighborhood index (for pseudo-translation and synonym swap)

_NEIGHBOR_INDEX: "WeakKeyDictionary[NormLexicon, list]" = WeakKeyDictionary()


def _neighbor_index(lexicon: NormLexicon) -> list:
    """Per-category entries sorted by (rating, word) for neighbor lookup."""
    index = _NEIGHBOR_INDEX.get(lexicon)
    if index is None:
        index = []
        words_arr = np.array(lexicon.words)
        for c in range(N_CATEGORIES):
            order = np.lexsort((words_arr, lexicon.ratings[:, c]))
            index.append((lexicon.ratings[order, c], words_arr[order]))
        _NEIGHBOR_INDEX[lexicon] = index
    return index


def dominant_category(lexicon: NormLexicon, word: str) -> SensorCategory | None:
    ratings = lexicon.ratings_of(word)
    if ratings is None:
        return None
    return SensorCategory(int(np.argmax(ratings)))


def nearest_neighbor(lexicon: NormLexicon, word: str) -> str | None:
    """The lexicon word closest in rating to ``word`` in its dominant
    category (never the word itself; deterministic on ties)."""
    word = word.casefold()
    category = dominant_category(lexicon, word)
    if category is None:
        return None
    ratings, words = _neighbor_index(lexicon)[int(category)]
    target = lexicon.rating(word, category)
    pos = int(np.searchsorted(ratings, target, side="left"))
    best = None
    lo, hi = pos - 1, pos
    # Walk outward from the insertion point; the first acceptable
    # candidate on each side bounds the search.
    while lo >= 0 or hi < len(words):
        lo_delta = target - ratings[lo] if lo >= 0 else None
        hi_delta = ratings[hi] - target if hi < len(words) else None
        if hi_delta is None or (lo_delta is not None and lo_delta <= hi_delta):
            cand, delta, step = words[lo], lo_delta, "lo"
        else:
            cand, delta, step = words[hi], hi_delta, "hi"
        if cand != word:
            best = str(cand)
            break
        if step == "lo":
            lo -= 1
        else:
            hi += 1
    return best


def _match_case(original: str, replacement: str) -> str:
    if original[:1].isupper() and replacement:
        return replacement[0].upper() + replacement[1:]
    return replacement


def _word_spans(text: str) -> list[tuple[int, int, str]]:
    """(start, end, surface) spans of alphabetic word cores in ``text``."""
    return [
        (m.start(), m.end(), m.group())
        for m in _WORD_SPAN_RE.finditer(text)
        if any(ch.isalpha() for ch in m.group())
    ]


def _splice(text: str, replacements: list[tuple[int, int, str]]) -> str:
    if not replacements:
        return text
    out = []
    cursor = 0
    for start, end, new in sorted(replacements):
        out.append(text[cursor:start])
        out.append(new)
        cursor = end
    out.append(text[cursor:])
    return "".join(out)


def pseudo_translate(
    text: str, lexicon: NormLexicon, seed: int = 0, intensity: float = 0.2
) -> str:
    """Deterministic offline surrogate for translation noise.

    Each word is replaced with probability ``intensity`` — sentence
    openers at half intensity, since a round-trip translation tends to
    rebuild sentence-initial structure more conservatively than word
    interiors.  An in-lexicon word becomes its nearest rating neighbor
    in its dominant category; an out-of-lexicon word becomes an
    arbitrary (seeded) lexicon word.  Sentence boundaries, punctuation,
    spacing, and initial capitalization are preserved.
    """
    if not (0.0 <= intensity <= 1.0):
        raise ValueError(f"intensity must be in [0, 1], got {intensity}")
    if intensity == 0.0:
        return text
    rng = np.random.default_rng(seed)
    replacements: list[tuple[int, int, str]] = []
    for sentence in split_sentences(text):
        for j, (start, end, surface) in enumerate(_word_spans(sentence.text)):
            threshold = intensity / 2.0 if j == 0 else intensity
            if rng.random() >= threshold:
                continue
            replacement = nearest_neighbor(lexicon, surface)
            if replacement is None:
                replacement = lexicon.words[int(rng.integers(0, len(lexicon.words)))]
            replacements.append(
                (
                    sentence.start + start,
                    sentence.start + end,
                    _match_case(surface, replacement),
                )
            )
    return _splice(text, replacements)


def synonym_swap(
    text: str, lexicon: NormLexicon, seed: int = 0, intensity: float = 0.2
) -> str:
    """Replace in-lexicon words with their nearest rating neighbors.

    Unlike pseudo-translation there is no out-of-lexicon fallback and no
    sentence-opener discount: every word is a candidate with the same
    probability, and unknown words are left alone.
    """
    if not (0.0 <= intensity <= 1.0):
        raise ValueError(f"intensity must be in [0, 1], got {intensity}")
    if intensity == 0.0:
        return text
    rng = np.random.default_rng(seed)
    replacements: list[tuple[int, int, str]] = []
    for sentence in split_sentences(text):
        for start, end, surface in _word_spans(sentence.text):
            if rng.random() >= intensity:
                continue
            replacement = nearest_neighbor(lexicon, surface)
            if replacement is None:
                continue
            replacements.append(
                (
                    sentence.start + start,
                    sentence.start + end,
                    _match_case(surface, replacement),
                )
            )
    return _splice(text, replacements)


def drop_sentences(text: str, fraction: float, seed: int = 0) -> str:
    """Remove a uniformly chosen fraction of sentences.

    The removal count is round(fraction * n), clamped so at least one
    sentence survives.  Survivors keep their order and their bytes.
    """
    if not (0.0 <= fraction < 1.0):
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    sentences = split_sentences(text)
    n = len(sentences)
    k = min(round(fraction * n), n - 1) if n else 0
    if k <= 0:
        return text
    rng = np.random.default_rng(seed)
    dropped = set(rng.choice(n, size=k, replace=False).tolist())
    return " ".join(s.text for i, s in enumerate(sentences) if i not in dropped)


def shuffle_sentences(text: str, seed: int = 0) -> str:
    """Permute sentence order (uniformly, deterministic under seed)."""
    sentences = split_sentences(text)
    if len(sentences) <= 1:
        return text
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sentences))
    return " ".join(sentences[i].text for i in order)


# --------------------------------------------------------------------------
# Cyclic translation through a pluggable client

class Translator(Protocol):
    """External translation client: one directed hop per call."""

    def translate(self, text: str, source: str, target: str) -> str: ...


@dataclass(frozen=True)
class TranslationHop:
    source: str
    target: str
    input_text: str
    output_text: str


class HttpTranslator:
    """Translation client for an HTTP endpoint.

    Posts ``{"text": ..., "source": ..., "target": ...}`` as UTF-8 JSON
    and expects ``{"text": ...}`` back.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def translate(self, text: str, source: str, target: str) -> str:
        payload = json.dumps(
            {"text": text, "source": source, "target": target}
        ).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint,
            data=payload,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (OSError, ValueError) as exc:
            raise TransportError(f"translation request failed: {exc}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise ProtocolError("translator response must carry a 'text' string")
        return body["text"]


@dataclass(frozen=True)
class CyclicResult:
    text: str
    hops: tuple[TranslationHop, ...]


class FileTranscriptCache:
    """On-disk transcript store keyed by content hash.

    Lets a real translation round trip be recorded once and replayed
    deterministically (and offline) ever after.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            self._entries = json.loads(self.path.read_text(encoding="utf-8"))

    @staticmethod
    def key(text: str, source: str, target: str) -> str:
        payload = f"{source}->{target}\n{text}".encode("utf-8")
        return hashlib.blake2b(payload, digest_size=16).hexdigest()

    def get(self, text: str, source: str, target: str) -> str | None:
        entry = self._entries.get(self.key(text, source, target))
        return entry["output"] if entry else None

    def put(self, text: str, source: str, target: str, output: str):
        self._entries[self.key(text, source, target)] = {
            "source": source,
            "target": target,
            "input": text,
            "output": output,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self._entries, indent=1, sort_keys=True), encoding="utf-8"
        )

    def __len__(self) -> int:
        return len(self._entries)


def _one_hop(
    text: str,
    source: str,
    target: str,
    translator: Translator | None,
    cache: FileTranscriptCache | None,
) -> str:
    if cache is not None:
        cached = cache.get(text, source, target)
        if cached is not None:
            return cached
    if translator is None:
        raise AttackError(
            f"no translator configured and no cached transcript for {source}->{target}"
        )
    try:
        output = translator.translate(text, source, target)
    except Exception as exc:
        raise AttackError(f"translation hop {source}->{target} failed: {exc}") from exc
    if not isinstance(output, str) or not output.strip():
        raise AttackError(f"translator returned empty text for {source}->{target}")
    if cache is not None:
        cache.put(text, source, target, output)
    return output


def cyclic_translate(
    text: str,
    translator: Translator | None = None,
    pivot: str = DEFAULT_PIVOT,
    cache: FileTranscriptCache | None = None,
) -> CyclicResult:
    """Translate text to a pivot language and back to English.

    Both hops are recorded (in the returned result, and in the cache
    when one is given).  A failed hop raises AttackError so the run is
    marked incomplete rather than silently skipped.
    """
    forward = _one_hop(text, "en", pivot, translator, cache)
    back = _one_hop(forward, pivot, "en", translator, cache)
    return CyclicResult(
        text=back,
        hops=(
            TranslationHop("en", pivot, text, forward),
            TranslationHop(pivot, "en", forward, back),
        ),
    )


def apply_attack(
    text: str,
    spec: AttackSpec,
    lexicon: NormLexicon | None = None,
    translator: Translator | None = None,
    cache: FileTranscriptCache | None = None,
) -> str:
    """Dispatch an AttackSpec to its implementation."""
    if spec.kind == KIND_PSEUDO:
        if lexicon is None:
            raise AttackError("pseudo-translation requires a lexicon")
        return pseudo_translate(text, lexicon, seed=spec.seed, intensity=spec.intensity)
    if spec.kind == KIND_SYNONYM:
        if lexicon is None:
            raise AttackError("synonym-swap requires a lexicon")
        return synonym_swap(text, lexicon, seed=spec.seed, intensity=spec.intensity)
    if spec.kind == KIND_DROP:
        return drop_sentences(text, spec.fraction, seed=spec.seed)
    if spec.kind == KIND_SHUFFLE:
        return shuffle_sentences(text, seed=spec.seed)
    return cyclic_translate(
        text, translator, pivot=spec.pivot or DEFAULT_PIVOT, cache=cache
    ).text
