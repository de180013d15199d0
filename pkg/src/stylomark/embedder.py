"""Watermark embedding: biased sampling from a next-token provider.

The generation loop never biases the first sentence.  Whenever the
accumulated response ends a complete sentence, the key is derived from
that just-completed sentence and governs the following sentence: the
acrostic mask (large bias) applies to the token that opens it, the
sensorimotor mask (small bias) to every later token.  Boundary
decisions during generation reuse the segmenter, so embedding and
detection segment identically by construction.
"""

from __future__ import annotations

import json
import logging
import math
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Protocol, Sequence

import numpy as np

from .datafiles import data_path
from .errors import GenerationError, IngestError, ProtocolError, TransportError
from .keygen import ClassifierBinding, LabelTable, WatermarkKey, derive_key
from .lexicon import NormLexicon
from .segmenter import default_abbreviations, split_sentences

logger = logging.getLogger(__name__)

STOP_TOKEN = "<stop>"
PUNCT_TOKENS = (".", "!", "?", ",", ";", ":")
_TERMINAL_TOKENS = frozenset({".", "!", "?"})
_PUNCT_SET = frozenset(PUNCT_TOKENS)

MIN_CORPUS_TOKENS = 500
# Hard per-generation token cap so a terminal-starved sampling run
# cannot spin forever; generous relative to max_sentences.
TOKENS_PER_SENTENCE_CAP = 60

_CORPUS_TOKEN_RE = re.compile(r"[\w'-]+|[.!?,;:]")

ACROSTIC_FEATURE = "acrostic"
SENSOR_FEATURE = "sensorimotor"


@dataclass(frozen=True)
class EmbedConfig:
    """Knobs for one generation run."""

    acrostic_bias: float = 8.0
    sensor_bias: float = 1.5
    max_sentences: int = 25
    sampling: str = "seeded"  # "seeded" | "greedy"
    seed: int = 0

    def __post_init__(self):
        if self.acrostic_bias < 0 or self.sensor_bias < 0:
            raise ValueError("biases must be non-negative")
        if self.max_sentences < 1:
            raise ValueError("max_sentences must be positive")
        if self.sampling not in ("seeded", "greedy"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")


class Vocabulary:
    """Bidirectional token <-> id table.  Ids are dense and stable."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = tuple(tokens)
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def id(self, token: str) -> int | None:
        return self._ids.get(token)

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]


@dataclass(frozen=True)
class TokenDistribution:
    """A probability vector over a vocabulary (validated on creation)."""

    probs: np.ndarray

    def __post_init__(self):
        p = self.probs
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("distribution must be a non-empty vector")
        if np.any(p < 0):
            raise ValueError("negative probability")
        if abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")


@dataclass(frozen=True)
class Mask:
    """Boolean marking over vocabulary ids for one feature."""

    bits: np.ndarray
    feature: str


class LanguageModel(Protocol):
    """What ``generate`` needs from a model: a vocabulary, a stop token
    id, and a deterministic next-token distribution given context ids."""

    vocabulary: Vocabulary
    stop_id: int

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution: ...


def _first_alpha_char(surface: str) -> str | None:
    for ch in surface:
        if ch.isalpha():
            return ch.casefold()
    return None


def _token_word_form(surface: str) -> str:
    return surface.strip("'-_").casefold()


def build_mask(
    vocab: Vocabulary,
    key: WatermarkKey,
    at_sentence_start: bool,
    lexicon: NormLexicon,
) -> Mask:
    """Mark the vocabulary tokens the key boosts at this position.

    At a sentence start: tokens whose first alphabetic character equals
    the key's acrostic letter (case-folded).  Elsewhere: tokens whose
    surface form is a lexicon match for the key's category.  Tokens
    without an alphabetic character, and tokens outside the lexicon,
    are never marked.
    """
    bits = np.zeros(len(vocab), dtype=bool)
    if at_sentence_start:
        letter = key.acrostic_letter
        for i, tok in enumerate(vocab.tokens):
            bits[i] = _first_alpha_char(tok) == letter
        return Mask(bits=bits, feature=ACROSTIC_FEATURE)
    category = key.category
    for i, tok in enumerate(vocab.tokens):
        w = _token_word_form(tok)
        bits[i] = bool(w) and lexicon.is_match(w, category)
    return Mask(bits=bits, feature=SENSOR_FEATURE)


def boost(dist: TokenDistribution, mask: Mask, bias: float) -> TokenDistribution:
    """Raise marked tokens' log-probabilities by ``bias``, renormalize.

    Bias 0 (or an empty mask) returns the input distribution unchanged,
    bit for bit.  Marked tokens never lose probability, unmarked tokens
    never gain, and relative order among unmarked tokens is preserved.
    """
    if bias < 0:
        raise ValueError("bias must be non-negative")
    if bias == 0.0 or not mask.bits.any():
        return dist
    w = dist.probs.copy()
    w[mask.bits] *= math.exp(bias)
    return TokenDistribution(probs=w / w.sum())


# --------------------------------------------------------------------------
# Mock language model


def _tokenize_corpus_text(text: str) -> list[str]:
    out = []
    for piece in _CORPUS_TOKEN_RE.findall(text.casefold()):
        if piece in _PUNCT_SET:
            out.append(piece)
            continue
        piece = piece.strip("'-_")
        if piece:
            out.append(piece)
    return out


def encode_prompt(model: "LanguageModel", prompt: str) -> list[int]:
    """Prompt text -> known-token context ids (unknown words dropped)."""
    ids = []
    for tok in _tokenize_corpus_text(prompt):
        i = model.vocabulary.id(tok)
        if i is not None:
            ids.append(i)
    return ids


class MockLM:
    """Order-2 word-level interpolated n-gram model with add-one smoothing.

    Tokens are lowercase words plus single-character punctuation marks;
    paragraphs (blank-line separated) are independent documents, each
    terminated by the stop token.  The next-token distribution is a
    fixed-weight interpolation of the add-one-smoothed bigram row and
    the add-one-smoothed unigram.  Two structural constraints are part
    of the model itself (and so apply to any caller equally):
    punctuation never follows punctuation and never starts a document,
    which guarantees generated sentences contain at least one word.
    """

    BIGRAM_WEIGHT = 0.75

    def __init__(self, corpus_text: str, min_tokens: int = MIN_CORPUS_TOKENS):
        paragraphs = [p for p in re.split(r"\n\s*\n", corpus_text) if p.strip()]
        if not paragraphs:
            raise IngestError("corpus is empty")
        docs = [_tokenize_corpus_text(p) for p in paragraphs]
        docs = [d for d in docs if d]
        total = sum(len(d) for d in docs)
        if total < min_tokens:
            raise IngestError(
                f"corpus too small: {total} tokens, need at least {min_tokens}"
            )
        types = sorted({t for d in docs for t in d})
        self.vocabulary = Vocabulary(types + [STOP_TOKEN])
        self.stop_id = self.vocabulary.id(STOP_TOKEN)
        v = len(self.vocabulary)

        uni = np.zeros(v, dtype=np.float64)
        starts = np.zeros(v, dtype=np.float64)
        bi_counts: dict[int, dict[int, float]] = {}
        bi_totals = np.zeros(v, dtype=np.float64)
        for doc in docs:
            ids = [self.vocabulary.id(t) for t in doc] + [self.stop_id]
            starts[ids[0]] += 1
            prev = None
            for i in ids:
                uni[i] += 1
                if prev is not None:
                    row = bi_counts.setdefault(prev, {})
                    row[i] = row.get(i, 0.0) + 1.0
                    bi_totals[prev] += 1
                prev = i

        n_tokens = float(uni.sum())
        self._unigram = (uni + 1.0) / (n_tokens + v)
        self._start = (starts + 1.0) / (float(starts.sum()) + v)
        self._bi_counts = bi_counts
        self._bi_totals = bi_totals
        self._n_tokens = int(n_tokens)

        self._punct_ids = np.array(
            [self.vocabulary.id(p) for p in PUNCT_TOKENS if self.vocabulary.id(p) is not None],
            dtype=np.int64,
        )
        self._terminal_ids = frozenset(
            self.vocabulary.id(p) for p in _TERMINAL_TOKENS if self.vocabulary.id(p) is not None
        )

    def _bigram_row(self, prev: int) -> np.ndarray:
        v = len(self.vocabulary)
        denom = self._bi_totals[prev] + v
        row = np.full(v, 1.0 / denom)
        counts = self._bi_counts.get(prev)
        if counts:
            ids = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
            vals = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
            row[ids] += vals / denom
        return row

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        lam = self.BIGRAM_WEIGHT
        if len(context) == 0:
            probs = lam * self._start + (1.0 - lam) * self._unigram
            ban_punct = True
        else:
            prev = context[-1]
            probs = lam * self._bigram_row(prev) + (1.0 - lam) * self._unigram
            ban_punct = prev in self._punct_ids
        if ban_punct and len(self._punct_ids):
            probs = probs.copy()
            probs[self._punct_ids] = 0.0
            probs /= probs.sum()
        return TokenDistribution(probs=probs)

    def sequence_logprob(self, tokens: Sequence[str], skip_unknown: bool = True) -> tuple[float, int]:
        """Sum of log next-token probabilities along a token sequence.

        Unknown tokens are skipped (closed-vocabulary evaluation).
        Returns (total log probability, number of scored tokens).
        """
        ids = []
        for t in tokens:
            i = self.vocabulary.id(t)
            if i is None:
                if not skip_unknown:
                    raise ValueError(f"unknown token {t!r}")
                continue
            ids.append(i)
        total = 0.0
        scored = 0
        context: list[int] = []
        for i in ids:
            dist = self.next_distribution(context)
            p = float(dist.probs[i])
            if p > 0.0:
                total += math.log(p)
                scored += 1
            context.append(i)
        return total, scored

    def perplexity(self, text: str) -> float:
        tokens = _tokenize_corpus_text(text)
        logprob, scored = self.sequence_logprob(tokens)
        if scored == 0:
            return float("inf")
        return math.exp(-logprob / scored)


def mock_lm(corpus_path, min_tokens: int = MIN_CORPUS_TOKENS) -> MockLM:
    """Build the bundled deterministic mock model from a corpus file."""
    with open(corpus_path, encoding="utf-8") as fh:
        return MockLM(fh.read(), min_tokens=min_tokens)


class RemoteLanguageModel:
    """Client for a next-token service speaking the v1 protocol.

    Fetches the vocabulary once at connect time (``GET <base>/v1/vocab``)
    and requests one full distribution per step
    (``POST <base>/v1/next-distribution`` with ``{"context": [...]}``).
    Malformed payloads raise ProtocolError; connection failures raise
    TransportError.
    """

    def __init__(self, base_url: str, timeout: float = 10.0, token: str | None = None):
        self._base = base_url.rstrip("/")
        self._timeout = timeout
        self._headers = {"Content-Type": "application/json"}
        if token:
            self._headers["Authorization"] = f"Bearer {token}"
        payload = self._request("/v1/vocab", None)
        tokens = payload.get("tokens")
        stop_id = payload.get("stop_id")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolError("vocab payload lacks a token list")
        if not isinstance(stop_id, int) or not (0 <= stop_id < len(tokens)):
            raise ProtocolError("vocab payload has an invalid stop_id")
        self.vocabulary = Vocabulary(tokens)
        self.stop_id = stop_id

    def _request(self, path: str, payload: dict | None) -> dict:
        body = None if payload is None else json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            self._base + path, data=body, headers=self._headers,
            method="POST" if body is not None else "GET",
        )
        try:
            with urllib.request.urlopen(req, timeout=self._timeout) as resp:
                raw = resp.read()
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise TransportError(f"model service unreachable at {self._base}: {exc}") from exc
        try:
            decoded = json.loads(raw)
        except ValueError as exc:
            raise ProtocolError(f"model service returned non-JSON: {exc}") from exc
        if not isinstance(decoded, dict):
            raise ProtocolError("model service returned a non-object payload")
        return decoded

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        payload = self._request("/v1/next-distribution", {"context": list(context)})
        probs = payload.get("probs")
        v = len(self.vocabulary)
        if not isinstance(probs, list) or len(probs) != v:
            raise ProtocolError(
                f"distribution has {len(probs) if isinstance(probs, list) else 'no'} entries, expected {v}"
            )
        arr = np.asarray(probs, dtype=np.float64)
        try:
            return TokenDistribution(probs=arr)
        except ValueError as exc:
            raise ProtocolError(f"invalid distribution from model service: {exc}") from exc


@lru_cache(maxsize=1)
def default_mock_lm() -> MockLM:
    return mock_lm(data_path("corpus.txt"))


# --------------------------------------------------------------------------
# Detokenization

class ResponseBuilder:
    """Incrementally detokenizes sampled tokens into response text.

    Punctuation attaches to the preceding word; the first word of the
    response and of every new sentence is emitted with its first letter
    uppercased.  The "new sentence" decision is exactly the segmenter's
    ``ends_sentence``, tracked incrementally, which is what keeps
    embed-time and detect-time segmentation aligned.
    """

    def __init__(self, abbreviations: frozenset[str]):
        self._abbr = abbreviations
        self._chunks: list[str] = []
        self.text = ""
        self.boundary_ready = False  # True when next word opens a sentence

    def _recheck_tail(self):
        chunk = self._chunks[-1] if self._chunks else ""
        if chunk and chunk[-1] in ".!?":
            i = 0
            while i < len(chunk) and not chunk[i].isalnum():
                i += 1
            self.boundary_ready = chunk[i:].casefold() not in self._abbr
        else:
            self.boundary_ready = False

    def append(self, surface: str):
        if surface in _PUNCT_SET and self._chunks:
            self._chunks[-1] += surface
            self.text += surface
        else:
            word = surface
            if (self.boundary_ready or not self._chunks) and word and word[0].isalpha():
                word = word[0].upper() + word[1:]
            if self._chunks:
                self.text += " "
            self._chunks.append(word)
            self.text += word
        self._recheck_tail()


# --------------------------------------------------------------------------
# Generation

@dataclass(frozen=True)
class TokenEvent:
    step: int
    token_id: int
    surface: str
    sentence_index: int
    at_sentence_start: bool
    feature: str | None
    bias: float
    chosen_was_marked: bool


@dataclass(frozen=True)
class KeyRecord:
    sentence_index: int  # the sentence this key governs
    key: WatermarkKey


@dataclass
class GenerationTrace:
    prompt: str
    config: EmbedConfig
    events: list[TokenEvent] = field(default_factory=list)
    keys: list[KeyRecord] = field(default_factory=list)
    text: str = ""
    sentence_count: int = 0
    stop_reason: str = ""

    def key_letters(self) -> list[str]:
        return [rec.key.acrostic_letter for rec in self.keys]

    def to_records(self) -> Iterable[dict]:
        """Machine-readable event stream (one dict per record)."""
        yield {
            "event": "header",
            "prompt": self.prompt,
            "acrostic_bias": self.config.acrostic_bias,
            "sensor_bias": self.config.sensor_bias,
            "max_sentences": self.config.max_sentences,
            "sampling": self.config.sampling,
            "seed": self.config.seed,
        }
        for ev in self.events:
            yield {
                "event": "token",
                "step": ev.step,
                "token_id": ev.token_id,
                "surface": ev.surface,
                "sentence_index": ev.sentence_index,
                "at_sentence_start": ev.at_sentence_start,
                "feature": ev.feature,
                "bias": ev.bias,
                "chosen_was_marked": ev.chosen_was_marked,
            }
        for rec in self.keys:
            yield {
                "event": "key",
                "sentence_index": rec.sentence_index,
                "acrostic_letter": rec.key.acrostic_letter,
                "category": rec.key.category.name.lower(),
                "source_sentence_index": rec.key.source_sentence_index,
            }
        yield {
            "event": "summary",
            "text": self.text,
            "sentence_count": self.sentence_count,
            "stop_reason": self.stop_reason,
        }


def _sample(dist: TokenDistribution, rng: np.random.Generator, mode: str) -> int:
    if mode == "greedy":
        return int(np.argmax(dist.probs))
    r = rng.random()
    cum = np.cumsum(dist.probs)
    idx = int(np.searchsorted(cum, r, side="right"))
    return min(idx, len(dist.probs) - 1)


def _punct_ids(vocab: Vocabulary) -> np.ndarray:
    ids = [vocab.id(p) for p in PUNCT_TOKENS]
    return np.array([i for i in ids if i is not None], dtype=np.int64)


def _ban_openers(dist: TokenDistribution, punct_ids: np.ndarray) -> TokenDistribution:
    """No punctuation may open a sentence: every sentence has a word.

    Applied identically to plain and watermarked generation, so bias
    zero still reproduces the plain output exactly.
    """
    if not len(punct_ids):
        return dist
    p = dist.probs
    if not p[punct_ids].any():
        return dist
    p = p.copy()
    p[punct_ids] = 0.0
    return TokenDistribution(probs=p / p.sum())


class _MaskCache:
    """Per-generation mask memo: one mask per letter / category used."""

    def __init__(self, vocab: Vocabulary, lexicon: NormLexicon):
        self._vocab = vocab
        self._lexicon = lexicon
        self._memo: dict[tuple[str, object], Mask] = {}

    def get(self, key: WatermarkKey, at_start: bool) -> Mask:
        memo_key = ("a", key.acrostic_letter) if at_start else ("s", key.category)
        mask = self._memo.get(memo_key)
        if mask is None:
            mask = build_mask(self._vocab, key, at_start, self._lexicon)
            self._memo[memo_key] = mask
        return mask


def generate_plain(model: LanguageModel, prompt: str, config: EmbedConfig) -> str:
    """Unwatermarked generation: the same sampling loop with no biasing."""
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    abbr = default_abbreviations()
    rng = np.random.default_rng(config.seed)
    builder = ResponseBuilder(abbr)
    context = encode_prompt(model, prompt)
    punct = _punct_ids(model.vocabulary)
    token_cap = config.max_sentences * TOKENS_PER_SENTENCE_CAP
    started = False
    for _ in range(token_cap):
        opener = builder.boundary_ready or not started
        if builder.boundary_ready:
            if len(split_sentences(builder.text, abbr)) >= config.max_sentences:
                break
        dist = model.next_distribution(context)
        if opener:
            dist = _ban_openers(dist, punct)
        tid = _sample(dist, rng, config.sampling)
        if tid == model.stop_id:
            break
        builder.append(model.vocabulary.token(tid))
        context.append(tid)
        started = True
    return builder.text


def generate(
    model: LanguageModel,
    prompt: str,
    config: EmbedConfig,
    tables: LabelTable,
    binding: ClassifierBinding,
    lexicon: NormLexicon,
) -> tuple[str, GenerationTrace]:
    """Generate a watermarked response to ``prompt``.

    Returns the response text and a trace recording every token event
    and every per-sentence key.  Identical inputs give identical
    outputs; with both biases zero the text is byte-identical to
    ``generate_plain`` under the same seed.
    """
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    abbr = default_abbreviations()
    rng = np.random.default_rng(config.seed)
    builder = ResponseBuilder(abbr)
    context = encode_prompt(model, prompt)
    punct = _punct_ids(model.vocabulary)
    masks = _MaskCache(model.vocabulary, lexicon)
    trace = GenerationTrace(prompt=prompt, config=config)
    key_cache: dict[int, WatermarkKey] = {}
    token_cap = config.max_sentences * TOKENS_PER_SENTENCE_CAP
    stop_reason = "token-cap"

    try:
        for step in range(token_cap):
            sents = split_sentences(builder.text, abbr)
            if builder.boundary_ready:
                if len(sents) >= config.max_sentences:
                    stop_reason = "max-sentences"
                    break
                gov_index = len(sents)
                at_start = True
                source = sents[-1]
            elif not trace.events:
                gov_index = 0
                at_start = True
                source = None
            else:
                gov_index = len(sents) - 1
                at_start = False
                source = sents[gov_index - 1] if gov_index >= 1 else None

            key = None
            if source is not None and gov_index >= 1:
                key = key_cache.get(source.index)
                if key is None:
                    key = derive_key(source, tables, binding)
                    key_cache[source.index] = key

            dist = model.next_distribution(context)
            if at_start:
                dist = _ban_openers(dist, punct)
            feature = None
            bias = 0.0
            mask = None
            if key is not None:
                mask = masks.get(key, at_start)
                bias = config.acrostic_bias if at_start else config.sensor_bias
                if bias > 0.0 and mask.bits.any():
                    dist = boost(dist, mask, bias)
                    feature = mask.feature
                else:
                    mask = None

            tid = _sample(dist, rng, config.sampling)
            if tid == model.stop_id:
                stop_reason = "stop-token"
                break

            if key is not None and (
                not trace.keys or trace.keys[-1].sentence_index != gov_index
            ):
                trace.keys.append(KeyRecord(sentence_index=gov_index, key=key))

            surface = model.vocabulary.token(tid)
            builder.append(surface)
            context.append(tid)
            trace.events.append(
                TokenEvent(
                    step=step,
                    token_id=tid,
                    surface=surface,
                    sentence_index=gov_index,
                    at_sentence_start=at_start,
                    feature=feature,
                    bias=bias if feature else 0.0,
                    chosen_was_marked=bool(mask.bits[tid]) if mask is not None else False,
                )
            )
    except Exception as exc:
        trace.text = builder.text
        trace.stop_reason = "error"
        raise GenerationError(f"generation aborted: {exc}", trace=trace) from exc

    trace.text = builder.text
    trace.sentence_count = len(split_sentences(builder.text, abbr))
    trace.stop_reason = stop_reason
    return builder.text, trace
