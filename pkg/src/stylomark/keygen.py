"""Per-sentence key derivation via zero-shot style label classification.

A sentence is classified twice: once against 26 topic labels whose
targets are the letters a-z (the acrostic key) and once against 11
topic labels whose targets are sensorimotor categories.  The winning
label indices map through the label table to a WatermarkKey.  The
builtin classifier is a deterministic add-one-smoothed bag-of-words
cosine against shipped seed-term lists; a remote classifier speaking
the wire protocol can be swapped in without touching callers.
"""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import sqrt
from typing import Mapping, Sequence

from .datafiles import data_path
from .errors import IngestError, KeyDerivationError, ProtocolError, TransportError
from .lexicon import SensorCategory
from .segmenter import Sentence, token_words

logger = logging.getLogger(__name__)

BUILTIN_CLASSIFIER_VERSION = "builtin-v1"
SEED_TERMS_PER_LABEL = 30
REMOTE_TIMEOUT_S = 10.0


@dataclass(frozen=True)
class LabelTable:
    """Ordered label records for both features.

    ``acrostic_labels[i]`` maps to letter ``chr(ord('a') + i)``;
    ``sensor_labels[j]`` maps to ``sensor_targets[j]``.
    """

    version: str
    acrostic_labels: tuple[str, ...]
    sensor_labels: tuple[str, ...]
    sensor_targets: tuple[SensorCategory, ...]

    def __post_init__(self):
        if len(self.acrostic_labels) != 26:
            raise IngestError(
                f"acrostic label table needs 26 rows, got {len(self.acrostic_labels)}"
            )
        if len(self.sensor_labels) != len(self.sensor_targets):
            raise IngestError("sensor labels and targets must align")
        if sorted(self.sensor_targets) != sorted(SensorCategory):
            raise IngestError("sensor targets must cover each category exactly once")

    def acrostic_letter(self, index: int) -> str:
        return chr(ord("a") + index)

    def sensor_category(self, index: int) -> SensorCategory:
        return self.sensor_targets[index]


@dataclass(frozen=True)
class WatermarkKey:
    """The key controlling one sentence's token biases."""

    acrostic_letter: str
    category: SensorCategory
    source_sentence_index: int


@dataclass(frozen=True)
class ClassifierBinding:
    """Which classifier answers ``classify`` calls.

    kind "builtin" carries the seed-term table; kind "remote" carries an
    endpoint URL.  The version string travels into reports and run
    headers so mixed-classifier comparisons are detectable.
    """

    kind: str
    version: str
    seeds: Mapping[str, tuple[str, ...]] | None = None
    endpoint: str | None = None

    @classmethod
    def builtin(cls, seeds: Mapping[str, tuple[str, ...]]) -> "ClassifierBinding":
        return cls(kind="builtin", version=BUILTIN_CLASSIFIER_VERSION, seeds=seeds)

    @classmethod
    def remote(cls, endpoint: str, version: str = "remote") -> "ClassifierBinding":
        return cls(kind="remote", version=version, endpoint=endpoint)

    def describe(self) -> dict:
        return {"kind": self.kind, "version": self.version, "endpoint": self.endpoint}


def argmax_lowest(scores: Sequence[float]) -> int:
    """Index of the maximal score; ties resolve to the lowest index."""
    if not scores:
        raise ValueError("empty score vector")
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def builtin_classify(
    text: str, labels: Sequence[str], seeds: Mapping[str, tuple[str, ...]]
) -> tuple[int, list[float]]:
    """Score ``text`` against each label's seed terms.

    Cosine similarity between add-one-smoothed bags of words over the
    union vocabulary of the text and the label's seed list.  With equal
    sized seed lists (enforced at load) a text sharing no terms with any
    label scores all labels equally and the tie rule yields index 0.
    """
    bag = Counter(token_words(text))
    scores: list[float] = []
    for label in labels:
        try:
            terms = seeds[label]
        except KeyError:
            raise KeyDerivationError(f"no seed terms for label {label!r}") from None
        termset = set(terms)
        vocab = sorted(set(bag) | termset)
        dot = 0.0
        t_sq = 0.0
        s_sq = 0.0
        for w in vocab:
            t = bag.get(w, 0) + 1.0
            s = 2.0 if w in termset else 1.0
            dot += t * s
            t_sq += t * t
            s_sq += s * s
        scores.append(dot / (sqrt(t_sq) * sqrt(s_sq)))
    return argmax_lowest(scores), scores


def _remote_classify(
    endpoint: str, text: str, labels: Sequence[str]
) -> tuple[int, list[float]]:
    body = json.dumps({"text": text, "labels": list(labels)}).encode("utf-8")
    req = urllib.request.Request(
        endpoint.rstrip("/") + "/classify",
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=REMOTE_TIMEOUT_S) as resp:
            payload = resp.read()
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise TransportError(f"classifier service unreachable: {exc}") from exc
    try:
        obj = json.loads(payload.decode("utf-8"))
        index = obj["index"]
        scores = obj["scores"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed classify response: {exc}") from exc
    if (
        not isinstance(index, int)
        or not isinstance(scores, list)
        or len(scores) != len(labels)
        or not all(isinstance(s, (int, float)) for s in scores)
    ):
        raise ProtocolError("classify response shape does not match request labels")
    if index != argmax_lowest(scores):
        raise ProtocolError("classify response index violates the argmax tie rule")
    return index, [float(s) for s in scores]


def classify(
    binding: ClassifierBinding, text: str, labels: Sequence[str]
) -> tuple[int, list[float]]:
    """Dispatch a classification to the bound classifier.

    Returns (winning index, scores aligned to ``labels``).  The winner
    is the argmax with ties resolved to the lowest index.
    """
    if binding.kind == "builtin":
        if binding.seeds is None:
            raise KeyDerivationError("builtin binding has no seed table")
        return builtin_classify(text, labels, binding.seeds)
    if binding.kind == "remote":
        if not binding.endpoint:
            raise KeyDerivationError("remote binding has no endpoint")
        return _remote_classify(binding.endpoint, text, labels)
    raise KeyDerivationError(f"unknown classifier kind {binding.kind!r}")


def derive_key(
    sentence: Sentence, tables: LabelTable, binding: ClassifierBinding
) -> WatermarkKey:
    """Derive the watermark key carried by ``sentence``.

    The key is a pure function of the sentence text, the label table and
    the classifier; it governs the sentence that follows this one.
    """
    if not sentence.words:
        raise KeyDerivationError(
            f"sentence {sentence.index} has no words to classify"
        )
    a_idx, _ = classify(binding, sentence.text, tables.acrostic_labels)
    s_idx, _ = classify(binding, sentence.text, tables.sensor_labels)
    return WatermarkKey(
        acrostic_letter=tables.acrostic_letter(a_idx),
        category=tables.sensor_category(s_idx),
        source_sentence_index=sentence.index,
    )


def load_label_table(path) -> LabelTable:
    """Load the versioned label table.

    Format: '# table-version: N' header, then '[acrostic]' and
    '[sensorimotor]' sections of tab-separated (label, target) records.
    """
    version = None
    section = None
    acro: list[tuple[str, str]] = []
    sensor: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.lower().startswith("table-version:"):
                    version = body.split(":", 1)[1].strip()
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                continue
            if "\t" not in line:
                raise IngestError(f"label table line {lineno}: expected TAB separator")
            label, target = (part.strip() for part in line.split("\t", 1))
            if section == "acrostic":
                acro.append((label, target))
            elif section == "sensorimotor":
                sensor.append((label, target))
            else:
                raise IngestError(f"label table line {lineno}: outside any section")
    if version is None:
        raise IngestError(f"label table {path} has no table-version header")
    for i, (label, target) in enumerate(acro):
        expected = chr(ord("A") + i)
        if target.upper() != expected:
            raise IngestError(
                f"acrostic row {i}: target {target!r} does not match {expected!r}"
            )
    targets = tuple(SensorCategory.from_name(t.replace("/", "_")) for _, t in sensor)
    return LabelTable(
        version=version,
        acrostic_labels=tuple(label for label, _ in acro),
        sensor_labels=tuple(label for label, _ in sensor),
        sensor_targets=targets,
    )


def load_seed_table(path) -> dict[str, tuple[str, ...]]:
    """Load seed-term lists: 'label<TAB>term term ...' per line.

    Every label must have exactly SEED_TERMS_PER_LABEL distinct,
    normalized terms; equal sizes keep no-overlap scores exactly equal
    across labels.
    """
    seeds: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise IngestError(f"seed table line {lineno}: expected TAB separator")
            label, rest = line.split("\t", 1)
            label = label.strip()
            terms = tuple(token_words(rest))
            if len(set(terms)) != len(terms):
                raise IngestError(f"seed table line {lineno}: duplicate terms")
            if len(terms) != SEED_TERMS_PER_LABEL:
                raise IngestError(
                    f"seed table line {lineno}: {label!r} has {len(terms)} terms, "
                    f"needs {SEED_TERMS_PER_LABEL}"
                )
            if label in seeds:
                raise IngestError(f"seed table line {lineno}: duplicate label {label!r}")
            seeds[label] = terms
    if not seeds:
        raise IngestError(f"no seed lists in {path}")
    return seeds


@lru_cache(maxsize=1)
def default_label_table() -> LabelTable:
    return load_label_table(data_path("labels.tsv"))


@lru_cache(maxsize=1)
def default_seed_table() -> dict[str, tuple[str, ...]]:
    return load_seed_table(data_path("label_seeds.tsv"))


def default_binding() -> ClassifierBinding:
    return ClassifierBinding.builtin(default_seed_table())
