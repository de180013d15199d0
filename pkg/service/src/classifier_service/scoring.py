"""Pure scoring rules: winner selection and the default lexical scorer.

The winner-selection rule here is deliberately a second implementation of
the same contract the consuming client enforces: the winning index is the
argmax of the scores with ties resolved to the lowest index.  A shared
vector file (``conformance/classifier_conformance.json`` at the repository
root) pins both implementations to identical behaviour without either
importing the other.
"""

from __future__ import annotations

import re
from typing import Sequence

WORD_RE = re.compile(r"[a-z0-9']+")


def pick_index(scores: Sequence[float]) -> int:
    """Return the index of the largest score, lowest index on ties."""
    if len(scores) == 0:
        raise ValueError("cannot pick a winner from an empty score vector")
    winner = 0
    for i, value in enumerate(scores):
        if value > scores[winner]:
            winner = i
    return winner


def word_set(text: str) -> frozenset[str]:
    """Casefolded word shingles of ``text``."""
    return frozenset(WORD_RE.findall(text.casefold()))


def trigram_set(text: str) -> frozenset[str]:
    """Character trigrams over the space-joined casefolded words.

    A single leading/trailing space pads the joined string so one-letter
    and two-letter inputs still contribute at least one trigram.
    """
    joined = " " + " ".join(WORD_RE.findall(text.casefold())) + " "
    if len(joined) < 3:
        return frozenset()
    return frozenset(joined[i : i + 3] for i in range(len(joined) - 2))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


class LexicalClassifier:
    """Deterministic self-contained label scorer.

    Scores each label independently of the others as a blend of word-set
    and character-trigram Jaccard similarity between the text and the
    label string.  The score for a (text, label) pair is a pure function
    of those two strings, which makes label-order alignment exact: when
    the label list is permuted, the score vector permutes with it,
    bit for bit.

    This backend trades semantic quality for hermetic determinism; it is
    the default so the service runs with no model assets.  Use an
    ``hf:<model>`` backend spec for an NLI-grade classifier.
    """

    model_id = "lexical-jaccard-v1"

    WORD_WEIGHT = 0.25
    TRIGRAM_WEIGHT = 0.75

    def score_one(self, text: str, label: str) -> float:
        words = _jaccard(word_set(text), word_set(label))
        trigrams = _jaccard(trigram_set(text), trigram_set(label))
        return self.WORD_WEIGHT * words + self.TRIGRAM_WEIGHT * trigrams

    def scores(self, text: str, labels: Sequence[str]) -> list[float]:
        return [self.score_one(text, label) for label in labels]

    def classify(self, text: str, labels: Sequence[str]) -> tuple[int, list[float]]:
        values = self.scores(text, labels)
        return pick_index(values), values
