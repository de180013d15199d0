"""Deterministic bigram next-token model over the bundled corpus.

Each blank-line-separated corpus paragraph is one document.  Documents
are tokenized into casefolded words and standalone punctuation marks,
then terminated with the stop token, which also stands in for the
document boundary when a request arrives with an empty context.  Keeping
several sentences per document preserves sentence-to-sentence transitions
(full stop followed by an opening word), so sampled text runs for more
than one sentence before the stop token fires.

Each row is a convex blend of the smoothed bigram row and the corpus
unigram.  The unigram component keeps sentence-final punctuation
reachable from every state — with pure add-one smoothing over a small
corpus the rows go nearly uniform and sampled "sentences" run for
hundreds of tokens.  The stop token is excluded from the unigram so a
document ends through the bigram signal at sentence boundaries rather
than anywhere mid-sentence; the bigram's smoothing constant keeps every
row strictly positive (stop included) and summing to one up to float
rounding.

The model is immutable after construction; serving it concurrently is
safe and every identical request yields the identical vector.
"""

from __future__ import annotations

import re
from importlib import resources

import numpy as np

STOP_TOKEN = "</s>"
TOKEN_RE = re.compile(r"[a-z0-9'-]+|[.,!?;:]")


def tokenize(line: str) -> list[str]:
    return TOKEN_RE.findall(line.casefold())


class BigramModel:
    BIGRAM_ALPHA = 0.1
    UNIGRAM_WEIGHT = 0.4

    def __init__(self, documents: list[list[str]]):
        types = sorted({tok for doc in documents for tok in doc})
        self.tokens: list[str] = types + [STOP_TOKEN]
        self.stop_id: int = len(self.tokens) - 1
        index = {tok: i for i, tok in enumerate(self.tokens)}
        v = len(self.tokens)
        counts = np.zeros((v, v), dtype=np.float64)
        unigram = np.zeros(v, dtype=np.float64)
        for doc in documents:
            ids = [index[tok] for tok in doc] + [self.stop_id]
            prev = self.stop_id
            for tid in ids:
                counts[prev, tid] += 1.0
                unigram[tid] += 1.0
                prev = tid
        smoothed = counts + self.BIGRAM_ALPHA
        bigram_rows = smoothed / smoothed.sum(axis=1, keepdims=True)
        unigram[self.stop_id] = 0.0
        unigram /= unigram.sum()
        self._rows = (
            1.0 - self.UNIGRAM_WEIGHT
        ) * bigram_rows + self.UNIGRAM_WEIGHT * unigram[np.newaxis, :]

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def next_distribution(self, context: list[int]) -> np.ndarray:
        """Probability vector for the token after ``context``.

        Only the last context id conditions a bigram model; an empty
        context conditions on the stop token, i.e. the document-opening
        distribution.
        """
        prev = context[-1] if context else self.stop_id
        return self._rows[prev]


def top_k_truncate(probs: np.ndarray, k: int) -> tuple[list[int], list[float], float]:
    """Keep the ``k`` most probable entries; ties break to the lower id.

    Returns (ids, their probabilities, residual mass of everything
    dropped) with ids ordered by descending probability.  The residual
    lets a consumer renormalize exactly while treating dropped tokens as
    unboostable.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(k, len(probs))
    order = np.lexsort((np.arange(len(probs)), -probs))[:k]
    kept = probs[order]
    residual = float(1.0 - kept.sum())
    return [int(i) for i in order], [float(p) for p in kept], residual


def load_default_model() -> BigramModel:
    text = (
        resources.files("classifier_service")
        .joinpath("data/corpus.txt")
        .read_text(encoding="utf-8")
    )
    paragraphs = [p for p in re.split(r"\n\s*\n", text) if p.strip()]
    documents = [tokenize(" ".join(p.split())) for p in paragraphs]
    return BigramModel(documents)
