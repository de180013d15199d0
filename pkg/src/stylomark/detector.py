"""Watermark detection: exact statistical tests on sentence features.

Each sentence after the first is judged under the key derived from its
predecessor.  Two independent signals are combined:

* sensorimotor: the mean keyed-category rating of the sentence's
  in-lexicon words, standardized against the lexicon population and
  pooled across sentences (Stouffer's method);
* acrostic: the count of sentences whose first letter equals the keyed
  letter, tested against the 1/26 chance rate with an exact binomial.

The product of the two p-values, compared against alpha, gives the
decision.  All probabilities are computed in closed form; nothing is
simulated at detection time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InsufficientTextError, StatisticError
from .keygen import ClassifierBinding, LabelTable, WatermarkKey, derive_key
from .lexicon import CategoryStats, NormLexicon
from .segmenter import Sentence, split_sentences

ACROSTIC_CHANCE = 1.0 / 26.0
DEFAULT_ALPHA = 0.05

ACROSTIC_MODE_PMF = "pmf"
ACROSTIC_MODE_TAIL = "tail"
MAX_BINOMIAL_N = 10_000


@dataclass(frozen=True)
class DetectConfig:
    alpha: float = DEFAULT_ALPHA
    acrostic_mode: str = ACROSTIC_MODE_PMF

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if self.acrostic_mode not in (ACROSTIC_MODE_PMF, ACROSTIC_MODE_TAIL):
            raise ValueError(f"unknown acrostic mode {self.acrostic_mode!r}")


@dataclass(frozen=True)
class SentenceScore:
    """Evidence extracted from one keyed sentence."""

    sentence_index: int
    key: WatermarkKey
    first_alpha: str | None
    acrostic_hit: bool
    scored_words: int
    mean_rating: float | None
    z: float


@dataclass(frozen=True)
class DetectionReport:
    n: int
    k: int
    stouffer_z: float
    sensor_p: float
    acrostic_p: float
    acrostic_p_pmf: float
    acrostic_p_tail: float
    combined_p: float
    confidence: float
    alpha: float
    acrostic_mode: str
    watermarked: bool
    sentence_count: int
    scores: tuple[SentenceScore, ...] = field(default_factory=tuple)
    classifier: dict = field(default_factory=dict)
    label_table_version: str = ""

    def to_dict(self) -> dict:
        return {
            "watermarked": self.watermarked,
            "confidence": self.confidence,
            "combined_p": self.combined_p,
            "sensor_p": self.sensor_p,
            "acrostic_p": self.acrostic_p,
            "acrostic_p_pmf": self.acrostic_p_pmf,
            "acrostic_p_tail": self.acrostic_p_tail,
            "acrostic_mode": self.acrostic_mode,
            "stouffer_z": self.stouffer_z,
            "n": self.n,
            "k": self.k,
            "alpha": self.alpha,
            "sentence_count": self.sentence_count,
            "classifier": self.classifier,
            "label_table_version": self.label_table_version,
            "sentences": [
                {
                    "index": s.sentence_index,
                    "key_letter": s.key.acrostic_letter,
                    "key_category": s.key.category.name.lower(),
                    "first_alpha": s.first_alpha,
                    "acrostic_hit": s.acrostic_hit,
                    "scored_words": s.scored_words,
                    "mean_rating": s.mean_rating,
                    "z": s.z,
                }
                for s in self.scores
            ],
        }


def sentence_sensor_score(
    sentence: Sentence, key: WatermarkKey, lexicon: NormLexicon
) -> tuple[float | None, int]:
    """Mean keyed-category rating over the sentence's in-lexicon words.

    Returns (mean, count); mean is None when no word is in the lexicon.
    """
    ratings = [
        r
        for w in sentence.words
        if (r := lexicon.rating(w, key.category)) is not None
    ]
    if not ratings:
        return None, 0
    return math.fsum(ratings) / len(ratings), len(ratings)


def zscore(x: float, stats: CategoryStats) -> float:
    """Standardize ``x`` against a category's population: (x - mu) / sigma."""
    if stats.sigma <= 0.0:
        raise StatisticError(
            f"sigma must be positive, got {stats.sigma} for {stats.category.name}"
        )
    return (x - stats.mu) / stats.sigma


def stouffer(zs: Sequence[float]) -> float:
    """Pooled z across sentences: sum of z values over sqrt(count)."""
    if not zs:
        raise StatisticError("cannot pool an empty z list")
    return math.fsum(zs) / math.sqrt(len(zs))


def normal_upper_p(z: float) -> float:
    """P(N(0,1) >= z), exact via the complementary error function."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _log_binom_pmf(n: int, k: int, log_p: float, log_q: float) -> float:
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * log_p
        + (n - k) * log_q
    )


def acrostic_pvalue(n: int, k: int, mode: str = ACROSTIC_MODE_PMF) -> float:
    """Probability of the acrostic evidence under chance (rate 1/26).

    ``pmf`` evaluates the exact probability of seeing exactly k keyed
    first letters in n sentences; ``tail`` evaluates the probability of
    k or more.  Both are computed in log space and are exact to double
    precision for n up to 10000.
    """
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if n > MAX_BINOMIAL_N:
        raise ValueError(f"n={n} exceeds supported maximum {MAX_BINOMIAL_N}")
    if mode not in (ACROSTIC_MODE_PMF, ACROSTIC_MODE_TAIL):
        raise ValueError(f"unknown acrostic mode {mode!r}")
    if n == 0:
        return 1.0
    log_p = math.log(ACROSTIC_CHANCE)
    log_q = math.log1p(-ACROSTIC_CHANCE)
    if mode == ACROSTIC_MODE_PMF:
        return min(1.0, math.exp(_log_binom_pmf(n, k, log_p, log_q)))
    logs = [_log_binom_pmf(n, j, log_p, log_q) for j in range(k, n + 1)]
    peak = max(logs)
    total = math.fsum(math.exp(v - peak) for v in logs)
    return min(1.0, math.exp(peak) * total)


def score_sentences(
    sentences: Sequence[Sentence],
    tables: LabelTable,
    binding: ClassifierBinding,
    lexicon: NormLexicon,
) -> list[SentenceScore]:
    """Key each sentence from its predecessor and extract its evidence.

    Sentence 0 carries no evidence (nothing keyed it).  A pair whose key
    source has no words is skipped: no key can be derived from it.
    """
    scores: list[SentenceScore] = []
    for i in range(1, len(sentences)):
        source = sentences[i - 1]
        if not source.words:
            continue
        key = derive_key(source, tables, binding)
        target = sentences[i]
        mean_rating, covered = sentence_sensor_score(target, key, lexicon)
        if mean_rating is None:
            z = 0.0  # no lexicon coverage: neutral evidence, still counted in n
        else:
            z = zscore(mean_rating, lexicon.category_stats(key.category))
        scores.append(
            SentenceScore(
                sentence_index=target.index,
                key=key,
                first_alpha=target.first_alpha,
                acrostic_hit=target.first_alpha == key.acrostic_letter,
                scored_words=covered,
                mean_rating=mean_rating,
                z=z,
            )
        )
    return scores


def detect(
    text: str,
    tables: LabelTable,
    binding: ClassifierBinding,
    lexicon: NormLexicon,
    config: DetectConfig | None = None,
) -> DetectionReport:
    """Decide whether ``text`` carries the sentence-keyed watermark."""
    config = config or DetectConfig()
    sentences = split_sentences(text)
    if len(sentences) < 2:
        raise InsufficientTextError(
            f"need at least 2 sentences, found {len(sentences)}"
        )
    scores = score_sentences(sentences, tables, binding, lexicon)
    if not scores:
        raise InsufficientTextError("no scorable sentence pairs found")

    n = len(scores)
    k = sum(1 for s in scores if s.acrostic_hit)
    pooled = stouffer([s.z for s in scores])
    sensor_p = normal_upper_p(pooled)
    p_pmf = acrostic_pvalue(n, k, ACROSTIC_MODE_PMF)
    p_tail = acrostic_pvalue(n, k, ACROSTIC_MODE_TAIL)
    acrostic_p = p_pmf if config.acrostic_mode == ACROSTIC_MODE_PMF else p_tail
    combined = sensor_p * acrostic_p
    confidence = 1.0 - combined
    return DetectionReport(
        n=n,
        k=k,
        stouffer_z=pooled,
        sensor_p=sensor_p,
        acrostic_p=acrostic_p,
        acrostic_p_pmf=p_pmf,
        acrostic_p_tail=p_tail,
        combined_p=combined,
        confidence=confidence,
        alpha=config.alpha,
        acrostic_mode=config.acrostic_mode,
        watermarked=confidence >= 1.0 - config.alpha,
        sentence_count=len(sentences),
        scores=tuple(scores),
        classifier=binding.describe(),
        label_table_version=tables.version,
    )
