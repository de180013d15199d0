"""Sensorimotor norms lexicon.

Loads a delimiter-separated norms file (one word per row, one mean
rating per category) and precomputes, per category: the population mean
and standard deviation over all entries, and a match threshold placed
so that roughly the top 15% of entries by rating count as a "match".
Ratings stay in their native scale; all standardization happens at
detection time against the population statistics computed here.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .datafiles import data_path
from .errors import IngestError

logger = logging.getLogger(__name__)

# Fraction of entries that should exceed the match threshold, and the
# band the realized fraction must fall into (guards degenerate rating
# distributions with heavy ties).
TARGET_EXCEEDANCE = 0.15
MATCH_BAND = (0.05, 0.20)


class SensorCategory(IntEnum):
    """The eleven sensorimotor categories, in canonical column order.

    Six perceptual channels (hearing, taste, touch, interoception,
    smell, vision) and five action effectors (foot/leg, hand/arm, head,
    mouth/throat, torso).  The integer values are stable and are the
    indices used everywhere (files, wire protocol, key targets).
    """

    AUDITORY = 0
    GUSTATORY = 1
    HAPTIC = 2
    INTEROCEPTIVE = 3
    OLFACTORY = 4
    VISUAL = 5
    FOOT_LEG = 6
    HAND_ARM = 7
    HEAD = 8
    MOUTH = 9
    TORSO = 10

    @classmethod
    def from_name(cls, name: str) -> "SensorCategory":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise IngestError(f"unknown sensor category name: {name!r}") from None


N_CATEGORIES = len(SensorCategory)

# Default column names, matching the common published layout of
# sensorimotor norms datasets so a real file drops in unchanged.
DEFAULT_COLUMNS = {
    "word": "Word",
    SensorCategory.AUDITORY: "Auditory.mean",
    SensorCategory.GUSTATORY: "Gustatory.mean",
    SensorCategory.HAPTIC: "Haptic.mean",
    SensorCategory.INTEROCEPTIVE: "Interoceptive.mean",
    SensorCategory.OLFACTORY: "Olfactory.mean",
    SensorCategory.VISUAL: "Visual.mean",
    SensorCategory.FOOT_LEG: "Foot_leg.mean",
    SensorCategory.HAND_ARM: "Hand_arm.mean",
    SensorCategory.HEAD: "Head.mean",
    SensorCategory.MOUTH: "Mouth.mean",
    SensorCategory.TORSO: "Torso.mean",
}


@dataclass(frozen=True)
class NormEntry:
    word: str
    ratings: tuple[float, ...]


@dataclass(frozen=True)
class CategoryStats:
    category: SensorCategory
    mu: float
    sigma: float
    tau: float
    match_fraction: float


class NormLexicon:
    """Immutable word -> ratings table with per-category statistics."""

    def __init__(self, words: list[str], ratings: np.ndarray, warnings: list[str]):
        self._index = {w: i for i, w in enumerate(words)}
        self.words = tuple(words)
        self.ratings = ratings  # shape (n_entries, N_CATEGORIES), float64
        self.warnings = tuple(warnings)
        self.mu = ratings.mean(axis=0)
        self.sigma = ratings.std(axis=0)  # population sigma (divide by N)
        if np.any(self.sigma == 0.0):
            flat = [SensorCategory(i).name for i in np.nonzero(self.sigma == 0.0)[0]]
            raise IngestError(f"zero rating variance in categories: {flat}")
        self.tau = np.empty(N_CATEGORIES)
        self._match_fraction = np.empty(N_CATEGORIES)
        n = len(words)
        for c in range(N_CATEGORIES):
            col = np.sort(ratings[:, c])
            # Smallest rating value present whose exceedance fraction
            # (share of entries rated >= value) is at most the target.
            counts_ge = n - np.searchsorted(col, col, side="left")
            ok = np.nonzero(counts_ge <= TARGET_EXCEEDANCE * n)[0]
            if len(ok) == 0:
                raise IngestError(
                    f"no usable match threshold for {SensorCategory(c).name}"
                )
            tau = col[ok[0]]
            frac = (n - np.searchsorted(col, tau, side="left")) / n
            if not (MATCH_BAND[0] <= frac <= MATCH_BAND[1]):
                raise IngestError(
                    f"match fraction {frac:.4f} for {SensorCategory(c).name} "
                    f"outside band {MATCH_BAND}"
                )
            self.tau[c] = tau
            self._match_fraction[c] = frac

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word.casefold() in self._index

    def rating(self, word: str, category: SensorCategory) -> float | None:
        i = self._index.get(word.casefold())
        if i is None:
            return None
        return float(self.ratings[i, category])

    def ratings_of(self, word: str) -> np.ndarray | None:
        i = self._index.get(word.casefold())
        if i is None:
            return None
        return self.ratings[i]

    def is_match(self, word: str, category: SensorCategory) -> bool:
        """True when the word is in the lexicon and its rating for the
        category reaches the match threshold (boundary counts)."""
        r = self.rating(word, category)
        return r is not None and r >= self.tau[category]

    def category_stats(self, category: SensorCategory) -> CategoryStats:
        c = int(category)
        return CategoryStats(
            category=SensorCategory(c),
            mu=float(self.mu[c]),
            sigma=float(self.sigma[c]),
            tau=float(self.tau[c]),
            match_fraction=float(self._match_fraction[c]),
        )

    def stats_records(self) -> list[dict]:
        """One machine-readable record per category."""
        out = []
        for c in SensorCategory:
            s = self.category_stats(c)
            out.append(
                {
                    "category": c.name.lower(),
                    "index": int(c),
                    "mu": s.mu,
                    "sigma": s.sigma,
                    "tau": s.tau,
                    "match_fraction": s.match_fraction,
                }
            )
        return out


def _sniff_delimiter(sample: str) -> str:
    # Keep this deliberately simple: the supported delimiters are comma,
    # tab and semicolon; pick whichever appears in the header line.
    header = sample.splitlines()[0] if sample else ""
    for d in ("\t", ",", ";"):
        if d in header:
            return d
    return ","


def load_norms(path, columns: dict | None = None) -> NormLexicon:
    """Ingest a norms file.

    Multi-word entries are dropped with a warning; duplicate words keep
    the first occurrence with a warning; a non-numeric rating fails the
    ingest naming the line.  Loading the same file twice yields
    bit-identical statistics (plain sequential float64 arithmetic).
    """
    colmap = dict(DEFAULT_COLUMNS)
    if columns:
        colmap.update(columns)

    with open(path, encoding="utf-8") as fh:
        sample = fh.read(8192)
        fh.seek(0)
        if not sample.strip():
            raise IngestError(f"empty norms file: {path}")
        reader = csv.reader(fh, delimiter=_sniff_delimiter(sample))
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"empty norms file: {path}") from None
        header = [h.strip() for h in header]
        positions = {}
        for key, name in colmap.items():
            if name not in header:
                raise IngestError(f"missing column {name!r} in {path}")
            positions[key] = header.index(name)

        words: list[str] = []
        rows: list[list[float]] = []
        seen: set[str] = set()
        warnings: list[str] = []
        word_pos = positions["word"]
        cat_pos = [positions[SensorCategory(c)] for c in range(N_CATEGORIES)]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            word = row[word_pos].strip()
            if " " in word or "\t" in word:
                warnings.append(f"line {lineno}: dropped multi-word entry {word!r}")
                continue
            word = word.casefold()
            if not word:
                warnings.append(f"line {lineno}: dropped entry with empty word")
                continue
            if word in seen:
                warnings.append(f"line {lineno}: duplicate word {word!r}, first kept")
                continue
            try:
                vals = [float(row[p]) for p in cat_pos]
            except (ValueError, IndexError):
                raise IngestError(f"non-numeric rating at line {lineno} of {path}") from None
            seen.add(word)
            words.append(word)
            rows.append(vals)

    if not words:
        raise IngestError(f"no usable entries in {path}")
    for msg in warnings:
        logger.warning("norms ingest: %s", msg)
    return NormLexicon(words, np.array(rows, dtype=np.float64), warnings)


@lru_cache(maxsize=1)
def default_lexicon() -> NormLexicon:
    """The norms lexicon shipped with the package."""
    return load_norms(data_path("sensorimotor_norms.csv"))
