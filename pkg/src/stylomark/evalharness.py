"""Experiment harness: prompt corpus -> paired generations -> detection.

Runs the end-to-end protocol over a prompt corpus: for every prompt and
every requested variant, generate a reply (plain for the base variant,
watermarked otherwise), optionally attack it, run detection, and record
the outcome.  Ground truth in every record comes from the generation
pipeline (which biases were applied), never from the detector.

Records serialize to a line-delimited file with a run header carrying
the seed, alpha, component versions and the classifier binding; reruns
with the same inputs are byte-identical.  Metrics are confusion
fractions over records that pass a minimum-sentence filter, invariant
under record order.  Run headers guard against mixing records produced
under different classifier bindings or label tables.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .attacks import AttackSpec, FileTranscriptCache, Translator, apply_attack
from .detector import DEFAULT_ALPHA, DetectConfig, detect
from .embedder import EmbedConfig, LanguageModel, generate, generate_plain
from .errors import MetricsError, StylomarkError
from .keygen import ClassifierBinding, LabelTable, derive_key
from .lexicon import NormLexicon
from .segmenter import split_sentences

__all__ = [
    "VariantSpec",
    "VARIANTS",
    "VARIANT_ORDER",
    "RunHeader",
    "RunRecord",
    "Metrics",
    "load_prompts",
    "run_eval",
    "save_records",
    "load_records",
    "merge_runs",
    "compute_metrics",
    "emit_report",
    "key_survival",
    "REPORT_FORMATS",
]

REPORT_FORMATS = ("table", "records-file", "plot-data")


# --------------------------------------------------------------------------
# Variants

@dataclass(frozen=True)
class VariantSpec:
    """A named bias configuration with its ground-truth label."""

    name: str
    acrostic_bias: float
    sensor_bias: float

    @property
    def watermarked(self) -> bool:
        return self.acrostic_bias > 0.0 or self.sensor_bias > 0.0


VARIANTS = {
    "base": VariantSpec("base", 0.0, 0.0),
    "sensor-only": VariantSpec("sensor-only", 0.0, 1.5),
    "acrostic-only": VariantSpec("acrostic-only", 8.0, 0.0),
    "both": VariantSpec("both", 8.0, 1.5),
}
VARIANT_ORDER = tuple(VARIANTS)


def _resolve_variants(names: Sequence[str]) -> list[VariantSpec]:
    out = []
    for name in names:
        spec = VARIANTS.get(name)
        if spec is None:
            known = ", ".join(VARIANTS)
            raise ValueError(f"unknown variant {name!r} (known: {known})")
        out.append(spec)
    if not out:
        raise ValueError("need at least one variant")
    return out


# --------------------------------------------------------------------------
# Prompt corpus

def load_prompts(path: str | Path) -> list[str]:
    """Read a prompt corpus: one prompt per line, '#' lines are comments."""
    prompts = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            prompts.append(line)
    return prompts


# --------------------------------------------------------------------------
# Records

@dataclass(frozen=True)
class RunHeader:
    """Provenance for one harness run; first line of a records file."""

    seed: int
    alpha: float
    package_version: str
    label_table_version: str
    classifier: dict
    max_sentences: int
    sampling: str
    variants: tuple[str, ...]
    attack: dict | None
    prompt_count: int

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["variants"] = list(self.variants)
        d["record_kind"] = "header"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunHeader":
        d = dict(d)
        d.pop("record_kind", None)
        d["variants"] = tuple(d["variants"])
        return cls(**d)


@dataclass(frozen=True)
class RunRecord:
    """One prompt x variant outcome."""

    prompt_index: int
    variant: str
    attack: str | None
    sentence_count: int | None
    confidence: float | None
    decision: bool | None
    ground_truth: bool
    error: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["record_kind"] = "record"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d.pop("record_kind", None)
        return cls(**d)


def _attack_label(spec: AttackSpec | None) -> str | None:
    if spec is None:
        return None
    if spec.intensity is not None:
        return f"{spec.kind}:{spec.intensity}"
    if spec.fraction is not None:
        return f"{spec.kind}:{spec.fraction}"
    if spec.pivot is not None:
        return f"{spec.kind}:{spec.pivot}"
    return spec.kind


# --------------------------------------------------------------------------
# The run

def run_eval(
    prompts: Sequence[str],
    model: LanguageModel,
    variants: Sequence[str],
    tables: LabelTable,
    binding: ClassifierBinding,
    lexicon: NormLexicon,
    *,
    attack: AttackSpec | None = None,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    max_sentences: int = 8,
    sampling: str = "seeded",
    translator: Translator | None = None,
    transcript_cache: FileTranscriptCache | None = None,
) -> tuple[RunHeader, list[RunRecord]]:
    """Generate, optionally attack, and detect for every prompt x variant.

    Prompts are paired across variants: record ``i`` of every variant
    uses generation seed ``seed + i``, so variant columns differ only in
    the biases applied.  Per-record failures are captured in the record
    and the run continues.  Output ordering is canonical: prompt-major,
    then variants in the order given.
    """
    specs = _resolve_variants(variants)
    header = RunHeader(
        seed=seed,
        alpha=alpha,
        package_version=__version__,
        label_table_version=tables.version,
        classifier=binding.describe(),
        max_sentences=max_sentences,
        sampling=sampling,
        variants=tuple(s.name for s in specs),
        attack=attack.describe() if attack else None,
        prompt_count=len(prompts),
    )
    detect_config = DetectConfig(alpha=alpha)
    attack_label = _attack_label(attack)
    records: list[RunRecord] = []
    for i, prompt in enumerate(prompts):
        record_seed = seed + i
        for spec in specs:
            config = EmbedConfig(
                acrostic_bias=spec.acrostic_bias,
                sensor_bias=spec.sensor_bias,
                max_sentences=max_sentences,
                sampling=sampling,
                seed=record_seed,
            )
            try:
                if spec.watermarked:
                    text, _ = generate(model, prompt, config, tables, binding, lexicon)
                else:
                    text = generate_plain(model, prompt, config)
                if attack is not None:
                    per_record = dataclasses.replace(attack, seed=record_seed + 1)
                    text = apply_attack(
                        text,
                        per_record,
                        lexicon=lexicon,
                        translator=translator,
                        cache=transcript_cache,
                    )
                sentence_count = len(split_sentences(text))
                report = detect(text, tables, binding, lexicon, detect_config)
                records.append(
                    RunRecord(
                        prompt_index=i,
                        variant=spec.name,
                        attack=attack_label,
                        sentence_count=sentence_count,
                        confidence=report.confidence,
                        decision=report.watermarked,
                        ground_truth=spec.watermarked,
                    )
                )
            except StylomarkError as exc:
                records.append(
                    RunRecord(
                        prompt_index=i,
                        variant=spec.name,
                        attack=attack_label,
                        sentence_count=None,
                        confidence=None,
                        decision=None,
                        ground_truth=spec.watermarked,
                        error=f"{type(exc).__name__}: {exc}",
                    )
                )
    return header, records


# --------------------------------------------------------------------------
# Records file (line-delimited, header first)

def _dump_line(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def save_records(
    path: str | Path, header: RunHeader, records: Iterable[RunRecord]
) -> Path:
    """Write a records file: one header line, then one line per record."""
    path = Path(path)
    lines = [_dump_line(header.to_dict())]
    lines.extend(_dump_line(r.to_dict()) for r in records)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _check_consistent(header: RunHeader, record: RunRecord) -> None:
    if record.error is not None or record.decision is None:
        return
    expected = record.confidence >= 1.0 - header.alpha
    if record.decision != expected:
        raise MetricsError(
            f"record (prompt {record.prompt_index}, {record.variant}) has "
            f"decision {record.decision} inconsistent with confidence "
            f"{record.confidence} at alpha {header.alpha}"
        )


def load_records(path: str | Path) -> tuple[RunHeader, list[RunRecord]]:
    """Read a records file back; validates decision/confidence consistency."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MetricsError(f"records file {path} is empty")
    first = json.loads(lines[0])
    if first.get("record_kind") != "header":
        raise MetricsError(f"records file {path} does not start with a header")
    header = RunHeader.from_dict(first)
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        d = json.loads(line)
        if d.get("record_kind") != "record":
            raise MetricsError(f"unexpected line kind {d.get('record_kind')!r}")
        record = RunRecord.from_dict(d)
        _check_consistent(header, record)
        records.append(record)
    return header, records


def merge_runs(
    runs: Sequence[tuple[RunHeader, Sequence[RunRecord]]],
) -> list[RunRecord]:
    """Combine records from several runs.

    Refuses to mix runs made under different classifier bindings, label
    tables, or alphas — metrics over such a mixture would be meaningless.
    """
    if not runs:
        return []
    first = runs[0][0]
    combined: list[RunRecord] = []
    for header, records in runs:
        for field in ("classifier", "label_table_version", "alpha"):
            a, b = getattr(first, field), getattr(header, field)
            if a != b:
                raise MetricsError(
                    f"cannot merge runs with different {field}: {a!r} vs {b!r}"
                )
        combined.extend(records)
    return combined


# --------------------------------------------------------------------------
# Metrics

@dataclass(frozen=True)
class Metrics:
    """Confusion outcomes over records passing the min-sentence filter.

    ``*_frac`` are fractions of all included replies (they sum to 1);
    the rates are per-class: false_positive_rate is FP over all
    unwatermarked included replies, false_negative_rate is FN over all
    watermarked ones.
    """

    min_sentences: int
    included: int
    excluded_short: int
    excluded_error: int
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def tp_frac(self) -> float:
        return self.tp / self.included

    @property
    def tn_frac(self) -> float:
        return self.tn / self.included

    @property
    def fp_frac(self) -> float:
        return self.fp / self.included

    @property
    def fn_frac(self) -> float:
        return self.fn / self.included

    @property
    def false_positive_rate(self) -> float:
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else math.nan

    @property
    def false_negative_rate(self) -> float:
        positives = self.fn + self.tp
        return self.fn / positives if positives else math.nan


def compute_metrics(records: Sequence[RunRecord], min_sentences: int = 3) -> Metrics:
    """Confusion metrics over records with at least ``min_sentences``.

    Error records are excluded (they carry no decision); order of the
    record list does not matter.
    """
    included = excluded_short = excluded_error = 0
    tp = tn = fp = fn = 0
    for r in records:
        if r.error is not None or r.decision is None:
            excluded_error += 1
            continue
        if r.sentence_count < min_sentences:
            excluded_short += 1
            continue
        included += 1
        if r.ground_truth and r.decision:
            tp += 1
        elif r.ground_truth:
            fn += 1
        elif r.decision:
            fp += 1
        else:
            tn += 1
    if included == 0:
        raise MetricsError(
            f"no records left after the min_sentences={min_sentences} filter"
        )
    return Metrics(
        min_sentences=min_sentences,
        included=included,
        excluded_short=excluded_short,
        excluded_error=excluded_error,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
    )


# --------------------------------------------------------------------------
# Reports

def _emit_plot_data(records: Sequence[RunRecord], destination: Path) -> None:
    with destination.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sentence_count", "confidence", "variant", "attacked"])
        for r in records:
            writer.writerow(
                [
                    "" if r.sentence_count is None else r.sentence_count,
                    "" if r.confidence is None else repr(r.confidence),
                    r.variant,
                    "yes" if r.attack else "no",
                ]
            )


def _conditional_fp_lines(records: Sequence[RunRecord]) -> list[str]:
    """False positives conditioned on sentence count (figure-style curve)."""
    by_count: dict[int, list[RunRecord]] = {}
    for r in records:
        if r.error is None and not r.ground_truth and r.sentence_count is not None:
            by_count.setdefault(r.sentence_count, []).append(r)
    lines = ["false positives by sentence count (unwatermarked records):"]
    for count in sorted(by_count):
        group = by_count[count]
        flagged = sum(r.decision for r in group)
        lines.append(
            f"  {count:>3} sentences: {flagged}/{len(group)} flagged"
            f" ({flagged / len(group):.3f})"
        )
    if len(lines) == 1:
        lines.append("  (no unwatermarked records)")
    return lines


def _emit_table(
    header: RunHeader,
    records: Sequence[RunRecord],
    metrics: Metrics,
    destination: Path,
) -> None:
    threshold = 1.0 - header.alpha
    lines = [
        "watermark evaluation report",
        "===========================",
        f"seed {header.seed}, alpha {header.alpha}, "
        f"decision threshold: confidence >= {threshold:.2f}",
        f"classifier {header.classifier['kind']} "
        f"({header.classifier['version']}), "
        f"label table v{header.label_table_version}, "
        f"package {header.package_version}",
        f"attack: {header.attack or 'none'}",
        "",
        f"records: {len(records)} total, {metrics.included} included "
        f"(>= {metrics.min_sentences} sentences), "
        f"{metrics.excluded_short} too short, {metrics.excluded_error} errored",
        "",
        "confusion over included replies:",
        f"  TP {metrics.tp_frac:.3f}  TN {metrics.tn_frac:.3f}  "
        f"FP {metrics.fp_frac:.3f}  FN {metrics.fn_frac:.3f}"
        f"   (counts {metrics.tp}/{metrics.tn}/{metrics.fp}/{metrics.fn})",
        f"  false positive rate {metrics.false_positive_rate:.3f}, "
        f"false negative rate {metrics.false_negative_rate:.3f}",
        "",
        "per-variant detected fraction (included replies):",
    ]
    for name in header.variants:
        group = [
            r
            for r in records
            if r.variant == name
            and r.error is None
            and r.sentence_count is not None
            and r.sentence_count >= metrics.min_sentences
        ]
        if not group:
            lines.append(f"  {name:>14}: no included records")
            continue
        detected = sum(r.decision for r in group)
        lines.append(
            f"  {name:>14}: {detected}/{len(group)} = {detected / len(group):.3f}"
        )
    lines.append("")
    lines.extend(_conditional_fp_lines(records))
    destination.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_report(
    header: RunHeader,
    records: Sequence[RunRecord],
    metrics: Metrics | None,
    format: str,
    destination: str | Path,
) -> Path:
    """Write one report file; returns its path.

    ``records-file`` is the reloadable line-delimited form; ``plot-data``
    is one CSV row per record (sentence count vs confidence, tagged by
    variant and attack); ``table`` is a human-readable summary and needs
    ``metrics``.
    """
    if format not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {format!r} (known: {REPORT_FORMATS})")
    if not records:
        raise MetricsError("no records to report")
    destination = Path(destination)
    if format == "records-file":
        save_records(destination, header, records)
    elif format == "plot-data":
        _emit_plot_data(records, destination)
    else:
        if metrics is None:
            raise ValueError("table format requires metrics")
        _emit_table(header, records, metrics, destination)
    return destination


# --------------------------------------------------------------------------
# Key survival (attack studies)

def key_survival(
    original: str,
    attacked: str,
    tables: LabelTable,
    binding: ClassifierBinding,
) -> tuple[int, int]:
    """How many per-sentence keys survive an attack, position-aligned.

    Derives the key sequence (one key per non-final sentence) from both
    texts and counts aligned positions where the full key — letter and
    category — is unchanged.  Returns (survived, comparable).
    """

    def keyseq(text: str):
        out = []
        for sentence in split_sentences(text)[:-1]:
            if not sentence.words:
                out.append(None)
                continue
            key = derive_key(sentence, tables, binding)
            out.append((key.acrostic_letter, key.category))
        return out

    pre, post = keyseq(original), keyseq(attacked)
    survived = comparable = 0
    for a, b in zip(pre, post):
        if a is None:
            continue
        comparable += 1
        survived += a == b
    return survived, comparable
