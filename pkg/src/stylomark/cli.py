"""Command-line entry point.

One ``stylomark`` command with five subcommands — embed, detect,
attack, eval, and lexicon-stats — sharing a layered configuration:
built-in defaults, then an INI config file (sections per module), then
command-line flags.  Flags win over the config file and the conflict is
logged.  Every run writes the fully resolved configuration next to its
outputs so it can be reproduced from that file alone.

Exit codes are part of the contract: 0 success (detect: not
watermarked), 10 watermarked, 2 insufficient text, 64 usage error,
1 any other failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from . import PROTOCOL_VERSION, __version__
from .attacks import (
    AttackSpec,
    FileTranscriptCache,
    HttpTranslator,
    KIND_PSEUDO,
    KIND_SYNONYM,
    apply_attack,
)
from .datafiles import data_path
from .detector import DetectConfig, detect
from .embedder import (
    EmbedConfig,
    RemoteLanguageModel,
    generate,
    mock_lm,
)
from .errors import InsufficientTextError, StylomarkError
from .evalharness import (
    VARIANT_ORDER,
    compute_metrics,
    emit_report,
    load_prompts,
    run_eval,
)
from .keygen import (
    ClassifierBinding,
    load_label_table,
    load_seed_table,
)
from .lexicon import DEFAULT_COLUMNS, SensorCategory, load_norms

log = logging.getLogger("stylomark")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INSUFFICIENT = 2
EXIT_WATERMARKED = 10
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# Layered configuration

class Resolver:
    """Resolves each setting: flag > config file > built-in default.

    Collects every resolved (section, key, value) so the run can dump
    the exact configuration it executed with.
    """

    def __init__(self, args: argparse.Namespace):
        self._args = args
        self._config = configparser.ConfigParser()
        if args.config:
            read = self._config.read(args.config)
            if not read:
                raise StylomarkError(f"config file not found: {args.config}")
        self.resolved: dict[str, dict[str, str]] = {}

    def get(self, section: str, key: str, default=None, cast=str, flag=None):
        flag_value = getattr(self._args, flag or key, None)
        config_value = None
        if self._config.has_option(section, key):
            config_value = self._config.get(section, key)
        if flag_value is not None:
            if config_value is not None and str(flag_value) != config_value:
                log.warning(
                    "flag --%s=%s overrides config [%s] %s=%s",
                    (flag or key).replace("_", "-"), flag_value,
                    section, key, config_value,
                )
            value = flag_value
        elif config_value is not None:
            value = cast(config_value)
        else:
            value = default
        if value is not None:
            self.resolved.setdefault(section, {})[key] = str(value)
        return value

    def write_resolved(self, out_dir: Path, subcommand: str) -> Path:
        dump = configparser.ConfigParser()
        sections = {"cli": {"subcommand": subcommand, "out_dir": str(out_dir)}}
        for section in sorted(self.resolved):
            sections.setdefault(section, {}).update(sorted(self.resolved[section].items()))
        for section, values in sections.items():
            dump[section] = values
        path = out_dir / f"{subcommand}.resolved.ini"
        with path.open("w", encoding="utf-8") as fh:
            dump.write(fh)
        return path


def _out_dir(resolver: Resolver) -> Path:
    out = Path(resolver.get("cli", "out_dir", default="."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_lexicon(resolver: Resolver):
    path = resolver.get(
        "lexicon", "path", flag="lexicon",
        default=str(data_path("sensorimotor_norms.csv")),
    )
    word_column = resolver.get("lexicon", "word_column", default=None)
    rating_columns = resolver.get("lexicon", "rating_columns", default=None)
    columns = None
    if word_column or rating_columns:
        columns = dict(DEFAULT_COLUMNS)
        if word_column:
            columns["word"] = word_column
        if rating_columns:
            names = [c.strip() for c in str(rating_columns).split(",") if c.strip()]
            if len(names) != len(SensorCategory):
                raise StylomarkError(
                    f"rating_columns needs {len(SensorCategory)} names, got {len(names)}"
                )
            for category, name in zip(SensorCategory, names):
                columns[category] = name
    return load_norms(path, columns)


def _build_tables(resolver: Resolver):
    path = resolver.get("keygen", "labels", default=str(data_path("labels.tsv")))
    return load_label_table(path)


def _build_binding(resolver: Resolver) -> ClassifierBinding:
    spec = resolver.get("keygen", "classifier", default="builtin")
    if spec == "builtin":
        seeds_path = resolver.get(
            "keygen", "seeds", default=str(data_path("label_seeds.tsv"))
        )
        return ClassifierBinding.builtin(load_seed_table(seeds_path))
    return ClassifierBinding.remote(spec)


def _build_model(resolver: Resolver):
    spec = resolver.get("embedder", "model", default="builtin")
    if spec == "builtin":
        corpus = resolver.get("embedder", "corpus", default=str(data_path("corpus.txt")))
        return mock_lm(corpus)
    return RemoteLanguageModel(spec)


def _parse_attack(kind: str, seed: int) -> AttackSpec:
    try:
        return AttackSpec.parse(kind, seed=seed)
    except ValueError as exc:
        raise StylomarkError(str(exc)) from exc


# --------------------------------------------------------------------------
# Subcommands

def _cmd_embed(args) -> int:
    resolver = Resolver(args)
    out_dir = _out_dir(resolver)
    prompt = resolver.get("embedder", "prompt")
    if not prompt:
        raise StylomarkError("embed requires --prompt (or [embedder] prompt in config)")
    config = EmbedConfig(
        acrostic_bias=resolver.get("embedder", "bias_acrostic", default=8.0, cast=float),
        sensor_bias=resolver.get("embedder", "bias_sensor", default=1.5, cast=float),
        max_sentences=resolver.get("embedder", "max_sentences", default=25, cast=int),
        sampling=resolver.get("embedder", "sampling", default="seeded"),
        seed=resolver.get("embedder", "seed", default=0, cast=int),
    )
    model = _build_model(resolver)
    tables = _build_tables(resolver)
    binding = _build_binding(resolver)
    lexicon = _build_lexicon(resolver)
    text, trace = generate(model, prompt, config, tables, binding, lexicon)
    response_path = out_dir / "response.txt"
    response_path.write_text(text + "\n", encoding="utf-8")
    trace_path = out_dir / "trace.jsonl"
    with trace_path.open("w", encoding="utf-8") as fh:
        for record in trace.to_records():
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    resolver.write_resolved(out_dir, "embed")
    print(text)
    log.info("wrote %s and %s", response_path, trace_path)
    return EXIT_OK


def _cmd_detect(args) -> int:
    resolver = Resolver(args)
    out_dir = _out_dir(resolver)
    infile = resolver.get("detector", "input")
    if not infile:
        raise StylomarkError("detect requires --in (or [detector] input in config)")
    text = Path(infile).read_text(encoding="utf-8")
    config = DetectConfig(
        alpha=resolver.get("detector", "alpha", default=0.05, cast=float),
        acrostic_mode=resolver.get("detector", "acrostic_mode", default="pmf"),
    )
    tables = _build_tables(resolver)
    binding = _build_binding(resolver)
    lexicon = _build_lexicon(resolver)
    try:
        report = detect(text, tables, binding, lexicon, config)
    except InsufficientTextError as exc:
        resolver.write_resolved(out_dir, "detect")
        print(f"insufficient text: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    report_path = out_dir / "report.json"
    report_path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )
    resolver.write_resolved(out_dir, "detect")
    verdict = "WATERMARKED" if report.watermarked else "not watermarked"
    print(
        f"{verdict}: confidence {report.confidence:.6f} "
        f"(threshold {1.0 - report.alpha:.2f})\n"
        f"  sentences {report.sentence_count}, scored pairs {report.n}, "
        f"acrostic hits {report.k}\n"
        f"  Z {report.stouffer_z:+.4f}, sensor p {report.sensor_p:.6g}, "
        f"acrostic p {report.acrostic_p:.6g} ({report.acrostic_mode}), "
        f"combined {report.combined_p:.6g}"
    )
    log.info("wrote %s", report_path)
    return EXIT_WATERMARKED if report.watermarked else EXIT_OK


def _cmd_attack(args) -> int:
    resolver = Resolver(args)
    out_dir = _out_dir(resolver)
    infile = resolver.get("attacks", "input")
    if not infile:
        raise StylomarkError("attack requires --in (or [attacks] input in config)")
    kind = resolver.get("attacks", "kind")
    if not kind:
        raise StylomarkError("attack requires --kind (or [attacks] kind in config)")
    seed = resolver.get("attacks", "seed", default=0, cast=int)
    spec = _parse_attack(kind, seed)
    text = Path(infile).read_text(encoding="utf-8")
    lexicon = None
    if spec.kind in (KIND_PSEUDO, KIND_SYNONYM):
        lexicon = _build_lexicon(resolver)
    translator = None
    endpoint = resolver.get("attacks", "translator_endpoint", default=None)
    if endpoint:
        translator = HttpTranslator(endpoint)
    cache = None
    cache_path = resolver.get("attacks", "transcript_cache", default=None)
    if cache_path:
        cache = FileTranscriptCache(cache_path)
    attacked = apply_attack(text, spec, lexicon=lexicon, translator=translator, cache=cache)
    attacked_path = out_dir / "attacked.txt"
    attacked_path.write_text(attacked + "\n", encoding="utf-8")
    resolver.write_resolved(out_dir, "attack")
    print(attacked)
    log.info("wrote %s", attacked_path)
    return EXIT_OK


def _cmd_eval(args) -> int:
    resolver = Resolver(args)
    out_dir = _out_dir(resolver)
    prompts_path = resolver.get(
        "evalharness", "prompts", default=str(data_path("prompts.txt"))
    )
    prompts = load_prompts(prompts_path)
    variant_csv = resolver.get("evalharness", "variants", default="base,both")
    variants = [v.strip() for v in str(variant_csv).split(",") if v.strip()]
    attack_spec = None
    attack_arg = resolver.get("evalharness", "attack", default=None)
    seed = resolver.get("evalharness", "seed", default=0, cast=int)
    if attack_arg:
        attack_spec = _parse_attack(attack_arg, seed)
    model = _build_model(resolver)
    tables = _build_tables(resolver)
    binding = _build_binding(resolver)
    lexicon = _build_lexicon(resolver)
    header, records = run_eval(
        prompts,
        model,
        variants,
        tables,
        binding,
        lexicon,
        attack=attack_spec,
        seed=seed,
        alpha=resolver.get("evalharness", "alpha", default=0.05, cast=float),
        max_sentences=resolver.get("evalharness", "max_sentences", default=8, cast=int),
        sampling=resolver.get("evalharness", "sampling", default="seeded"),
        translator=None,
        transcript_cache=None,
    )
    metrics = compute_metrics(
        records,
        min_sentences=resolver.get("evalharness", "min_sentences", default=3, cast=int),
    )
    emit_report(header, records, metrics, "records-file", out_dir / "records.jsonl")
    emit_report(header, records, metrics, "plot-data", out_dir / "plot_data.csv")
    table_path = emit_report(header, records, metrics, "table", out_dir / "report.txt")
    resolver.write_resolved(out_dir, "eval")
    print(table_path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _cmd_lexicon_stats(args) -> int:
    resolver = Resolver(args)
    out_dir = _out_dir(resolver)
    lexicon = _build_lexicon(resolver)
    records = lexicon.stats_records()
    stats_path = out_dir / "lexicon_stats.json"
    stats_path.write_text(
        json.dumps(records, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    resolver.write_resolved(out_dir, "lexicon-stats")
    for record in records:
        print(json.dumps(record, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser assembly

def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file (sections per module)")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    parser.add_argument("--lexicon", help="norms file (delimiter-separated, header row)")
    parser.add_argument("--word-column", dest="word_column", help="norms word column name")
    parser.add_argument(
        "--rating-columns",
        dest="rating_columns",
        help="comma-separated names of the 11 rating columns",
    )
    parser.add_argument("--labels", help="label table file")
    parser.add_argument("--seeds", help="builtin classifier seed-term table")
    parser.add_argument(
        "--classifier", help="'builtin' or the URL of a classifier service"
    )


def build_parser() -> _Parser:
    tables_version = load_label_table(data_path("labels.tsv")).version
    parser = _Parser(prog="stylomark", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"stylomark {__version__} "
            f"(label-table {tables_version}, protocol {PROTOCOL_VERSION})"
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    embed = sub.add_parser("embed", help="generate a watermarked reply", parents=[])
    _add_shared(embed)
    embed.add_argument("--prompt", help="prompt text")
    embed.add_argument("--bias-acrostic", dest="bias_acrostic", type=float)
    embed.add_argument("--bias-sensor", dest="bias_sensor", type=float)
    embed.add_argument("--max-sentences", dest="max_sentences", type=int)
    embed.add_argument("--sampling", choices=["seeded", "greedy"])
    embed.add_argument("--seed", type=int)
    embed.add_argument("--model", help="'builtin' or the URL of a model service")
    embed.add_argument("--corpus", help="corpus file for the builtin mock model")
    embed.set_defaults(func=_cmd_embed)

    det = sub.add_parser("detect", help="test a text for the watermark")
    _add_shared(det)
    det.add_argument("--in", dest="input", help="text file to test")
    det.add_argument("--alpha", type=float)
    det.add_argument("--acrostic-mode", dest="acrostic_mode", choices=["pmf", "tail"])
    det.set_defaults(func=_cmd_detect)

    atk = sub.add_parser("attack", help="apply a watermark-removal attack")
    _add_shared(atk)
    atk.add_argument("--in", dest="input", help="text file to attack")
    atk.add_argument("--kind", help="attack kind[:parameter], e.g. pseudo-translation:0.2")
    atk.add_argument("--seed", type=int)
    atk.add_argument("--translator-endpoint", dest="translator_endpoint")
    atk.add_argument("--transcript-cache", dest="transcript_cache")
    atk.set_defaults(func=_cmd_attack)

    ev = sub.add_parser("eval", help="run the evaluation protocol over a prompt corpus")
    _add_shared(ev)
    ev.add_argument("--prompts", help="prompt corpus file (one per line, # comments)")
    ev.add_argument(
        "--variants", help=f"comma-separated subset of: {', '.join(VARIANT_ORDER)}"
    )
    ev.add_argument("--attack", help="attack kind[:parameter] applied to every reply")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--alpha", type=float)
    ev.add_argument("--max-sentences", dest="max_sentences", type=int)
    ev.add_argument("--sampling", choices=["seeded", "greedy"])
    ev.add_argument("--min-sentences", dest="min_sentences", type=int)
    ev.set_defaults(func=_cmd_eval)

    stats = sub.add_parser("lexicon-stats", help="per-category lexicon statistics")
    _add_shared(stats)
    stats.set_defaults(func=_cmd_lexicon_stats)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="%(name)s: %(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StylomarkError as exc:
        print(f"stylomark: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
