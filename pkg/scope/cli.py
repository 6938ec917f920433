from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Any, NoReturn

from .corpus import CorpusRecord, ingest_database, read_corpus, read_entries, write_corpus
from .corpus_stats import DEFAULT_TOKEN_BUDGETS, format_stats, stats
from .dataset_split import DEFAULT_RATIOS, balance, split
from .dedup import dedup_summary, deduplicate, write_dedup_report
from .errors import ScopeError
from .lexer import lex_report, tokenize
from .metrics import align, classification_metrics, format_comparison, read_labels
from .models import TransformConfig
from .pipeline import load_config, records_for_field, run_pipeline, transform_config, write_bundle
from .snippet_analyzer import AnalyzerConfig, analysis_report, analyze
from .transforms import process_corpus, process_function


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_progress = True


class _Parser(argparse.ArgumentParser):
    # Usage errors exit 1; 2 is reserved for data errors.
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_source(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as f:
        return f.read()


def _decode(data: bytes) -> str:
    return data.decode("utf-8", errors="surrogateescape")


def _write_text(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        return
    out_dir = os.path.dirname(out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(out, "w", encoding="utf-8", errors="surrogateescape") as f:
        f.write(text)


def _add_transform_flags(ap: argparse.ArgumentParser) -> None:
    g = ap.add_argument_group("transformations")
    g.add_argument("--no-comments", dest="strip_comments", action="store_const", const=True, default=None,
                   help="Remove comments (default)")
    g.add_argument("--keep-comments", dest="strip_comments", action="store_const", const=False)
    g.add_argument("--strings", dest="genericize_strings", action="store_const", const=True, default=None,
                   help='Replace string literals with "<STR>" (default)')
    g.add_argument("--no-strings", dest="genericize_strings", action="store_const", const=False)
    g.add_argument("--rename", dest="rename_identifiers", action="store_const", const=True, default=None,
                   help="Rename declared functions/variables to FUNC_i/VAR_j (default)")
    g.add_argument("--no-rename", dest="rename_identifiers", action="store_const", const=False)
    g.add_argument("--whitespace", dest="normalize_whitespace", action="store_const", const=True, default=None,
                   help="Single-space rendering (default)")
    g.add_argument("--no-whitespace", dest="normalize_whitespace", action="store_const", const=False)
    g.add_argument("--output", dest="output_mode", choices=["text", "tokens"], default=None)
    g.add_argument("--strip-directives", dest="strip_directives", action="store_const", const=True, default=None,
                   help="Delete preprocessor directives instead of marking the entry as an error")
    g.add_argument("--max-unknown-fraction", dest="max_unknown_fraction", type=float, default=None,
                   help="Share of Unknown tokens tolerated before an entry is lexical garbage (default 0)")


def _transform_overrides(ns: argparse.Namespace) -> dict[str, Any]:
    keys = ("strip_comments", "genericize_strings", "rename_identifiers", "normalize_whitespace",
            "output_mode", "strip_directives", "max_unknown_fraction")
    return {k: getattr(ns, k) for k in keys if getattr(ns, k) is not None}


def _transform_from_flags(ns: argparse.Namespace) -> TransformConfig:
    return transform_config(_transform_overrides(ns))


def _cmd_extract(argv: list[str]) -> int:
    ap = _Parser(prog="scope extract")
    ap.add_argument("--db", type=str, required=True, help="CVEFixes database file")
    ap.add_argument("--out", type=str, required=True, help="Output corpus (.jsonl)")
    ns = ap.parse_args(argv)

    entries = ingest_database(ns.db)
    n = write_corpus(ns.out, entries)
    logger.info("wrote %d entries to %s", n, ns.out)
    return 0


def _cmd_process(argv: list[str]) -> int:
    ap = _Parser(prog="scope process")
    ap.add_argument("input", type=str, help="C/C++ source file, '-' for stdin, or a corpus with --corpus")
    ap.add_argument("--corpus", action="store_true", help="Treat input as a .jsonl corpus")
    ap.add_argument("--out", type=str, default="-", help="Output path or '-' for stdout")
    ap.add_argument("--workers", type=int, default=1, help="Worker processes for --corpus (<=0: all CPUs)")
    _add_transform_flags(ap)
    ns = ap.parse_args(argv)
    config = _transform_from_flags(ns)

    if ns.corpus or ns.input.endswith(".jsonl"):
        if ns.out == "-":
            ap.error("--out is required when processing a corpus")
        results = process_corpus(read_entries(ns.input), config, workers=ns.workers, progress=_progress)
        write_corpus(ns.out, results)
        logger.info("wrote %d processed entries to %s", len(results), ns.out)
        return 0

    entry = process_function(_decode(_read_source(ns.input)), config, ns.input)
    if not entry.status.ok:
        print(f"scope: {ns.input}: {entry.status}", file=sys.stderr)
        return 2
    if entry.normalized_tokens is not None:
        _write_text(ns.out, "".join(t + "\n" for t in entry.normalized_tokens))
    else:
        text = entry.normalized_text or ""
        _write_text(ns.out, text if text.endswith("\n") else text + "\n")
    return 0


def _cmd_dedup(argv: list[str]) -> int:
    ap = _Parser(prog="scope dedup")
    ap.add_argument("corpus", type=str, help="Processed corpus (.jsonl with status)")
    ap.add_argument("--report", type=str, required=True, help="Dedup report (.json)")
    ap.add_argument("--out", type=str, default=None, help="Optional refined corpus (.jsonl)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--strip-directives", action="store_true",
                    help="The corpus was processed with --strip-directives")
    ap.add_argument("--max-unknown-fraction", type=float, default=0.0)
    ns = ap.parse_args(argv)

    config = transform_config(
        {"strip_directives": ns.strip_directives, "max_unknown_fraction": ns.max_unknown_fraction}
    )
    records = read_corpus(ns.corpus)
    ok = [
        dataclasses.replace(r.to_processed(), applied_config=config)
        for r in records
        if r.status is None or r.status.ok
    ]
    result = deduplicate(ok, workers=ns.workers, progress=_progress)
    errors = len(records) - len(ok)
    write_dedup_report(ns.report, result, total_entries=len(records), error_entries=errors)
    if ns.out:
        keep = set(result.survivor_ids)
        write_corpus(ns.out, [r for r in records if r.entry_id in keep])

    summary = dedup_summary(result, total_entries=len(records), error_entries=errors)
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_refine(argv: list[str]) -> int:
    ap = _Parser(prog="scope refine")
    ap.add_argument("--config", type=str, default=None, help="Pipeline configuration (.toml or .json)")
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--db", type=str, default=None, help="CVEFixes database file")
    src.add_argument("--corpus", type=str, default=None, help="Raw corpus (.jsonl)")
    ap.add_argument("--out", dest="out_dir", type=str, default=None, help="Output directory")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--ratios", type=float, nargs=3, default=None, metavar=("TRAIN", "VAL", "TEST"))
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--no-balance", dest="balance", action="store_const", const=False, default=None)
    ap.add_argument("--budget", dest="token_budgets", type=int, action="append", default=None,
                    help="Token budget for the fits-within statistic (repeatable)")
    ap.add_argument("--overwrite", action="store_const", const=True, default=None)
    _add_transform_flags(ap)
    ns = ap.parse_args(argv)

    overrides: dict[str, Any] = {
        "db": ns.db,
        "corpus": ns.corpus,
        "out_dir": ns.out_dir,
        "seed": ns.seed,
        "ratios": ns.ratios,
        "workers": ns.workers,
        "balance": ns.balance,
        "token_budgets": ns.token_budgets,
        "overwrite": ns.overwrite,
        "transform": _transform_overrides(ns),
    }
    config = load_config(ns.config, overrides)
    result = run_pipeline(config, progress=_progress)

    out: dict[str, Any] = {
        "out_dir": result.out_dir,
        "provenance": result.provenance.to_json_dict(),
        "sizes": result.processed.sizes(),
    }
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_split(argv: list[str]) -> int:
    ap = _Parser(prog="scope split")
    ap.add_argument("corpus", type=str)
    ap.add_argument("--out", type=str, required=True, help="Output directory for train/validation/test.jsonl")
    ap.add_argument("--field", choices=["code", "normalized"], default="code")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ratios", type=float, nargs=3, default=list(DEFAULT_RATIOS), metavar=("TRAIN", "VAL", "TEST"))
    ap.add_argument("--no-balance", dest="balance", action="store_false")
    ns = ap.parse_args(argv)

    records = records_for_field(read_corpus(ns.corpus), ns.field)
    if ns.balance:
        records = balance(records, ns.seed)
    bundle = split(records, ns.ratios, ns.seed)
    write_bundle(ns.out, bundle)
    sys.stdout.write(json.dumps(bundle.sizes(), indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_stats(argv: list[str]) -> int:
    ap = _Parser(prog="scope stats")
    ap.add_argument("corpus", type=str, help="Processed corpus (.jsonl with status)")
    ap.add_argument("--budget", type=int, action="append", default=None, help="Token budget (repeatable)")
    ap.add_argument("--json", action="store_true", help="Print JSON instead of a text summary")
    ns = ap.parse_args(argv)

    records: list[CorpusRecord] = read_corpus(ns.corpus)
    s = stats(records, [r.to_processed() for r in records], token_budgets=ns.budget or DEFAULT_TOKEN_BUDGETS)
    if ns.json:
        sys.stdout.write(json.dumps(s.to_json_dict(), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(format_stats(s))
    return 0


def _parse_pred(s: str) -> tuple[str, str]:
    name, sep, path = s.partition("=")
    if not sep:
        return os.path.splitext(os.path.basename(s))[0], s
    if not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {s!r}")
    return name, path


def _cmd_metrics(argv: list[str]) -> int:
    ap = _Parser(prog="scope metrics")
    ap.add_argument("--gold", type=str, required=True, help="JSONL with id and label")
    ap.add_argument("--pred", type=_parse_pred, action="append", required=True,
                    help="Predictions as PATH or NAME=PATH (repeatable)")
    ap.add_argument("--json", action="store_true")
    ns = ap.parse_args(argv)

    gold = read_labels(ns.gold)
    reports = {}
    for name, path in ns.pred:
        y_true, y_pred = align(gold, read_labels(path))
        reports[name] = classification_metrics(y_true, y_pred)

    if ns.json:
        payload = {name: rep.to_json_dict() for name, rep in reports.items()}
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(format_comparison(reports))
    return 0


def _cmd_lex(argv: list[str]) -> int:
    ap = _Parser(prog="scope lex")
    ap.add_argument("file", type=str, help="Source file or '-' for stdin")
    ns = ap.parse_args(argv)
    sys.stdout.write(lex_report(tokenize(_read_source(ns.file))))
    return 0


def _cmd_analyze(argv: list[str]) -> int:
    ap = _Parser(prog="scope analyze")
    ap.add_argument("file", type=str, help="Source file or '-' for stdin")
    ap.add_argument("--max-unknown-fraction", type=float, default=0.0)
    ns = ap.parse_args(argv)
    declmap, status = analyze(
        tokenize(_read_source(ns.file)),
        AnalyzerConfig(max_unknown_fraction=ns.max_unknown_fraction),
    )
    sys.stdout.write(analysis_report(declmap, status))
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "process": _cmd_process,
    "dedup": _cmd_dedup,
    "refine": _cmd_refine,
    "split": _cmd_split,
    "stats": _cmd_stats,
    "metrics": _cmd_metrics,
    "lex": _cmd_lex,
    "analyze": _cmd_analyze,
}


def _configure_logging(level: int) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def main(argv: list[str] | None = None) -> int:
    global _progress
    argv = list(sys.argv[1:] if argv is None else argv)

    level = logging.INFO
    while argv and argv[0] in ("-v", "--verbose", "-q", "--quiet"):
        level = logging.DEBUG if argv.pop(0) in ("-v", "--verbose") else logging.WARNING
    _progress = level != logging.WARNING

    if not argv or argv[0] in ("-h", "--help"):
        print("scope commands: " + ", ".join(_COMMANDS))
        print("Global flags: -v/--verbose, -q/--quiet (before the command)")
        print("Example: scope extract --db CVEfixes.db --out raw.jsonl")
        print("Example: scope process snippet.c --output tokens")
        print("Example: scope process raw.jsonl --out processed.jsonl --keep-comments --workers 0")
        print("Example: scope dedup processed.jsonl --report dedup_report.json --out refined.jsonl")
        print("Example: scope refine --db CVEfixes.db --out refined/ --seed 0")
        print("Example: scope split refined.jsonl --field normalized --out splits/")
        print("Example: scope stats processed.jsonl --budget 512")
        print("Example: scope metrics --gold test.jsonl --pred model-B=before.jsonl --pred model-A=after.jsonl")
        print("Example: scope lex snippet.c")
        print("Example: scope analyze snippet.c")
        return 0

    cmd = argv[0]
    handler = _COMMANDS.get(cmd)
    if handler is None:
        print(f"scope: error: unknown command: {cmd}", file=sys.stderr)
        return 1

    _configure_logging(level)
    try:
        return handler(argv[1:])
    except SystemExit as e:
        # argparse: --help exits 0, usage errors exit 1 through _Parser.error
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    except (ScopeError, OSError, UnicodeError) as e:
        print(f"scope: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
