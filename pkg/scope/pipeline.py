from __future__ import annotations

import dataclasses
import json
import logging
import os
import shutil
import tempfile
import tomllib
from collections import Counter
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .corpus import CorpusRecord, atomic_write_text, ingest_database, read_entries, write_corpus, write_jsonl
from .corpus_stats import DEFAULT_TOKEN_BUDGETS, CorpusStats, stats
from .dataset_split import DEFAULT_RATIOS, DatasetBundle, balance, split
from .dedup import DedupResult, deduplicate, write_dedup_report
from .errors import ConfigError, CorpusFormatError
from .models import FULL_CONFIG, DatasetRecord, FunctionEntry, Label, OutputMode, ProcessedEntry, Provenance, TransformConfig
from .transforms import process_corpus


logger = logging.getLogger(__name__)

_TRANSFORM_KEYS = frozenset(f.name for f in dataclasses.fields(TransformConfig))
_PIPELINE_KEYS = frozenset(
    {"db", "corpus", "out_dir", "seed", "ratios", "workers", "balance", "token_budgets", "overwrite", "transform"}
)


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    out_dir: str
    db_path: str | None = None
    corpus_path: str | None = None
    transform: TransformConfig = FULL_CONFIG
    seed: int = 0
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    workers: int = 1
    balance: bool = True
    token_budgets: tuple[int, ...] = DEFAULT_TOKEN_BUDGETS
    overwrite: bool = False

    def __post_init__(self) -> None:
        if (self.db_path is None) == (self.corpus_path is None):
            raise ConfigError("exactly one of a database path or a corpus path is required")
        if not self.out_dir:
            raise ConfigError("an output directory is required")
        if len(self.ratios) != 3:
            raise ConfigError("ratios must have three values (train, validation, test)")
        if any(b <= 0 for b in self.token_budgets):
            raise ConfigError("token budgets must be positive")


def _read_config_file(path: str) -> dict[str, Any]:
    try:
        if path.endswith(".toml"):
            with open(path, "rb") as f:
                data = tomllib.load(f)
        elif path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        else:
            raise ConfigError(f"{path}: configuration must be a .toml or .json file")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a table/object")
    return data


def _check_keys(values: Mapping[str, Any], allowed: frozenset[str], where: str) -> None:
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} key: {unknown[0]}")


def transform_config(values: Mapping[str, Any], base: TransformConfig = FULL_CONFIG) -> TransformConfig:
    _check_keys(values, _TRANSFORM_KEYS, "transform")
    v = dict(values)
    if "output_mode" in v and not isinstance(v["output_mode"], OutputMode):
        try:
            v["output_mode"] = OutputMode(v["output_mode"])
        except ValueError as e:
            raise ConfigError(f"output_mode must be 'text' or 'tokens', got {v['output_mode']!r}") from e
    for key in _TRANSFORM_KEYS - {"output_mode", "max_unknown_fraction"}:
        if key in v and not isinstance(v[key], bool):
            raise ConfigError(f"transform key {key} must be a boolean")
    try:
        if "max_unknown_fraction" in v:
            v["max_unknown_fraction"] = float(v["max_unknown_fraction"])
        return dataclasses.replace(base, **v)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def load_config(path: str | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """
    Build a PipelineConfig from an optional .toml/.json file, then apply overrides.

    Overrides use the file's key names; None values mean "not given" and are skipped.
    """
    values: dict[str, Any] = _read_config_file(path) if path else {}
    _check_keys(values, _PIPELINE_KEYS, "configuration")
    transform_values = dict(values.pop("transform", {}) or {})

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "transform":
            transform_values.update({k: x for k, x in value.items() if x is not None})
        else:
            values[key] = value
    _check_keys(values, _PIPELINE_KEYS, "configuration")

    try:
        return PipelineConfig(
            out_dir=str(values.get("out_dir", "")),
            db_path=values.get("db"),
            corpus_path=values.get("corpus"),
            transform=transform_config(transform_values),
            seed=int(values.get("seed", 0)),
            ratios=tuple(float(r) for r in values.get("ratios", DEFAULT_RATIOS)),  # type: ignore[arg-type]
            workers=int(values.get("workers", 1)),
            balance=bool(values.get("balance", True)),
            token_budgets=tuple(int(b) for b in values.get("token_budgets", DEFAULT_TOKEN_BUDGETS)),
            overwrite=bool(values.get("overwrite", False)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


@dataclass(frozen=True, slots=True)
class PipelineResult:
    out_dir: str
    provenance: Provenance
    dedup: DedupResult
    processed_stats: CorpusStats
    refined_stats: CorpusStats
    original: DatasetBundle[DatasetRecord]
    processed: DatasetBundle[DatasetRecord]


def original_record(entry: ProcessedEntry) -> DatasetRecord:
    assert entry.label is not None
    return DatasetRecord(entry_id=entry.entry_id, representation=entry.source, label=entry.label)


def processed_record(entry: ProcessedEntry) -> DatasetRecord:
    rep = entry.representation
    if rep is None or entry.label is None:
        raise CorpusFormatError(f"{entry.entry_id}: no normalized representation")
    return DatasetRecord(entry_id=entry.entry_id, representation=rep, label=entry.label)


def write_bundle(out_dir: str, bundle: DatasetBundle[DatasetRecord]) -> None:
    for name, records in bundle.splits().items():
        write_jsonl(os.path.join(out_dir, f"{name}.jsonl"), (r.to_json_dict() for r in records))


def bundle_summary(bundle: DatasetBundle[Any]) -> dict[str, Any]:
    labels = {
        name: {lbl.name.lower(): sum(1 for r in items if r.label == lbl) for lbl in Label}
        for name, items in bundle.splits().items()
    }
    return {
        "seed": bundle.seed,
        "ratios": list(bundle.ratios),
        "sizes": bundle.sizes(),
        "labels": labels,
        "provenance": bundle.provenance.to_json_dict() if bundle.provenance is not None else None,
    }


def _load_entries(config: PipelineConfig) -> list[FunctionEntry]:
    if config.db_path is not None:
        return ingest_database(config.db_path)
    assert config.corpus_path is not None
    return read_entries(config.corpus_path)


def _prepare_staging(out_dir: str, overwrite: bool) -> str:
    target = os.path.abspath(out_dir)
    if os.path.exists(target):
        if not os.path.isdir(target):
            raise ConfigError(f"{out_dir} exists and is not a directory")
        if os.listdir(target) and not overwrite:
            raise ConfigError(f"{out_dir} is not empty (pass overwrite to replace it)")
    parent = os.path.dirname(target)
    os.makedirs(parent, exist_ok=True)
    return tempfile.mkdtemp(dir=parent, prefix=f".{os.path.basename(target)}.staging-")


def _commit_staging(staging: str, out_dir: str) -> None:
    target = os.path.abspath(out_dir)
    if os.path.exists(target):
        shutil.rmtree(target)
    os.replace(staging, target)


def run_pipeline(config: PipelineConfig, *, progress: bool = True) -> PipelineResult:
    """
    extract -> process -> error-mark -> dedup -> refined corpus -> balance -> split.

    Both dataset variants (original code and processed code) are cut from the same balanced
    id set with the same split, so they are aligned split by split. Everything is written to a
    staging directory that replaces `out_dir` only once every file is in place.
    """
    staging = _prepare_staging(config.out_dir, config.overwrite)
    try:
        result = _run(config, staging, progress)
        _commit_staging(staging, config.out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    logger.info("outputs written to %s", config.out_dir)
    return dataclasses.replace(result, out_dir=config.out_dir)


def _run(config: PipelineConfig, out: str, progress: bool) -> PipelineResult:
    entries = _load_entries(config)
    logger.info("stage extract: %d entries", len(entries))

    processed = process_corpus(entries, config.transform, workers=config.workers, progress=progress)
    ok = [p for p in processed if p.status.ok]
    error_reasons = Counter(p.status.reason.value for p in processed if p.status.reason is not None)
    logger.info("stage process: %d ok, %d errors %s", len(ok), len(processed) - len(ok), dict(error_reasons))

    # Error entries never reach fingerprinting.
    dedup = deduplicate(ok, workers=config.workers, progress=progress)
    keep = set(dedup.survivor_ids)
    survivors = [p for p in ok if p.entry_id in keep]
    logger.info("stage dedup: %d survivors, %d removed", len(survivors), len(dedup.removed_ids))

    balanced = balance(survivors, config.seed) if config.balance else list(survivors)
    logger.info("stage balance: %d entries", len(balanced))

    base = split(balanced, config.ratios, config.seed)
    provenance = Provenance(
        extracted=len(entries),
        errors=len(processed) - len(ok),
        ok=len(ok),
        duplicate_groups=len(dedup.groups),
        duplicates_removed=len(dedup.removed_ids),
        survivors=len(survivors),
        balanced=len(balanced),
        error_reasons=dict(sorted(error_reasons.items())),
        survivor_labels={
            lbl.name.lower(): sum(1 for p in survivors if p.label == lbl) for lbl in Label
        },
    )
    base = base.with_provenance(provenance)
    # One partition, two representations.
    original = base.map(original_record)
    proc_bundle = base.map(processed_record)

    # Raw counts for the refined stats come from the extracted source of each survivor.
    source_by_id = {e.entry_id: e for e in entries}
    processed_stats = stats(entries, processed, token_budgets=config.token_budgets)
    refined_stats = stats([source_by_id[p.entry_id] for p in survivors], survivors, token_budgets=config.token_budgets)

    write_corpus(os.path.join(out, "processed.jsonl"), processed)
    write_corpus(os.path.join(out, "refined.jsonl"), (CorpusRecord.from_processed(p) for p in survivors))
    write_dedup_report(
        os.path.join(out, "dedup_report.json"),
        dedup,
        total_entries=len(processed),
        error_entries=len(processed) - len(ok),
    )
    atomic_write_text(
        os.path.join(out, "stats.json"),
        json.dumps(
            {"processed": processed_stats.to_json_dict(), "refined": refined_stats.to_json_dict()},
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    write_bundle(os.path.join(out, "original"), original)
    write_bundle(os.path.join(out, "processed"), proc_bundle)
    summary = bundle_summary(base)
    summary["transform"] = config.transform.to_json_dict()
    atomic_write_text(os.path.join(out, "bundle.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")

    return PipelineResult(
        out_dir=out,
        provenance=provenance,
        dedup=dedup,
        processed_stats=processed_stats,
        refined_stats=refined_stats,
        original=original,
        processed=proc_bundle,
    )


def records_for_field(records: Sequence[CorpusRecord], field: str) -> list[DatasetRecord]:
    """
    Pick the representation for `scope split`: the original `code`, or the `normalized`
    output (error records are skipped in that case).
    """
    if field == "code":
        return [DatasetRecord(r.entry_id, r.code, r.label) for r in records]
    if field != "normalized":
        raise ConfigError(f"unknown field {field!r}; expected 'code' or 'normalized'")
    out: list[DatasetRecord] = []
    skipped = 0
    for r in records:
        if r.status is not None and not r.status.ok:
            skipped += 1
            continue
        if r.normalized is None:
            raise CorpusFormatError(f"{r.entry_id}: record has no normalized output")
        rep = r.normalized if isinstance(r.normalized, str) else list(r.normalized)
        out.append(DatasetRecord(r.entry_id, rep, r.label))
    if skipped:
        logger.info("skipped %d error records", skipped)
    return out
