from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .corpus import atomic_write_text
from .errors import DatasetError, FingerprintError
from .lexer import tokenize
from .models import FULL_CONFIG, Label, ProcessedEntry, TransformConfig, id_sort_key
from .parallel import parallel_map
from .transforms import apply_passes, strip_comments


logger = logging.getLogger(__name__)


class FingerprintLevel(enum.Enum):
    L0_RAW = "L0"
    L1_COMMENTS_WHITESPACE = "L1"
    L2_FULL = "L2"


class DuplicateCategory(enum.Enum):
    IDENTICAL_CONTENT = "identical_content"
    COMMENT_ONLY = "comment_only"
    RENAME_ONLY = "rename_only"


@dataclass(frozen=True, slots=True)
class Fingerprint:
    level: FingerprintLevel
    digest: str
    tokens: tuple[str, ...]


def _digest(tokens: tuple[str, ...]) -> str:
    blob = json.dumps(list(tokens), separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def _full_config(entry: ProcessedEntry) -> TransformConfig:
    applied = entry.applied_config
    if applied is None:
        return FULL_CONFIG
    # Same error policy as the original run, every transformation on.
    return dataclasses.replace(
        FULL_CONFIG,
        strip_directives=applied.strip_directives,
        max_unknown_fraction=applied.max_unknown_fraction,
    )


def fingerprint(entry: ProcessedEntry, level: FingerprintLevel) -> Fingerprint:
    """
    L0 covers the raw source, L1 ignores comments and layout, L2 is the fully normalized
    token sequence (comments, strings, names, whitespace).
    """
    if not entry.status.ok:
        raise FingerprintError(f"{entry.entry_id}: cannot fingerprint an entry with status {entry.status}")

    tokens = tokenize(entry.source)
    if level is FingerprintLevel.L0_RAW:
        seq = tuple(t.text for t in tokens)
    elif level is FingerprintLevel.L1_COMMENTS_WHITESPACE:
        seq = tuple(t.text for t in strip_comments(tokens) if not t.is_trivia)
    else:
        # Full normalization regardless of the entry's own output settings.
        status, out = apply_passes(tokens, _full_config(entry))
        if not status.ok:
            raise FingerprintError(f"{entry.entry_id}: re-analysis failed with {status}")
        seq = tuple(t.text for t in out if not t.is_trivia)
    return Fingerprint(level=level, digest=_digest(seq), tokens=seq)


def _l2(entry: ProcessedEntry) -> Fingerprint:
    return fingerprint(entry, FingerprintLevel.L2_FULL)


@dataclass(frozen=True, slots=True)
class DuplicateGroup:
    fingerprint: Fingerprint
    member_ids: tuple[str, ...]  # sorted by id
    category: DuplicateCategory
    label_conflict: bool
    kept_id: str
    kept_label: Label

    @property
    def removed_ids(self) -> tuple[str, ...]:
        return tuple(i for i in self.member_ids if i != self.kept_id)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "fingerprint": self.fingerprint.digest,
            "member_ids": list(self.member_ids),
            "category": self.category.value,
            "label_conflict": self.label_conflict,
            "kept_id": self.kept_id,
            "kept_label": int(self.kept_label),
        }


def resolve(members: Sequence[tuple[str, Label]]) -> tuple[str, Label]:
    """
    Pick the surviving member of a duplicate group.

    Non-vulnerable wins when present; within the preferred label the smallest id wins.
    """
    if len(members) < 2:
        raise DatasetError("a duplicate group needs at least two members")
    labels = {label for _, label in members}
    preferred = Label.NON_VULNERABLE if Label.NON_VULNERABLE in labels else Label.VULNERABLE
    kept = min((eid for eid, label in members if label is preferred), key=id_sort_key)
    return kept, preferred


def _labels_of(entries: Sequence[ProcessedEntry], labels: Mapping[str, Label] | None) -> dict[str, Label]:
    out: dict[str, Label] = {}
    for e in entries:
        label = labels.get(e.entry_id) if labels is not None else e.label
        if label is None:
            raise DatasetError(f"{e.entry_id}: no label available for deduplication")
        out[e.entry_id] = Label(label)
    return out


def _categorize(members: Sequence[ProcessedEntry]) -> DuplicateCategory:
    # Shallowest level at which every member agrees.
    l0 = {fingerprint(m, FingerprintLevel.L0_RAW) for m in members}
    if len(l0) == 1:
        return DuplicateCategory.IDENTICAL_CONTENT
    l1 = {fingerprint(m, FingerprintLevel.L1_COMMENTS_WHITESPACE) for m in members}
    if len(l1) == 1:
        return DuplicateCategory.COMMENT_ONLY
    return DuplicateCategory.RENAME_ONLY


def group_duplicates(
    entries: Sequence[ProcessedEntry],
    labels: Mapping[str, Label] | None = None,
    *,
    workers: int = 1,
    progress: bool = True,
) -> list[DuplicateGroup]:
    """
    Group Ok entries by equal L2 fingerprint and categorize each group by the shallowest
    level at which all of its members already agree.

    Labels come from `labels` when given, else from each entry's own label.
    """
    ordered = sorted(entries, key=lambda e: id_sort_key(e.entry_id))
    ids = [e.entry_id for e in ordered]
    if len(set(ids)) != len(ids):
        dup = next(i for i, c in Counter(ids).items() if c > 1)
        raise DatasetError(f"duplicate entry id: {dup}")
    label_of = _labels_of(ordered, labels)

    prints = parallel_map(_l2, ordered, workers=workers, desc="Fingerprinting", progress=progress)
    buckets: dict[Fingerprint, list[ProcessedEntry]] = {}
    for entry, fp in zip(ordered, prints):
        buckets.setdefault(fp, []).append(entry)

    groups: list[DuplicateGroup] = []
    for fp, members in buckets.items():
        if len(members) < 2:
            continue
        member_ids = tuple(m.entry_id for m in members)
        member_labels = [(m.entry_id, label_of[m.entry_id]) for m in members]
        kept_id, kept_label = resolve(member_labels)
        groups.append(
            DuplicateGroup(
                fingerprint=fp,
                member_ids=member_ids,
                category=_categorize(members),
                label_conflict=len({label for _, label in member_labels}) > 1,
                kept_id=kept_id,
                kept_label=kept_label,
            )
        )
    groups.sort(key=lambda g: id_sort_key(g.member_ids[0]))
    return groups


@dataclass(frozen=True, slots=True)
class DedupResult:
    groups: tuple[DuplicateGroup, ...]
    survivor_ids: tuple[str, ...]
    removed_ids: tuple[str, ...]

    @property
    def grouped_entries(self) -> int:
        return sum(len(g.member_ids) for g in self.groups)

    @property
    def conflicted_groups(self) -> int:
        return sum(1 for g in self.groups if g.label_conflict)

    def groups_per_category(self) -> dict[str, int]:
        cnt = Counter(g.category.value for g in self.groups)
        return {c.value: cnt.get(c.value, 0) for c in DuplicateCategory}


def deduplicate(
    entries: Sequence[ProcessedEntry],
    labels: Mapping[str, Label] | None = None,
    *,
    workers: int = 1,
    progress: bool = True,
) -> DedupResult:
    groups = group_duplicates(entries, labels, workers=workers, progress=progress)
    # Entries outside every group survive untouched.
    removed = {i for g in groups for i in g.removed_ids}
    survivors = sorted((e.entry_id for e in entries if e.entry_id not in removed), key=id_sort_key)
    result = DedupResult(
        groups=tuple(groups),
        survivor_ids=tuple(survivors),
        removed_ids=tuple(sorted(removed, key=id_sort_key)),
    )
    logger.info(
        "dedup: %d groups (%d entries), %d removed, %d conflicted, %d survivors",
        len(groups),
        result.grouped_entries,
        len(removed),
        result.conflicted_groups,
        len(survivors),
    )
    return result


def dedup_summary(result: DedupResult, *, total_entries: int, error_entries: int) -> dict[str, Any]:
    return {
        "total_entries": total_entries,
        "error_entries": error_entries,
        "ok_entries": total_entries - error_entries,
        "groups": len(result.groups),
        "grouped_entries": result.grouped_entries,
        "removed_entries": len(result.removed_ids),
        "conflicted_groups": result.conflicted_groups,
        "groups_per_category": result.groups_per_category(),
        "survivors": len(result.survivor_ids),
    }


def write_dedup_report(path: str, result: DedupResult, *, total_entries: int, error_entries: int) -> None:
    payload = {
        "summary": dedup_summary(result, total_entries=total_entries, error_entries=error_entries),
        "groups": [g.to_json_dict() for g in result.groups],
    }
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
