from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from .errors import DatasetError
from .lexer import significant, tokenize
from .models import Label, ProcessedEntry


DEFAULT_TOKEN_BUDGETS: tuple[int, ...] = (512, 1024)


class SourceLike(Protocol):
    @property
    def entry_id(self) -> str: ...

    @property
    def code(self) -> str: ...


@dataclass(frozen=True, slots=True)
class BudgetShare:
    budget: int
    raw: float  # share of Ok entries whose raw count fits
    processed: float


@dataclass(frozen=True, slots=True)
class CorpusStats:
    entry_count: int
    error_count: int
    mean_raw_tokens: float
    mean_processed_tokens: float
    vocabulary_size_raw: int
    vocabulary_size_processed: int
    median_raw_tokens: float = 0.0
    median_processed_tokens: float = 0.0
    mean_raw_chars: float = 0.0
    mean_processed_chars: float = 0.0
    label_counts: dict[str, int] = field(default_factory=dict)  # Ok entries only
    error_reasons: dict[str, int] = field(default_factory=dict)
    budgets: list[BudgetShare] = field(default_factory=list)  # sorted by budget

    @property
    def ok_count(self) -> int:
        return self.entry_count - self.error_count

    @property
    def token_reduction(self) -> float:
        """Relative drop of the mean token count; 0.0 when there were no raw tokens."""
        if self.mean_raw_tokens <= 0:
            return 0.0
        return 1.0 - self.mean_processed_tokens / self.mean_raw_tokens

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "entry_count": self.entry_count,
            "error_count": self.error_count,
            "ok_count": self.ok_count,
            "mean_raw_tokens": self.mean_raw_tokens,
            "mean_processed_tokens": self.mean_processed_tokens,
            "median_raw_tokens": self.median_raw_tokens,
            "median_processed_tokens": self.median_processed_tokens,
            "mean_raw_chars": self.mean_raw_chars,
            "mean_processed_chars": self.mean_processed_chars,
            "vocabulary_size_raw": self.vocabulary_size_raw,
            "vocabulary_size_processed": self.vocabulary_size_processed,
            "token_reduction": self.token_reduction,
            "label_counts": dict(self.label_counts),
            "error_reasons": dict(self.error_reasons),
            "budgets": [{"budget": b.budget, "raw": b.raw, "processed": b.processed} for b in self.budgets],
        }


def _processed_texts(entry: ProcessedEntry) -> tuple[list[str], str]:
    if entry.normalized_tokens is not None:
        toks = list(entry.normalized_tokens)
        return toks, " ".join(toks)
    text = entry.normalized_text or ""
    return [t.text for t in significant(tokenize(text))], text


def stats(
    before: Sequence[SourceLike],
    after: Sequence[ProcessedEntry],
    *,
    token_budgets: Sequence[int] = DEFAULT_TOKEN_BUDGETS,
) -> CorpusStats:
    """
    Compare a corpus before and after processing.

    Both sides are paired by id. Means, medians, vocabularies and budget shares cover the
    Ok entries only; error entries are counted and broken down by reason.
    """
    if not after:
        raise DatasetError("cannot compute statistics of an empty corpus")
    source_of = {b.entry_id: b.code for b in before}
    after_ids = {a.entry_id for a in after}
    if len(after_ids) != len(after):
        raise DatasetError("processed corpus has duplicate ids")
    unpaired = after_ids ^ set(source_of)
    if unpaired:
        raise DatasetError(f"before/after corpora are not paired by id (e.g. {min(unpaired)})")

    ok = [a for a in after if a.status.ok]
    errors = Counter(a.status.reason.value for a in after if a.status.reason is not None)
    if not ok:
        return CorpusStats(
            entry_count=len(after),
            error_count=len(after),
            mean_raw_tokens=0.0,
            mean_processed_tokens=0.0,
            vocabulary_size_raw=0,
            vocabulary_size_processed=0,
            error_reasons=dict(sorted(errors.items())),
        )

    raw = np.array([a.raw_token_count for a in ok], dtype=np.int64)
    proc = np.array([a.processed_token_count for a in ok], dtype=np.int64)

    # Vocabularies hold significant token texts only; comments are trivia.
    vocab_raw: set[str] = set()
    vocab_proc: set[str] = set()
    raw_chars: list[int] = []
    proc_chars: list[int] = []
    for a in ok:
        code = source_of[a.entry_id]
        vocab_raw.update(t.text for t in significant(tokenize(code)))
        toks, text = _processed_texts(a)
        vocab_proc.update(toks)
        raw_chars.append(len(code))
        proc_chars.append(len(text))

    labels = Counter(Label(a.label).name.lower() for a in ok if a.label is not None)
    # Share of functions that fit within each budget.
    budgets = [
        BudgetShare(
            budget=int(b),
            raw=float(np.mean(raw <= b)),
            processed=float(np.mean(proc <= b)),
        )
        for b in sorted(set(token_budgets))
    ]

    return CorpusStats(
        entry_count=len(after),
        error_count=len(after) - len(ok),
        mean_raw_tokens=float(raw.mean()),
        mean_processed_tokens=float(proc.mean()),
        vocabulary_size_raw=len(vocab_raw),
        vocabulary_size_processed=len(vocab_proc),
        median_raw_tokens=float(np.median(raw)),
        median_processed_tokens=float(np.median(proc)),
        mean_raw_chars=float(np.mean(raw_chars)),
        mean_processed_chars=float(np.mean(proc_chars)),
        label_counts=dict(sorted(labels.items())),
        error_reasons=dict(sorted(errors.items())),
        budgets=budgets,
    )


def format_stats(s: CorpusStats) -> str:
    lines = [
        f"entries:            {s.entry_count} ({s.ok_count} ok, {s.error_count} errors)",
        f"mean tokens:        {s.mean_raw_tokens:.1f} -> {s.mean_processed_tokens:.1f} ({s.token_reduction:.1%} fewer)",
        f"median tokens:      {s.median_raw_tokens:.1f} -> {s.median_processed_tokens:.1f}",
        f"mean characters:    {s.mean_raw_chars:.1f} -> {s.mean_processed_chars:.1f}",
        f"vocabulary:         {s.vocabulary_size_raw} -> {s.vocabulary_size_processed}",
    ]
    for b in s.budgets:
        lines.append(f"within {b.budget:>5} tokens: {b.raw:.1%} -> {b.processed:.1%}")
    for name, n in s.label_counts.items():
        lines.append(f"label {name}: {n}")
    for reason, n in s.error_reasons.items():
        lines.append(f"error {reason}: {n}")
    return "\n".join(lines) + "\n"
