from __future__ import annotations

import logging
from typing import Sequence

from .lexer import COMMENT_KINDS, LAYOUT_KINDS, RenderMode, Token, TokenKind, render, tokenize
from .models import (
    FunctionEntry,
    Label,
    OutputMode,
    ParseStatus,
    ProcessedEntry,
    TransformConfig,
)
from .parallel import parallel_map
from .snippet_analyzer import AnalyzerConfig, DeclarationMap, analyze


logger = logging.getLogger(__name__)

STRING_SENTINEL = '"<STR>"'


def strip_comments(tokens: Sequence[Token], *, keep_gaps: bool = False) -> list[Token]:
    """
    Drop LineComment/BlockComment tokens.

    With keep_gaps, a comment glued between two non-layout tokens leaves a single space
    behind so a verbatim render still lexes into the same tokens.
    """
    out: list[Token] = []
    for i, t in enumerate(tokens):
        if t.kind not in COMMENT_KINDS:
            out.append(t)
            continue
        if not keep_gaps:
            continue
        prev_glued = bool(out) and out[-1].kind not in LAYOUT_KINDS
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        next_glued = nxt is not None and nxt.kind not in LAYOUT_KINDS
        # `return/*x*/1` must not collapse into `return1`.
        if prev_glued and next_glued:
            out.append(Token(TokenKind.WHITESPACE, " ", t.start, t.end))
    return out


def genericize_strings(tokens: Sequence[Token]) -> list[Token]:
    return [t.with_text(STRING_SENTINEL) if t.kind is TokenKind.STRING_LITERAL else t for t in tokens]


def rename_identifiers(tokens: Sequence[Token], declmap: DeclarationMap) -> list[Token]:
    if declmap.empty:
        return list(tokens)
    canon = declmap.canonical_names()
    # Occurrences are keyed by span, so member names that share a declared name's text stay put.
    by_span: dict[tuple[int, int], str] = {}
    for name, spans in declmap.occurrences.items():
        for span in spans:
            by_span[span] = canon[name]
    out: list[Token] = []
    for t in tokens:
        new = by_span.get((t.start, t.end)) if t.kind is TokenKind.IDENTIFIER else None
        out.append(t.with_text(new) if new is not None else t)
    return out


def _counted(tokens: Sequence[Token]) -> int:
    return sum(1 for t in tokens if t.kind not in LAYOUT_KINDS)


def apply_passes(
    tokens: Sequence[Token],
    config: TransformConfig,
) -> tuple[ParseStatus, list[Token]]:
    """
    Analyze the token list, then run the enabled passes in their fixed order:
    comments, strings, identifiers. Whitespace normalization happens at render time.
    """
    if config.strip_directives:
        tokens = [t for t in tokens if t.kind is not TokenKind.PREPROCESSOR_DIRECTIVE]
    declmap, status = analyze(tokens, AnalyzerConfig(max_unknown_fraction=config.max_unknown_fraction))
    if not status.ok:
        return status, list(tokens)

    out = list(tokens)
    if config.strip_comments:
        out = strip_comments(out, keep_gaps=not config.normalize_whitespace)
    if config.genericize_strings:
        out = genericize_strings(out)
    if config.rename_identifiers:
        out = rename_identifiers(out, declmap)
    return status, out


def process_function(
    source: str,
    config: TransformConfig,
    entry_id: str,
    *,
    label: Label | None = None,
) -> ProcessedEntry:
    tokens = tokenize(source)
    raw_count = _counted(tokens)
    status, out = apply_passes(tokens, config)
    if not status.ok:
        return ProcessedEntry(
            entry_id=entry_id,
            status=status,
            source=source,
            raw_token_count=raw_count,
            applied_config=config,
            label=label,
        )

    text: str | None = None
    toks: tuple[str, ...] | None = None
    if config.output_mode is OutputMode.TOKENS:
        toks = tuple(t.text for t in out if not t.is_trivia)
    else:
        mode = RenderMode.NORMALIZED if config.normalize_whitespace else RenderMode.VERBATIM
        text = render(out, mode)

    return ProcessedEntry(
        entry_id=entry_id,
        status=status,
        source=source,
        raw_token_count=raw_count,
        processed_token_count=_counted(out),
        normalized_text=text,
        normalized_tokens=toks,
        applied_config=config,
        label=label,
    )


def _process_one(args: tuple[FunctionEntry, TransformConfig]) -> ProcessedEntry:
    entry, config = args
    return process_function(entry.code, config, entry.entry_id, label=entry.label)


def process_corpus(
    entries: Sequence[FunctionEntry],
    config: TransformConfig,
    *,
    workers: int = 1,
    progress: bool = True,
) -> list[ProcessedEntry]:
    """Process every entry independently; results come back in input order."""
    results = parallel_map(
        _process_one,
        [(e, config) for e in entries],
        workers=workers,
        desc="Processing",
        progress=progress,
    )
    errors = sum(1 for r in results if not r.status.ok)
    logger.info("processed %d entries: %d ok, %d errors", len(results), len(results) - errors, errors)
    return results
