from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class Label(enum.IntEnum):
    NON_VULNERABLE = 0
    VULNERABLE = 1

    @classmethod
    def from_before_change(cls, value: Any) -> "Label":
        # Upstream stores before_change as the text 'True'/'False'; older dumps use 0/1.
        if isinstance(value, str):
            v = value.strip().lower()
            if v in ("true", "1", "t", "yes"):
                return cls.VULNERABLE
            if v in ("false", "0", "f", "no", ""):
                return cls.NON_VULNERABLE
            raise ValueError(f"unrecognized before_change value: {value!r}")
        if value is None:
            raise ValueError("before_change is NULL")
        return cls.VULNERABLE if bool(value) else cls.NON_VULNERABLE


def id_sort_key(entry_id: str) -> tuple[int, int, str]:
    """
    Order ids numerically when they are plain integers, lexically otherwise.
    Numeric ids sort before non-numeric ones.
    """
    if entry_id.isdigit():
        return (0, int(entry_id), entry_id)
    return (1, 0, entry_id)


@dataclass(frozen=True, slots=True)
class FunctionEntry:
    entry_id: str
    code: str
    label: Label
    language: str = ""


class ErrorReason(enum.Enum):
    # Declaration order is the detection priority.
    PREPROCESSOR_DIRECTIVE = "preprocessor_directive"
    UNBALANCED_BRACES = "unbalanced_braces"
    NO_FUNCTION_FOUND = "no_function_found"
    LEXICAL_GARBAGE = "lexical_garbage"


@dataclass(frozen=True, slots=True)
class ParseStatus:
    reason: ErrorReason | None = None

    @property
    def ok(self) -> bool:
        return self.reason is None

    @classmethod
    def error(cls, reason: ErrorReason) -> "ParseStatus":
        return cls(reason=reason)

    def __str__(self) -> str:
        return "ok" if self.reason is None else f"error:{self.reason.value}"

    @classmethod
    def parse(cls, s: str) -> "ParseStatus":
        if s == "ok":
            return cls()
        if s.startswith("error:"):
            return cls(reason=ErrorReason(s[len("error:"):]))
        raise ValueError(f"invalid status: {s!r}")


PARSE_OK = ParseStatus()


class OutputMode(enum.Enum):
    TEXT = "text"
    TOKENS = "tokens"


@dataclass(frozen=True, slots=True)
class TransformConfig:
    strip_comments: bool = True
    genericize_strings: bool = True
    rename_identifiers: bool = True
    normalize_whitespace: bool = True
    output_mode: OutputMode = OutputMode.TEXT
    strip_directives: bool = False
    max_unknown_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.max_unknown_fraction <= 1.0):
            raise ValueError("max_unknown_fraction must be in [0, 1]")

    @classmethod
    def identity(cls) -> "TransformConfig":
        return cls(
            strip_comments=False,
            genericize_strings=False,
            rename_identifiers=False,
            normalize_whitespace=False,
        )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "strip_comments": self.strip_comments,
            "genericize_strings": self.genericize_strings,
            "rename_identifiers": self.rename_identifiers,
            "normalize_whitespace": self.normalize_whitespace,
            "output_mode": self.output_mode.value,
            "strip_directives": self.strip_directives,
            "max_unknown_fraction": self.max_unknown_fraction,
        }


FULL_CONFIG = TransformConfig()


@dataclass(frozen=True, slots=True)
class ProcessedEntry:
    entry_id: str
    status: ParseStatus
    source: str
    raw_token_count: int
    processed_token_count: int = 0
    normalized_text: str | None = None
    normalized_tokens: tuple[str, ...] | None = None
    applied_config: TransformConfig | None = None
    label: Label | None = None

    def __post_init__(self) -> None:
        if not self.status.ok and (self.normalized_text is not None or self.normalized_tokens is not None):
            raise ValueError(f"{self.entry_id}: error entries carry no normalized output")

    @property
    def representation(self) -> str | list[str] | None:
        if self.normalized_tokens is not None:
            return list(self.normalized_tokens)
        return self.normalized_text


@dataclass(frozen=True, slots=True)
class DatasetRecord:
    entry_id: str
    representation: str | list[str]
    label: Label

    def to_json_dict(self) -> dict[str, Any]:
        return {"id": self.entry_id, "code": self.representation, "label": int(self.label)}


@dataclass(frozen=True, slots=True)
class Provenance:
    extracted: int
    errors: int
    ok: int
    duplicate_groups: int
    duplicates_removed: int
    survivors: int
    balanced: int
    error_reasons: dict[str, int] = field(default_factory=dict)
    survivor_labels: dict[str, int] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "extracted": self.extracted,
            "errors": self.errors,
            "ok": self.ok,
            "duplicate_groups": self.duplicate_groups,
            "duplicates_removed": self.duplicates_removed,
            "survivors": self.survivors,
            "balanced": self.balanced,
            "error_reasons": dict(self.error_reasons),
            "survivor_labels": dict(self.survivor_labels),
        }
