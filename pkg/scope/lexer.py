from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Sequence


class TokenKind(enum.Enum):
    IDENTIFIER = "Identifier"
    KEYWORD = "Keyword"
    STRING_LITERAL = "StringLiteral"
    CHAR_LITERAL = "CharLiteral"
    NUMBER_LITERAL = "NumberLiteral"
    OPERATOR = "Operator"
    PUNCTUATION = "Punctuation"
    LINE_COMMENT = "LineComment"
    BLOCK_COMMENT = "BlockComment"
    PREPROCESSOR_DIRECTIVE = "PreprocessorDirective"
    WHITESPACE = "Whitespace"
    NEWLINE = "Newline"
    UNKNOWN = "Unknown"


TRIVIA_KINDS = frozenset(
    {TokenKind.WHITESPACE, TokenKind.NEWLINE, TokenKind.LINE_COMMENT, TokenKind.BLOCK_COMMENT}
)
COMMENT_KINDS = frozenset({TokenKind.LINE_COMMENT, TokenKind.BLOCK_COMMENT})
LAYOUT_KINDS = frozenset({TokenKind.WHITESPACE, TokenKind.NEWLINE})


C_KEYWORDS = frozenset(
    """
    auto break case char const continue default do double else enum extern float for goto if
    inline int long register restrict return short signed sizeof static struct switch typedef
    union unsigned void volatile while _Alignas _Alignof _Atomic _Bool _Complex _Generic
    _Imaginary _Noreturn _Static_assert _Thread_local
    """.split()
)

CPP_KEYWORDS = frozenset(
    """
    alignas alignof and and_eq asm bitand bitor bool catch char8_t char16_t char32_t class compl
    concept consteval constexpr constinit const_cast co_await co_return co_yield decltype delete
    dynamic_cast explicit export false friend mutable namespace new noexcept not not_eq nullptr
    operator or or_eq private protected public reinterpret_cast requires static_assert static_cast
    template this thread_local throw true try typeid typename using virtual wchar_t xor xor_eq
    """.split()
)

KEYWORDS = C_KEYWORDS | CPP_KEYWORDS


@dataclass(frozen=True, slots=True)
class Token:
    kind: TokenKind
    text: str
    start: int
    end: int

    @property
    def is_trivia(self) -> bool:
        return self.kind in TRIVIA_KINDS

    def with_text(self, text: str) -> "Token":
        # Span keeps pointing at the original slice; only the text is substituted.
        return Token(kind=self.kind, text=text, start=self.start, end=self.end)


class RenderMode(enum.Enum):
    VERBATIM = "verbatim"
    NORMALIZED = "normalized"


_PUNCTUATION = ("...", "(", ")", "[", "]", "{", "}", ";", ",")
_OPERATORS = (
    "<<=", ">>=", "->*", "<=>",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", ".*",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "&", "|", "^", "~", "?", ".", ":",
)


def _alternation(items: Iterable[str]) -> str:
    # Longest first so the regex engine performs maximal munch.
    return "|".join(re.escape(s) for s in sorted(items, key=len, reverse=True))


_ENC_PREFIX = r"(?:u8|u|U|L)?"

_MASTER = re.compile(
    "|".join(
        [
            r"(?P<NEWLINE>\r\n|\n|\r)",
            r"(?P<WHITESPACE>[ \t\f\v]+)",
            r"(?P<BLOCK_COMMENT>/\*[\s\S]*?\*/)",
            r"(?P<LINE_COMMENT>//(?:\\\r?\n|[^\r\n])*)",
            r"(?P<RAW_STRING>" + _ENC_PREFIX + r'R"(?P<delim>[^()\\ \t\r\n"]{0,16})\([\s\S]*?\)(?P=delim)")',
            r'(?P<STRING>' + _ENC_PREFIX + r'"(?:[^"\\\r\n]|\\\r?\n|\\[\s\S])*")',
            r"(?P<CHAR>" + _ENC_PREFIX + r"'(?:[^'\\\r\n]|\\\r?\n|\\[\s\S])*')",
            r"(?P<UNTERMINATED>(?:/\*|" + _ENC_PREFIX + r"[\"'])[\s\S]*)",
            r"(?P<NUMBER>\.?[0-9](?:[eEpP][+-]|'(?=[0-9A-Za-z_])|[0-9A-Za-z_.])*)",
            r"(?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)",
            r"(?P<PUNCT>" + _alternation(_PUNCTUATION) + r")",
            r"(?P<OP>" + _alternation(_OPERATORS) + r")",
            r"(?P<NONASCII>[^\x00-\x7f]+)",
            r"(?P<OTHER>[\s\S])",
        ]
    )
)

# A directive runs to the first line end not escaped by a backslash.
_DIRECTIVE = re.compile(r"#(?:\\\r?\n|\\|[^\r\n\\])*")

_GROUP_KIND = {
    "NEWLINE": TokenKind.NEWLINE,
    "WHITESPACE": TokenKind.WHITESPACE,
    "BLOCK_COMMENT": TokenKind.BLOCK_COMMENT,
    "LINE_COMMENT": TokenKind.LINE_COMMENT,
    "STRING": TokenKind.STRING_LITERAL,
    "CHAR": TokenKind.CHAR_LITERAL,
    "UNTERMINATED": TokenKind.UNKNOWN,
    "NUMBER": TokenKind.NUMBER_LITERAL,
    "PUNCT": TokenKind.PUNCTUATION,
    "OP": TokenKind.OPERATOR,
    "NONASCII": TokenKind.UNKNOWN,
    "OTHER": TokenKind.UNKNOWN,
}


def _decode(source: str | bytes) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8", errors="surrogateescape")
    return source


def _byte_len(s: str) -> int:
    try:
        return len(s.encode("utf-8", "surrogateescape"))
    except UnicodeEncodeError:
        # Lone surrogates outside the escape range, e.g. a JSON-escaped \ud800.
        return len(s.encode("utf-8", "surrogatepass"))


def tokenize(source: str | bytes) -> list[Token]:
    """
    Split C/C++ source into a loss-free token list.

    Concatenating every token's text gives back the input. Malformed input never raises:
    an unterminated string, char literal or block comment becomes one Unknown token covering
    the remainder, and stray characters become single Unknown tokens.

    Spans are UTF-8 byte offsets into the source (surrogate-escaped bytes count as one).
    """
    text = _decode(source)
    ascii_only = text.isascii()
    out: list[Token] = []
    pos = 0
    byte_pos = 0
    n = len(text)
    at_line_start = True

    def emit(kind: TokenKind, tok_text: str) -> None:
        nonlocal byte_pos
        end = byte_pos + (len(tok_text) if ascii_only else _byte_len(tok_text))
        out.append(Token(kind, tok_text, byte_pos, end))
        byte_pos = end

    while pos < n:
        if at_line_start and text[pos] == "#":
            m = _DIRECTIVE.match(text, pos)
            assert m is not None
            emit(TokenKind.PREPROCESSOR_DIRECTIVE, m.group())
            pos = m.end()
            at_line_start = False
            continue

        m = _MASTER.match(text, pos)
        assert m is not None  # OTHER matches any character
        group = m.lastgroup
        if group == "RAW_STRING":
            kind = TokenKind.STRING_LITERAL
        elif group == "IDENT":
            kind = TokenKind.KEYWORD if m.group() in KEYWORDS else TokenKind.IDENTIFIER
        else:
            kind = _GROUP_KIND[group]

        emit(kind, m.group())
        pos = m.end()

        if kind is TokenKind.NEWLINE:
            at_line_start = True
        elif kind not in (TokenKind.WHITESPACE, TokenKind.BLOCK_COMMENT):
            # A block comment counts as a space, so `/* c */ #define` is still a directive.
            at_line_start = False

    return out


def significant(tokens: Iterable[Token]) -> list[Token]:
    return [t for t in tokens if not t.is_trivia]


def render(tokens: Sequence[Token], mode: RenderMode = RenderMode.VERBATIM) -> str:
    if mode is RenderMode.VERBATIM:
        return "".join(t.text for t in tokens)
    parts: list[str] = []
    after_directive = False
    for t in tokens:
        if t.is_trivia:
            continue
        is_directive = t.kind is TokenKind.PREPROCESSOR_DIRECTIVE
        if parts:
            # Directives sit on a line of their own.
            parts.append("\n" if after_directive or is_directive else " ")
        parts.append(t.text)
        after_directive = is_directive
    return "".join(parts)


def _escape(s: str) -> str:
    return s.encode("unicode_escape", errors="backslashreplace").decode("ascii")


def lex_report(tokens: Sequence[Token]) -> str:
    lines = [f"{t.kind.value}\t{t.start}..{t.end}\t{_escape(t.text)}" for t in tokens]
    return "\n".join(lines) + ("\n" if lines else "")
