from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .lexer import Token, TokenKind
from .models import PARSE_OK, ErrorReason, ParseStatus


Span = tuple[int, int]

TYPE_KEYWORDS = frozenset(
    """
    auto bool char char8_t char16_t char32_t const constexpr double extern float inline int long
    mutable register restrict short signed static thread_local typedef typename unsigned void
    volatile wchar_t _Atomic _Bool _Complex _Thread_local
    """.split()
)
AGGREGATE_KEYWORDS = frozenset({"struct", "union", "enum", "class"})
CONTROL_KEYWORDS = frozenset({"for", "if", "while", "switch", "catch"})

_DECL_TERMINATORS = frozenset({"=", ",", ";", "[", ")"})
_MEMBER_ACCESS = frozenset({".", "->", "::", ".*", "->*"})
_TEMPLATE_ARG_OPS = frozenset({"::", "*", "&", ",", "<", ">", ">>"})
_OPENERS = {"(": ")", "[": "]", "{": "}"}
_ATTRIBUTE_WORDS = frozenset({"__attribute__", "__attribute", "__declspec"})


@dataclass(frozen=True, slots=True)
class AnalyzerConfig:
    # Share of significant tokens allowed to be Unknown before LexicalGarbage; 0 means none.
    max_unknown_fraction: float = 0.0


@dataclass(frozen=True, slots=True)
class DeclarationMap:
    function_names: tuple[str, ...] = ()
    variable_names: tuple[str, ...] = ()
    occurrences: dict[str, tuple[Span, ...]] = field(default_factory=dict)
    declared_at: dict[str, Span] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.function_names and not self.variable_names

    def canonical_names(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for i, name in enumerate(self.function_names):
            out[name] = f"FUNC_{i}"
        for j, name in enumerate(self.variable_names):
            out[name] = f"VAR_{j}"
        return out


def _is(t: Token, text: str) -> bool:
    return t.kind in (TokenKind.OPERATOR, TokenKind.PUNCTUATION) and t.text == text


class _Analysis:
    def __init__(self, sig: list[Token]) -> None:
        self.sig = sig
        self.n = len(sig)
        self.pair: dict[int, int] = {}
        self.opener_of: dict[int, int] = {}
        self._match_brackets()
        # (sig index, name, is_function) in discovery order; sorted later.
        self.decls: list[tuple[int, str, bool]] = []
        self._seen: set[int] = set()

    def text(self, i: int) -> str:
        return self.sig[i].text if 0 <= i < self.n else ""

    def punct(self, i: int, text: str) -> bool:
        return 0 <= i < self.n and _is(self.sig[i], text)

    def kind(self, i: int) -> TokenKind | None:
        return self.sig[i].kind if 0 <= i < self.n else None

    def _match_brackets(self) -> None:
        stack: list[int] = []
        for i, t in enumerate(self.sig):
            if t.kind is not TokenKind.PUNCTUATION:
                continue
            if t.text in _OPENERS:
                stack.append(i)
            elif t.text in (")", "]", "}"):
                # Unwind to the nearest matching opener; mismatched ones stay unpaired.
                for k in range(len(stack) - 1, -1, -1):
                    if _OPENERS[self.sig[stack[k]].text] == t.text:
                        self.pair[stack[k]] = i
                        self.opener_of[i] = stack[k]
                        del stack[k:]
                        break

    def close_of(self, i: int) -> int:
        return self.pair.get(i, self.n)

    # -- structural checks ---------------------------------------------------

    def braces_unbalanced(self) -> bool:
        depth = 0
        for t in self.sig:
            if _is(t, "{"):
                depth += 1
            elif _is(t, "}"):
                depth -= 1
                if depth < 0:
                    return True
        return depth != 0

    def scope_depths(self) -> list[int]:
        """Brace depth before each token; namespace and extern "C" blocks do not nest."""
        depths: list[int] = []
        stack: list[bool] = []
        depth = 0
        for i, t in enumerate(self.sig):
            depths.append(depth)
            if _is(t, "{"):
                counted = not self._transparent_block(i)
                stack.append(counted)
                if counted:
                    depth += 1
            elif _is(t, "}") and stack:
                if stack.pop():
                    depth -= 1
        return depths

    def _transparent_block(self, i: int) -> bool:
        if self.text(i - 1) == "namespace" or (
            self.kind(i - 1) is TokenKind.IDENTIFIER and self.text(i - 2) == "namespace"
        ):
            return True
        return self.kind(i - 1) is TokenKind.STRING_LITERAL and self.text(i - 2) == "extern"

    # -- rule (a): function definitions --------------------------------------

    def body_open(self, j: int) -> int | None:
        """Index of the body '{' after a parameter list closing at j-1, or None."""
        # Only function tails may sit between ')' and '{'; a ';' or an operator means a call or prototype.
        while j < self.n:
            t = self.sig[j]
            if _is(t, "{"):
                return j
            if t.text in ("const", "volatile", "override", "final") or _is(t, "&") or _is(t, "&&"):
                j += 1
            elif t.text in ("noexcept", "throw"):
                j += 1
                if self.punct(j, "("):
                    j = self.close_of(j) + 1
            elif t.text in _ATTRIBUTE_WORDS and self.punct(j + 1, "("):
                j = self.close_of(j + 1) + 1
            elif _is(t, "->"):
                j = self._skip_trailing_return(j + 1)
            elif _is(t, ":"):
                return self._skip_init_list(j + 1)
            else:
                return None
        return None

    def _skip_trailing_return(self, j: int) -> int:
        while j < self.n and not self.punct(j, "{") and not self.punct(j, ";"):
            if self.punct(j, "("):
                j = self.close_of(j)
            j += 1
        return j

    def _skip_init_list(self, j: int) -> int | None:
        # Constructor initializers: `member(args)` or `Base<T>{args}`, comma separated, then the body.
        while j < self.n:
            if self.kind(j) is not TokenKind.IDENTIFIER:
                return None
            j += 1
            while self.punct(j, "::") and self.kind(j + 1) is TokenKind.IDENTIFIER:
                j += 2
            if self.punct(j, "<"):
                close = self._skip_template(j)
                if close is None:
                    return None
                j = close + 1
            if not (self.punct(j, "(") or self.punct(j, "{")):
                return None
            j = self.close_of(j) + 1
            if self.punct(j, ","):
                j += 1
                continue
            # The list must end at the body brace.
            return j if self.punct(j, "{") else None
        return None

    def find_functions(self, depths: list[int]) -> list[tuple[int, int, int]]:
        """(name index, '(' index, body '{' index) for every top-level definition."""
        found: list[tuple[int, int, int]] = []
        i = 0
        while i < self.n - 1:
            if (
                depths[i] == 0
                and self.sig[i].kind is TokenKind.IDENTIFIER
                and self.sig[i].text not in _ATTRIBUTE_WORDS
                and self.punct(i + 1, "(")
                and (i + 1) in self.pair
            ):
                body = self.body_open(self.pair[i + 1] + 1)
                if body is not None:
                    found.append((i, i + 1, body))
                    i = self.close_of(body) + 1
                    continue
            i += 1
        return found

    # -- rule (b): parameters ------------------------------------------------

    def parameters(self, open_idx: int) -> list[int]:
        close = self.pair[open_idx]
        pieces: list[list[int]] = [[]]
        depth = 0
        for k in range(open_idx + 1, close):
            t = self.sig[k]
            if t.kind in (TokenKind.PUNCTUATION, TokenKind.OPERATOR):
                if t.text in ("(", "[", "{", "<"):
                    depth += 1
                elif t.text in (")", "]", "}", ">"):
                    depth -= 1
                elif t.text == ">>":
                    depth -= 2
                elif t.text == "," and depth == 0:
                    # Top-level comma: next parameter.
                    pieces.append([])
                    continue
            pieces[-1].append(k)
        names: list[int] = []
        for piece in pieces:
            k = self._parameter_name(piece)
            if k is not None:
                names.append(k)
        return names

    def _parameter_name(self, piece: list[int]) -> int | None:
        for pos, k in enumerate(piece):
            if self.punct(k, "="):
                piece = piece[:pos]
                break
        if not piece:
            return None
        # Function pointer: T (*name)(args)
        for pos, k in enumerate(piece):
            if self.punct(k, "("):
                m = k + 1
                while self.punct(m, "*") or self.punct(m, "&") or self.punct(m, "^"):
                    m += 1
                if m > k + 1 and self.kind(m) is TokenKind.IDENTIFIER and self.punct(m + 1, ")"):
                    return m
                return None
        end = len(piece)
        while end > 0 and self.punct(piece[end - 1], "]"):
            opener = self.opener_of.get(piece[end - 1])
            if opener is None or opener not in piece:
                return None
            end = piece.index(opener)
        # Unnamed parameters (`int`, `char *`) have no type in front of the last word.
        if end < 2:
            return None
        last = piece[end - 1]
        if self.sig[last].kind is not TokenKind.IDENTIFIER:
            return None
        before = self.sig[piece[end - 2]]
        if before.kind is TokenKind.IDENTIFIER or (
            before.kind is TokenKind.KEYWORD and before.text in TYPE_KEYWORDS
        ):
            return last
        if before.text in ("*", "&", "&&", ">", ">>", "...") and before.kind is not TokenKind.KEYWORD:
            return last
        return None

    # -- rule (c): local declarations ----------------------------------------

    def _skip_template(self, j: int) -> int | None:
        """j is a '<'; return the index of its matching '>' when the run looks like template args."""
        depth = 0
        k = j
        while k < self.n:
            t = self.sig[k]
            if t.kind in (TokenKind.IDENTIFIER, TokenKind.NUMBER_LITERAL) or (
                t.kind is TokenKind.KEYWORD and (t.text in TYPE_KEYWORDS or t.text in AGGREGATE_KEYWORDS)
            ):
                k += 1
                continue
            if t.text not in _TEMPLATE_ARG_OPS or t.kind is TokenKind.KEYWORD:
                return None
            if t.text == "<":
                depth += 1
            elif t.text == ">":
                depth -= 1
            elif t.text == ">>":
                depth -= 2
            if depth <= 0:
                return k if depth == 0 else None
            k += 1
        return None

    def statement_start(self, k: int) -> tuple[bool, bool]:
        """(is a statement start, is inside a for header)."""
        prev = self.sig[k - 1] if k > 0 else None
        if prev is None:
            return False, False
        if _is(prev, "{") or _is(prev, "}") or _is(prev, ";"):
            return True, False
        if prev.kind is TokenKind.KEYWORD and prev.text in ("else", "do"):
            return True, False
        if _is(prev, "("):
            kw = self.text(k - 2)
            if self.kind(k - 2) is TokenKind.KEYWORD and kw in CONTROL_KEYWORDS:
                return True, kw == "for"
            return False, False
        # Unbraced body of if/for/while.
        if _is(prev, ")"):
            opener = self.opener_of.get(k - 1)
            if opener is not None and self.kind(opener - 1) is TokenKind.KEYWORD and self.text(opener - 1) in CONTROL_KEYWORDS:
                return True, False
        return False, False

    def declaration_at(self, k: int, end: int, in_for: bool) -> list[int]:
        """
        Declarator names of a declaration starting at k, or [] when the statement is not one.

        A declaration is a type prefix (keywords, qualified or templated names, pointer and
        reference marks) followed by an identifier and a terminator. `prefix` counts the
        type words seen so far; a bare `x = 1;` has none and is an assignment.
        """
        names: list[int] = []
        # Range-for: `for (auto x : xs)`.
        terminators = _DECL_TERMINATORS | {":"} if in_for else _DECL_TERMINATORS
        prefix = 0
        j = k
        while j < end:
            t = self.sig[j]
            if t.kind is TokenKind.KEYWORD:
                if t.text in AGGREGATE_KEYWORDS:
                    nxt = j + 1
                    if self.kind(nxt) is TokenKind.IDENTIFIER:
                        if self.punct(nxt + 1, "{"):
                            # Local `struct tag { ... }` declares the tag too.
                            names.append(nxt)
                            j = self.close_of(nxt + 1) + 1
                        else:
                            j = nxt + 1
                        prefix += 1
                        continue
                    if self.punct(nxt, "{"):
                        j = self.close_of(nxt) + 1
                        prefix += 1
                        continue
                    return names
                if t.text in TYPE_KEYWORDS:
                    prefix += 1
                    j += 1
                    continue
                return names
            if t.kind is TokenKind.IDENTIFIER:
                nxt = self.sig[j + 1] if j + 1 < self.n else None
                if nxt is None:
                    return names
                if prefix >= 1 and nxt.kind in (TokenKind.OPERATOR, TokenKind.PUNCTUATION) and nxt.text in terminators:
                    # First declarator; `int a = 0, *b;` continues below.
                    names.append(j)
                    self._more_declarators(j + 1, end, names)
                    return names
                if _is(nxt, "::"):
                    j += 2
                    continue
                if _is(nxt, "<"):
                    close = self._skip_template(j + 1)
                    if close is None:
                        return names
                    prefix += 1
                    j = close + 1
                    continue
                # Still inside the type: `size_t n`, `T *p`, `my_t const`.
                if (
                    nxt.kind is TokenKind.IDENTIFIER
                    or (nxt.kind is TokenKind.KEYWORD and nxt.text in TYPE_KEYWORDS)
                    or _is(nxt, "*")
                    or _is(nxt, "&")
                    or _is(nxt, "&&")
                ):
                    prefix += 1
                    j += 1
                    continue
                return names
            if _is(t, "::"):
                j += 1
                continue
            if prefix >= 1 and (_is(t, "*") or _is(t, "&") or _is(t, "&&")):
                j += 1
                continue
            return names
        return names

    def _more_declarators(self, m: int, end: int, names: list[int]) -> None:
        # m sits just past a declarator name; skip its array bounds and initializer, then take `, name`.
        while m < end:
            while self.punct(m, "["):
                m = self.close_of(m) + 1
            if self.punct(m, "="):
                m = self._skip_initializer(m + 1, end)
            elif self.punct(m, "(") or self.punct(m, "{"):
                m = self.close_of(m) + 1
            if not self.punct(m, ","):
                return
            m += 1
            while self.punct(m, "*") or self.punct(m, "&") or self.punct(m, "&&") or self.text(m) in ("const", "volatile"):
                m += 1
            if self.kind(m) is TokenKind.IDENTIFIER and self.text(m + 1) in _DECL_TERMINATORS:
                names.append(m)
                m += 1
            else:
                return

    def _skip_initializer(self, m: int, end: int) -> int:
        while m < end:
            t = self.sig[m]
            if t.kind is TokenKind.PUNCTUATION:
                if t.text in _OPENERS:
                    m = self.close_of(m) + 1
                    continue
                if t.text in (",", ";", ")", "}"):
                    return m
            m += 1
        return m

    def scan_body(self, body_open: int) -> None:
        end = self.close_of(body_open)
        for k in range(body_open + 1, min(end, self.n)):
            start, in_for = self.statement_start(k)
            if not start:
                continue
            for idx in self.declaration_at(k, min(end, self.n), in_for):
                self.add(idx, is_function=False)

    def add(self, idx: int, *, is_function: bool) -> None:
        if idx in self._seen:
            return
        self._seen.add(idx)
        self.decls.append((idx, self.sig[idx].text, is_function))

    # -- occurrences ---------------------------------------------------------

    def build_map(self) -> DeclarationMap:
        functions: list[str] = []
        variables: list[str] = []
        declared_at: dict[str, Span] = {}
        declaring_functions: set[int] = set()
        for idx, name, is_function in sorted(self.decls):
            if name in declared_at:
                continue
            tok = self.sig[idx]
            declared_at[name] = (tok.start, tok.end)
            if is_function:
                functions.append(name)
                declaring_functions.add(idx)
            else:
                variables.append(name)

        # Every same-text identifier is an occurrence, except after member access.
        occurrences: dict[str, list[Span]] = {name: [] for name in declared_at}
        for i, t in enumerate(self.sig):
            if t.kind is not TokenKind.IDENTIFIER or t.text not in occurrences:
                continue
            if i > 0 and self.sig[i - 1].text in _MEMBER_ACCESS and self.sig[i - 1].kind is TokenKind.OPERATOR:
                if i not in declaring_functions:
                    continue
            occurrences[t.text].append((t.start, t.end))

        return DeclarationMap(
            function_names=tuple(functions),
            variable_names=tuple(variables),
            occurrences={k: tuple(v) for k, v in occurrences.items()},
            declared_at=declared_at,
        )


def analyze(
    tokens: Sequence[Token],
    config: AnalyzerConfig = AnalyzerConfig(),
) -> tuple[DeclarationMap, ParseStatus]:
    """
    Find the programmer-defined names of a function-level snippet and decide whether the
    snippet is usable.

    Declared names are: the names of top-level function definitions, their parameters, and
    locals declared inside their bodies. Callees, globals, type names and members are left
    alone. On error the map is still filled as far as the heuristics get.
    """
    has_directive = any(t.kind is TokenKind.PREPROCESSOR_DIRECTIVE for t in tokens)
    sig = [t for t in tokens if not t.is_trivia and t.kind is not TokenKind.PREPROCESSOR_DIRECTIVE]

    a = _Analysis(sig)
    functions = a.find_functions(a.scope_depths())
    for name_idx, open_idx, body_idx in functions:
        a.add(name_idx, is_function=True)
        for p in a.parameters(open_idx):
            a.add(p, is_function=False)
        a.scan_body(body_idx)
    declmap = a.build_map()

    unknown = sum(1 for t in sig if t.kind is TokenKind.UNKNOWN)
    garbage = unknown > 0 and (unknown / len(sig)) > config.max_unknown_fraction

    if has_directive:
        status = ParseStatus.error(ErrorReason.PREPROCESSOR_DIRECTIVE)
    elif a.braces_unbalanced():
        status = ParseStatus.error(ErrorReason.UNBALANCED_BRACES)
    elif not functions:
        status = ParseStatus.error(ErrorReason.NO_FUNCTION_FOUND)
    elif garbage:
        status = ParseStatus.error(ErrorReason.LEXICAL_GARBAGE)
    else:
        status = PARSE_OK
    return declmap, status


def analysis_report(declmap: DeclarationMap, status: ParseStatus) -> str:
    canon = declmap.canonical_names()
    lines: list[str] = [f"status={status}"]

    def section(title: str, names: tuple[str, ...]) -> None:
        if not names:
            lines.append(f"{title}: <none>")
            return
        lines.append(f"{title}:")
        for name in names:
            spans = " ".join(f"{s}..{e}" for s, e in declmap.occurrences.get(name, ()))
            lines.append(f"  {canon[name]:<8} {name}  occurrences={len(declmap.occurrences.get(name, ()))} [{spans}]")

    section("functions", declmap.function_names)
    section("variables", declmap.variable_names)
    return "\n".join(lines) + "\n"
