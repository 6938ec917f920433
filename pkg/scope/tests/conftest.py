from __future__ import annotations

import random
import sqlite3
from dataclasses import dataclass

import pytest

from scope.models import FunctionEntry, Label


# Identifier pools are disjoint so declared names never collide with callees, types or members.
FUNCTION_WORDS = ["parse_header", "read_block", "update_state", "copy_chunk", "scan_table", "emit_frame", "pos"]
VARIABLE_WORDS = ["len", "buf", "count", "idx", "tmp", "ret", "val", "cur", "total", "limit", "off", "pending"]
EXTERNAL_CALLS = ["memcpy", "strlen", "printf", "malloc", "free", "check_bounds", "log_error"]
EXTERNAL_VALUES = ["NULL", "errno", "g_config", "MAX_SIZE"]
MEMBERS = ["length", "next", "data_ptr", "refcnt"]

PARAM_TYPES = [["int"], ["char", "*"], ["const", "char", "*"], ["size_t"], ["struct", "node", "*"], ["unsigned", "int"], ["uint8_t", "*"]]
LOCAL_TYPES = [["int"], ["unsigned", "int"], ["size_t"], ["char", "*"], ["const", "char", "*"], ["struct", "node", "*"], ["long"]]
RETURN_TYPES = [["int"], ["void"], ["static", "int"], ["unsigned", "long"], ["char", "*"]]

GAPS = [" ", " ", " ", "  ", "\t", "\n", "\n    ", " \n\t"]
COMMENTS = ["/* check */", "/* Determine the number of elements. */", "// fast path\n", "/* bounds checked by caller */", "// keep\n"]
STRINGS = ['"error: %d"', '"ok"', '"bad input"', '"%s:%d"']


@dataclass(frozen=True)
class Snippet:
    """
    A generated single-function snippet. `skeleton` is a list of token texts in which
    declared names appear as placeholders $F / $V<k>, numbered in declaration order.
    """
    skeleton: tuple[str, ...]
    variable_count: int

    def names(self, rng: random.Random, tag: str = "") -> dict[str, str]:
        fn = rng.choice(FUNCTION_WORDS) + tag
        picked = rng.sample(VARIABLE_WORDS, k=min(self.variable_count, len(VARIABLE_WORDS)))
        while len(picked) < self.variable_count:
            picked.append(f"v{len(picked)}")
        # Suffixes keep names unique and distinct from every pool word.
        return {"$F": fn, **{f"$V{k}": f"{w}{tag}_{k}" for k, w in enumerate(picked)}}

    def tokens(self, names: dict[str, str]) -> list[str]:
        return [names.get(t, t) for t in self.skeleton]

    def declared(self, names: dict[str, str]) -> tuple[str, tuple[str, ...]]:
        return names["$F"], tuple(names[f"$V{k}"] for k in range(self.variable_count))

    @staticmethod
    def join(tokens: list[str], rng: random.Random, *, comments: bool = False) -> str:
        out: list[str] = []
        for i, t in enumerate(tokens):
            if i:
                gap = rng.choice(GAPS)
                if comments and rng.random() < 0.25:
                    gap = gap + rng.choice(COMMENTS) + rng.choice(GAPS)
                out.append(gap)
            out.append(t)
        if comments:
            out.insert(0, rng.choice(COMMENTS) + "\n")
        return "".join(out)


class SnippetGenerator:
    def __init__(self, seed: int = 1234) -> None:
        self.rng = random.Random(seed)

    def _expr(self, declared: int) -> list[str]:
        rng = self.rng
        choice = rng.randrange(6)
        if declared == 0 or choice == 0:
            return [str(rng.randrange(0, 200))]
        v = f"$V{rng.randrange(declared)}"
        w = f"$V{rng.randrange(declared)}"
        if choice == 1:
            return [v, "+", str(rng.randrange(1, 9))]
        if choice == 2:
            return [rng.choice(EXTERNAL_CALLS), "(", v, ")"]
        if choice == 3:
            return [v, "*", w]
        if choice == 4:
            return ["(", v, "-", "1", ")", "/", "2"]
        return [rng.choice(EXTERNAL_VALUES)]

    def _statements(self, state: dict[str, int], depth: int, count: int) -> list[str]:
        rng = self.rng
        out: list[str] = []
        for _ in range(count):
            declared = state["vars"]
            kind = rng.randrange(11)
            if kind <= 2 or declared == 0:
                typ = rng.choice(LOCAL_TYPES)
                name = f"$V{declared}"
                state["vars"] += 1
                shape = rng.randrange(3)
                if shape == 0:
                    out += [*typ, name, "=", *self._expr(declared), ";"]
                elif shape == 1:
                    out += [*typ, name, ";"]
                else:
                    out += ["char", name, "[", str(rng.choice([16, 32, 64])), "]", ";"]
            elif kind == 3:
                a, b = f"$V{declared}", f"$V{declared + 1}"
                state["vars"] += 2
                out += ["int", a, "=", "0", ",", b, "=", *self._expr(declared), ";"]
            elif kind == 4:
                out += [f"$V{rng.randrange(declared)}", "=", *self._expr(declared), ";"]
            elif kind == 5:
                out += [rng.choice(EXTERNAL_CALLS), "(", f"$V{rng.randrange(declared)}", ",", rng.choice(STRINGS), ")", ";"]
            elif kind == 6 and depth < 2:
                v = f"$V{rng.randrange(declared)}"
                out += ["if", "(", v, ">", "0", ")", "{", *self._statements(state, depth + 1, 2), "}"]
                if rng.random() < 0.5:
                    out += ["else", "{", *self._statements(state, depth + 1, 1), "}"]
            elif kind == 7 and depth < 2:
                i = f"$V{declared}"
                state["vars"] += 1
                bound = f"$V{rng.randrange(declared)}"
                out += ["for", "(", "int", i, "=", "0", ";", i, "<", bound, ";", i, "++", ")", "{"]
                out += [*self._statements(state, depth + 1, 2), "}"]
            elif kind == 8:
                out += [f"$V{rng.randrange(declared)}", "->", rng.choice(MEMBERS), "=", *self._expr(declared), ";"]
            elif kind == 9:
                out += [f"$V{rng.randrange(declared)}", "=", "'x'", ";"]
            elif kind == 10 and depth < 2:
                v = f"$V{rng.randrange(declared)}"
                out += ["while", "(", v, "--", ">", "0", ")", "{", *self._statements(state, depth + 1, 1), "}"]
            else:
                out += [f"$V{rng.randrange(declared)}", "+=", "1", ";"]
        return out

    def snippet(self, *, marker: int | None = None) -> Snippet:
        rng = self.rng
        state = {"vars": 0}
        params: list[str] = []
        n_params = rng.randrange(4)
        for k in range(n_params):
            if k:
                params.append(",")
            params += [*rng.choice(PARAM_TYPES), f"$V{state['vars']}"]
            state["vars"] += 1
        if not params:
            params = ["void"] if rng.random() < 0.5 else []

        body = self._statements(state, 0, rng.randrange(2, 7))
        if marker is not None:
            # A unique literal keeps bodies distinct after normalization.
            v = f"$V{state['vars']}"
            state["vars"] += 1
            body += ["int", v, "=", str(marker), ";"]
        ret = ["return", "$V0" if state["vars"] else "0", ";"]

        skeleton = [*rng.choice(RETURN_TYPES), "$F", "(", *params, ")", "{", *body, *ret, "}"]
        return Snippet(skeleton=tuple(skeleton), variable_count=state["vars"])


@dataclass(frozen=True)
class PlantedCorpus:
    entries: list[FunctionEntry]
    # group index -> (member ids, category value, conflicted)
    groups: dict[int, tuple[tuple[str, str], str, bool]]


def build_planted_corpus(seed: int = 7, pairs_per_level: int = 10) -> PlantedCorpus:
    gen = SnippetGenerator(seed)
    rng = random.Random(seed + 1)
    entries: list[FunctionEntry] = []
    groups: dict[int, tuple[tuple[str, str], str, bool]] = {}
    levels = ["identical_content"] * pairs_per_level + ["comment_only"] * pairs_per_level + ["rename_only"] * pairs_per_level
    for g, category in enumerate(levels):
        snip = gen.snippet(marker=10_000 + g)
        names = snip.names(rng, tag="a")
        first = Snippet.join(snip.tokens(names), rng)
        if category == "identical_content":
            second = first
        elif category == "comment_only":
            second = Snippet.join(snip.tokens(names), rng, comments=True)
        else:
            second = Snippet.join(snip.tokens(snip.names(rng, tag="b")), rng)
        conflicted = g % 2 == 0
        a_id, b_id = str(2 * g + 1), str(2 * g + 2)
        entries.append(FunctionEntry(a_id, first, Label.VULNERABLE))
        entries.append(FunctionEntry(b_id, second, Label.NON_VULNERABLE if conflicted else Label.VULNERABLE))
        groups[g] = ((a_id, b_id), category, conflicted)
    return PlantedCorpus(entries=entries, groups=groups)


def make_cvefixes_db(path: str, rows: list[tuple[str, str | bytes, str, str]]) -> str:
    """
    Write a minimal CVEFixes-shaped database. Each row is
    (method_change_id, code, before_change, programming_language).
    """
    conn = sqlite3.connect(path)
    conn.execute("CREATE TABLE file_change (file_change_id TEXT, filename TEXT, programming_language TEXT)")
    conn.execute(
        "CREATE TABLE method_change (method_change_id TEXT, file_change_id TEXT, name TEXT, code TEXT, before_change TEXT)"
    )
    for n, (method_id, code, before_change, language) in enumerate(rows):
        file_id = f"fc{n}"
        conn.execute("INSERT INTO file_change VALUES (?, ?, ?)", (file_id, f"src/f{n}.c", language))
        conn.execute("INSERT INTO method_change VALUES (?, ?, ?, ?, ?)", (method_id, file_id, "fn", code, before_change))
    conn.commit()
    conn.close()
    return path


@pytest.fixture
def snippet_generator() -> SnippetGenerator:
    return SnippetGenerator(seed=1234)


@pytest.fixture(scope="session")
def generated_snippets() -> list[tuple[Snippet, dict[str, str]]]:
    gen = SnippetGenerator(seed=2024)
    rng = random.Random(99)
    out = []
    for _ in range(1000):
        snip = gen.snippet()
        out.append((snip, snip.names(rng)))
    return out


@pytest.fixture
def planted_corpus() -> PlantedCorpus:
    return build_planted_corpus()
