import dataclasses

import pytest

from scope.corpus_stats import format_stats, stats
from scope.errors import DatasetError
from scope.models import FULL_CONFIG, FunctionEntry, Label, OutputMode
from scope.transforms import process_corpus


def _corpus() -> list[FunctionEntry]:
    return [
        FunctionEntry("1", "int pos() { return ptr - start; }", Label.VULNERABLE),
        FunctionEntry("2", "int f(int a) { /* twice */ return a * 2; }", Label.NON_VULNERABLE),
        FunctionEntry("3", "#include <a.h>\nint g() { return 0; }", Label.VULNERABLE),
    ]


def test_stats_over_ok_entries() -> None:
    before = _corpus()
    after = process_corpus(before, FULL_CONFIG, progress=False)
    s = stats(before, after, token_budgets=(13, 8))

    assert (s.entry_count, s.error_count, s.ok_count) == (3, 1, 2)
    # pos: 11 -> 11; f: 14 (comment included) -> 13.
    assert s.mean_raw_tokens == pytest.approx(12.5)
    assert s.mean_processed_tokens == pytest.approx(12.0)
    assert s.median_raw_tokens == pytest.approx(12.5)
    assert s.token_reduction == pytest.approx(0.04)
    assert s.label_counts == {"non_vulnerable": 1, "vulnerable": 1}
    assert s.error_reasons == {"preprocessor_directive": 1}
    assert [b.budget for b in s.budgets] == [8, 13]
    assert s.budgets[1].raw == pytest.approx(0.5)
    assert s.budgets[1].processed == pytest.approx(1.0)
    assert s.budgets[0].processed == 0.0


def test_vocabulary_shrinks_with_renaming() -> None:
    before = _corpus()[:2]
    after = process_corpus(before, FULL_CONFIG, progress=False)
    s = stats(before, after)
    raw = {"int", "pos", "(", ")", "{", "return", "ptr", "-", "start", ";", "}", "f", "a", "*", "2", "/* twice */"}
    processed = {"int", "FUNC_0", "(", ")", "{", "return", "ptr", "-", "start", ";", "}", "VAR_0", "*", "2"}
    assert s.vocabulary_size_raw == len(raw) - 1  # comments are not tokens of the vocabulary
    assert s.vocabulary_size_processed == len(processed)

    tokens_mode = process_corpus(before, dataclasses.replace(FULL_CONFIG, output_mode=OutputMode.TOKENS), progress=False)
    assert stats(before, tokens_mode).vocabulary_size_processed == len(processed)


def test_all_error_corpus() -> None:
    before = [FunctionEntry("1", "#define X\n", Label.VULNERABLE)]
    s = stats(before, process_corpus(before, FULL_CONFIG, progress=False))
    assert s.ok_count == 0
    assert s.mean_raw_tokens == 0.0
    assert s.token_reduction == 0.0
    assert s.budgets == []


def test_unpaired_or_empty_inputs() -> None:
    before = _corpus()
    after = process_corpus(before, FULL_CONFIG, progress=False)
    with pytest.raises(DatasetError):
        stats(before, [])
    with pytest.raises(DatasetError, match="not paired"):
        stats(before[:2], after)
    with pytest.raises(DatasetError, match="duplicate"):
        stats(before, after + after[:1])


def test_format_stats_mentions_reduction() -> None:
    before = _corpus()
    text = format_stats(stats(before, process_corpus(before, FULL_CONFIG, progress=False)))
    assert "3 (2 ok, 1 errors)" in text
    assert "12.5 -> 12.0 (4.0% fewer)" in text
    assert "error preprocessor_directive: 1" in text
    assert "within   512 tokens: 100.0% -> 100.0%" in text
