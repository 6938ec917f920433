import pytest

from scope.dataset_split import balance, split, split_sizes
from scope.errors import DatasetError
from scope.models import FunctionEntry, Label


def _entries(n_vuln: int, n_safe: int) -> list[FunctionEntry]:
    out = [FunctionEntry(str(i), f"int f{i}() {{ return {i}; }}", Label.VULNERABLE) for i in range(n_vuln)]
    out += [
        FunctionEntry(str(n_vuln + i), f"int g{i}() {{ return {i}; }}", Label.NON_VULNERABLE) for i in range(n_safe)
    ]
    return out


def _count(items, label: Label) -> int:
    return sum(1 for e in items if e.label is label)


def test_split_sizes_round_to_total() -> None:
    assert split_sizes(4612, (0.8, 0.1, 0.1)) == (3690, 461, 461)
    assert split_sizes(50, (0.8, 0.1, 0.1)) == (40, 5, 5)
    assert split_sizes(15, (0.8, 0.1, 0.1)) == (12, 2, 1)
    assert split_sizes(0, (0.8, 0.1, 0.1)) == (0, 0, 0)
    for n in range(1, 200):
        assert sum(split_sizes(n, (0.7, 0.2, 0.1))) == n


def test_split_sizes_rejects_bad_ratios() -> None:
    with pytest.raises(DatasetError):
        split_sizes(10, (0.5, 0.5))
    with pytest.raises(DatasetError):
        split_sizes(10, (0.8, 0.2, 0.0))
    with pytest.raises(DatasetError):
        split_sizes(10, (0.8, 0.1, 0.2))


def test_balance_downsamples_majority() -> None:
    entries = _entries(30, 80)
    kept = balance(entries, seed=3)
    assert _count(kept, Label.VULNERABLE) == 30
    assert _count(kept, Label.NON_VULNERABLE) == 30
    # Minority class is kept whole.
    assert {e.entry_id for e in kept if e.label is Label.VULNERABLE} == {str(i) for i in range(30)}
    assert [e.entry_id for e in kept] == sorted((e.entry_id for e in kept), key=int)


def test_balance_is_seeded() -> None:
    entries = _entries(10, 40)
    assert balance(entries, seed=1) == balance(list(reversed(entries)), seed=1)
    assert balance(entries, seed=1) != balance(entries, seed=2)


def test_balance_needs_both_classes() -> None:
    with pytest.raises(DatasetError, match="non_vulnerable"):
        balance(_entries(5, 0))


def test_split_is_stratified_and_disjoint() -> None:
    entries = balance(_entries(60, 90), seed=0)
    bundle = split(entries, seed=11)
    assert bundle.sizes() == {"train": 96, "validation": 12, "test": 12}
    for items in bundle.splits().values():
        assert _count(items, Label.VULNERABLE) == _count(items, Label.NON_VULNERABLE)
        assert [e.entry_id for e in items] == sorted((e.entry_id for e in items), key=int)
    ids = [e.entry_id for items in bundle.splits().values() for e in items]
    assert len(ids) == len(set(ids)) == len(entries)


def test_split_reproducible_under_input_order() -> None:
    entries = _entries(25, 25)
    a = split(entries, seed=4)
    b = split(list(reversed(entries)), seed=4)
    assert a == b
    assert split(entries, seed=5).splits() != a.splits()


def test_split_rejects_tiny_classes() -> None:
    with pytest.raises(DatasetError, match="too few"):
        split(_entries(5, 5))
    with pytest.raises(DatasetError):
        split([])


def test_bundle_map_keeps_partition() -> None:
    bundle = split(_entries(20, 20), seed=0)
    ids = bundle.map(lambda e: e.entry_id)
    assert ids.sizes() == bundle.sizes()
    assert ids.test == tuple(e.entry_id for e in bundle.test)
    assert (ids.seed, ids.ratios) == (0, (0.8, 0.1, 0.1))
