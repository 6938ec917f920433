from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Generic, Protocol, Sequence, TypeVar

import numpy as np

from .errors import DatasetError
from .models import Label, Provenance, id_sort_key


logger = logging.getLogger(__name__)

DEFAULT_RATIOS: tuple[float, float, float] = (0.8, 0.1, 0.1)
SPLIT_NAMES: tuple[str, str, str] = ("train", "validation", "test")


class Labeled(Protocol):
    @property
    def entry_id(self) -> str: ...

    @property
    def label(self) -> Label | None: ...


T = TypeVar("T", bound=Labeled)
U = TypeVar("U")


def _rng(seed: int) -> np.random.Generator:
    # PCG64 seeded from one integer; bit-identical across platforms.
    return np.random.default_rng(int(seed))


def _by_class(entries: Sequence[T]) -> dict[Label, list[T]]:
    out: dict[Label, list[T]] = {Label.NON_VULNERABLE: [], Label.VULNERABLE: []}
    for e in entries:
        if e.label is None:
            raise DatasetError(f"{e.entry_id}: entry has no label")
        out[Label(e.label)].append(e)
    for items in out.values():
        items.sort(key=lambda e: id_sort_key(e.entry_id))
    return out


def balance(entries: Sequence[T], seed: int = 0) -> list[T]:
    """
    Down-sample the majority class uniformly at random to the minority count.

    The minority class is kept whole. Output is ordered by id.
    """
    classes = _by_class(entries)
    empty = [lbl.name.lower() for lbl, items in classes.items() if not items]
    if empty:
        raise DatasetError(f"cannot balance: class {empty[0]} is empty")

    target = min(len(items) for items in classes.values())
    rng = _rng(seed)
    kept: list[T] = []
    # Both classes draw from one generator, always in this order.
    for lbl in (Label.NON_VULNERABLE, Label.VULNERABLE):
        items = classes[lbl]
        if len(items) > target:
            idx = np.sort(rng.choice(len(items), size=target, replace=False))
            items = [items[int(i)] for i in idx]
        kept.extend(items)
    kept.sort(key=lambda e: id_sort_key(e.entry_id))
    logger.info("balanced %d entries down to %d (%d per class)", len(entries), len(kept), target)
    return kept


def _exact_ratios(ratios: Sequence[float]) -> tuple[Fraction, ...]:
    if len(ratios) != 3:
        raise DatasetError(f"expected three split ratios, got {len(ratios)}")
    # 0.1 becomes exactly 1/10, so 0.8 + 0.1 + 0.1 sums to 1.
    fracs = tuple(Fraction(r).limit_denominator(1_000_000) for r in ratios)
    if any(f <= 0 for f in fracs):
        raise DatasetError(f"split ratios must be positive: {tuple(ratios)}")
    if sum(fracs) != 1:
        raise DatasetError(f"split ratios must sum to 1: {tuple(ratios)}")
    return fracs


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """
    Round n * ratio to integers that sum to n: floor everything, then hand the leftover
    units to the largest fractional parts, earlier splits first on ties.
    """
    fracs = _exact_ratios(ratios)
    quotas = [n * f for f in fracs]
    sizes = [int(q) for q in quotas]  # floor, quotas are non-negative
    leftover = n - sum(sizes)
    order = sorted(range(3), key=lambda k: (-(quotas[k] - sizes[k]), k))
    for k in order[:leftover]:
        sizes[k] += 1
    return sizes[0], sizes[1], sizes[2]


@dataclass(frozen=True, slots=True)
class DatasetBundle(Generic[U]):
    train: tuple[U, ...]
    validation: tuple[U, ...]
    test: tuple[U, ...]
    seed: int
    ratios: tuple[float, float, float]
    provenance: Provenance | None = None

    def splits(self) -> dict[str, tuple[U, ...]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def sizes(self) -> dict[str, int]:
        return {name: len(items) for name, items in self.splits().items()}

    def map(self, fn: Callable[[U], Any]) -> "DatasetBundle[Any]":
        # Same partition, different representation of each item.
        return DatasetBundle(
            train=tuple(fn(x) for x in self.train),
            validation=tuple(fn(x) for x in self.validation),
            test=tuple(fn(x) for x in self.test),
            seed=self.seed,
            ratios=self.ratios,
            provenance=self.provenance,
        )

    def with_provenance(self, provenance: Provenance) -> "DatasetBundle[U]":
        return DatasetBundle(
            train=self.train,
            validation=self.validation,
            test=self.test,
            seed=self.seed,
            ratios=self.ratios,
            provenance=provenance,
        )


def split(
    entries: Sequence[T],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> DatasetBundle[T]:
    """
    Stratified split: each class is shuffled with the seeded generator and sliced
    contiguously into train/validation/test. Items within a split are ordered by id.
    """
    _exact_ratios(ratios)
    classes = _by_class(entries)
    rng = _rng(seed)
    parts: list[list[T]] = [[], [], []]
    for lbl in (Label.NON_VULNERABLE, Label.VULNERABLE):
        items = classes[lbl]
        if not items:
            continue
        sizes = split_sizes(len(items), ratios)
        if min(sizes) < 1:
            raise DatasetError(
                f"class {lbl.name.lower()} has {len(items)} entries, too few to occupy every split"
            )
        # items are id-sorted, so the permutation alone decides membership.
        perm = rng.permutation(len(items))
        shuffled = [items[int(i)] for i in perm]
        start = 0
        for k, size in enumerate(sizes):
            parts[k].extend(shuffled[start:start + size])
            start += size

    if not any(parts):
        raise DatasetError("cannot split an empty corpus")
    for p in parts:
        p.sort(key=lambda e: id_sort_key(e.entry_id))

    bundle: DatasetBundle[T] = DatasetBundle(
        train=tuple(parts[0]),
        validation=tuple(parts[1]),
        test=tuple(parts[2]),
        seed=int(seed),
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
    )
    logger.info("split sizes: %s", bundle.sizes())
    return bundle
