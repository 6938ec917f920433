from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np
from sklearn import metrics

from .errors import DatasetError
from .models import Label, id_sort_key


CLASSES = (int(Label.NON_VULNERABLE), int(Label.VULNERABLE))


@dataclass(frozen=True, slots=True)
class Averaged:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True, slots=True)
class ClassificationReport:
    accuracy: float
    macro: Averaged
    weighted: Averaged
    per_class: dict[int, Averaged]
    support: dict[int, int]
    confusion: tuple[tuple[int, int], tuple[int, int]]  # rows gold, columns predicted, order 0, 1
    zero_division: tuple[str, ...]  # e.g. "precision[1]": metric defined as 0

    @property
    def positive(self) -> Averaged:
        return self.per_class[int(Label.VULNERABLE)]

    def to_json_dict(self) -> dict[str, Any]:
        def avg(a: Averaged) -> dict[str, float]:
            return {"precision": a.precision, "recall": a.recall, "f1": a.f1}

        return {
            "accuracy": self.accuracy,
            "macro": avg(self.macro),
            "weighted": avg(self.weighted),
            "per_class": {str(c): avg(a) for c, a in self.per_class.items()},
            "support": {str(c): n for c, n in self.support.items()},
            "confusion_matrix": [list(r) for r in self.confusion],
            "zero_division": list(self.zero_division),
        }


def _as_label_array(values: Sequence[int], what: str) -> np.ndarray:
    arr = np.asarray([int(v) for v in values], dtype=np.int64)
    bad = set(np.unique(arr).tolist()) - set(CLASSES)
    if bad:
        raise DatasetError(f"{what} labels must be 0 or 1, got {sorted(bad)}")
    return arr


def classification_metrics(gold: Sequence[int], predicted: Sequence[int]) -> ClassificationReport:
    """
    Accuracy plus precision/recall/F1 per class, macro and support-weighted.

    A metric whose denominator is zero is reported as 0 and listed in `zero_division`.
    """
    if len(gold) != len(predicted):
        raise DatasetError(f"gold has {len(gold)} labels but predictions have {len(predicted)}")
    if len(gold) == 0:
        raise DatasetError("cannot score empty label vectors")
    y_true = _as_label_array(gold, "gold")
    y_pred = _as_label_array(predicted, "predicted")

    cm = metrics.confusion_matrix(y_true, y_pred, labels=list(CLASSES))
    p, r, f, s = metrics.precision_recall_fscore_support(
        y_true, y_pred, labels=list(CLASSES), average=None, zero_division=0
    )
    # Column sums are predicted counts, row sums are gold counts.
    flagged: list[str] = []
    for k, c in enumerate(CLASSES):
        if cm[:, k].sum() == 0:
            flagged.append(f"precision[{c}]")
        if cm[k, :].sum() == 0:
            flagged.append(f"recall[{c}]")
        if p[k] + r[k] == 0:
            flagged.append(f"f1[{c}]")

    def averaged(average: str) -> Averaged:
        ap, ar, af, _ = metrics.precision_recall_fscore_support(
            y_true, y_pred, labels=list(CLASSES), average=average, zero_division=0
        )
        return Averaged(precision=float(ap), recall=float(ar), f1=float(af))

    return ClassificationReport(
        accuracy=float(metrics.accuracy_score(y_true, y_pred)),
        macro=averaged("macro"),
        weighted=averaged("weighted"),
        per_class={c: Averaged(float(p[k]), float(r[k]), float(f[k])) for k, c in enumerate(CLASSES)},
        support={c: int(s[k]) for k, c in enumerate(CLASSES)},
        confusion=((int(cm[0, 0]), int(cm[0, 1])), (int(cm[1, 0]), int(cm[1, 1]))),
        zero_division=tuple(flagged),
    )


class Labels(dict[str, int]):
    """id -> label in file order. `positional` is set for a file of bare 0/1 lines."""

    positional: bool = False


def read_labels(path: str) -> Labels:
    """
    Read id -> label from a JSONL file whose objects carry `id` and `label` (other fields,
    such as a corpus record's `code`, are ignored). A file of bare 0/1 lines is read
    positionally, ids being the 0-based record index.
    """
    out = Labels()
    kinds: set[bool] = set()
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as f:
        index = 0
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: {e}") from e
            kinds.add(isinstance(obj, dict))
            if len(kinds) > 1:
                raise DatasetError(f"{path}:{lineno}: file mixes records and bare labels")
            if isinstance(obj, dict):
                if "id" not in obj or "label" not in obj:
                    raise DatasetError(f"{path}:{lineno}: record needs 'id' and 'label'")
                key, value = str(obj["id"]), obj["label"]
            else:
                key, value = str(index), obj
            if isinstance(value, bool) or value not in CLASSES:
                raise DatasetError(f"{path}:{lineno}: label must be 0 or 1, got {value!r}")
            if key in out:
                raise DatasetError(f"{path}:{lineno}: duplicate id {key!r}")
            out[key] = int(value)
            index += 1
    out.positional = kinds == {False}
    return out


def align(gold: Mapping[str, int], predicted: Mapping[str, int]) -> tuple[list[int], list[int]]:
    """
    Pair gold and predicted labels by id. Positional predictions pair with the gold
    file's record order instead, and must have the same length.
    """
    if getattr(predicted, "positional", False) and not getattr(gold, "positional", False):
        if len(predicted) != len(gold):
            raise DatasetError(f"{len(predicted)} positional predictions for {len(gold)} gold records")
        return list(gold.values()), list(predicted.values())
    if set(gold) != set(predicted):
        diff = sorted(set(gold) ^ set(predicted), key=id_sort_key)
        raise DatasetError(f"gold and predictions cover different ids (e.g. {diff[0]})")
    ids = sorted(gold, key=id_sort_key)
    return [gold[i] for i in ids], [predicted[i] for i in ids]


def _cell(v: float) -> str:
    return f"{v:.4f} ({round(v * 100):d}%)"


def format_comparison(reports: Mapping[str, ClassificationReport]) -> str:
    """One row per model and averaging: four decimals plus a rounded percent."""
    header = ["model", "average", "accuracy", "precision", "recall", "f1"]
    rows = [header]
    for name, rep in reports.items():
        for avg_name, avg in (("macro", rep.macro), ("weighted", rep.weighted)):
            rows.append([name, avg_name, _cell(rep.accuracy), _cell(avg.precision), _cell(avg.recall), _cell(avg.f1)])
    widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    for name, rep in reports.items():
        if rep.zero_division:
            lines.append(f"{name}: zero denominator, reported as 0: {', '.join(rep.zero_division)}")
    return "\n".join(lines) + "\n"
