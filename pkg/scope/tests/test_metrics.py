import pytest

from scope.errors import DatasetError
from scope.metrics import align, classification_metrics, format_comparison, read_labels


GOLD = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
PRED = [1, 1, 1, 0, 1, 0, 0, 0, 0, 0]


def test_binary_metrics() -> None:
    rep = classification_metrics(GOLD, PRED)
    assert rep.accuracy == pytest.approx(0.8)
    assert rep.confusion == ((5, 1), (1, 3))
    assert rep.positive.precision == pytest.approx(0.75)
    assert rep.positive.recall == pytest.approx(0.75)
    assert rep.positive.f1 == pytest.approx(0.75)
    assert rep.per_class[0].precision == pytest.approx(5 / 6)
    assert rep.macro.f1 == pytest.approx((0.75 + 5 / 6) / 2)
    assert rep.weighted.f1 == pytest.approx(0.8)
    assert rep.support == {0: 6, 1: 4}
    assert rep.zero_division == ()


def test_zero_denominators_are_flagged() -> None:
    rep = classification_metrics([0, 0, 1, 1], [1, 1, 1, 1])
    assert rep.accuracy == pytest.approx(0.5)
    assert rep.per_class[0].precision == 0.0
    assert rep.positive.recall == pytest.approx(1.0)
    assert rep.zero_division == ("precision[0]", "f1[0]")
    assert rep.to_json_dict()["zero_division"] == ["precision[0]", "f1[0]"]


def test_invalid_label_vectors() -> None:
    with pytest.raises(DatasetError, match="gold has 2"):
        classification_metrics([0, 1], [0])
    with pytest.raises(DatasetError):
        classification_metrics([], [])
    with pytest.raises(DatasetError, match="0 or 1"):
        classification_metrics([0, 2], [0, 1])


def test_read_labels_and_align(tmp_path) -> None:
    gold = tmp_path / "test.jsonl"
    gold.write_text('{"id": "10", "code": "x", "label": 1}\n{"id": "2", "code": "y", "label": 0}\n')
    pred = tmp_path / "pred.jsonl"
    pred.write_text('{"id": "2", "label": 1}\n\n{"id": "10", "label": 1}\n')
    g, p = align(read_labels(str(gold)), read_labels(str(pred)))
    assert (g, p) == ([0, 1], [1, 1])

    bare = tmp_path / "bare.txt"
    bare.write_text("1\n0\n1\n")
    assert read_labels(str(bare)) == {"0": 1, "1": 0, "2": 1}

    with pytest.raises(DatasetError, match="different ids"):
        align({"1": 0}, {"2": 0})


def test_bare_predictions_follow_gold_record_order(tmp_path) -> None:
    gold = tmp_path / "test.jsonl"
    gold.write_text("".join(f'{{"id": "{100 + k}", "code": "x", "label": {k % 2}}}\n' for k in (3, 0, 2, 1)))
    bare = tmp_path / "bare.txt"
    bare.write_text("1\n0\n0\n0\n")
    labels = read_labels(str(bare))
    assert labels.positional
    assert not read_labels(str(gold)).positional

    g, p = align(read_labels(str(gold)), labels)
    assert (g, p) == ([1, 0, 0, 1], [1, 0, 0, 0])

    bare.write_text("1\n0\n")
    with pytest.raises(DatasetError, match="2 positional predictions for 4 gold records"):
        align(read_labels(str(gold)), read_labels(str(bare)))

    bare.write_text('1\n{"id": "100", "label": 0}\n')
    with pytest.raises(DatasetError, match=":2: file mixes"):
        read_labels(str(bare))


def test_read_labels_rejects_bad_lines(tmp_path) -> None:
    path = tmp_path / "p.jsonl"
    path.write_text('{"id": "1", "label": 3}\n')
    with pytest.raises(DatasetError, match=":1: label must be 0 or 1"):
        read_labels(str(path))
    path.write_text('{"id": "1", "label": 0}\n{"id": "1", "label": 1}\n')
    with pytest.raises(DatasetError, match="duplicate id"):
        read_labels(str(path))
    path.write_text('{"label": 0}\n')
    with pytest.raises(DatasetError, match="needs 'id'"):
        read_labels(str(path))


def test_format_comparison() -> None:
    text = format_comparison(
        {
            "raw": classification_metrics(GOLD, PRED),
            "scoped": classification_metrics([0, 0, 1, 1], [1, 1, 1, 1]),
        }
    )
    lines = text.splitlines()
    assert lines[0].split() == ["model", "average", "accuracy", "precision", "recall", "f1"]
    assert lines[1].startswith("raw")
    assert "0.8000 (80%)" in lines[1]
    assert lines[4].startswith("scoped") and "weighted" in lines[4]
    assert lines[-1] == "scoped: zero denominator, reported as 0: precision[0], f1[0]"
