import os

import pytest

from scope.corpus import ingest_database
from scope.corpus_stats import stats
from scope.dedup import deduplicate
from scope.models import FULL_CONFIG, Label
from scope.transforms import process_corpus


DB_PATH = os.environ.get("SCOPE_CVEFIXES_DB")

pytestmark = pytest.mark.skipif(not DB_PATH, reason="set SCOPE_CVEFIXES_DB to a CVEFixes database")


def test_cvefixes_counts_stay_near_published_figures() -> None:
    entries = ingest_database(DB_PATH)
    assert len(entries) == 15649
    assert sum(1 for e in entries if e.label is Label.VULNERABLE) == 6515
    assert sum(1 for e in entries if e.label is Label.NON_VULNERABLE) == 9134

    processed = process_corpus(entries, FULL_CONFIG, workers=0, progress=False)
    ok = [p for p in processed if p.status.ok]
    errors = len(processed) - len(ok)
    assert abs(errors - 3614) <= 0.15 * 3614

    result = deduplicate(ok, workers=0, progress=False)
    # Removed members, grouped members and groups are all reported; one of them should land near 905.
    counts = (len(result.removed_ids), result.grouped_entries, len(result.groups))
    assert any(abs(n - 905) <= 0.25 * 905 for n in counts), counts

    s = stats(entries, processed)
    assert s.mean_raw_tokens == pytest.approx(374, rel=0.15)
    assert s.mean_processed_tokens == pytest.approx(300, rel=0.15)
    assert s.mean_processed_tokens < s.mean_raw_tokens
