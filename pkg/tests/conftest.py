import json
from datetime import datetime, timedelta, timezone

import pytest

BASE_TS = datetime(2023, 6, 1, tzinfo=timezone.utc)


def record(post_id, user_id, text, hours_ago=0, images=(), ocr=None, desc=None):
    return {
        "post_id": post_id,
        "user_id": user_id,
        "created_at": (BASE_TS - timedelta(hours=hours_ago)).isoformat().replace("+00:00", "Z"),
        "text": text,
        "image_refs": list(images),
        "ocr_text": ocr,
        "user_description": desc,
        "is_repost": False,
    }


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


@pytest.fixture()
def fixture_corpus(tmp_path):
    """Small labeled corpus: positives all contain 'ivory', spread over users."""
    records = []
    labels = {}
    for i in range(6):
        pid = f"pos{i}"
        records.append(
            record(pid, f"seller{i % 3}", f"antique carved ivory piece {i} for sale", hours_ago=i)
        )
        labels[pid] = 1
    for i in range(40):
        pid = f"neg{i:02d}"
        text = "ivory colored curtains" if i == 0 else f"everyday post number {i}"
        records.append(record(pid, f"user{i % 8}", text, hours_ago=24 + i))
        labels[pid] = 0
    corpus_path = tmp_path / "corpus.jsonl"
    write_jsonl(corpus_path, records)
    labels_path = tmp_path / "labels.csv"
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write("post_id,label\n")
        for pid in sorted(labels):
            fh.write(f"{pid},{labels[pid]}\n")
    return corpus_path, labels_path
