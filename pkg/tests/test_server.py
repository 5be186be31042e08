import json
import urllib.error
import urllib.request
from datetime import datetime, timedelta, timezone

import pytest

from wltpipe.corpus import Corpus, Post
from wltpipe.hitl import HitlConfig, HitlService
from wltpipe.server import create_server, serve_in_thread

TS = datetime(2023, 6, 1, tzinfo=timezone.utc)


def build_corpus():
    posts = []
    for i in range(6):
        posts.append(
            Post(post_id=f"s{i}", user_id="seller",
                 created_at=TS - timedelta(hours=i),
                 text=f"item {i} @buyer https://shop.example/{i}")
        )
    for i in range(20):
        text = "carved ivory lot" if i % 4 == 0 else f"plain post {i}"
        posts.append(
            Post(post_id=f"p{i:02d}", user_id=f"u{i % 5}",
                 created_at=TS - timedelta(days=1, hours=i), text=text)
        )
    return Corpus(posts)


@pytest.fixture()
def server(tmp_path):
    corpus = build_corpus()
    config = HitlConfig(
        queue_per_seed_user=4, top_k=5, stop_at=100,
        annotators=("ann1", "ann2"), snapshot_every=0,
    )
    service = HitlService(corpus, config, tmp_path / "state")
    service.bootstrap({"p00": 1}, {"seller"})

    def keyword_trainer(corpus_, train, dev, seed):
        return lambda post: 0.9 if "ivory" in post.text else 0.1

    srv = create_server(service, host="127.0.0.1", port=0, trainer=keyword_trainer)
    thread = serve_in_thread(srv)
    base = "http://127.0.0.1:%d" % srv.server_address[1]
    yield base, service
    srv.shutdown()
    thread.join(timeout=5)


def get(base, path):
    with urllib.request.urlopen(base + path) as resp:
        return json.loads(resp.read())


def post(base, path, body):
    req = urllib.request.Request(
        base + path, data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"}, method="POST",
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def status_of(err_func):
    try:
        err_func()
    except urllib.error.HTTPError as exc:
        return exc.code
    return 200


class TestStateEndpoint:
    def test_state_counts(self, server):
        base, service = server
        state = get(base, "/api/state")
        assert state["round_index"] == 0
        assert state["labeled_count"] == 1
        assert state["queue_remaining"] == 4
        assert state["stop_at"] == 100
        assert state["stopped"] is False
        assert state["adoption_by_round"] == {"seed": 1}


class TestQueueEndpoint:
    def test_masked_text_and_order(self, server):
        base, service = server
        queue = get(base, "/api/queue?annotator=ann1")["items"]
        assert [i["post_id"] for i in queue] == service.state.queued_ids()
        for item in queue:
            assert "@" not in item["text"].replace("{{MENTION}}", "")
            assert "https://" not in item["text"]
            assert "score" not in item

    def test_judged_items_hidden(self, server):
        base, service = server
        first = get(base, "/api/queue?annotator=ann1")["items"][0]["post_id"]
        post(base, "/api/annotations",
             {"annotator_id": "ann1", "post_id": first, "verdict": 1})
        mine = get(base, "/api/queue?annotator=ann1")["items"]
        theirs = get(base, "/api/queue?annotator=ann2")["items"]
        assert first not in [i["post_id"] for i in mine]
        assert first in [i["post_id"] for i in theirs]

    def test_missing_annotator_param(self, server):
        base, _ = server
        assert status_of(lambda: get(base, "/api/queue")) == 400

    def test_unregistered_annotator(self, server):
        base, _ = server
        assert status_of(lambda: get(base, "/api/queue?annotator=ghost")) == 409


class TestAnnotateEndpoint:
    def test_agreement_flow(self, server):
        base, service = server
        pid = service.state.queued_ids()[0]
        r1 = post(base, "/api/annotations",
                  {"annotator_id": "ann1", "post_id": pid, "verdict": 1})
        assert r1["status"] == "awaiting"
        r2 = post(base, "/api/annotations",
                  {"annotator_id": "ann2", "post_id": pid, "verdict": 1})
        assert r2["status"] == "adopted"
        assert r2["label"] == 1
        assert get(base, "/api/state")["labeled_count"] == 2

    def test_conflict_counted(self, server):
        base, service = server
        pid = service.state.queued_ids()[0]
        post(base, "/api/annotations",
             {"annotator_id": "ann1", "post_id": pid, "verdict": 1})
        r = post(base, "/api/annotations",
                 {"annotator_id": "ann2", "post_id": pid, "verdict": 0})
        assert r["status"] == "conflict_excluded"
        assert get(base, "/api/state")["conflict_count"] == 1

    def test_duplicate_is_409(self, server):
        base, service = server
        pid = service.state.queued_ids()[0]
        post(base, "/api/annotations",
             {"annotator_id": "ann1", "post_id": pid, "verdict": 1})
        code = status_of(
            lambda: post(base, "/api/annotations",
                         {"annotator_id": "ann1", "post_id": pid, "verdict": 0})
        )
        assert code == 409

    def test_bad_verdict_is_400(self, server):
        base, service = server
        pid = service.state.queued_ids()[0]
        code = status_of(
            lambda: post(base, "/api/annotations",
                         {"annotator_id": "ann1", "post_id": pid, "verdict": 5})
        )
        assert code == 400


class TestAdvanceEndpoint:
    def drain(self, base, service):
        for pid in list(service.state.queued_ids()):
            post(base, "/api/annotations",
                 {"annotator_id": "ann1", "post_id": pid, "verdict": 0})
            post(base, "/api/annotations",
                 {"annotator_id": "ann2", "post_id": pid, "verdict": 0})

    def test_rejects_nonempty_queue(self, server):
        base, _ = server
        assert status_of(lambda: post(base, "/api/rounds/advance", {})) == 409

    def test_advance_increments_round(self, server):
        base, service = server
        self.drain(base, service)
        state = post(base, "/api/rounds/advance", {})
        assert state["round_index"] == 1
        assert state["queue_remaining"] == 5


class TestExportEndpoint:
    def test_export_returns_manifest(self, server):
        base, _ = server
        result = get(base, "/api/export")
        assert result["manifest"]["adopted"] == 1


class TestMediaRoute:
    def test_serves_image(self, tmp_path):
        import numpy as np
        from wltpipe.imageprep import Raster, encode_png

        media = tmp_path / "media"
        media.mkdir()
        (media / "img.png").write_bytes(
            encode_png(Raster(np.zeros((4, 4, 3), dtype=np.uint8)))
        )
        corpus = build_corpus()
        config = HitlConfig(annotators=("ann1", "ann2"), snapshot_every=0)
        service = HitlService(corpus, config, tmp_path / "state")
        srv = create_server(service, port=0, media_root=media)
        thread = serve_in_thread(srv)
        base = "http://127.0.0.1:%d" % srv.server_address[1]
        try:
            with urllib.request.urlopen(base + "/media/img.png") as resp:
                assert resp.headers["Content-Type"] == "image/png"
                assert resp.read()[:8] == b"\x89PNG\r\n\x1a\n"
            assert status_of(
                lambda: urllib.request.urlopen(base + "/media/../escape.txt")
            ) == 404
            assert status_of(
                lambda: urllib.request.urlopen(base + "/media/missing.png")
            ) == 404
        finally:
            srv.shutdown()
            thread.join(timeout=5)
