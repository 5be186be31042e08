import json
from datetime import datetime, timedelta, timezone

import pytest

from wltpipe.corpus import Corpus, Post
from wltpipe.errors import HitlError
from wltpipe.hitl import (
    Annotation,
    HitlConfig,
    HitlService,
    MergeOutcome,
    linear_round_trainer,
)

TS = datetime(2023, 6, 1, tzinfo=timezone.utc)


def build_corpus(n_posts=30, seed_user="seedu", seed_user_posts=5):
    posts = []
    for i in range(seed_user_posts):
        posts.append(
            Post(post_id=f"seed_extra{i}", user_id=seed_user,
                 created_at=TS - timedelta(hours=i), text=f"seller update {i}")
        )
    for i in range(n_posts):
        text = "carved ivory piece for sale" if i % 5 == 0 else f"ordinary post {i}"
        posts.append(
            Post(post_id=f"p{i:03d}", user_id=f"u{i % 7}",
                 created_at=TS - timedelta(days=1, hours=i), text=text)
        )
    return Corpus(posts)


def keyword_trainer(corpus, train_labeled, dev_labeled, seed):
    def score(post):
        return 0.9 if "ivory" in post.text.lower() else 0.1
    return score


def small_config(**kw):
    defaults = dict(
        queue_per_seed_user=3, top_k=4, stop_at=10,
        annotators=("ann1", "ann2"), snapshot_every=0,
    )
    defaults.update(kw)
    return HitlConfig(**defaults)


def bootstrapped_service(tmp_path, corpus=None, config=None, seed_posts=("p000",)):
    corpus = corpus or build_corpus()
    service = HitlService(corpus, config or small_config(), tmp_path / "state")
    service.bootstrap({pid: 1 for pid in seed_posts}, {"seedu"})
    return service


class TestBootstrap:
    def test_queue_is_newest_per_seed_user(self, tmp_path):
        corpus = build_corpus(seed_user_posts=10)
        service = HitlService(corpus, small_config(), tmp_path / "s")
        service.bootstrap({"p000": 1}, {"seedu"})
        # 3 newest of the seed user's 10 posts
        assert service.state.queued_ids() == ["seed_extra0", "seed_extra1", "seed_extra2"]

    def test_short_timeline_fully_queued(self, tmp_path):
        corpus = build_corpus(seed_user_posts=2)
        service = HitlService(corpus, small_config(), tmp_path / "s")
        service.bootstrap({"p000": 1}, {"seedu"})
        assert len(service.state.pending_queue) == 2

    def test_seed_posts_labeled_positive(self, tmp_path):
        service = bootstrapped_service(tmp_path, seed_posts=("p000", "p005"))
        assert service.state.labeled == {
            "p000": (1, "seed"), "p005": (1, "seed"),
        }

    def test_no_seed_users_fatal(self, tmp_path):
        service = HitlService(build_corpus(), small_config(), tmp_path / "s")
        with pytest.raises(HitlError):
            service.bootstrap({"p000": 1}, set())

    def test_negative_seed_rejected(self, tmp_path):
        service = HitlService(build_corpus(), small_config(), tmp_path / "s")
        with pytest.raises(HitlError):
            service.bootstrap({"p000": 0}, {"seedu"})

    def test_conservation_after_bootstrap(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        service.assert_invariants()


class TestAnnotationMerge:
    def queue_head(self, service):
        return service.state.queued_ids()[0]

    def test_agreement_adopted(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        pid = self.queue_head(service)
        r1 = service.submit_annotation(Annotation("ann1", pid, 1))
        assert r1 == MergeOutcome(post_id=pid, status="awaiting")
        r2 = service.submit_annotation(Annotation("ann2", pid, 1))
        assert r2 == MergeOutcome(post_id=pid, status="adopted", label=1)
        assert service.state.labeled[pid] == (1, "round:0")
        assert pid not in service.state.unlabeled_pool

    def test_disagreement_excluded(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        pid = self.queue_head(service)
        service.submit_annotation(Annotation("ann1", pid, 1))
        outcome = service.submit_annotation(Annotation("ann2", pid, 0))
        assert outcome.status == "conflict_excluded"
        assert pid in service.state.conflicts
        assert pid not in service.state.unlabeled_pool
        assert pid not in service.state.queued_ids()

    def test_skip_recycles(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        pid = self.queue_head(service)
        outcome = service.submit_annotation(Annotation("ann1", pid, "skip"))
        assert outcome.status == "recycled"
        assert pid not in service.state.queued_ids()
        assert pid in service.state.unlabeled_pool
        assert pid not in service.state.live_annotations

    def test_duplicate_live_annotation_rejected(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        pid = self.queue_head(service)
        service.submit_annotation(Annotation("ann1", pid, 1))
        with pytest.raises(HitlError):
            service.submit_annotation(Annotation("ann1", pid, 0))

    def test_unregistered_annotator_rejected(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        with pytest.raises(HitlError):
            service.submit_annotation(Annotation("ghost", self.queue_head(service), 1))

    def test_post_not_in_queue_rejected(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        with pytest.raises(HitlError):
            service.submit_annotation(Annotation("ann1", "p020", 1))

    def test_conservation_through_merges(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        queue = service.state.queued_ids()
        service.submit_annotation(Annotation("ann1", queue[0], 1))
        service.submit_annotation(Annotation("ann2", queue[0], 1))
        service.submit_annotation(Annotation("ann1", queue[1], 1))
        service.submit_annotation(Annotation("ann2", queue[1], 0))
        service.submit_annotation(Annotation("ann1", queue[2], "skip"))
        service.assert_invariants()


def drain_queue(service, verdict_for):
    """Label everything queued; verdict_for(post_id) -> (v1, v2)."""
    for pid in list(service.state.queued_ids()):
        v1, v2 = verdict_for(pid)
        service.submit_annotation(Annotation("ann1", pid, v1))
        if v1 != "skip":
            service.submit_annotation(Annotation("ann2", pid, v2))


class TestRunRound:
    def prepare(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        # adopt one negative and one positive so training has both classes
        drain_queue(service, lambda pid: (0, 0))
        return service

    def test_round_queues_top_k(self, tmp_path):
        service = self.prepare(tmp_path)
        state = service.run_round(keyword_trainer)
        assert state.round_index == 1
        assert len(state.pending_queue) == 4
        queued = state.queued_ids()
        # all keyword posts in the pool outscore the rest; ties break by id
        expected = sorted(
            pid for pid in state.unlabeled_pool
            if "ivory" in service.corpus[pid].text
        )[:4]
        assert queued == expected

    def test_tie_break_by_post_id(self, tmp_path):
        service = self.prepare(tmp_path)
        state = service.run_round(keyword_trainer)
        scores = [s for _, s in state.pending_queue]
        assert scores == sorted(scores, reverse=True)
        for (p1, s1), (p2, s2) in zip(state.pending_queue, state.pending_queue[1:]):
            if s1 == s2:
                assert p1 < p2

    def test_requires_empty_queue(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        with pytest.raises(HitlError):
            service.run_round(keyword_trainer)

    def test_single_class_labeled_fatal(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        drain_queue(service, lambda pid: (1, 1))
        with pytest.raises(HitlError, match="single-class"):
            service.run_round(keyword_trainer)

    def test_trainer_failure_leaves_state_unchanged(self, tmp_path):
        service = self.prepare(tmp_path)
        before_round = service.state.round_index
        before_queue = list(service.state.pending_queue)

        def broken_trainer(*args):
            raise RuntimeError("gpu on fire")

        with pytest.raises(HitlError, match="state unchanged"):
            service.run_round(broken_trainer)
        assert service.state.round_index == before_round
        assert service.state.pending_queue == before_queue

    def test_linear_trainer_end_to_end(self, tmp_path):
        service = self.prepare(tmp_path)
        state = service.run_round(linear_round_trainer())
        assert state.round_index == 1
        assert len(state.pending_queue) == 4


class TestShouldStop:
    def test_exact_budget(self, tmp_path):
        service = bootstrapped_service(tmp_path, config=small_config(stop_at=1))
        assert service.should_stop()  # 1 seed label >= 1

    def test_not_reached(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        assert not service.should_stop()

    def test_zero_budget_stops_immediately(self, tmp_path):
        corpus = build_corpus()
        service = HitlService(corpus, small_config(stop_at=0), tmp_path / "s")
        assert service.should_stop()


class TestExport:
    def test_adopted_and_conflicts_separated(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        queue = service.state.queued_ids()
        for pid in queue[:2]:
            service.submit_annotation(Annotation("ann1", pid, 1))
            service.submit_annotation(Annotation("ann2", pid, 1))
        service.submit_annotation(Annotation("ann1", queue[2], 1))
        service.submit_annotation(Annotation("ann2", queue[2], 0))
        manifest = service.export_dataset(tmp_path / "out")
        labeled = (tmp_path / "out" / "labeled.jsonl").read_text().splitlines()
        conflicts = (tmp_path / "out" / "conflicts.jsonl").read_text().splitlines()
        assert len(labeled) == 3  # 1 seed + 2 adopted
        assert len(conflicts) == 1
        assert manifest["adopted"] == 3
        assert manifest["conflicts"] == 1

    def test_provenance_recorded(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        manifest = service.export_dataset(tmp_path / "out")
        assert manifest["adoption_by_round"] == {"seed": 1}
        record = json.loads((tmp_path / "out" / "labeled.jsonl").read_text())
        assert record["provenance"] == "seed"

    def test_reexport_byte_identical(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        drain_queue(service, lambda pid: (1, 1))
        service.export_dataset(tmp_path / "one")
        service.export_dataset(tmp_path / "two")
        for name in ("labeled.jsonl", "conflicts.jsonl", "manifest.json"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


class TestReplay:
    def run_session(self, tmp_path):
        service = bootstrapped_service(tmp_path)
        drain_queue(service, lambda pid: (0, 0))
        service.run_round(keyword_trainer)
        queue = service.state.queued_ids()
        service.submit_annotation(Annotation("ann1", queue[0], 1))
        service.submit_annotation(Annotation("ann2", queue[0], 1))
        service.submit_annotation(Annotation("ann1", queue[1], "skip"))
        service.submit_annotation(Annotation("ann1", queue[2], 1))
        return service

    def states_equal(self, a, b):
        return (
            a.round_index == b.round_index
            and a.labeled == b.labeled
            and a.unlabeled_pool == b.unlabeled_pool
            and a.pending_queue == b.pending_queue
            and a.conflicts == b.conflicts
            and a.live_annotations == b.live_annotations
            and a.model_snapshot_id == b.model_snapshot_id
        )

    def test_replay_reaches_identical_state(self, tmp_path):
        service = self.run_session(tmp_path)
        reloaded = HitlService.load(service.corpus, service.config, service.state_dir)
        assert self.states_equal(service.state, reloaded.state)
        reloaded.assert_invariants()

    def test_replay_with_snapshot(self, tmp_path):
        corpus = build_corpus()
        config = small_config(snapshot_every=2)
        service = HitlService(corpus, config, tmp_path / "state")
        service.bootstrap({"p000": 1}, {"seedu"})
        drain_queue(service, lambda pid: (0, 0))
        assert (tmp_path / "state" / "snapshot.json").exists()
        reloaded = HitlService.load(corpus, config, tmp_path / "state")
        assert self.states_equal(service.state, reloaded.state)

    def test_replayed_service_accepts_new_annotations(self, tmp_path):
        service = self.run_session(tmp_path)
        reloaded = HitlService.load(service.corpus, service.config, service.state_dir)
        pid = reloaded.state.queued_ids()[0]
        # ann1 already voted on this post in the original session
        outcome = reloaded.submit_annotation(Annotation("ann2", pid, 1))
        assert outcome.status == "adopted"


class TestEnrichment:
    def test_queue_enriched_on_synthetic_corpus(self, tmp_path):
        from wltpipe.socialgraph import SyntheticParams, synthesize_source

        source = synthesize_source(
            7, SyntheticParams(users=60, posts_per_user=10, planted_positive_rate=0.03)
        )
        corpus = source.all_posts()
        planted = set(source.planted)
        assert planted
        seed_post = sorted(planted)[0]
        seed_user = corpus[seed_post].user_id
        config = small_config(queue_per_seed_user=5, top_k=20, stop_at=10**6)
        service = HitlService(corpus, config, tmp_path / "state")
        service.bootstrap({seed_post: 1}, {seed_user})
        drain_queue(
            service, lambda pid: ((1, 1) if pid in planted else (0, 0))
        )
        service.run_round(linear_round_trainer())
        queued = service.state.queued_ids()
        queued_planted = sum(1 for pid in queued if pid in planted)
        pool_planted = sum(1 for pid in service.state.unlabeled_pool if pid in planted)
        base_rate = pool_planted / len(service.state.unlabeled_pool)
        assert queued_planted / len(queued) > base_rate


class TestPoolFraction:
    def test_partial_pool_scored(self, tmp_path):
        corpus = build_corpus(n_posts=40)
        config = small_config(pool_fraction=0.25, top_k=100)
        service = HitlService(corpus, config, tmp_path / "state")
        service.bootstrap({"p000": 1}, {"seedu"})
        drain_queue(service, lambda pid: (0, 0))
        pool_size = len(service.state.unlabeled_pool)
        state = service.run_round(keyword_trainer)
        import math

        expected = math.ceil(pool_size * 0.25)
        assert len(state.pending_queue) == expected

    def test_partial_pool_deterministic(self, tmp_path):
        def run(where):
            corpus = build_corpus(n_posts=40)
            config = small_config(pool_fraction=0.5, top_k=100)
            service = HitlService(corpus, config, where)
            service.bootstrap({"p000": 1}, {"seedu"})
            drain_queue(service, lambda pid: (0, 0))
            return service.run_round(keyword_trainer).queued_ids()

        assert run(tmp_path / "a") == run(tmp_path / "b")


class TestEnglishFilterExport:
    def test_non_english_adoptions_filtered(self, tmp_path):
        posts = [
            Post(post_id="en", user_id="seedu", created_at=TS,
                 text="carved ivory piece"),
            Post(post_id="zh", user_id="seedu",
                 created_at=TS - timedelta(hours=1),
                 text="象牙雕刻出售中"),
            Post(post_id="other", user_id="u1", created_at=TS, text="plain"),
        ]
        corpus = Corpus(posts)
        config = small_config(english_filter=True, queue_per_seed_user=5)
        service = HitlService(corpus, config, tmp_path / "state")
        service.bootstrap({"en": 1}, {"seedu"})
        service.submit_annotation(Annotation("ann1", "zh", 1))
        service.submit_annotation(Annotation("ann2", "zh", 1))
        manifest = service.export_dataset(tmp_path / "out")
        labeled = (tmp_path / "out" / "labeled.jsonl").read_text().splitlines()
        assert len(labeled) == 1  # only the English seed survives
        assert manifest["english_filtered_out"] == 1
        assert manifest["adoption_by_round"] == {"round:0": 1, "seed": 1}
