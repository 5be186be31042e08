"""Round-based human-in-the-loop labeling loop.

Bootstrap queues the newest posts of the seed users; each round trains a
scorer on the labeled set, scores the unlabeled pool, and queues the top-K
most suspicious posts for annotation. Labels are adopted only on full
annotator agreement; disagreements are excluded, skips recycle the post
back into the pool. All mutations append to an event log so a crash
restart replays to the identical state.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from .corpus import Corpus, Post, looks_english, post_to_record
from .errors import HitlError
from .model import (
    TrainConfig,
    Vocabulary,
    featurize,
    predict_proba,
    split_fingerprint,
    train_linear,
)
from .splitter import greedy_user_assignment
from .textstats import DEFAULT_LEXICON, Lexicon

logger = logging.getLogger(__name__)

SKIP = "skip"
Verdict = Union[int, str]  # 0, 1, or "skip"

# trainer(corpus, train_labeled, dev_labeled, seed) -> score_fn(post) -> float|None
Trainer = Callable[
    [Corpus, dict[str, int], dict[str, int], int],
    Callable[[Post], Optional[float]],
]


@dataclass(frozen=True)
class HitlConfig:
    """Loop parameters: N recent seed posts, top-K queue, stop budget."""

    queue_per_seed_user: int = 100          # N
    top_k: int = 2500                       # K
    stop_at: int = 8000                     # n_stop
    annotators_required: int = 2
    annotators: tuple[str, ...] = ("a1", "a2")
    pool_fraction: float = 1.0
    english_filter: bool = False
    train_ratio: float = 0.8
    seed: int = 0
    snapshot_every: int = 200

    def __post_init__(self):
        if self.queue_per_seed_user < 1:
            raise ValueError("queue_per_seed_user must be >= 1")
        if self.annotators_required < 1:
            raise ValueError("annotators_required must be >= 1")
        if len(set(self.annotators)) < self.annotators_required:
            raise ValueError("need at least annotators_required registered annotators")
        if not (0.0 < self.pool_fraction <= 1.0):
            raise ValueError("pool_fraction must be in (0, 1]")

    def to_json(self) -> dict:
        return {
            "queue_per_seed_user": self.queue_per_seed_user,
            "top_k": self.top_k,
            "stop_at": self.stop_at,
            "annotators_required": self.annotators_required,
            "annotators": list(self.annotators),
            "pool_fraction": self.pool_fraction,
            "english_filter": self.english_filter,
            "train_ratio": self.train_ratio,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Annotation:
    annotator_id: str
    post_id: str
    verdict: Verdict
    timestamp: float = 0.0


@dataclass(frozen=True)
class MergeOutcome:
    post_id: str
    status: str                    # adopted | conflict_excluded | awaiting | recycled
    label: Optional[int] = None


@dataclass
class RoundState:
    """Mutable loop state; owned by HitlService, mutated single-writer."""

    round_index: int = 0
    labeled: dict[str, tuple[int, str]] = field(default_factory=dict)
    unlabeled_pool: set[str] = field(default_factory=set)
    pending_queue: list[tuple[str, Optional[float]]] = field(default_factory=list)
    conflicts: set[str] = field(default_factory=set)
    live_annotations: dict[str, dict[str, Verdict]] = field(default_factory=dict)
    model_snapshot_id: str = ""

    def queued_ids(self) -> list[str]:
        return [pid for pid, _ in self.pending_queue]

    def queue_scores(self) -> dict[str, Optional[float]]:
        return dict(self.pending_queue)


def linear_round_trainer(
    hyper: Optional[TrainConfig] = None, lexicon: Lexicon = DEFAULT_LEXICON
) -> Trainer:
    """Default per-round trainer: TF-IDF + handcrafted logistic model."""

    def train(
        corpus: Corpus,
        train_labeled: dict[str, int],
        dev_labeled: dict[str, int],
        seed: int,
    ) -> Callable[[Post], Optional[float]]:
        train_posts = [corpus[pid] for pid in sorted(train_labeled)]
        vocab = Vocabulary.fit(train_posts)
        train_fv = [
            (featurize(p, vocab, lexicon), train_labeled[p.post_id]) for p in train_posts
        ]
        dev_fv = [
            (featurize(corpus[pid], vocab, lexicon), y)
            for pid, y in sorted(dev_labeled.items())
        ]
        config = hyper or TrainConfig(lr=0.3, epochs=150, patience=10, seed=seed)
        model = train_linear(
            train_fv, dev_fv, config, trained_on=split_fingerprint(train_labeled)
        )
        return lambda post: predict_proba(model, featurize(post, vocab, lexicon))

    return train


class HitlService:
    """Single-writer state machine over an append-only event log."""

    def __init__(self, corpus: Corpus, config: HitlConfig, state_dir: str | Path):
        self.corpus = corpus
        self.config = config
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.state = RoundState()
        self._lock = threading.RLock()
        self._event_count = 0
        self._log_path = self.state_dir / "events.jsonl"
        self._snapshot_path = self.state_dir / "snapshot.json"
        self._bootstrapped = False

    # ----- persistence ------------------------------------------------

    def _append_event(self, event: dict) -> None:
        event = dict(event)
        event.setdefault("ts", time.time())
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._event_count += 1
        if self.config.snapshot_every and self._event_count % self.config.snapshot_every == 0:
            self._write_snapshot()

    def _write_snapshot(self) -> None:
        snapshot = {
            "event_count": self._event_count,
            "round_index": self.state.round_index,
            "labeled": {k: list(v) for k, v in self.state.labeled.items()},
            "unlabeled_pool": sorted(self.state.unlabeled_pool),
            "pending_queue": [list(e) for e in self.state.pending_queue],
            "conflicts": sorted(self.state.conflicts),
            "live_annotations": self.state.live_annotations,
            "model_snapshot_id": self.state.model_snapshot_id,
            "bootstrapped": self._bootstrapped,
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(snapshot, sort_keys=True), encoding="utf-8")
        tmp.replace(self._snapshot_path)

    @classmethod
    def load(cls, corpus: Corpus, config: HitlConfig, state_dir: str | Path) -> "HitlService":
        """Rebuild state by replaying the event log (from a snapshot if present)."""
        service = cls(corpus, config, state_dir)
        skip_events = 0
        if service._snapshot_path.exists():
            snap = json.loads(service._snapshot_path.read_text(encoding="utf-8"))
            skip_events = snap["event_count"]
            service.state = RoundState(
                round_index=snap["round_index"],
                labeled={k: (v[0], v[1]) for k, v in snap["labeled"].items()},
                unlabeled_pool=set(snap["unlabeled_pool"]),
                pending_queue=[(pid, score) for pid, score in snap["pending_queue"]],
                conflicts=set(snap["conflicts"]),
                live_annotations={
                    pid: dict(votes) for pid, votes in snap["live_annotations"].items()
                },
                model_snapshot_id=snap["model_snapshot_id"],
            )
            service._bootstrapped = snap["bootstrapped"]
            service._event_count = skip_events
        if service._log_path.exists():
            with service._log_path.open(encoding="utf-8") as fh:
                for i, line in enumerate(fh):
                    if i < skip_events:
                        continue
                    service._apply_event(json.loads(line))
                    service._event_count += 1
        return service

    def _apply_event(self, event: dict) -> None:
        kind = event["type"]
        if kind == "bootstrap":
            self._apply_bootstrap(
                {pid: int(label) for pid, label in event["seed_labels"].items()},
                [(pid, None) for pid in event["queue"]],
            )
        elif kind == "annotation":
            self._apply_annotation(event["annotator_id"], event["post_id"], event["verdict"])
        elif kind == "round":
            self.state.round_index = event["round_index"]
            self.state.pending_queue = [(pid, score) for pid, score in event["queue"]]
            self.state.model_snapshot_id = event["model_snapshot_id"]
            self.state.live_annotations = {}
        else:
            raise HitlError("unknown event type %r in log" % kind)

    # ----- invariants ---------------------------------------------------

    def assert_invariants(self) -> None:
        state = self.state
        assert not (set(state.labeled) & state.unlabeled_pool)
        assert set(state.queued_ids()) <= state.unlabeled_pool
        total = len(state.labeled) + len(state.unlabeled_pool) + len(state.conflicts)
        assert total == len(self.corpus), "conservation violated: %d != %d" % (
            total, len(self.corpus),
        )

    # ----- bootstrap ------------------------------------------------------

    def bootstrap(self, seed_labels: dict[str, int], seed_users: set[str]) -> RoundState:
        """Round 0: label the seed posts, queue each seed user's newest posts."""
        with self._lock:
            if self._bootstrapped:
                raise HitlError("already bootstrapped")
            if not seed_users:
                raise HitlError("bootstrap requires at least one seed user")
            if any(label != 1 for label in seed_labels.values()):
                raise HitlError("seed posts must be labeled positive")
            for pid in seed_labels:
                if pid not in self.corpus:
                    raise HitlError("seed post %r not in corpus" % pid)

            queue_posts: set[str] = set()
            for user in sorted(seed_users):
                user_posts = [
                    p for p in self.corpus
                    if p.user_id == user and p.post_id not in seed_labels
                ]
                user_posts.sort(key=lambda p: (p.created_at, p.post_id), reverse=True)
                queue_posts.update(
                    p.post_id for p in user_posts[: self.config.queue_per_seed_user]
                )
            ordered = sorted(
                queue_posts,
                key=lambda pid: (self.corpus[pid].created_at, pid),
                reverse=True,
            )
            queue = [(pid, None) for pid in ordered]
            self._apply_bootstrap(dict(seed_labels), queue)
            self._append_event(
                {
                    "type": "bootstrap",
                    "seed_labels": dict(sorted(seed_labels.items())),
                    "queue": [pid for pid, _ in queue],
                    "config": self.config.to_json(),
                }
            )
            self.assert_invariants()
            return self.state

    def _apply_bootstrap(
        self, seed_labels: dict[str, int], queue: list[tuple[str, Optional[float]]]
    ) -> None:
        self.state.labeled = {pid: (1, "seed") for pid in seed_labels}
        self.state.unlabeled_pool = {
            pid for pid in self.corpus.posts if pid not in seed_labels
        }
        self.state.pending_queue = list(queue)
        self.state.round_index = 0
        self._bootstrapped = True

    # ----- annotation merge ----------------------------------------------

    def submit_annotation(self, annotation: Annotation) -> MergeOutcome:
        """Record one verdict and merge when the quorum is reached."""
        with self._lock:
            annotator = annotation.annotator_id
            post_id = annotation.post_id
            verdict = annotation.verdict
            if annotator not in self.config.annotators:
                raise HitlError("annotator %r is not registered" % annotator)
            if post_id not in set(self.state.queued_ids()):
                raise HitlError("post %r is not in the pending queue" % post_id)
            if verdict not in (0, 1, SKIP):
                raise HitlError("verdict must be 0, 1 or %r" % SKIP)
            votes = self.state.live_annotations.get(post_id, {})
            if annotator in votes:
                raise HitlError(
                    "annotator %r already has a live annotation for %r"
                    % (annotator, post_id)
                )
            outcome = self._apply_annotation(annotator, post_id, verdict)
            self._append_event(
                {
                    "type": "annotation",
                    "annotator_id": annotator,
                    "post_id": post_id,
                    "verdict": verdict,
                }
            )
            self.assert_invariants()
            return outcome

    def _apply_annotation(self, annotator: str, post_id: str, verdict: Verdict) -> MergeOutcome:
        state = self.state
        votes = state.live_annotations.setdefault(post_id, {})
        votes[annotator] = verdict

        if verdict == SKIP:
            # skips recycle the post: out of the queue, back to the pool
            state.pending_queue = [e for e in state.pending_queue if e[0] != post_id]
            state.live_annotations.pop(post_id, None)
            return MergeOutcome(post_id=post_id, status="recycled")

        if len(votes) < self.config.annotators_required:
            return MergeOutcome(post_id=post_id, status="awaiting")

        values = set(votes.values())
        state.pending_queue = [e for e in state.pending_queue if e[0] != post_id]
        state.live_annotations.pop(post_id, None)
        if len(values) == 1:
            label = int(values.pop())
            state.labeled[post_id] = (label, "round:%d" % state.round_index)
            state.unlabeled_pool.discard(post_id)
            return MergeOutcome(post_id=post_id, status="adopted", label=label)
        state.conflicts.add(post_id)
        state.unlabeled_pool.discard(post_id)
        return MergeOutcome(post_id=post_id, status="conflict_excluded")

    # ----- rounds -------------------------------------------------------

    def run_round(self, trainer: Trainer) -> RoundState:
        """Train on the labeled set, score the pool, queue the top-K.

        The previous queue must be fully merged. Scorer failures abort the
        round with the state unchanged.
        """
        with self._lock:
            if not self._bootstrapped:
                raise HitlError("bootstrap before running rounds")
            if self.state.pending_queue:
                raise HitlError(
                    "pending queue has %d unmerged posts" % len(self.state.pending_queue)
                )
            labels = {pid: label for pid, (label, _) in self.state.labeled.items()}
            classes = set(labels.values())
            if classes != {0, 1}:
                raise HitlError(
                    "labeled set is single-class (%s); label more seed-round posts "
                    "before training" % sorted(classes)
                )

            round_seed = self.config.seed * 100003 + self.state.round_index
            train_labeled, dev_labeled = self._train_dev_split(labels, round_seed)

            pool = sorted(self.state.unlabeled_pool)
            if self.config.pool_fraction < 1.0:
                k = max(1, math.ceil(len(pool) * self.config.pool_fraction))
                rng = random.Random("pool:%d" % round_seed)
                pool = sorted(rng.sample(pool, min(k, len(pool))))

            try:
                score_fn = trainer(self.corpus, train_labeled, dev_labeled, round_seed)
                scores: dict[str, float] = {}
                failures = 0
                for pid in pool:
                    s = score_fn(self.corpus[pid])
                    if s is None:
                        failures += 1
                        continue
                    scores[pid] = s
            except Exception as exc:
                raise HitlError("round aborted, state unchanged: %s" % exc) from exc
            if failures:
                logger.warning("%d posts excluded from round (scorer errors)", failures)
            if pool and not scores:
                raise HitlError("round aborted, state unchanged: scorer returned nothing")

            ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
            queue = [(pid, score) for pid, score in ranked[: self.config.top_k]]
            snapshot_id = hashlib.sha256(
                ("%d:%s" % (self.state.round_index + 1, split_fingerprint(labels)))
                .encode("utf-8")
            ).hexdigest()[:12]

            self.state.round_index += 1
            self.state.pending_queue = queue
            self.state.live_annotations = {}
            self.state.model_snapshot_id = snapshot_id
            self._append_event(
                {
                    "type": "round",
                    "round_index": self.state.round_index,
                    "queue": [[pid, score] for pid, score in queue],
                    "model_snapshot_id": snapshot_id,
                }
            )
            self.assert_invariants()
            return self.state

    def _train_dev_split(
        self, labels: dict[str, int], seed: int
    ) -> tuple[dict[str, int], dict[str, int]]:
        """User-disjoint train/dev split of the labeled set, per class."""
        ratios = (self.config.train_ratio, 1.0 - self.config.train_ratio)
        train: dict[str, int] = {}
        dev: dict[str, int] = {}
        by_class_user: dict[int, dict[str, list[str]]] = {}
        for pid in sorted(labels):
            user = self.corpus[pid].user_id
            by_class_user.setdefault(labels[pid], {}).setdefault(user, []).append(pid)
        for cls, per_user in sorted(by_class_user.items()):
            if len(per_user) < 2:
                # too few users to hold out a dev set for this class
                for pids in per_user.values():
                    for pid in pids:
                        train[pid] = cls
                continue
            masses = {u: len(p) for u, p in per_user.items()}
            rng = random.Random("hitl:%d:%d" % (seed, cls))
            placement = greedy_user_assignment(masses, ratios, rng)
            for user, split_idx in placement.items():
                target = train if split_idx == 0 else dev
                for pid in per_user[user]:
                    target[pid] = cls
        return train, dev

    # ----- stopping and export -------------------------------------------

    def should_stop(self) -> bool:
        return len(self.state.labeled) >= self.config.stop_at

    def export_dataset(self, out_dir: str | Path) -> dict:
        """Write adopted labels, conflicts, and the provenance manifest.

        Output is deterministic: re-exporting without new annotations
        produces byte-identical files.
        """
        with self._lock:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)

            adopted = []
            filtered_out = 0
            for pid in sorted(self.state.labeled):
                label, provenance = self.state.labeled[pid]
                post = self.corpus[pid]
                if self.config.english_filter and not looks_english(post.text):
                    filtered_out += 1
                    continue
                record = post_to_record(post)
                record["label"] = label
                record["provenance"] = provenance
                adopted.append(record)

            labeled_path = out_dir / "labeled.jsonl"
            with labeled_path.open("w", encoding="utf-8") as fh:
                for record in adopted:
                    fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

            conflicts_path = out_dir / "conflicts.jsonl"
            with conflicts_path.open("w", encoding="utf-8") as fh:
                for pid in sorted(self.state.conflicts):
                    record = post_to_record(self.corpus[pid])
                    fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

            by_round: dict[str, int] = {}
            for _, (_, provenance) in self.state.labeled.items():
                by_round[provenance] = by_round.get(provenance, 0) + 1
            manifest = {
                "adopted": len(adopted),
                "english_filtered_out": filtered_out,
                "conflicts": len(self.state.conflicts),
                "adoption_by_round": dict(sorted(by_round.items())),
                "round_index": self.state.round_index,
                "config": self.config.to_json(),
            }
            manifest_path = out_dir / "manifest.json"
            manifest_path.write_text(
                json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            return manifest
