#!/usr/bin/env python3
"""Simulate the full human-in-the-loop labeling run with oracle annotators.

Two simulated annotators label exactly per the synthetic ground truth, so
the run shows how quickly top-K selection concentrates planted positives
into the queue and how cumulative recall grows round over round.

Usage:
    python3 scripts/simulate_hitl.py [--rounds 5] [--top-k 50]
"""

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from wltpipe.hitl import Annotation, HitlConfig, HitlService, linear_round_trainer
from wltpipe.socialgraph import SyntheticParams, synthesize_source


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=250)
    parser.add_argument("--posts-per-user", type=int, default=20)
    parser.add_argument("--rate", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--rounds", type=int, default=5)
    parser.add_argument("--top-k", type=int, default=50)
    parser.add_argument("--state-dir", default=None)
    args = parser.parse_args()

    source = synthesize_source(
        args.seed,
        SyntheticParams(
            users=args.users,
            posts_per_user=args.posts_per_user,
            planted_positive_rate=args.rate,
        ),
    )
    corpus = source.all_posts()
    planted = set(source.planted)
    print("corpus: %d posts, %d planted (%.2f%%)" % (
        len(corpus), len(planted), 100 * len(planted) / len(corpus)))

    seed_post = sorted(planted)[0]
    seed_user = corpus[seed_post].user_id
    state_dir = args.state_dir or tempfile.mkdtemp(prefix="hitl_sim_")
    config = HitlConfig(
        queue_per_seed_user=20, top_k=args.top_k, stop_at=10**9,
        annotators=("sim1", "sim2"), snapshot_every=0,
    )
    service = HitlService(corpus, config, state_dir)
    service.bootstrap({seed_post: 1}, {seed_user})
    base_rate = len(planted - {seed_post}) / len(service.state.unlabeled_pool)

    def drain():
        adopted = 0
        for pid in list(service.state.queued_ids()):
            verdict = 1 if pid in planted else 0
            service.submit_annotation(Annotation("sim1", pid, verdict))
            outcome = service.submit_annotation(Annotation("sim2", pid, verdict))
            adopted += outcome.status == "adopted"
        return adopted

    drain()
    trainer = linear_round_trainer()
    print("round | queue planted | cumulative recall | labeled")
    for _ in range(args.rounds):
        service.run_round(trainer)
        queued = service.state.queued_ids()
        queued_planted = sum(1 for pid in queued if pid in planted)
        drain()
        found = sum(
            1 for pid in planted
            if service.state.labeled.get(pid, (None,))[0] == 1
        )
        print(
            "%5d | %4d / %4d   | %8.1f%%         | %d"
            % (
                service.state.round_index, queued_planted, len(queued),
                100 * found / len(planted), len(service.state.labeled),
            )
        )
    print("pool base rate was %.2f%%; state dir: %s" % (100 * base_rate, state_dir))


if __name__ == "__main__":
    main()
