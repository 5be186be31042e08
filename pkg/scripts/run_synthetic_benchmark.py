#!/usr/bin/env python3
"""Benchmark the word filter against the linear scorer on synthetic crawls.

Generates a deterministic synthetic corpus with planted positives, applies
the 1:10 balancing and the user-disjoint 70/20/10 split, trains under three
seeds, and prints the mean_{std} results table.

Usage:
    python3 scripts/run_synthetic_benchmark.py [--users 300] [--rate 0.02]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from wltpipe.metrics import aggregate_runs, confusion, metrics
from wltpipe.model import (
    TrainConfig,
    Vocabulary,
    calibrate_threshold,
    featurize,
    predict_proba,
    train_linear,
    word_filter_predict,
)
from wltpipe.socialgraph import SyntheticParams, synthesize_source
from wltpipe.splitter import SplitConfig, balance_classes, user_disjoint_split


def evaluate(scores_and_labels, threshold):
    y_true = [y for _, y in scores_and_labels]
    y_pred = [1 if s >= threshold else 0 for s, _ in scores_and_labels]
    return metrics(confusion(y_true, y_pred), scores=scores_and_labels)


def run_seed(corpus, labels, seed, hyper):
    config = SplitConfig(rng_seed=seed)
    balance = balance_classes(corpus, labels, config)
    assignment = user_disjoint_split(corpus, balance.post_ids, labels, config)
    split_of = assignment.assignment
    splits = {
        name: [pid for pid in sorted(split_of) if split_of[pid] == name]
        for name in ("train", "dev", "test")
    }

    wf_scores = [
        (float(word_filter_predict(corpus[pid])), labels[pid]) for pid in splits["test"]
    ]
    wf_report = evaluate(wf_scores, 0.5)

    vocab = Vocabulary.fit(corpus[pid] for pid in splits["train"])
    fv = {
        name: [(featurize(corpus[pid], vocab), labels[pid]) for pid in pids]
        for name, pids in splits.items()
    }
    model = train_linear(fv["train"], fv["dev"], hyper)
    dev_scores = [(predict_proba(model, f), y) for f, y in fv["dev"]]
    threshold = 0.5
    if len({y for _, y in dev_scores}) == 2:
        threshold = calibrate_threshold(dev_scores).threshold
    test_scores = [(predict_proba(model, f), y) for f, y in fv["test"]]
    linear_report = evaluate(test_scores, threshold)
    return wf_report, linear_report


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=300)
    parser.add_argument("--posts-per-user", type=int, default=15)
    parser.add_argument("--rate", type=float, default=0.02)
    parser.add_argument("--corpus-seed", type=int, default=42)
    parser.add_argument("--run-seeds", default="0,1,2")
    args = parser.parse_args()

    source = synthesize_source(
        args.corpus_seed,
        SyntheticParams(
            users=args.users,
            posts_per_user=args.posts_per_user,
            planted_positive_rate=args.rate,
        ),
    )
    corpus = source.all_posts()
    labels = {pid: 1 if pid in source.planted else 0 for pid in corpus.posts}
    print(
        "synthetic corpus: %d posts, %d planted positives"
        % (len(corpus), len(source.planted))
    )

    hyper = TrainConfig(lr=0.3, epochs=200, patience=15)
    wf_runs, linear_runs = [], []
    for seed in (int(s) for s in args.run_seeds.split(",")):
        wf_report, linear_report = run_seed(corpus, labels, seed, hyper)
        wf_runs.append(wf_report)
        linear_runs.append(linear_report)
        print(
            "seed %d: wordfilter mcc=%.3f | linear mcc=%.3f"
            % (seed, wf_report.mcc, linear_report.mcc)
        )

    print("\nmodel        pre          rec          macro_f1     mcc          auc")
    for name, runs in (("word filter", wf_runs), ("linear", linear_runs)):
        agg = aggregate_runs(runs)
        print(
            "%-12s %-12s %-12s %-12s %-12s %-12s"
            % (
                name,
                agg.formatted("precision_pos"), agg.formatted("recall_pos"),
                agg.formatted("macro_f1"), agg.formatted("mcc"),
                agg.formatted("auc"),
            )
        )


if __name__ == "__main__":
    main()
