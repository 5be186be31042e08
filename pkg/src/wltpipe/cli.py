"""Operator command line: ingest, crawl, analyze, split, train, eval, serve,
export, report.

Options resolve flag > config file > default; the config file is flat
key=value lines keyed by the long flag names. Every command writes its
artifacts under --out together with a manifest carrying the seed and a
fingerprint of the resolved options. Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus as corpus_mod
from . import imageprep, metrics as metrics_mod, model as model_mod
from . import socialgraph, splitter, textstats
from .errors import WltpipeError
from .hitl import HitlConfig, HitlService, linear_round_trainer

logger = logging.getLogger(__name__)


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; '#' comments and blank lines ignored."""
    out: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise WltpipeError("config line %d is not key=value: %r" % (line_no, line))
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge the config file under explicit flags and echo the result."""
    options = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    if getattr(args, "config", None):
        config = load_config_file(args.config)
        for key, raw in config.items():
            attr = key.replace("-", "_")
            if attr not in options:
                continue
            if options[attr] is None or options[attr] == _DEFAULTS.get(attr):
                current = options[attr]
                if isinstance(current, bool) or _DEFAULTS.get(attr) is False:
                    options[attr] = raw.lower() in ("1", "true", "yes")
                elif isinstance(current, int) and not isinstance(current, bool):
                    options[attr] = int(raw)
                elif isinstance(current, float):
                    options[attr] = float(raw)
                else:
                    options[attr] = raw
    return options


def config_fingerprint(options: dict) -> str:
    canon = json.dumps(options, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_manifest(out_dir: Path, command: str, options: dict) -> None:
    manifest = {
        "command": command,
        "options": {k: v for k, v in sorted(options.items())},
        "seed": options.get("seed"),
        "config_fingerprint": config_fingerprint(options),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
        encoding="utf-8",
    )


def load_labels(path: str | Path) -> dict[str, int]:
    """CSV of post_id,label (header required)."""
    labels: dict[str, int] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        return labels
    header = rows[0]
    if header[:2] != ["post_id", "label"]:
        raise WltpipeError("labels file must start with header post_id,label")
    for row in rows[1:]:
        value = int(row[1])
        if value not in (0, 1):
            raise WltpipeError("label for %s must be 0 or 1" % row[0])
        labels[row[0]] = value
    return labels


def write_labels(labels: dict[str, int], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["post_id", "label"])
        for pid in sorted(labels):
            writer.writerow([pid, labels[pid]])


def load_assignment(path: str | Path) -> dict[str, str]:
    assignment: dict[str, str] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        assignment[row[0]] = row[1]
    return assignment


def _out_dir(options: dict) -> Path:
    out = Path(options["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----- subcommands --------------------------------------------------------


def cmd_ingest(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    result = corpus_mod.ingest(options["corpus"])
    corpus_mod.write_corpus(result.corpus, out / "corpus.jsonl")
    report = {
        "posts": len(result.corpus),
        "users": len(result.corpus.users),
        "total_lines": result.total_lines,
        "skipped_count": result.skipped_count,
        "skipped": [{"line": n, "reason": r} for n, r in result.skipped],
    }
    (out / "ingest_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(out, "ingest", options)
    print("ingested %d posts (%d skipped)" % (len(result.corpus), result.skipped_count))
    return 0


def cmd_crawl(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    seeds = {s for s in options["seeds"].split(",") if s}
    if options["source"] == "synthetic":
        params = socialgraph.SyntheticParams(
            users=options["synthetic_users"],
            posts_per_user=options["synthetic_posts_per_user"],
            planted_positive_rate=options["synthetic_positive_rate"],
        )
        source = socialgraph.synthesize_source(options["seed"], params)
    else:
        if not options.get("graph") or not options.get("source_corpus"):
            raise WltpipeError("file source requires --graph and --source-corpus")
        source = socialgraph.FileSource(options["graph"], options["source_corpus"])

    result = socialgraph.expand_hops(source, seeds, options["hops"], options["budget"])
    posts = socialgraph.collect_timelines(source, result.all_users(), cap=options["cap"])

    corpus_mod.write_corpus(posts, out / "corpus.jsonl")
    with (out / "graph.txt").open("w", encoding="utf-8") as fh:
        for a, b in sorted(result.graph.follow_edges):
            fh.write("%s follows %s\n" % (a, b))
    hops_json = {str(h): sorted(users) for h, users in result.users_by_hop.items()}
    (out / "users_by_hop.json").write_text(
        json.dumps(hops_json, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if isinstance(source, socialgraph.SyntheticSource):
        planted = sorted(pid for pid in source.planted if pid in posts)
        (out / "ground_truth.json").write_text(
            json.dumps({"planted": planted}, indent=2) + "\n", encoding="utf-8"
        )
    write_manifest(out, "crawl", options)
    print(
        "crawled %d users over %d hops; %d posts"
        % (len(result.all_users()), options["hops"], len(posts))
    )
    return 0


def cmd_analyze(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    corpus = corpus_mod.ingest(options["corpus"]).corpus
    labels = load_labels(options["labels"]) if options.get("labels") else {}
    stopwords = (
        textstats.load_stopwords(options["stopwords"])
        if options.get("stopwords") else textstats.DEFAULT_STOPWORDS
    )
    lexicon = (
        textstats.load_lexicon(options["lexicon"])
        if options.get("lexicon") else textstats.DEFAULT_LEXICON
    )
    textstats.class_report(corpus, labels, stopwords, lexicon, out_dir=out)

    dist = imageprep.image_count_distribution(corpus, labels)
    with (out / "image_counts.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "bin", "count", "fraction"])
        for cls in sorted(dist.counts):
            fractions = dist.fractions[cls]
            for bin_value, count in dist.counts[cls].items():
                writer.writerow([
                    textstats.CLASS_NAMES[cls], bin_value, count,
                    "%.6f" % fractions[bin_value],
                ])

    freqs = textstats.word_frequencies(corpus, labels, stopwords)
    for cls, table in freqs.items():
        name = out / ("word_freq_%s.csv" % textstats.CLASS_NAMES[cls])
        with name.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["token", "count"])
            writer.writerows(table)

    write_manifest(out, "analyze", options)
    print("report bundle written to %s" % out)
    return 0


def cmd_split(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    corpus = corpus_mod.ingest(options["corpus"]).corpus
    labels = load_labels(options["labels"])
    config = splitter.SplitConfig(
        neg_per_pos=options["neg_per_pos"],
        priority_keyword=options["keyword"],
        rng_seed=options["seed"],
    )
    balance = splitter.balance_classes(corpus, labels, config)
    kept_labels = {pid: labels[pid] for pid in balance.post_ids}
    assignment = splitter.user_disjoint_split(corpus, balance.post_ids, labels, config)
    violations = splitter.verify_split(assignment, corpus, labels)
    if violations:
        raise WltpipeError("split verification failed: %s" % "; ".join(violations))

    splitter.write_assignment_csv(assignment, out / "assignment.csv")
    write_labels(kept_labels, out / "labels_balanced.csv")
    audit = {
        "seed": assignment.audit.seed,
        "ratios": list(assignment.audit.ratios),
        "split_mass": {str(k): v for k, v in assignment.audit.split_mass.items()},
        "balance": {
            "positives": balance.n_positive,
            "keyword_negatives": balance.n_keyword_negative,
            "sampled_negatives": balance.n_sampled_negative,
            "warnings": balance.warnings,
        },
    }
    (out / "split_audit.json").write_text(
        json.dumps(audit, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(out, "split", options)
    print(
        "balanced %d posts (%d pos, %d neg); split written"
        % (len(balance.post_ids), balance.n_positive,
           len(balance.post_ids) - balance.n_positive)
    )
    return 0


def _featurized(corpus, labels, assignment, split_name, vocab, lexicon):
    pairs = []
    for pid in sorted(assignment):
        if assignment[pid] != split_name or pid not in labels:
            continue
        pairs.append((model_mod.featurize(corpus[pid], vocab, lexicon), labels[pid]))
    return pairs


def cmd_train(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    corpus = corpus_mod.ingest(options["corpus"]).corpus
    labels = load_labels(options["labels"])
    kind = options["model"]
    payload: dict = {"kind": kind, "input": options["input"]}

    if kind == "wordfilter":
        keywords = sorted({k for k in options["keywords"].lower().split(",") if k})
        payload["keywords"] = keywords
        payload["threshold"] = 0.5
    elif kind == "linear":
        if not options.get("assignment"):
            raise WltpipeError("linear training requires --assignment")
        assignment = load_assignment(options["assignment"])
        lexicon = (
            textstats.load_lexicon(options["lexicon"])
            if options.get("lexicon") else textstats.DEFAULT_LEXICON
        )
        train_posts = [
            corpus[pid] for pid in sorted(assignment)
            if assignment[pid] == "train" and pid in labels
        ]
        vocab = model_mod.Vocabulary.fit(train_posts)
        train_fv = _featurized(corpus, labels, assignment, "train", vocab, lexicon)
        dev_fv = _featurized(corpus, labels, assignment, "dev", vocab, lexicon)
        hyper = model_mod.TrainConfig(
            lr=options["lr"], l2=options["l2"], epochs=options["epochs"],
            patience=options["patience"], seed=options["seed"],
        )
        trained = model_mod.train_linear(
            train_fv, dev_fv, hyper,
            trained_on=model_mod.split_fingerprint(
                pid for pid in assignment if assignment[pid] == "train"
            ),
        )
        dev_scores = [
            (model_mod.predict_proba(trained, fv), y) for fv, y in dev_fv
        ]
        if dev_scores and len({y for _, y in dev_scores}) == 2:
            calibration = model_mod.calibrate_threshold(dev_scores)
            payload["threshold"] = calibration.threshold
            payload["dev_mcc"] = calibration.mcc
        else:
            payload["threshold"] = 0.5
        payload["model"] = trained.to_json()
        payload["vocab"] = {"doc_freq": vocab.doc_freq, "n_docs": vocab.n_docs}
    elif kind == "external":
        spec = model_mod.ExternalScorerSpec(
            transport=options["transport"],
            target=options["target"],
            input_variant=options["input"],
            image_layout=options["image_layout"],
            timeout=options["timeout"],
            media_root=options.get("media_root"),
        )
        payload["spec"] = {
            "transport": spec.transport, "target": spec.target,
            "input_variant": spec.input_variant, "image_layout": spec.image_layout,
            "timeout": spec.timeout, "media_root": spec.media_root,
        }
        threshold = 0.5
        if options.get("assignment"):
            assignment = load_assignment(options["assignment"])
            dev_posts = [
                corpus[pid] for pid in sorted(assignment)
                if assignment[pid] == "dev" and pid in labels
            ]
            scores = model_mod.score_external(dev_posts, spec)
            dev_scores = [
                (scores[p.post_id], labels[p.post_id])
                for p in dev_posts if scores[p.post_id] is not None
            ]
            if dev_scores and len({y for _, y in dev_scores}) == 2:
                threshold = model_mod.calibrate_threshold(dev_scores).threshold
        payload["threshold"] = threshold
    else:
        raise WltpipeError("unknown model kind %r" % kind)

    (out / "model.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(out, "train", options)
    print("trained %s model -> %s" % (kind, out / "model.json"))
    return 0


def load_scorer(model_dir: str | Path):
    """Rebuild a ScorerHandle from a train artifact directory."""
    payload = json.loads((Path(model_dir) / "model.json").read_text(encoding="utf-8"))
    kind = payload["kind"]
    if kind == "wordfilter":
        handle = model_mod.word_filter_handle(frozenset(payload["keywords"]))
        handle.threshold = payload["threshold"]
        return handle, payload
    if kind == "linear":
        trained = model_mod.LinearModel.from_json(payload["model"])
        vocab = model_mod.Vocabulary(
            doc_freq=payload["vocab"]["doc_freq"], n_docs=payload["vocab"]["n_docs"]
        )
        return model_mod.linear_handle(trained, vocab, threshold=payload["threshold"]), payload
    if kind == "external":
        spec = model_mod.ExternalScorerSpec(**payload["spec"])
        return model_mod.external_handle(spec, threshold=payload["threshold"]), payload
    raise WltpipeError("unknown model kind %r in %s" % (kind, model_dir))


def cmd_eval(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    corpus = corpus_mod.ingest(options["corpus"]).corpus
    labels = load_labels(options["labels"])
    handle, payload = load_scorer(options["model_dir"])

    if options.get("assignment"):
        assignment = load_assignment(options["assignment"])
        eval_ids = [
            pid for pid in sorted(assignment)
            if assignment[pid] == options["split"] and pid in labels
        ]
    else:
        eval_ids = sorted(labels)
    if not eval_ids:
        raise WltpipeError("no posts to evaluate in split %r" % options["split"])

    scored: list[tuple[float, int]] = []
    y_true: list[int] = []
    y_pred: list[int] = []
    skipped = 0
    for pid in eval_ids:
        score = handle.score(corpus[pid])
        if score is None:
            skipped += 1
            continue
        scored.append((score, labels[pid]))
        y_true.append(labels[pid])
        y_pred.append(1 if score >= handle.threshold else 0)
    if skipped:
        logger.warning("%d posts skipped (scorer errors)", skipped)

    counts = metrics_mod.confusion(y_true, y_pred)
    report = metrics_mod.metrics(counts, scores=scored)
    result = {
        "model": payload["kind"],
        "input": payload.get("input", "text"),
        "split": options["split"],
        "threshold": handle.threshold,
        "n": report.n,
        "skipped": skipped,
        "seed": options["seed"],
        "metrics": {
            "precision_pos": report.precision_pos,
            "recall_pos": report.recall_pos,
            "macro_f1": report.macro_f1,
            "mcc": report.mcc,
            "auc": report.auc,
        },
        "flags": list(report.flags),
    }
    (out / "eval.json").write_text(
        json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(out, "eval", options)
    print(
        "%s on %s: pre=%.3f rec=%.3f macro_f1=%.3f mcc=%.3f auc=%s"
        % (
            payload["kind"], options["split"], report.precision_pos,
            report.recall_pos, report.macro_f1, report.mcc,
            "n/a" if report.auc is None else "%.3f" % report.auc,
        )
    )
    return 0


def cmd_report(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    runs = []
    for run_dir in options["runs"].split(","):
        path = Path(run_dir) / "eval.json"
        if not path.exists():
            raise WltpipeError("no eval.json under %s" % run_dir)
        runs.append(json.loads(path.read_text(encoding="utf-8")))

    grouped: dict[tuple[str, str], list[dict]] = {}
    for run in runs:
        grouped.setdefault((run["model"], run["input"]), []).append(run)

    with (out / "report.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "input", "pre", "rec", "macro_f1", "mcc", "auc"])
        for (model_name, input_name), group in sorted(grouped.items()):
            reports = [
                metrics_mod.MetricReport(
                    precision_pos=r["metrics"]["precision_pos"],
                    recall_pos=r["metrics"]["recall_pos"],
                    macro_f1=r["metrics"]["macro_f1"],
                    mcc=r["metrics"]["mcc"],
                    auc=r["metrics"]["auc"],
                    n=r["n"],
                )
                for r in group
            ]
            agg = metrics_mod.aggregate_runs(reports)
            writer.writerow([
                model_name, input_name,
                agg.formatted("precision_pos"), agg.formatted("recall_pos"),
                agg.formatted("macro_f1"), agg.formatted("mcc"),
                agg.formatted("auc"),
            ])
    write_manifest(out, "report", options)
    print("report written to %s" % (out / "report.csv"))
    return 0


def cmd_serve(args) -> int:
    from .server import create_server

    options = resolve_options(args)
    corpus = corpus_mod.ingest(options["corpus"]).corpus
    config = HitlConfig(
        queue_per_seed_user=options["queue_per_seed_user"],
        top_k=options["top_k"],
        stop_at=options["stop_at"],
        annotators=tuple(options["annotators"].split(",")),
        english_filter=options["english_filter"],
        seed=options["seed"],
    )
    state_dir = Path(options["state_dir"])
    if (state_dir / "events.jsonl").exists():
        service = HitlService.load(corpus, config, state_dir)
        print("resumed state at round %d" % service.state.round_index)
    else:
        service = HitlService(corpus, config, state_dir)
        if not options.get("seed_posts") or not options.get("seed_users"):
            raise WltpipeError(
                "fresh state requires --seed-posts and --seed-users to bootstrap"
            )
        seed_labels = {pid: 1 for pid in options["seed_posts"].split(",") if pid}
        seed_users = {u for u in options["seed_users"].split(",") if u}
        service.bootstrap(seed_labels, seed_users)
        print("bootstrapped with %d seed posts" % len(seed_labels))

    server = create_server(
        service, host=options["host"], port=options["port"],
        trainer=linear_round_trainer(), media_root=options.get("media_root"),
    )
    print("serving on http://%s:%d" % server.server_address)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_export(args) -> int:
    options = resolve_options(args)
    out = _out_dir(options)
    corpus = corpus_mod.ingest(options["corpus"]).corpus
    config = HitlConfig(
        annotators=tuple(options["annotators"].split(",")),
        english_filter=options["english_filter"],
    )
    service = HitlService.load(corpus, config, options["state_dir"])
    manifest = service.export_dataset(out)
    write_manifest(out, "export", options)
    print("exported %d adopted labels (%d conflicts)" % (
        manifest["adopted"], manifest["conflicts"]))
    return 0


# ----- parser ------------------------------------------------------------

_DEFAULTS: dict = {}


def _add(parser: argparse.ArgumentParser, *names, **kw):
    action = parser.add_argument(*names, **kw)
    _DEFAULTS[action.dest] = action.default
    return action


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wltpipe",
        description="Active-learning pipeline for scarce-class post detection",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        _add(p, "--config", default=None, help="flat key=value config file")
        _add(p, "--out", required=True, help="artifact output directory")
        _add(p, "--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="validate and normalize a corpus file")
    common(p)
    _add(p, "--corpus", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("crawl", help="expand seed users and collect timelines")
    common(p)
    _add(p, "--seeds", required=True, help="comma-separated seed user ids")
    _add(p, "--hops", type=int, default=2)
    _add(p, "--budget", type=int, default=None)
    _add(p, "--cap", type=int, default=3200, help="timeline cap per user")
    _add(p, "--source", choices=("synthetic", "file"), default="synthetic")
    _add(p, "--graph", default=None, help="edge file for the file source")
    _add(p, "--source-corpus", dest="source_corpus", default=None)
    _add(p, "--synthetic-users", dest="synthetic_users", type=int, default=250)
    _add(p, "--synthetic-posts-per-user", dest="synthetic_posts_per_user",
         type=int, default=20)
    _add(p, "--synthetic-positive-rate", dest="synthetic_positive_rate",
         type=float, default=0.01)
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("analyze", help="emit the text statistics report bundle")
    common(p)
    _add(p, "--corpus", required=True)
    _add(p, "--labels", default=None)
    _add(p, "--stopwords", default=None)
    _add(p, "--lexicon", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("split", help="balance classes and split user-disjoint")
    common(p)
    _add(p, "--corpus", required=True)
    _add(p, "--labels", required=True)
    _add(p, "--neg-per-pos", dest="neg_per_pos", type=int, default=10)
    _add(p, "--keyword", default="ivory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train or configure a scorer")
    common(p)
    _add(p, "--corpus", required=True)
    _add(p, "--labels", required=True)
    _add(p, "--model", choices=("wordfilter", "linear", "external"), required=True)
    _add(p, "--assignment", default=None, help="assignment.csv from split")
    _add(p, "--keywords", default="ivory")
    _add(p, "--input", default="text",
         help="input variant label recorded in artifacts")
    _add(p, "--lexicon", default=None)
    _add(p, "--lr", type=float, default=0.3)
    _add(p, "--l2", type=float, default=1e-4)
    _add(p, "--epochs", type=int, default=300)
    _add(p, "--patience", type=int, default=20)
    _add(p, "--transport", choices=("subprocess", "http"), default="subprocess")
    _add(p, "--target", default=None, help="external command line or URL")
    _add(p, "--image-layout", dest="image_layout",
         choices=("stitch", "concat"), default="stitch")
    _add(p, "--timeout", type=float, default=30.0)
    _add(p, "--media-root", dest="media_root", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained scorer on a split")
    common(p)
    _add(p, "--corpus", required=True)
    _add(p, "--labels", required=True)
    _add(p, "--model-dir", dest="model_dir", required=True)
    _add(p, "--assignment", default=None)
    _add(p, "--split", default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate eval runs into a results table")
    common(p)
    _add(p, "--runs", required=True, help="comma-separated eval output dirs")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the labeling service")
    _add(p, "--config", default=None)
    _add(p, "--corpus", required=True)
    _add(p, "--state-dir", dest="state_dir", required=True)
    _add(p, "--host", default="127.0.0.1")
    _add(p, "--port", type=int, default=8080)
    _add(p, "--annotators", default="a1,a2")
    _add(p, "--seed-posts", dest="seed_posts", default=None)
    _add(p, "--seed-users", dest="seed_users", default=None)
    _add(p, "--queue-per-seed-user", dest="queue_per_seed_user", type=int, default=100)
    _add(p, "--top-k", dest="top_k", type=int, default=2500)
    _add(p, "--stop-at", dest="stop_at", type=int, default=8000)
    _add(p, "--english-filter", dest="english_filter", action="store_true")
    _add(p, "--media-root", dest="media_root", default=None)
    _add(p, "--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="export adopted labels from a state dir")
    common(p)
    _add(p, "--corpus", required=True)
    _add(p, "--state-dir", dest="state_dir", required=True)
    _add(p, "--annotators", default="a1,a2")
    _add(p, "--english-filter", dest="english_filter", action="store_true")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WltpipeError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
