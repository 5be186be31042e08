import json

import pytest

from wltpipe.cli import main


def run(argv):
    return main(argv)


class TestIngest:
    def test_ingest_report(self, fixture_corpus, tmp_path):
        corpus_path, _ = fixture_corpus
        out = tmp_path / "ingested"
        assert run(["ingest", "--corpus", str(corpus_path), "--out", str(out)]) == 0
        report = json.loads((out / "ingest_report.json").read_text())
        assert report["posts"] == 46
        assert report["skipped_count"] == 0
        assert (out / "manifest.json").exists()

    def test_missing_file_is_domain_error(self, tmp_path):
        code = run(["ingest", "--corpus", str(tmp_path / "nope.jsonl"),
                    "--out", str(tmp_path / "o")])
        assert code == 1

    def test_unknown_flag_usage_error(self, fixture_corpus, tmp_path):
        corpus_path, _ = fixture_corpus
        with pytest.raises(SystemExit) as exc:
            run(["ingest", "--corpus", str(corpus_path),
                 "--out", str(tmp_path / "o"), "--bogus"])
        assert exc.value.code == 2


class TestAnalyze:
    def test_report_bundle(self, fixture_corpus, tmp_path):
        corpus_path, labels_path = fixture_corpus
        out = tmp_path / "analysis"
        code = run(["analyze", "--corpus", str(corpus_path),
                    "--labels", str(labels_path), "--out", str(out)])
        assert code == 0
        assert (out / "text_stats.csv").exists()
        assert (out / "special_tokens.csv").exists()
        assert (out / "sentiment.csv").exists()
        assert (out / "image_counts.csv").exists()
        assert (out / "word_freq_wlt.csv").exists()

    def test_empty_corpus_ok(self, tmp_path):
        corpus_path = tmp_path / "empty.jsonl"
        corpus_path.write_text("")
        out = tmp_path / "analysis"
        code = run(["analyze", "--corpus", str(corpus_path), "--out", str(out)])
        assert code == 0
        assert (out / "text_stats.csv").exists()


class TestSplit:
    def test_same_seed_identical_csv(self, fixture_corpus, tmp_path):
        corpus_path, labels_path = fixture_corpus
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = run(["split", "--corpus", str(corpus_path),
                        "--labels", str(labels_path),
                        "--seed", "7", "--out", str(out)])
            assert code == 0
            outs.append((out / "assignment.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_balanced_labels_written(self, fixture_corpus, tmp_path):
        corpus_path, labels_path = fixture_corpus
        out = tmp_path / "split"
        run(["split", "--corpus", str(corpus_path), "--labels", str(labels_path),
             "--neg-per-pos", "4", "--out", str(out), "--seed", "3"])
        audit = json.loads((out / "split_audit.json").read_text())
        assert audit["balance"]["positives"] == 6
        lines = (out / "labels_balanced.csv").read_text().splitlines()
        assert len(lines) == 1 + 6 + 24  # header + pos + 4*pos negatives


class TestTrainEval:
    def split_first(self, fixture_corpus, tmp_path, neg_per_pos="4"):
        corpus_path, labels_path = fixture_corpus
        split_out = tmp_path / "split"
        run(["split", "--corpus", str(corpus_path), "--labels", str(labels_path),
             "--neg-per-pos", neg_per_pos, "--out", str(split_out), "--seed", "1"])
        return corpus_path, labels_path, split_out / "assignment.csv"

    def test_wordfilter_perfect_recall(self, fixture_corpus, tmp_path):
        corpus_path, labels_path, assignment = self.split_first(fixture_corpus, tmp_path)
        model_out = tmp_path / "wf"
        assert run(["train", "--model", "wordfilter", "--corpus", str(corpus_path),
                    "--labels", str(labels_path), "--out", str(model_out)]) == 0
        eval_out = tmp_path / "wf_eval"
        # every positive contains the keyword, so recall over all labeled = 1.0
        assert run(["eval", "--corpus", str(corpus_path), "--labels", str(labels_path),
                    "--model-dir", str(model_out), "--out", str(eval_out)]) == 0
        result = json.loads((eval_out / "eval.json").read_text())
        assert result["metrics"]["recall_pos"] == 1.0

    def test_wordfilter_eval_deterministic(self, fixture_corpus, tmp_path):
        corpus_path, labels_path, _ = self.split_first(fixture_corpus, tmp_path)
        model_out = tmp_path / "wf"
        run(["train", "--model", "wordfilter", "--corpus", str(corpus_path),
             "--labels", str(labels_path), "--out", str(model_out)])
        contents = []
        for name in ("e1", "e2", "e3"):
            out = tmp_path / name
            run(["eval", "--corpus", str(corpus_path), "--labels", str(labels_path),
                 "--model-dir", str(model_out), "--out", str(out)])
            contents.append((out / "eval.json").read_bytes())
        assert contents[0] == contents[1] == contents[2]

    def test_linear_train_eval_flow(self, fixture_corpus, tmp_path):
        corpus_path, labels_path, assignment = self.split_first(fixture_corpus, tmp_path)
        model_out = tmp_path / "lin"
        code = run(["train", "--model", "linear", "--corpus", str(corpus_path),
                    "--labels", str(labels_path), "--assignment", str(assignment),
                    "--epochs", "80", "--out", str(model_out)])
        assert code == 0
        payload = json.loads((model_out / "model.json").read_text())
        assert payload["kind"] == "linear"
        assert 0.0 <= payload["threshold"] <= 1.0
        eval_out = tmp_path / "lin_eval"
        code = run(["eval", "--corpus", str(corpus_path), "--labels", str(labels_path),
                    "--model-dir", str(model_out), "--assignment", str(assignment),
                    "--split", "train", "--out", str(eval_out)])
        assert code == 0
        result = json.loads((eval_out / "eval.json").read_text())
        assert result["metrics"]["recall_pos"] > 0.5

    def test_report_aggregates_runs(self, fixture_corpus, tmp_path):
        corpus_path, labels_path, _ = self.split_first(fixture_corpus, tmp_path)
        model_out = tmp_path / "wf"
        run(["train", "--model", "wordfilter", "--corpus", str(corpus_path),
             "--labels", str(labels_path), "--out", str(model_out)])
        run_dirs = []
        for i in range(3):
            out = tmp_path / f"run{i}"
            run(["eval", "--corpus", str(corpus_path), "--labels", str(labels_path),
                 "--model-dir", str(model_out), "--seed", str(i), "--out", str(out)])
            run_dirs.append(str(out))
        report_out = tmp_path / "report"
        assert run(["report", "--runs", ",".join(run_dirs),
                    "--out", str(report_out)]) == 0
        lines = (report_out / "report.csv").read_text().splitlines()
        assert lines[0] == "model,input,pre,rec,macro_f1,mcc,auc"
        # deterministic word filter: std exactly zero
        assert "1.000_{0.000}" in lines[1]


class TestCrawl:
    def test_synthetic_crawl(self, tmp_path):
        out = tmp_path / "crawl"
        code = run(["crawl", "--source", "synthetic", "--seeds", "u00000",
                    "--hops", "1", "--budget", "10", "--cap", "5",
                    "--synthetic-users", "40", "--synthetic-posts-per-user", "6",
                    "--seed", "3", "--out", str(out)])
        assert code == 0
        assert (out / "corpus.jsonl").exists()
        hops = json.loads((out / "users_by_hop.json").read_text())
        assert hops["0"] == ["u00000"]
        assert len(hops.get("1", [])) <= 10

    def test_crawl_idempotent(self, tmp_path):
        args = ["crawl", "--source", "synthetic", "--seeds", "u00001",
                "--hops", "1", "--cap", "4", "--synthetic-users", "30",
                "--synthetic-posts-per-user", "4", "--seed", "9"]
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        run(args + ["--out", str(out1)])
        run(args + ["--out", str(out2)])
        assert (out1 / "corpus.jsonl").read_bytes() == (out2 / "corpus.jsonl").read_bytes()
        assert (out1 / "graph.txt").read_bytes() == (out2 / "graph.txt").read_bytes()


class TestConfigFile:
    def test_config_provides_defaults(self, fixture_corpus, tmp_path):
        corpus_path, labels_path = fixture_corpus
        config = tmp_path / "run.cfg"
        config.write_text("neg-per-pos=4\nseed=7\n")
        out = tmp_path / "split"
        code = run(["split", "--corpus", str(corpus_path), "--labels", str(labels_path),
                    "--config", str(config), "--out", str(out)])
        assert code == 0
        audit = json.loads((out / "split_audit.json").read_text())
        assert audit["seed"] == 7
        header = (out / "assignment.csv").read_text().splitlines()[0]
        assert "seed=7" in header

    def test_flag_overrides_config(self, fixture_corpus, tmp_path):
        corpus_path, labels_path = fixture_corpus
        config = tmp_path / "run.cfg"
        config.write_text("seed=7\n")
        out = tmp_path / "split"
        run(["split", "--corpus", str(corpus_path), "--labels", str(labels_path),
             "--config", str(config), "--seed", "3", "--out", str(out)])
        audit = json.loads((out / "split_audit.json").read_text())
        assert audit["seed"] == 3


class TestExportCommand:
    def test_export_from_state_dir(self, fixture_corpus, tmp_path):
        from wltpipe.corpus import ingest
        from wltpipe.hitl import Annotation, HitlConfig, HitlService

        corpus_path, _ = fixture_corpus
        corpus = ingest(corpus_path).corpus
        config = HitlConfig(
            queue_per_seed_user=3, annotators=("a1", "a2"), snapshot_every=0,
        )
        state_dir = tmp_path / "state"
        service = HitlService(corpus, config, state_dir)
        service.bootstrap({"pos0": 1}, {"seller0"})
        pid = service.state.queued_ids()[0]
        service.submit_annotation(Annotation("a1", pid, 1))
        service.submit_annotation(Annotation("a2", pid, 1))

        out = tmp_path / "dataset"
        code = run(["export", "--corpus", str(corpus_path),
                    "--state-dir", str(state_dir), "--annotators", "a1,a2",
                    "--out", str(out)])
        assert code == 0
        labeled = (out / "labeled.jsonl").read_text().splitlines()
        assert len(labeled) == 2  # seed + one adoption
        first = json.loads(labeled[0])
        assert first["provenance"] in ("seed", "round:0")

    def test_reexport_byte_identical(self, fixture_corpus, tmp_path):
        from wltpipe.corpus import ingest
        from wltpipe.hitl import HitlConfig, HitlService

        corpus_path, _ = fixture_corpus
        corpus = ingest(corpus_path).corpus
        config = HitlConfig(
            queue_per_seed_user=3, annotators=("a1", "a2"), snapshot_every=0,
        )
        state_dir = tmp_path / "state"
        HitlService(corpus, config, state_dir).bootstrap({"pos0": 1}, {"seller0"})
        outs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            assert run(["export", "--corpus", str(corpus_path),
                        "--state-dir", str(state_dir), "--annotators", "a1,a2",
                        "--out", str(out)]) == 0
            outs.append((out / "labeled.jsonl").read_bytes())
        assert outs[0] == outs[1]
