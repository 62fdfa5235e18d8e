import json

import pytest

from tsr.cli import main


CORPUS = (
    "a man rides a horse\n"
    "the dog runs\n"
    "the man walks\n"
    "the horse eats\n"
)

COLLECTION = (
    "c1\ti1\ta man rides a horse\tperson,horse\n"
    "c2\ti1\ta rider on a brown horse\tperson,horse\n"
    "c3\ti2\tthe dog runs across a field\tdog\n"
    "c4\ti3\ta man walks the dog\tperson,dog\n"
)

FEATURES = (
    "i1\t0.0 0.0\n"
    "i2\t3.0 4.0\n"
    "i3\t60.0 80.0\n"
)

KBEST = (
    "s1 ||| a man rides a horse ||| -1.0\n"
    "s1 ||| the man rides a horse ||| -1.5\n"
    "s2 ||| the dog runs ||| -2.0\n"
    "s2 ||| a dog runs ||| -2.25\n"
)

QUERIES = "s1\ti1\tperson,horse\ns2\ti2\tdog\n"

REFS_KEYED = "s1 ||| a man rides a horse\ns2 ||| a dog runs\n"


@pytest.fixture
def ws(tmp_path):
    (tmp_path / "corpus.txt").write_text(CORPUS, encoding="utf-8")
    (tmp_path / "collection.tsv").write_text(COLLECTION, encoding="utf-8")
    (tmp_path / "features.tsv").write_text(FEATURES, encoding="utf-8")
    (tmp_path / "kbest.txt").write_text(KBEST, encoding="utf-8")
    (tmp_path / "queries.tsv").write_text(QUERIES, encoding="utf-8")
    (tmp_path / "refs.txt").write_text(REFS_KEYED, encoding="utf-8")
    main(
        [
            "extract-idf",
            str(tmp_path / "corpus.txt"),
            str(tmp_path / "idf.txt"),
        ]
    )
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


class TestExtractIdf:
    def test_reports_counts(self, ws, capsys):
        assert run("extract-idf", ws / "corpus.txt", ws / "idf2.txt") == 0
        out = capsys.readouterr().out
        assert "documents: 4" in out

    def test_rerun_is_byte_identical(self, ws):
        run("extract-idf", ws / "corpus.txt", ws / "a.txt")
        run("extract-idf", ws / "corpus.txt", ws / "b.txt")
        assert (ws / "a.txt").read_bytes() == (ws / "b.txt").read_bytes()

    def test_missing_corpus_exits_nonzero(self, ws, capsys):
        assert run("extract-idf", ws / "nope.txt", ws / "x.txt") == 1
        assert "error:" in capsys.readouterr().err


class TestBuildIndex:
    def test_round_trip(self, ws, capsys):
        assert run("build-index", ws / "collection.tsv", ws / "index.tsv") == 0
        out = capsys.readouterr().out
        assert "captions: 4" in out
        assert "images: 3" in out
        # normalized output reloads to the same collection
        assert run("build-index", ws / "index.tsv", ws / "index2.tsv") == 0
        assert (ws / "index.tsv").read_bytes() == (ws / "index2.tsv").read_bytes()

    def test_empty_caption_fails_without_skip(self, ws, capsys):
        bad = ws / "bad.tsv"
        bad.write_text(COLLECTION + "c9\ti9\t\n", encoding="utf-8")
        assert run("build-index", bad, ws / "x.tsv") == 1
        assert "error:" in capsys.readouterr().err
        assert run("build-index", bad, ws / "x.tsv", "--skip-empty") == 0


class TestRetrieveRerank:
    def retrieve(self, ws, *extra):
        return run(
            "retrieve",
            "--collection", ws / "collection.tsv",
            "--idf", ws / "idf.txt",
            "--kbest", ws / "kbest.txt",
            "--out", ws / "matches.txt",
            *extra,
        )

    def test_txt_retrieve_writes_dump(self, ws, capsys):
        assert self.retrieve(ws) == 0
        out = capsys.readouterr().out
        assert "sentences: 2" in out
        assert "fallbacks: 0 / 2" in out
        lines = (ws / "matches.txt").read_text().splitlines()
        assert all(" ||| " in line for line in lines)
        assert any(line.startswith("s1 ||| ") for line in lines)

    def test_cnn_requires_features(self, ws, capsys):
        assert self.retrieve(ws, "--mode", "cnn") == 1
        assert "features" in capsys.readouterr().err

    def test_cnn_with_features_and_queries(self, ws, capsys):
        assert (
            self.retrieve(
                ws,
                "--mode", "cnn",
                "--features", ws / "features.tsv",
                "--queries", ws / "queries.tsv",
            )
            == 0
        )
        assert "sentences: 2" in capsys.readouterr().out

    def test_rerun_is_byte_identical(self, ws):
        self.retrieve(ws)
        first = (ws / "matches.txt").read_bytes()
        self.retrieve(ws)
        assert (ws / "matches.txt").read_bytes() == first

    def test_rerank_over_dump(self, ws, capsys):
        self.retrieve(ws)
        assert (
            run(
                "rerank",
                "--collection", ws / "collection.tsv",
                "--idf", ws / "idf.txt",
                "--kbest", ws / "kbest.txt",
                "--matches", ws / "matches.txt",
                "--out", ws / "output.txt",
                "--diagnostics", ws / "diag.txt",
            )
            == 0
        )
        out_lines = (ws / "output.txt").read_text().splitlines()
        assert len(out_lines) == 2
        assert out_lines[0].startswith("s1 ||| ")
        diag_lines = (ws / "diag.txt").read_text().splitlines()
        assert len(diag_lines) == 2

    def test_two_stage_equals_pipeline(self, ws):
        self.retrieve(ws, "--k-n", "2", "--k-m", "3")
        run(
            "rerank",
            "--collection", ws / "collection.tsv",
            "--idf", ws / "idf.txt",
            "--kbest", ws / "kbest.txt",
            "--matches", ws / "matches.txt",
            "--out", ws / "two_stage.txt",
            "--k-r", "2",
            "--interp-weight", "10.0",
        )
        run(
            "pipeline",
            "--collection", ws / "collection.tsv",
            "--idf", ws / "idf.txt",
            "--kbest", ws / "kbest.txt",
            "--out-dir", ws / "pipe",
            "--k-n", "2",
            "--k-m", "3",
            "--k-r", "2",
            "--interp-weight", "10.0",
        )
        assert (ws / "two_stage.txt").read_bytes() == (
            ws / "pipe" / "output.txt"
        ).read_bytes()


class TestPipeline:
    def pipeline(self, ws, out="pipe", *extra):
        return run(
            "pipeline",
            "--collection", ws / "collection.tsv",
            "--idf", ws / "idf.txt",
            "--kbest", ws / "kbest.txt",
            "--out-dir", ws / out,
            *extra,
        )

    def test_zero_weight_keeps_decoder_best(self, ws):
        assert self.pipeline(ws, "pipe", "--interp-weight", "0") == 0
        lines = (ws / "pipe" / "output.txt").read_text().splitlines()
        assert lines == [
            "s1 ||| a man rides a horse",
            "s2 ||| the dog runs",
        ]

    def test_txt_mode_never_reads_features(self, ws):
        # point --features at a nonexistent path: txt mode must not open it
        assert (
            self.pipeline(ws, "pipe", "--features", str(ws / "missing.tsv"))
            == 0
        )

    def test_writes_config_and_report(self, ws, capsys):
        assert (
            self.pipeline(
                ws, "pipe", "--references", str(ws / "refs.txt"),
                "--diagnostics",
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "BLEU:" in out
        cfg = json.loads((ws / "pipe" / "config.json").read_text())
        assert cfg["k_n"] == 300 and cfg["k_m"] == 500
        assert cfg["k_r"] == 5 and cfg["interp_weight"] == 5e4
        report = (ws / "pipe" / "report.txt").read_text()
        assert "sentences: 2" in report
        assert "BLEU:" in report
        assert (ws / "pipe" / "diagnostics.txt").exists()

    def test_config_file_with_flag_override(self, ws):
        cfg_path = ws / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "collection": str(ws / "collection.tsv"),
                    "idf": str(ws / "idf.txt"),
                    "kbest": str(ws / "kbest.txt"),
                    "out_dir": str(ws / "from_cfg"),
                    "interp_weight": 0.0,
                }
            ),
            encoding="utf-8",
        )
        assert run("pipeline", "--config", cfg_path) == 0
        resolved = json.loads((ws / "from_cfg" / "config.json").read_text())
        assert resolved["interp_weight"] == 0.0
        # flag beats config field
        assert (
            run(
                "pipeline",
                "--config", cfg_path,
                "--out-dir", ws / "overridden",
                "--interp-weight", "7.5",
            )
            == 0
        )
        resolved = json.loads((ws / "overridden" / "config.json").read_text())
        assert resolved["interp_weight"] == 7.5

    def test_unknown_config_key_rejected(self, ws, capsys):
        cfg_path = ws / "cfg.json"
        cfg_path.write_text(json.dumps({"weight": 1.0}), encoding="utf-8")
        assert run("pipeline", "--config", cfg_path) == 1
        assert "unknown config keys: weight" in capsys.readouterr().err

    def test_missing_required_key_rejected(self, ws, capsys):
        assert (
            run(
                "pipeline",
                "--collection", ws / "collection.tsv",
                "--idf", ws / "idf.txt",
                "--kbest", ws / "kbest.txt",
            )
            == 1
        )
        assert "out_dir" in capsys.readouterr().err

    def test_cnn_mode_requires_features(self, ws, capsys):
        assert self.pipeline(ws, "pipe", "--mode", "cnn") == 1
        assert "features" in capsys.readouterr().err

    def test_hca_mode_requires_categories(self, ws, capsys):
        bare = ws / "bare.tsv"
        bare.write_text(
            "c1\ti1\ta man rides a horse\n", encoding="utf-8"
        )
        assert (
            run(
                "pipeline",
                "--collection", bare,
                "--idf", ws / "idf.txt",
                "--kbest", ws / "kbest.txt",
                "--out-dir", ws / "pipe",
                "--mode", "hca",
            )
            == 1
        )
        assert "categor" in capsys.readouterr().err

    def test_hca_mode_flips_to_annotated_caption(self, ws):
        assert (
            self.pipeline(
                ws, "hca_run",
                "--mode", "hca",
                "--queries", str(ws / "queries.tsv"),
                "--interp-weight", "1000000",
                "--k-r", "2",
            )
            == 0
        )
        lines = (ws / "hca_run" / "output.txt").read_text().splitlines()
        assert lines[1] == "s2 ||| a dog runs"

    def test_rerun_is_byte_identical(self, ws):
        self.pipeline(ws, "one", "--references", str(ws / "refs.txt"))
        self.pipeline(ws, "two", "--references", str(ws / "refs.txt"))
        for name in ("output.txt", "report.txt"):
            assert (ws / "one" / name).read_bytes() == (
                ws / "two" / name
            ).read_bytes()

    def test_worker_count_does_not_change_output(self, ws):
        self.pipeline(ws, "w1", "--workers", "1")
        self.pipeline(ws, "w4", "--workers", "4")
        assert (ws / "w1" / "output.txt").read_bytes() == (
            ws / "w4" / "output.txt"
        ).read_bytes()


class TestEvaluateCompare:
    def test_evaluate_perfect_match(self, ws, capsys):
        hyp = ws / "hyp.txt"
        hyp.write_text(
            "s1 ||| a man rides a horse\ns2 ||| a dog runs\n",
            encoding="utf-8",
        )
        assert run("evaluate", hyp, ws / "refs.txt") == 0
        out = capsys.readouterr().out
        assert "BLEU: 100.00 (1.000000)" in out

    def test_compare_identical_systems(self, ws, capsys):
        hyp = ws / "hyp.txt"
        hyp.write_text(
            "s1 ||| a man rides a horse\ns2 ||| a dog runs\n",
            encoding="utf-8",
        )
        assert (
            run("compare", hyp, hyp, ws / "refs.txt", "--trials", "50") == 0
        )
        out = capsys.readouterr().out
        assert "p-value: 1.000000" in out
        assert "diff: 0.00" in out

    def test_compare_misaligned_exits_nonzero(self, ws, capsys):
        a = ws / "a.txt"
        b = ws / "b.txt"
        a.write_text("s1 ||| x\ns2 ||| y\n", encoding="utf-8")
        b.write_text("s1 ||| x\ns3 ||| y\n", encoding="utf-8")
        assert run("compare", a, b, ws / "refs.txt") == 1
        assert "error:" in capsys.readouterr().err

    def test_compare_seed_reproducible(self, ws, capsys):
        a = ws / "a.txt"
        b = ws / "b.txt"
        ref = ws / "r.txt"
        a.write_text("a man rides a horse\nthe dog runs fast\n", encoding="utf-8")
        b.write_text("a man rides the horse\na dog runs quick\n", encoding="utf-8")
        ref.write_text("a man rides a horse\nthe dog runs quick\n", encoding="utf-8")
        run("compare", a, b, ref, "--trials", "200", "--seed", "5")
        first = capsys.readouterr().out
        run("compare", a, b, ref, "--trials", "200", "--seed", "5")
        assert capsys.readouterr().out == first


class TestTune:
    def test_end_to_end(self, ws, capsys):
        grid = ws / "grid.json"
        grid.write_text(
            json.dumps(
                {
                    "k_n": [1, 2],
                    "k_m": [1, 2],
                    "k_r": [2],
                    "interp_weight": [0.0, 1000.0],
                }
            ),
            encoding="utf-8",
        )
        assert (
            run(
                "tune",
                "--grid", grid,
                "--collection", ws / "collection.tsv",
                "--idf", ws / "idf.txt",
                "--kbest", ws / "kbest.txt",
                "--references", ws / "refs.txt",
                "--trace-out", ws / "trace.jsonl",
                "--best-out", ws / "best.json",
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "evaluated points: 7" in out
        trace = [
            json.loads(line)
            for line in (ws / "trace.jsonl").read_text().splitlines()
        ]
        assert len(trace) == 7
        assert all("bleu" in rec and "k_n" in rec for rec in trace)
        best = json.loads((ws / "best.json").read_text())
        assert best["bleu"] == max(rec["bleu"] for rec in trace)
        assert best["mode"] == "txt"

    def test_unknown_grid_key_rejected(self, ws, capsys):
        grid = ws / "grid.json"
        grid.write_text(
            json.dumps({"k_n": [1], "k_m": [1], "k_r": [1],
                        "interp_weight": [0.0], "cutoff": [1.0]}),
            encoding="utf-8",
        )
        assert (
            run(
                "tune",
                "--grid", grid,
                "--collection", ws / "collection.tsv",
                "--idf", ws / "idf.txt",
                "--kbest", ws / "kbest.txt",
                "--references", ws / "refs.txt",
            )
            == 1
        )
        assert "unknown grid keys: cutoff" in capsys.readouterr().err

    def test_missing_grid_list_rejected(self, ws, capsys):
        grid = ws / "grid.json"
        grid.write_text(
            json.dumps({"k_n": [1], "k_m": [1], "k_r": [1]}),
            encoding="utf-8",
        )
        assert (
            run(
                "tune",
                "--grid", grid,
                "--collection", ws / "collection.tsv",
                "--idf", ws / "idf.txt",
                "--kbest", ws / "kbest.txt",
                "--references", ws / "refs.txt",
            )
            == 1
        )
        assert "interp_weight" in capsys.readouterr().err
