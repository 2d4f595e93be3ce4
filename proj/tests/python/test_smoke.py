import csv
import json
import os

import pytest

if os.environ.get("ICLPARA_REQUIRE_MODULE") == "1":
    import iclpara
else:
    iclpara = pytest.importorskip("iclpara")


def write_duplicate_corpus(path, queries=4):
    # Every test source appears verbatim in train, so nearest-neighbour demos copy the answer.
    rows = []
    for i in range(queries):
        src = f"you are a stupid fool number {i}"
        tgt = f"you are mistaken friend number {i}"
        rows.append({"id": f"train-{i}", "source": src, "target": tgt, "split": "train"})
        rows.append({"id": f"test-{i}", "source": src, "target": tgt, "split": "test"})
    for i in range(6):
        rows.append({"id": f"filler-{i}", "source": f"weather talk item {i}", "target": f"calm talk item {i}",
                     "split": "train"})
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["id", "source", "target", "split"])
        w.writeheader()
        w.writerows(rows)


def test_version():
    assert iclpara.__version__ == "0.1.0"


def test_tokenize_and_bleu():
    assert iclpara.tokenize("The cat, sat!") == ["the", "cat", ",", "sat", "!"]
    r = iclpara.corpus_bleu(["the cat is on the mat"], ["the cat sat on the mat"])
    assert r["matches"] == [5, 3, 1, 0]
    assert r["totals"] == [6, 5, 4, 3]
    assert r["score"] == 0.0
    same = iclpara.corpus_bleu(["a b c d"], ["a b c d"])
    assert same["score"] == pytest.approx(100.0)
    with pytest.raises(iclpara.InputError):
        iclpara.corpus_bleu(["a"], [])


def test_overlap_metrics():
    p, r, f = iclpara.rouge_l("a b c", "a c d e")
    assert (p, r) == pytest.approx((2 / 3, 0.5))
    assert f == pytest.approx(2 * p * r / (p + r))
    score, per_pair = iclpara.cider(["a b c", "x y"], ["a b c", "x z"])
    assert score == pytest.approx(sum(per_pair) / 2)
    assert iclpara.bert_f1("same words", "same words")[2] == pytest.approx(1.0)
    assert 0.0 < iclpara.sentence_bleu("a b", "c d") < 100.0


def test_mann_whitney():
    r = iclpara.mann_whitney([1, 2, 3], [4, 5, 6])
    assert r["exact"] is True
    assert r["u"] == 0
    assert r["p_value"] == pytest.approx(0.1)


def test_catalog_and_prompt():
    catalog = iclpara.instruction_catalog()
    assert len(catalog) == 10
    assert iclpara.catalog_lookup(catalog[0]["id"]) == catalog[0]["text"]
    with pytest.raises(iclpara.InputError):
        iclpara.catalog_lookup("nope")
    p = iclpara.render_prompt("query text", [{"source": "rude one", "target": "kind one"}],
                              instruction=catalog[0]["id"])
    assert p["demo_count"] == 1
    assert "rude one" in p["text"] and "kind one" in p["text"]
    assert "query text" in p["text"]


def test_lexicon_toxicity():
    scores = iclpara.lexicon_toxicity(["you fool", "hello there"], "fool\n# comment\n")
    assert scores[0] > 0.0
    assert scores[1] == 0.0


def test_run_and_report(tmp_path):
    corpus = tmp_path / "dups.csv"
    write_duplicate_corpus(corpus)
    (tmp_path / "lexicon.txt").write_text("stupid\nfool\n")
    config = {
        "corpus": {"path": str(corpus)},
        "backend": {"kind": "mock", "backend_id": "mock", "mock_mode": "demo_copy"},
        "strategy": {"kind": "most_similar", "order": "descending", "n": 1},
        "toxicity": {"lexicon": str(tmp_path / "lexicon.txt")},
        "output_dir": str(tmp_path / "run"),
        "seed": 3,
    }
    assert iclpara.split_counts(str(corpus)) == {"train": 10, "validation": 0, "test": 4}
    assert len(iclpara.load_corpus(str(corpus))) == 14

    dry = iclpara.run_experiment(config, dry_run=True)
    assert dry["dry_run"] is True and dry["metrics"] is None

    r = iclpara.run_experiment(config)
    assert r["query_count"] == 4
    assert r["pool_size"] == 10
    assert r["metrics"]["corpus"]["bleu"] == pytest.approx(100.0)
    metrics = json.loads((tmp_path / "run" / "metrics.json").read_text())
    assert metrics["run"]["scored_count"] == 4
    assert metrics["metrics"]["corpus"]["bleu"] == pytest.approx(100.0)
    assert iclpara.config_digest(config) == r["config_digest"]

    sweep_cfg = dict(config, output_dir=str(tmp_path / "sweep"))
    runs = iclpara.run_sweep(sweep_cfg, "demo_count", [0, 1])
    assert len(runs) == 2
    assert all(x["error"] is None or x["axis_value"] == "0" for x in runs)

    table = iclpara.report([r["run_dir"]], str(tmp_path / "report"))
    assert "100.00" in table
    assert (tmp_path / "report" / "report.csv").exists()
