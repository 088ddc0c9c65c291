import json
import math

import pytest

import pathnet


def small_records(hops=2, n=24, seed=7):
    return pathnet.generate_synthetic(hops=hops, instances=n, seed=seed)["records"]


def test_tokenize():
    assert pathnet.tokenize("Ada met Bo.") == ["Ada", "met", "Bo", "."]


def test_extract_paths_reaches_gold():
    record = small_records(n=1)[0]
    paths = pathnet.extract_paths(record, "synthetic", max_hops=2)
    assert paths
    gold = record["candidates"].index(record["answer"])
    assert any(p["candidate_index"] == gold for p in paths)


def test_retrieve_finds_the_bridge():
    corpus = ["volcanoes erupt hot lava.", "hot lava forms igneous rock.", "oceans contain salt water."]
    chains = pathnet.retrieve(corpus, "why do volcanoes erupt", "igneous rock", threshold=0.08)
    assert [(c["s1_id"], c["s2_id"]) for c in chains] == [(0, 1)]
    c = chains[0]
    assert math.isclose(c["score"], c["question_s1"] * c["s1_s2"] * c["s2_candidate"])
    assert pathnet.retrieve(corpus, "why do volcanoes erupt", "igneous rock", prune_prefix=False)


def test_generate_synthetic_is_deterministic():
    assert small_records(n=5) == small_records(n=5)
    assert small_records(n=5) != small_records(n=5, seed=8)


def test_train_evaluate_explain(tmp_path):
    records = small_records(n=30)
    train_file = tmp_path / "train.jsonl"
    train_file.write_text("".join(json.dumps(r) + "\n" for r in records[:24]))
    dev_file = tmp_path / "dev.jsonl"
    dev_file.write_text("".join(json.dumps(r) + "\n" for r in records[24:]))
    ckpt = tmp_path / "model.json"
    result = pathnet.train({
        "model": {"hidden": 8, "embedding_dim": 10},
        "epochs": 2,
        "format": "synthetic",
        "threads": 1,
        "train_path": str(train_file),
        "dev_path": str(dev_file),
        "checkpoint_path": str(ckpt),
    })
    assert 1 <= len(result["history"]) <= 2
    assert ckpt.exists()

    report = pathnet.evaluate(ckpt, records[24:])
    assert report["total"] == 6
    assert 0.0 <= report["accuracy"] <= 1.0

    explanations = pathnet.explain(ckpt, records[24:26], k=2)
    assert len(explanations) == 2
    for e in explanations:
        assert abs(sum(e["probabilities"]) - 1.0) < 1e-9
        assert 1 <= len(e["paths"]) <= 2


def test_gradient_check():
    assert pathnet.gradient_check("gru")["max_rel_error"] < 1e-4


def test_errors_surface_as_pathnet_error(tmp_path):
    with pytest.raises(pathnet.PathNetError):
        pathnet.evaluate(tmp_path / "missing.json", small_records(n=1))
    with pytest.raises(pathnet.PathNetError):
        pathnet.extract_paths({"id": "x"}, "wikihop")
    with pytest.raises(pathnet.PathNetError):
        pathnet.gradient_check("cnn")
