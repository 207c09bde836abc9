import json
import math
import os
import pathlib

import numpy as np
import pytest

import halo

DATA = pathlib.Path(__file__).resolve().parents[1] / "data" / "qa50.jsonl"


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("model")
    halo.make_tiny_model(str(d), seed=3)
    return d


@pytest.fixture(scope="module")
def engine(model_dir):
    return halo.Engine(str(model_dir))


def test_version():
    assert halo.__version__.count(".") == 2


def test_forward_and_generate(engine):
    tokens = engine.encode("Question: hi\nAnswer:")
    logits, states = engine.forward(tokens, capture=[(3, len(tokens) - 1)], logits="last")
    assert logits.shape == (1, 256)
    assert len(states[(3, len(tokens) - 1)]) == 64
    out = engine.generate(tokens, 5)
    assert len(out) == 5
    assert int(np.argmax(logits[0])) == out[0]
    assert engine.generate(tokens, 5, steering=[0.0] * 64, alpha=3.0) == out


def test_probe_directions_sweep(engine):
    samples, rejected = halo.load_dataset(str(DATA))
    assert len(samples) == 50 and rejected == 0
    records, skipped = halo.probe(engine, samples[:10])
    assert len(records) == 10 and not skipped
    for r in records:
        assert r["awareness"] == pytest.approx(r["cos_halluc"] - r["cos_corr"], abs=1e-15)
    fit = halo.fit_directions(engine, samples[:10], k=5)
    assert len(fit["top_corr"]) == 5
    assert math.fsum(x * x for x in fit["d_corr"]) == pytest.approx(1.0, abs=1e-12)
    e_h, e_c = halo.effect_size(engine, samples[0], 4)
    assert e_h == 0.0 and e_c == 0.0
    original, adjusted = halo.steer(engine, "Question: hi\nAnswer:", fit["d_corr"], 0.0, 4)
    assert original == adjusted


def test_stats():
    r = halo.ttest_greater([1.0, -1.0])
    assert r["t"] == 0.0 and r["p"] == 0.5
    fit = halo.ols_simple([0, 1, 2, 3], [1, 3, 5, 7])
    assert fit["slope"] == pytest.approx(2.0) and fit["r_squared"] == pytest.approx(1.0)
    assert halo.student_t_sf(0.0, 5) == 0.5
    with pytest.raises(halo.DataError):
        halo.mean_difference_test([1, 2, 3], [1, 2, 3], paired=True)


def test_errors(tmp_path):
    with pytest.raises(halo.ModelError):
        halo.Engine(str(tmp_path / "missing"))
    with pytest.raises(halo.UsageError):
        halo.load_dataset(str(DATA), format="xml")


def test_run_command(model_dir, tmp_path):
    out = tmp_path / "probe"
    log = halo.run_command(
        "probe",
        {"model": str(model_dir), "dataset": str(DATA), "sample-n": 20, "seed": 7, "out": str(out)},
    )
    assert "20 scored" in log
    rows = (out / "awareness.csv").read_text().splitlines()
    assert len(rows) == 21
    t = json.loads((out / "ttest.json").read_text())
    assert set(["statistic", "value", "t", "p", "df", "stars"]) <= set(t)


def test_selfcheck():
    assert all(ok for _, ok, _ in halo.selfcheck())
