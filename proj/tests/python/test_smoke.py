"""End-to-end smoke tests for the python bindings.

Run with the staged package on PYTHONPATH (the build puts it under
<build>/python) or after `pip install -e . --no-build-isolation`.
"""

import json
import math

import pytest

ra = pytest.importorskip("rehab_assess")


@pytest.fixture(scope="module")
def dataset():
    return ra.synth_dataset(
        n_patients=3,
        n_healthy=2,
        reps_per_patient_side=3,
        reps_per_healthy=4,
        exercises=["E1"],
        seed=11,
    )


@pytest.fixture(scope="module")
def table(dataset):
    return ra.extract_features(dataset)


def test_synth_counts(dataset):
    assert dataset.n_subjects == 5
    # patients x 2 sides x reps + healthy x reps, one exercise
    assert dataset.n_repetitions == 3 * 2 * 3 + 2 * 4
    assert dataset.exercises() == ["E1"]
    cohorts = {s["cohort"] for s in dataset.subjects()}
    assert cohorts == {"patient", "healthy"}
    assert dataset.validate() == []


def test_jsonl_roundtrip(dataset, tmp_path):
    path = tmp_path / "corpus.jsonl"
    dataset.save(str(path))
    again = ra.Dataset.load(str(path))
    assert again.to_jsonl() == dataset.to_jsonl()


def test_feature_extraction(dataset, table):
    names = ra.feature_names()
    assert len(names) == 60
    assert table.names == names
    assert len(table) == dataset.n_repetitions
    for row in table.values():
        assert len(row) == len(names)
        assert all(math.isfinite(v) for v in row)
    assert set(table.labels) <= {0, 1}
    assert "elbow_flexion.max" in names


def test_predictor_roundtrip(table, tmp_path):
    pred = ra.train_predictor(
        table, seed=3, depths=[1], widths=[16], learning_rates=[0.01],
        max_iter=60,
    )
    assert pred.best is not None
    assert pred.best["hidden"] == [16]
    assert len(pred.grid) == 1

    row = table.values()[0]
    out = pred.predict(row)
    assert out["label"] in (0, 1)
    assert 0.0 <= out["probability"] <= 1.0

    path = tmp_path / "predictor.json"
    pred.save(str(path))
    loaded = ra.Predictor.load(str(path))
    assert loaded.best is None  # report is not serialized
    assert loaded.predict(row) == out


def test_predictor_mask(table):
    pred = ra.train_predictor(
        table, seed=3, depths=[1], widths=[8], learning_rates=[0.01],
        max_iter=30,
    )
    row = table.values()[0]
    nothing = pred.predict(row, mask=[False] * len(row))
    everything = pred.predict(row, mask=[True] * len(row))
    assert everything == pred.predict(row)
    assert 0.0 <= nothing["probability"] <= 1.0


def test_selector_roundtrip(table, tmp_path):
    sel = ra.train_selector(
        table, seed=5, episodes=200, q_hidden=[[16]], minibatch=32,
        replay_capacity=2000,
    )
    row = table.values()[0]
    trace = sel.run(row, true_label=table.labels[0])
    n = len(ra.feature_names())
    assert 1 <= len(trace["actions"]) <= n + 1
    assert trace["prediction"] in (0, 1)
    assert trace["acquisitions"] == sum(trace["mask"])
    # classification ends the episode
    assert trace["actions"][-1] in (n, n + 1)
    assert trace["prediction"] == trace["actions"][-1] - n

    path = tmp_path / "selector.json"
    sel.save(str(path))
    loaded = ra.Selector.load(str(path))
    again = loaded.run(row, true_label=table.labels[0])
    assert again["actions"] == trace["actions"]
    assert loaded.val_reward == sel.val_reward


def test_rfe(table):
    res = ra.rfe_select(table, seed=5, hidden=[16], max_iter=40)
    n = len(ra.feature_names())
    assert sorted(res["ranking"]) == list(range(n))
    assert sum(res["chosen_mask"]) == res["chosen_size"]
    assert 1 <= res["chosen_size"] <= n
    counts = [r["active_count"] for r in res["rounds"]]
    assert counts[0] == n
    assert counts == sorted(counts, reverse=True)


def test_loso_evaluate(dataset):
    results, text = ra.loso_evaluate(
        dataset,
        methods=["full"],
        seeds=[3],
        threads=2,
        depths=[1],
        widths=[16],
        learning_rates=[0.01],
        max_iter=40,
    )
    assert results["feature_count"] == 60
    assert results["exercises"] == ["E1"]
    assert len(results["subjects"]) == 3
    overall = results["methods"]["ml_full"]["overall"]
    assert 0.0 <= overall["mean_f1"] <= 1.0
    assert overall["mean_acquisitions"] == 60.0
    assert "ML-Full" in text and "Exercise 1 (E1)" in text


def test_loso_deterministic(dataset):
    kwargs = dict(
        methods=["full"], seeds=[3], depths=[1], widths=[16],
        learning_rates=[0.01], max_iter=40,
    )
    a, _ = ra.loso_evaluate(dataset, threads=1, **kwargs)
    b, _ = ra.loso_evaluate(dataset, threads=2, **kwargs)
    assert a == b


def test_feedback(dataset):
    subject = dataset.subjects()[0]["id"]
    text, raw = ra.feedback_report(dataset, subject, "E1", 0, side="affected")
    doc = json.loads(raw)
    assert doc["prediction"] in (0, 1)
    assert {f["feature"] for f in doc["features"]} == set(ra.feature_names())
    assert "predicted quality:" in text
    for f in doc["features"]:
        assert f["flagged"] == (abs(f["z"]) > doc["threshold"])


def test_reference_values():
    assert ra.min_jerk_scalar(2.0, 4.0, 0.25) == pytest.approx(2.20703125)
    assert ra.f1_score([1, 1, 0, 1], [1, 1, 1, 0]) == pytest.approx(2 / 3)
    # online net argmaxes over legal actions, target net evaluates
    y = ra.double_q_target(
        reward=-0.05,
        done=False,
        q_online_next=[0.2, 0.9, 0.1],
        q_target_next=[0.5, 0.3, 0.8],
        legal_next=[0, 1, 2],
        gamma=1.0,
    )
    assert y == pytest.approx(-0.05 + 0.3)
    assert ra.double_q_target(
        reward=1.0, done=True, q_online_next=[0.2], q_target_next=[0.5],
        legal_next=[0], gamma=1.0,
    ) == pytest.approx(1.0)


def test_errors_are_typed(dataset, table):
    with pytest.raises(ra.Error):
        ra.extract_features(dataset, exercise="E9")
    with pytest.raises(ra.Error):
        ra.feedback_report(dataset, "nobody", "E1", 0)
    pred = ra.train_predictor(
        table, seed=3, depths=[1], widths=[8], learning_rates=[0.01],
        max_iter=20,
    )
    with pytest.raises(ra.Error):
        pred.predict([0.0, 1.0])  # wrong dimension
