import json
import math

import numpy as np
import pytest

import gaitemo


def quat_matrix(w, x, y, z):
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def test_shortest_arc_maps_u_to_v():
    rng = np.random.default_rng(0)
    for _ in range(50):
        u, v = rng.normal(size=3), rng.normal(size=3)
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        q = gaitemo.shortest_arc(u, v)
        assert np.allclose(quat_matrix(*q) @ u, v, atol=1e-9)


def test_quat_to_euler_quarter_turn():
    a = gaitemo.quat_to_euler(math.cos(math.pi / 4), math.sin(math.pi / 4), 0.0, 0.0)
    assert a == pytest.approx((math.pi / 2, 0.0, 0.0), abs=1e-12)


def test_rotations_and_affective_shapes_and_invariance():
    rng = np.random.default_rng(1)
    pose = rng.normal(size=(5, 21, 3))
    rot = gaitemo.extract_rotations(pose)
    assert rot.shape == (5, 21, 4)
    assert np.allclose(np.linalg.norm(rot, axis=2), 1.0)
    aff = gaitemo.extract_affective(pose)
    assert aff.shape == (18, 5)
    r = quat_matrix(*(lambda q: q / np.linalg.norm(q))(rng.normal(size=4)))
    moved = 3.0 * pose @ r.T + np.array([1.0, -2.0, 0.5])
    assert np.allclose(gaitemo.extract_affective(moved), aff, atol=1e-9)


def test_labels_metrics_and_schedule():
    assert gaitemo.to_multihot([0.5, 0.0, 0.3, 0.2]) == [True, False, True, False]
    assert gaitemo.average_precision([0.9, 0.8, 0.1], [True, False, True]) == pytest.approx((1 + 2 / 3) / 2)
    rep = gaitemo.evaluate(np.eye(4), np.eye(4, dtype=bool))
    assert rep["map"] == 1.0
    assert gaitemo.teacher_forcing_at(100) == 0.995 ** 100
    assert gaitemo.learning_rate_at(500) == 0.001 * 0.999 ** 500
    assert gaitemo.class_names == ["happy", "sad", "angry", "neutral"]


def test_missing_seed_is_a_config_error():
    with pytest.raises(gaitemo.GaitEmoError):
        gaitemo.resolve_config()


def test_commands_end_to_end(tmp_path):
    data = tmp_path / "d.jsonl"
    gaitemo.synth(20, 10, 3, data)
    assert len(data.read_text().splitlines()) == 30
    assert gaitemo.stats(data, tmp_path / "s.csv", bins=5, features=6) == 24

    run = tmp_path / "run"
    summary = gaitemo.train(dataset=str(data), out=str(run), seed=5, epochs=1, batch_size=8,
                            model={"joint_features": 4})
    assert len(summary["epochs"]) == 1
    assert (run / "checkpoint.json").exists()
    stored = json.loads((run / "run_config.json").read_text())
    assert stored["config"]["seed"] == 5

    rep = gaitemo.evaluate_run(data, tmp_path / "e.json", checkpoint=run / "checkpoint.json")
    assert rep["map"] == pytest.approx(summary["test"]["map"], abs=1e-12)

    preds = gaitemo.predict(data, run / "checkpoint.json", tmp_path / "p.csv")
    assert len(preds) == 30
    for p in preds:
        assert sum(p["probs"]) == pytest.approx(1.0, abs=1e-6)
        assert p["labels"] == [x > 0.25 for x in p["probs"]]
