# Copyright (c) 2026, The DRPO Toolkit Authors
# SPDX-License-Identifier: Apache-2.0

import csv
import io
import json
import math
from pathlib import Path

import pytest

import drpo

DATA = Path(__file__).resolve().parents[1] / "data"


def rollout(qid, i, domain, reward, logp=-0.5):
    return {
        "rollout_id": f"{qid}-r{i}",
        "question_id": qid,
        "domain": domain,
        "reward": reward,
        "logp_current": [logp],
        "logp_old": [logp],
        "logp_ref": [logp],
    }


def test_rewards():
    assert drpo.set_f1(["A", "B"], ["A"]) == pytest.approx(2 / 3)
    assert drpo.set_f1([], []) == 1.0
    mask = [[1] * 4 + [0] * 4 for _ in range(4)] + [[0] * 8 for _ in range(4)]
    assert drpo.best_iou([(0, 0, 4, 2)], mask) == pytest.approx(0.5)
    assert drpo.best_iou([], mask) == 0.0
    assert drpo.format_reward(["A"], {"A": [(0, 0, 1, 1)]}) == 1.0
    assert drpo.format_reward(["A", "B"], {"A": [(0, 0, 1, 1)]}) == 0.0
    assert drpo.combine(1.0, 0.5, 1.0) == pytest.approx(0.6 + 0.1 + 0.2)
    with pytest.raises(ValueError):
        drpo.combine(1.0, 1.0, 1.0, (-1.0, 1.0, 1.0))


def test_temperature_and_damping():
    assert drpo.temperature(4, 0.5) == pytest.approx(1.0)
    assert drpo.temperature(9, 0.0) == pytest.approx(1e-4)
    m, threshold = drpo.kl_damping([1.0, -1.0, 2.0], [2.0, 2.0, 1.0], 0.5)
    assert threshold == pytest.approx(2.0)
    assert m == pytest.approx([0.5, 1.0, 0.5])


def test_clustering():
    model = drpo.kmeans([[0.0], [0.1], [0.9], [1.0]], 2, seed=3)
    assert model["k"] == 2
    assert model["inertia"] == pytest.approx(0.01)
    assert model["assignments"][0] == model["assignments"][1] != model["assignments"][2]
    assert drpo.elbow_k([100, 40, 38, 37], 0.10) == 2
    same = drpo.select_k_elbow([[0.5, 0.5]] * 6)
    assert same["k"] == 1
    with pytest.raises(ValueError):
        drpo.kmeans([[1.0], [1.0]], 2)


def test_grpo_advantages_are_group_standardized():
    rs = [rollout("q0", i, "a", r) for i, r in enumerate([0.1, 0.4, 0.7])]
    rs += [rollout("q1", i, "a", 0.5) for i in range(3)]
    out = drpo.compute_advantages(rs, "grpo", config="advantage:\n  epsilon: 0\n")
    assert [o["rollout_id"] for o in out] == [r["rollout_id"] for r in rs]
    first = [o["advantage"] for o in out[:3]]
    assert sum(first) == pytest.approx(0.0, abs=1e-12)
    assert math.sqrt(sum(a * a for a in first) / 3) == pytest.approx(1.0)
    assert all(o["advantage"] == 0.0 for o in out[3:])


def test_drpo_advantages_have_unit_batch_std():
    rs = []
    for q in range(6):
        rs += [rollout(f"c{q}", i, "common", r) for i, r in enumerate([0.8, 0.9, 0.6, 1.0])]
    for q in range(2):
        rs += [rollout(f"r{q}", i, "rare", r) for i, r in enumerate([0.0, 0.3, 0.1, 0.5])]
    for estimator in ("drpo", "drpo-nokl", "drpo-domain-only"):
        out = drpo.compute_advantages(rs, estimator, seed=1)
        values = [o["advantage"] for o in out]
        mean = sum(values) / len(values)
        assert math.sqrt(sum((v - mean) ** 2 for v in values) / len(values)) == pytest.approx(1.0)
        assert all(0.0 < o["m"] <= 1.0 for o in out)
    with pytest.raises(ValueError):
        drpo.compute_advantages(rs, "ppo")


def test_config_roundtrip():
    text = drpo.normalize_config("estimators: [drpo]\nseeds: [2]\n")
    assert drpo.normalize_config(text) == text
    with pytest.raises(ValueError, match="advantage.epsilonn"):
        drpo.normalize_config("advantage:\n  epsilonn: 1\n")


def test_evaluate_dataset():
    result = drpo.evaluate_dataset([(["A"], ["A"]), ([], ["B"])])
    assert result["macro_f1"] == pytest.approx(0.5)
    assert result["balanced_accuracy"] == pytest.approx(0.75)


def test_score():
    preds = '{"id":"s1","labels":["A"],"boxes":[{"label":"A","x":0,"y":0,"w":4,"h":4}]}\n'
    gold = '{"id":"s1","domain":"ct","labels":["A"],"mask":{"height":8,"width":8,"boxes":[{"x":0,"y":0,"w":4,"h":4}]}}\n'
    samples, metrics = drpo.score(preds, gold)
    record = json.loads(samples.splitlines()[0])
    assert record["reward"] == pytest.approx(1.0)
    rows = list(csv.DictReader(io.StringIO(metrics)))
    assert any(r["level"] == "overall" for r in rows)


def test_train_and_simulate_are_deterministic(tmp_path):
    config = (DATA / "small.yaml").read_text()
    a = drpo.train(config, "drpo", 5)
    b = drpo.train(config, "drpo", 5)
    assert a == b
    assert set(a["final"]["domains"]) == {"common", "uncommon", "rare"}
    drpo.simulate(config, str(tmp_path / "x"))
    drpo.simulate(config, str(tmp_path / "y"))
    names = sorted(p.name for p in (tmp_path / "x").iterdir())
    assert "summary.csv" in names
    for name in names:
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
