import json
import math

import numpy as np
import pytest

import dsseg


def test_weights():
    assert dsseg.la_ema_weight(0, 0.0) == 1.0
    assert dsseg.la_ema_weight(99, 2.0) == pytest.approx(0.01 * math.exp(-0.6), abs=1e-12)
    assert dsseg.la_ema_weight(99, 2.0, loss_aware=False) == dsseg.global_weight(99)
    assert dsseg.decay_weight(5.0, lam=0.0) == 1.0


def test_mask_and_mix_conserve():
    mask = dsseg.zero_centered_mask([8, 10], [0.5, 0.3], seed=4)
    assert mask.shape == (8, 10)
    assert (mask == 0).sum() == 4 * 3
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(1, 8, 10)), rng.normal(size=(1, 8, 10))
    np.testing.assert_array_equal(dsseg.mix_images(a, b, mask) + dsseg.mix_images(b, a, mask), a + b)
    la = np.zeros((8, 10), np.int32)
    lb = np.ones((8, 10), np.int32)
    assert (dsseg.mix_labels(la, lb, mask, 2) == 1 - mask).all()


def test_selection_prefers_confident_student():
    sharp = np.zeros((2, 4, 4))
    sharp[0] = 0.95
    sharp[1] = 0.05
    soft = np.zeros((2, 4, 4))
    soft[0] = 0.6
    soft[1] = 0.4
    r = dsseg.select_student(soft, sharp)
    assert r["chosen"] == 2
    assert r["agreement_fraction"] == 1.0


def test_metrics_and_filter():
    lab = np.zeros((10, 10), np.int32)
    lab[1:4, 1:4] = 1
    lab[6:9, 6:8] = 1
    kept = dsseg.largest_component_filter(lab, 2)
    assert kept.sum() == 9
    d, j = dsseg.dice_jaccard(kept, lab)
    assert d == pytest.approx(2 * j / (1 + j))
    rec = dsseg.evaluate_case(lab, lab, 2)
    assert rec["dice"] == 1.0 and rec["hd95_mm"] == 0.0


def test_invalid_input_raises():
    with pytest.raises(ValueError):
        dsseg.zero_centered_mask([8, 8], [1.5, 0.5], seed=0)


def test_suppression_report():
    spec = {"dim": 4, "sigma": [1.0], "loss": 2.0, "lambda": 0.3, "iterations": 5, "trials": 4000, "seed": 2}
    rep = dsseg.verify_suppression(json.dumps(spec))
    assert rep["all_pass"] and rep["suppression_expected"]
    assert rep["ratio"][0] == pytest.approx(math.exp(-1.2), rel=0.05)


def test_generate_dataset(tmp_path):
    spec = {"num_samples": 10, "num_val": 2, "shape": [16, 16], "labeled_fraction": 0.2, "seed": 5}
    ids = dsseg.generate_dataset(json.dumps(spec), tmp_path / "data")
    assert len(ids["labeled"]) == 2 and len(ids["unlabeled"]) == 8 and len(ids["val"]) == 2
    assert (tmp_path / "data" / "manifest.json").exists()
