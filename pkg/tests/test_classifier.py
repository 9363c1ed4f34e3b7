import numpy as np
import pytest

from thinedge.classifier import (
    TrainConfig,
    baseline_fit,
    baseline_predict,
    baseline_select_threshold,
    init_model,
    load_model,
    loss_and_grads,
    predict,
    predict_proba,
    save_model,
    train,
)
from thinedge.errors import FormatError, UnsupportedVersionError
from thinedge.pipeline import compute_descriptors
from thinedge.pointcloud import PointCloud

from oracles import dihedral_cloud


def two_clusters(rng, n, b=10):
    y = rng.integers(0, 2, n)
    centres = np.zeros((2, b))
    centres[1] = 3.0
    return centres[y] + rng.normal(size=(n, b)), y


def f1(pred, y):
    pred, y = np.asarray(pred, bool), np.asarray(y, bool)
    tp = np.sum(pred & y)
    return 2 * tp / (pred.sum() + y.sum())


def test_separable_clusters():
    # Means 3 sigma apart in every coordinate, default training schedule.
    rng = np.random.default_rng(0)
    x, y = two_clusters(rng, 2000)
    xt, yt = two_clusters(rng, 2000)
    model = train(x, y, TrainConfig())
    assert model.meta["train_accuracy"] >= 0.99
    assert np.mean((predict_proba(model, xt) >= 0.5) == yt) >= 0.95


def test_identical_descriptors_give_majority_accuracy():
    x = np.ones((100, 10))
    y = np.r_[np.ones(30, int), np.zeros(70, int)]
    model = train(x, y, TrainConfig(epochs=50, batch_size=100, class_weighting="none"))
    assert model.meta["train_accuracy"] == pytest.approx(0.7)
    assert predict_proba(model, x[0]) == pytest.approx(0.3, abs=0.02)


@pytest.mark.parametrize("weights", [(1.0, 1.0), (0.6, 3.0)])
def test_gradient_check(weights):
    rng = np.random.default_rng(2)
    model = init_model([10, 8, 8, 2], seed=3)
    x = rng.normal(size=(16, 10))
    y = rng.integers(0, 2, 16)
    _, gw, gb = loss_and_grads(model, x, y, weights)
    h = 1e-6
    for layer in range(3):
        for params, grads in ((model.weights, gw), (model.biases, gb)):
            p = params[layer]
            num = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = loss_and_grads(model, x, y, weights)[0]
                p[idx] = old - h
                down = loss_and_grads(model, x, y, weights)[0]
                p[idx] = old
                num[idx] = (up - down) / (2 * h)
            rel = np.linalg.norm(num - grads[layer]) / max(np.linalg.norm(num) + np.linalg.norm(grads[layer]), 1e-12)
            assert rel <= 1e-5


def test_prediction_is_a_probability_and_deterministic():
    rng = np.random.default_rng(4)
    x, y = two_clusters(rng, 300)
    model = train(x, y, TrainConfig(epochs=5, batch_size=64))
    p = predict_proba(model, x)
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_array_equal(p, predict_proba(model, x))
    is_edge, prob = predict(model, x[0])
    assert bool(is_edge) == (prob >= 0.5)


def test_threshold_roc_is_monotone():
    rng = np.random.default_rng(5)
    x, y = two_clusters(rng, 400)
    p = predict_proba(train(x, y, TrainConfig(epochs=5, batch_size=64)), x)
    recalls = [np.mean(p[y == 1] >= t) for t in np.linspace(0, 1, 21)]
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))


def test_bandwidth_mismatch():
    model = init_model([10, 4, 2])
    with pytest.raises(ValueError):
        predict_proba(model, np.zeros(12))


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train(np.zeros((10, 4)), np.zeros(10))


def test_seed_determinism():
    rng = np.random.default_rng(6)
    x, y = two_clusters(rng, 200)
    a = train(x, y, TrainConfig(epochs=3, batch_size=32, seed=7))
    b = train(x, y, TrainConfig(epochs=3, batch_size=32, seed=7))
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    x, y = two_clusters(rng, 200)
    model = train(x, y, TrainConfig(epochs=2, batch_size=64))
    path = tmp_path / "m.txt"
    save_model(model, path)
    back = load_model(path)
    for a, b in zip(model.weights + model.biases, back.weights + back.biases):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(model.mean, back.mean)
    np.testing.assert_array_equal(predict_proba(model, x), predict_proba(back, x))
    assert back.meta["epochs"] == 2


def test_truncated_and_versioned_model_files(tmp_path):
    path = tmp_path / "m.txt"
    save_model(init_model([6, 4, 2]), path)
    lines = path.read_text().splitlines()
    (tmp_path / "cut.txt").write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    with pytest.raises(FormatError, match="weight|bias|end"):
        load_model(tmp_path / "cut.txt")
    (tmp_path / "v9.txt").write_text("\n".join(["thinedge-mlp 9"] + lines[1:]) + "\n")
    with pytest.raises(UnsupportedVersionError):
        load_model(tmp_path / "v9.txt")
    (tmp_path / "junk.txt").write_text("hello\n")
    with pytest.raises(FormatError):
        load_model(tmp_path / "junk.txt")


def test_baseline_rules():
    b = baseline_fit(np.array([[1.0, 2.0], [3.0, 4.0]]), threshold=0.5)
    assert baseline_predict(b, [2.0, 3.0])
    b0 = baseline_fit(np.array([[1.0, 2.0]]), threshold=0.0)
    assert baseline_predict(b0, [1.0, 2.0]) and not baseline_predict(b0, [1.0, 2.0 + 1e-9])


def _dihedral_data(seed):
    pts, horiz = dihedral_cloud(seed=seed)
    x = compute_descriptors(PointCloud(pts)).descriptors
    return x, np.where(horiz, pts[:, 0], -pts[:, 2]) <= 0.5


def test_mlp_beats_threshold_baseline_on_dihedral():
    xa, ya = _dihedral_data(0)
    xb, yb = _dihedral_data(1)
    model = train(xa, ya, TrainConfig(epochs=200, batch_size=64, seed=0))
    base = baseline_select_threshold(baseline_fit(xa[ya]), xa, ya)
    assert f1(predict_proba(model, xb) >= 0.5, yb) > f1(baseline_predict(base, xb), yb)
