"""Readout tests: cube windowing, conv head vs naive oracle, gradients."""

import math

import numpy as np
import pytest

from lsmkit import TrainingDiverged, ValidationError
from lsmkit.readout import (
    ReadoutModel,
    cross_entropy,
    load_model,
    save_model,
    windowed_cube,
)


# ---------------------------------------------------------------------------
# windowed_cube
# ---------------------------------------------------------------------------


def test_zero_raster_zero_cube():
    cube = windowed_cube(np.zeros((27, 30)), (3, 3, 3), w=10)
    assert cube.shape == (3, 3, 3, 3)
    assert not cube.any()


def test_full_window_reduces_to_mean_spike_count():
    rng = np.random.default_rng(1)
    raster = (rng.random((8, 40)) < 0.3).astype(float)
    cube = windowed_cube(raster, (2, 2, 2), w=40)
    assert cube.shape == (1, 2, 2, 2)
    assert np.allclose(cube.ravel(), raster.mean(axis=1))


def test_windowed_means_match_brute_force():
    rng = np.random.default_rng(2)
    raster = (rng.random((12, 24)) < 0.5).astype(float)
    w = 6
    cube = windowed_cube(raster, (3, 2, 2), w=w)
    for win in range(24 // w):
        expected = raster[:, win * w : (win + 1) * w].mean(axis=1)
        assert np.allclose(cube[win].ravel(), expected)


def test_v_spike_normalization_keeps_unit_range():
    raster = np.full((8, 10), 2.0)  # v_spike = 2 everywhere
    cube = windowed_cube(raster, (2, 2, 2), w=5, v_spike=2.0)
    assert np.allclose(cube, 1.0)


def test_windowed_cube_validation():
    with pytest.raises(ValidationError):
        windowed_cube(np.zeros((8, 10)), (2, 2, 2), w=3)  # 3 does not divide 10
    with pytest.raises(ValidationError):
        windowed_cube(np.zeros((9, 10)), (2, 2, 2), w=5)  # 9 != 8


def test_cube_follows_grid_indexing():
    # neuron index i sits at unravel_index(i, dims)
    raster = np.zeros((27, 5))
    raster[13, :] = 1.0
    cube = windowed_cube(raster, (3, 3, 3), w=5)
    assert cube[0][np.unravel_index(13, (3, 3, 3))] == 1.0
    assert cube.sum() == 1.0


# ---------------------------------------------------------------------------
# forward / loss
# ---------------------------------------------------------------------------


def _tiny_model(seed=0, dropout=0.0):
    return ReadoutModel(input_shape=(2, 4, 4, 4), n_classes=3, c_out=3, kernel=3,
                        dropout=dropout, seed=seed)


def test_zero_weights_give_uniform_distribution():
    model = _tiny_model()
    for arr in model.parameters().values():
        arr[:] = 0.0
    p = model.forward(np.random.default_rng(0).random((2, 4, 4, 4)))
    assert np.allclose(p, 1.0 / 3.0)


def _naive_probs(model, cube):
    """Nested-loop re-implementation of the forward pass."""
    c_in, size_x, size_y, size_z = model.input_shape
    k = model.kernel
    ox, oy, oz = size_x - k + 1, size_y - k + 1, size_z - k + 1
    pooled = np.empty(model.c_out)
    for o in range(model.c_out):
        best = -np.inf
        for x in range(ox):
            for y in range(oy):
                for z in range(oz):
                    s = model.conv_b[o]
                    for c in range(c_in):
                        for a in range(k):
                            for b in range(k):
                                for d in range(k):
                                    s += cube[c, x + a, y + b, z + d] * model.conv_w[o, c, a, b, d]
                    best = max(best, max(0.0, s))
        pooled[o] = best
    logits = model.dense_w @ pooled + model.dense_b
    e = np.exp(logits - logits.max())
    return e / e.sum()


def test_forward_matches_naive_conv_oracle():
    rng = np.random.default_rng(3)
    for seed in (1, 2, 3):
        model = _tiny_model(seed=seed)
        cube = rng.random((2, 4, 4, 4))
        assert np.allclose(model.forward(cube), _naive_probs(model, cube), atol=1e-6)


def test_forward_shape_validation():
    model = _tiny_model()
    with pytest.raises(ValidationError):
        model.forward(np.zeros((2, 5, 4, 4)))


def test_input_normalization_applied():
    rng = np.random.default_rng(31)
    cube = rng.random((2, 4, 4, 4))
    offset = rng.random((2, 4, 4, 4))
    gain = 3.5
    plain = _tiny_model(seed=8)
    normed = _tiny_model(seed=8)
    normed.set_input_normalization(offset, gain)
    assert np.allclose(normed.forward(cube), plain.forward((cube - offset) * gain))
    with pytest.raises(ValidationError):
        normed.set_input_normalization(np.zeros((1, 4, 4, 4)), 1.0)
    with pytest.raises(ValidationError):
        normed.set_input_normalization(offset, 0.0)


def test_softmax_normalization_property():
    rng = np.random.default_rng(4)
    model = _tiny_model(seed=9)
    probs = model.forward(rng.random((10, 2, 4, 4, 4)))
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert ((probs > 0) & (probs < 1)).all()


def test_inference_deterministic_with_dropout_configured():
    model = _tiny_model(dropout=0.5)
    cube = np.random.default_rng(5).random((2, 4, 4, 4))
    assert np.array_equal(model.forward(cube), model.forward(cube))


def test_loss_examples():
    assert cross_entropy(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0])) == 0.0
    uniform = np.full(3, 1.0 / 3.0)
    assert cross_entropy(uniform, np.array([0.0, 1.0, 0.0])) == pytest.approx(math.log(3.0))


def test_loss_matches_high_precision_reference():
    import mpmath

    rng = np.random.default_rng(6)
    for _ in range(20):
        p = rng.dirichlet(np.ones(3))
        k = rng.integers(0, 3)
        y = np.eye(3)[k]
        expected = float(-mpmath.log(mpmath.mpf(repr(float(p[k])))))
        assert cross_entropy(p, y) == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def _fd_max_relative_error(model, cubes, y, eps=1e-4):
    _, grads = model.gradients(cubes, y, train_mode=False)

    def loss_only():
        return cross_entropy(model.forward(cubes), y)

    worst = 0.0
    for name, arr in model.parameters().items():
        flat = arr.ravel()
        g = grads[name].ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + eps
            up = loss_only()
            flat[idx] = keep - eps
            down = loss_only()
            flat[idx] = keep
            fd = (up - down) / (2 * eps)
            denom = max(abs(fd), abs(g[idx]), 1e-8)
            worst = max(worst, abs(fd - g[idx]) / denom)
    return worst


@pytest.mark.parametrize("seed", [11, 23, 47])
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    model = _tiny_model(seed=seed)
    cubes = rng.random((4, 2, 4, 4, 4))
    labels = rng.integers(0, 3, size=4)
    y = np.eye(3)[labels]
    assert _fd_max_relative_error(model, cubes, y) <= 1e-3


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _blob_dataset(n_per_class=30, seed=0):
    """Three classes, each lighting up a different corner of the volume."""
    rng = np.random.default_rng(seed)
    cubes, labels = [], []
    corners = [(0, 0, 0), (0, 3, 3), (3, 0, 3)]
    for k, corner in enumerate(corners):
        for _ in range(n_per_class):
            cube = rng.random((2, 5, 5, 5)) * 0.1
            cx, cy, cz = corner
            cube[:, cx : cx + 2, cy : cy + 2, cz : cz + 2] += 0.8
            cubes.append(cube)
            labels.append(k)
    order = rng.permutation(len(cubes))
    return np.array(cubes)[order], np.array(labels)[order]


def test_training_separates_blobs():
    cubes, labels = _blob_dataset()
    model = ReadoutModel((2, 5, 5, 5), n_classes=3, c_out=4, kernel=3, dropout=0.0, seed=1)
    losses = model.fit(cubes, labels, epochs=100, lr=0.3, batch_size=16, seed=2)
    assert len(losses) == 100
    assert losses[-1] < losses[0]
    acc = (model.forward(cubes).argmax(axis=1) == labels).mean()
    assert acc >= 0.99

    from sklearn.linear_model import LogisticRegression

    clf = LogisticRegression(max_iter=2000)
    flat = cubes.reshape(len(labels), -1)
    clf.fit(flat, labels)
    assert clf.score(flat, labels) >= 0.99  # data really is separable


def test_zero_learning_rate_is_a_no_op():
    cubes, labels = _blob_dataset(n_per_class=5, seed=3)
    model = ReadoutModel((2, 5, 5, 5), n_classes=3, c_out=2, kernel=3, dropout=0.0, seed=4)
    before = {k: v.copy() for k, v in model.parameters().items()}
    losses = model.fit(cubes, labels, epochs=5, lr=0.0, batch_size=8, seed=5)
    for k, v in model.parameters().items():
        assert np.array_equal(v, before[k])
    assert len(set(round(x, 12) for x in losses)) == 1  # flat loss curve


def test_training_is_deterministic():
    cubes, labels = _blob_dataset(n_per_class=8, seed=6)
    runs = []
    for _ in range(2):
        model = ReadoutModel((2, 5, 5, 5), n_classes=3, c_out=3, kernel=3, dropout=0.5, seed=7)
        losses = model.fit(cubes, labels, epochs=8, lr=0.1, batch_size=8, seed=8)
        runs.append((losses, {k: v.copy() for k, v in model.parameters().items()}))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        assert np.array_equal(runs[0][1][k], runs[1][1][k])


def test_divergence_aborts_with_diagnostic():
    cubes, labels = _blob_dataset(n_per_class=5, seed=9)
    model = ReadoutModel((2, 5, 5, 5), n_classes=3, c_out=2, kernel=3, dropout=0.0, seed=10)
    # weights at overflow scale: the very first batch overflows the logits
    # (inf - inf in the softmax), so the loss is NaN and training must stop
    model.conv_w[:] = np.abs(model.conv_w) * 1e160
    model.dense_w[:] = np.abs(model.dense_w) * 1e160
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDiverged, match="epoch"):
            model.fit(cubes, labels, epochs=5, lr=0.1, batch_size=8, seed=11)


def test_lr_schedule_halves():
    # indirect check: with halve_every=1 the step sizes shrink fast enough
    # that late epochs barely move the weights
    cubes, labels = _blob_dataset(n_per_class=5, seed=12)
    model = ReadoutModel((2, 5, 5, 5), n_classes=3, c_out=2, kernel=3, dropout=0.0, seed=13)
    model.fit(cubes, labels, epochs=30, lr=0.2, halve_every=1, batch_size=8, seed=14)
    frozen = {k: v.copy() for k, v in model.parameters().items()}
    model.fit(cubes, labels, epochs=1, lr=0.2 * 0.5**40, batch_size=8, seed=15)
    drift = max(np.abs(v - frozen[k]).max() for k, v in model.parameters().items())
    assert drift < 1e-9


def test_fit_validation():
    model = _tiny_model()
    with pytest.raises(ValidationError):
        model.fit(np.zeros((0, 2, 4, 4, 4)), np.zeros(0, dtype=int), epochs=1)
    with pytest.raises(ValidationError):
        model.fit(np.zeros((2, 2, 4, 4, 4)), np.array([0, 3]), epochs=1)


def test_checkpoint_round_trip(tmp_path):
    model = _tiny_model(seed=21, dropout=0.25)
    model.set_input_normalization(np.random.default_rng(1).random(model.input_shape), 2.5)
    cubes, labels = _blob_dataset(n_per_class=4, seed=22)
    model.fit(cubes[:, :, :4, :4, :4], labels, epochs=2, lr=0.05, seed=23)
    path = tmp_path / "model.npz"
    save_model(path, model)
    back = load_model(path)
    assert back.input_shape == model.input_shape
    assert back.dropout == model.dropout
    assert back.input_gain == model.input_gain
    assert np.array_equal(back.input_offset, model.input_offset)
    for k, v in model.parameters().items():
        assert np.array_equal(back.parameters()[k], v)
    cube = np.random.default_rng(0).random(model.input_shape)
    assert np.array_equal(back.forward(cube), model.forward(cube))
    save_model(tmp_path / "model2.npz", model)
    assert (tmp_path / "model.npz").read_bytes() == (tmp_path / "model2.npz").read_bytes()
