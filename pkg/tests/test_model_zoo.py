import gzip
import math
import struct

import numpy as np
import pytest

from plugins.common.errors import ValidationError, DataExhaustedError
from plugins.model_zoo.model_zoo import (
    DataPoint, Dataset, LogisticRegression, MLP, MAX_PARAMETERS, model_from_dict,
    surrogate_loss, surrogate_grad, true_loss, empirical_risks,
)
from plugins.model_zoo.data import SyntheticBlobs, IdxSource, load_idx, source_from_dict


def numeric_grad(model, w, data, eps=1e-6):
    grad = np.zeros_like(w)
    for i in range(w.size):
        step = np.zeros_like(w)
        step[i] = eps
        grad[i] = (model.losses(w + step, data).mean() - model.losses(w - step, data).mean()) / (2 * eps)
    return grad


def write_idx(path, array, magic):
    header = struct.pack('>I', magic) + b''.join(struct.pack('>I', d) for d in array.shape)
    opener = gzip.open if str(path).endswith('.gz') else open
    with opener(path, 'wb') as f:
        f.write(header + array.astype(np.uint8).tobytes())


@pytest.fixture
def sample(blobs):
    return blobs.generate(8)


class TestDataset:
    def test_indexing(self, sample):
        point = sample[0]
        assert isinstance(point, DataPoint)
        assert point.features.shape == (2,)
        assert len(sample[2:5]) == 3

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="differ in length"):
            Dataset(np.zeros((3, 2)), [0, 1])

    def test_from_points(self, sample):
        rebuilt = Dataset.from_points([sample[i] for i in range(len(sample))])
        np.testing.assert_array_equal(rebuilt.labels, sample.labels)


class TestGradients:
    """Analytic gradients against central differences."""

    def test_logistic(self, logistic, sample, rng):
        w = rng.normal(size=logistic.dim)
        np.testing.assert_allclose(logistic.grad(w, sample), numeric_grad(logistic, w, sample), atol=1e-6)

    def test_mlp(self, small_mlp, rng):
        data = Dataset(rng.normal(size=(6, 2)), rng.integers(0, 3, size=6))
        w = small_mlp.init_params(rng)
        np.testing.assert_allclose(small_mlp.grad(w, data), numeric_grad(small_mlp, w, data), atol=1e-6)

    def test_relu_mlp(self, rng):
        model = MLP(input_dim=2, n_classes=2, hidden=[5, 3], activation="relu")
        data = Dataset(rng.normal(size=(5, 2)), rng.integers(0, 2, size=5))
        w = model.init_params(rng) + 0.1
        np.testing.assert_allclose(model.grad(w, data), numeric_grad(model, w, data), atol=1e-5)

    def test_point_grads_average(self, small_mlp, rng):
        data = Dataset(rng.normal(size=(4, 2)), [0, 1, 2, 1])
        w = small_mlp.init_params(rng)
        np.testing.assert_allclose(small_mlp.point_grads(w, data).mean(axis=0), small_mlp.grad(w, data), atol=1e-12)

    def test_single_point_helpers(self, logistic, sample):
        w = np.zeros(logistic.dim)
        z = sample[0]
        assert surrogate_loss(logistic, w, z) == pytest.approx(math.log(2))
        np.testing.assert_allclose(surrogate_grad(logistic, w, z), logistic.grad(w, sample[0:1]))


class TestLosses:
    def test_ties_go_to_lowest_class(self, logistic):
        data = Dataset(np.ones((2, 2)), [0, 1])
        w = np.zeros(logistic.dim)
        np.testing.assert_array_equal(logistic.zero_one(w, data), [0.0, 1.0])
        assert true_loss(logistic, w, data[1]) == 1.0

    def test_empirical_risks(self, logistic, sample):
        surrogate, zero_one = empirical_risks(logistic, np.zeros(logistic.dim), sample)
        assert surrogate == pytest.approx(math.log(2))
        assert zero_one == pytest.approx(np.mean(sample.labels != 0))

    def test_label_range(self, logistic):
        with pytest.raises(ValidationError, match="Label out of range"):
            logistic.losses(np.zeros(logistic.dim), Dataset(np.zeros((1, 2)), [2]))

    def test_feature_dimension(self, logistic):
        with pytest.raises(ValidationError, match="Feature dimension"):
            logistic.grad(np.zeros(logistic.dim), Dataset(np.zeros((1, 3)), [0]))


class TestArchitectures:
    def test_dims(self):
        assert LogisticRegression(5, 3).dim == 18
        assert MLP(4, 2, hidden=[8]).dim == 4 * 8 + 8 + 8 * 2 + 2

    def test_logistic_starts_at_zero(self, logistic, rng):
        np.testing.assert_array_equal(logistic.init_params(rng), np.zeros(logistic.dim))

    def test_limits(self):
        with pytest.raises(ValidationError, match="one or two hidden layers"):
            MLP(2, 2, hidden=[4, 4, 4])
        with pytest.raises(ValidationError, match="too many parameters"):
            MLP(MAX_PARAMETERS, 2, hidden=[2])
        with pytest.raises(ValidationError, match="Unknown activation"):
            MLP(2, 2, activation="sigmoid")

    def test_from_dict(self):
        model = model_from_dict({"kind": "mlp", "input_dim": 3, "n_classes": 4, "hidden": [5]})
        assert model.describe()["hidden"] == [5]
        with pytest.raises(ValidationError, match="missing key"):
            model_from_dict({"kind": "logistic"})
        with pytest.raises(ValidationError, match="Unknown model kind"):
            model_from_dict({"kind": "cnn", "input_dim": 2})


class TestSources:
    def test_blobs_deterministic(self, blobs):
        first, second = blobs.generate(10), blobs.generate(10)
        np.testing.assert_array_equal(first.features, second.features)
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_blobs_from_dict(self):
        source = source_from_dict({"kind": "blobs", "input_dim": 3, "n_classes": 4, "separation": 2.0})
        assert source.input_dim == 3
        assert source.n_classes == 4

    def test_blobs_priors_checked(self):
        with pytest.raises(ValidationError, match="priors"):
            SyntheticBlobs(means=[[0.0], [1.0]], priors=[0.5, 0.6])

    def test_idx_roundtrip_and_pooling(self, tmp_path, rng):
        images = rng.integers(0, 256, size=(6, 4, 4))
        labels = np.array([0, 1, 2, 1, 0, 2])
        write_idx(tmp_path / "images.idx.gz", images, 0x803)
        write_idx(tmp_path / "labels.idx", labels, 0x801)
        np.testing.assert_array_equal(load_idx(tmp_path / "images.idx.gz"), images)

        source = IdxSource(tmp_path / "images.idx.gz", tmp_path / "labels.idx", pool=2, classes=[1, 2])
        assert source.input_dim == 4
        assert source.n_classes == 2
        drawn = source.draw(4, rng)
        assert len(drawn) == 4
        with pytest.raises(DataExhaustedError):
            source.draw(5, rng)

    def test_idx_bad_magic(self, tmp_path):
        (tmp_path / "bad.idx").write_bytes(struct.pack('>II', 0x1234, 1) + b'\x00')
        with pytest.raises(ValidationError, match="magic"):
            load_idx(tmp_path / "bad.idx")
