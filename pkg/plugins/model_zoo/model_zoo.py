"""
Small differentiable classifiers for the Langevin dynamics experiments.

Two architectures are available: multinomial logistic regression and a
multilayer perceptron with at most two hidden layers. Both are trained on
the softmax cross-entropy (the surrogate loss) and evaluated with the 0-1
loss. Parameters are a flat vector; gradients are analytic.
"""
import math
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from plugins.common.errors import ValidationError

logger = logging.getLogger(__name__)

MAX_PARAMETERS = 50_000
MAX_HIDDEN_LAYERS = 2
ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True, eq=False)
class DataPoint:
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """A batch of labelled points: features (N, d_x) and integer labels (N,)."""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=float))
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if features.shape[0] != labels.shape[0]:
            raise ValidationError("Features and labels differ in length",
                                  param_info=f"{features.shape[0]} features, {labels.shape[0]} labels")
        if not np.all(np.isfinite(features)):
            raise ValidationError("Features must be finite")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return self.labels.shape[0]

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return DataPoint(self.features[index], int(self.labels[index]))
        return Dataset(self.features[index], self.labels[index])

    @classmethod
    def from_points(cls, points: Sequence[DataPoint]):
        if not points:
            raise ValidationError("Cannot build a dataset from no points")
        return cls(np.stack([p.features for p in points]), [p.label for p in points])

    @property
    def input_dim(self):
        return self.features.shape[1]


def as_dataset(data):
    if isinstance(data, Dataset):
        return data
    if isinstance(data, DataPoint):
        return Dataset(data.features[None, :], [data.label])
    return Dataset.from_points(list(data))


class Model:
    """Base class: a classifier with a flat parameter vector."""

    def __init__(self, input_dim: int, n_classes: int, layer_sizes: List[int], activation: str = "tanh"):
        if n_classes < 2:
            raise ValidationError("A classifier needs at least two classes", param_info=f"n_classes = {n_classes}")
        if activation not in ACTIVATIONS:
            raise ValidationError(f"Unknown activation: {activation}",
                                  suggestion=f"Use one of: {', '.join(ACTIVATIONS)}")
        self.input_dim = int(input_dim)
        self.n_classes = int(n_classes)
        self.activation = activation
        self.sizes = [self.input_dim] + [int(h) for h in layer_sizes] + [self.n_classes]
        self.shapes = [(fan_out, fan_in) for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:])]
        self.dim = sum(o * i + o for o, i in self.shapes)
        if self.dim > MAX_PARAMETERS:
            raise ValidationError(
                "Model has too many parameters",
                param_info=f"d = {self.dim}",
                suggestion=f"Keep models at or below {MAX_PARAMETERS} parameters."
            )

    name = "model"

    def describe(self):
        return {"kind": self.name, "input_dim": self.input_dim, "n_classes": self.n_classes,
                "hidden": self.sizes[1:-1], "activation": self.activation, "dim": self.dim}

    def unpack(self, w):
        """Split a flat parameter vector into (weight, bias) per layer."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValidationError("Parameter vector has the wrong dimension",
                                  param_info=f"got shape {w.shape}, expected ({self.dim},)")
        layers, offset = [], 0
        for fan_out, fan_in in self.shapes:
            weight = w[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
            offset += fan_out * fan_in
            bias = w[offset:offset + fan_out]
            offset += fan_out
            layers.append((weight, bias))
        return layers

    def _check_inputs(self, data):
        data = as_dataset(data)
        if data.input_dim != self.input_dim:
            raise ValidationError("Feature dimension does not match the model",
                                  param_info=f"got {data.input_dim}, expected {self.input_dim}")
        if data.labels.min() < 0 or data.labels.max() >= self.n_classes:
            raise ValidationError("Label out of range",
                                  param_info=f"labels in [{data.labels.min()}, {data.labels.max()}]",
                                  suggestion=f"Labels must lie in 0..{self.n_classes - 1}.")
        return data

    def _act(self, a):
        return np.tanh(a) if self.activation == "tanh" else np.maximum(a, 0.0)

    def _act_grad(self, a, h):
        return 1.0 - h * h if self.activation == "tanh" else (a > 0).astype(float)

    def _forward(self, w, features):
        layers = self.unpack(w)
        pre, post = [], [features]
        h = features
        for index, (weight, bias) in enumerate(layers):
            a = h @ weight.T + bias
            if index < len(layers) - 1:
                pre.append(a)
                h = self._act(a)
                post.append(h)
            else:
                h = a
        return h, pre, post, layers

    def logits(self, w, data):
        data = self._check_inputs(data)
        return self._forward(w, data.features)[0]

    def init_params(self, rng: np.random.Generator):
        """Initial parameters: uniform in ±1/√fan_in for weights, zero biases."""
        parts = []
        for fan_out, fan_in in self.shapes:
            bound = 1.0 / math.sqrt(fan_in)
            parts.append(rng.uniform(-bound, bound, size=fan_out * fan_in))
            parts.append(np.zeros(fan_out))
        return np.concatenate(parts)

    def losses(self, w, data):
        """Per-point cross-entropy, stabilized with log-sum-exp."""
        data = self._check_inputs(data)
        z = self._forward(w, data.features)[0]
        return logsumexp(z, axis=1) - z[np.arange(len(data)), data.labels]

    def zero_one(self, w, data):
        """Per-point 0-1 loss; argmax ties go to the lowest class index."""
        data = self._check_inputs(data)
        z = self._forward(w, data.features)[0]
        return (np.argmax(z, axis=1) != data.labels).astype(float)

    def _backward(self, w, data, per_point):
        z, pre, post, layers = self._forward(w, data.features)
        n = len(data)
        delta = softmax(z, axis=1)
        delta[np.arange(n), data.labels] -= 1.0
        if not per_point:
            delta /= n
        grads = [None] * len(layers)
        for index in range(len(layers) - 1, -1, -1):
            h = post[index]
            if per_point:
                grads[index] = np.concatenate(
                    [np.einsum('no,ni->noi', delta, h).reshape(n, -1), delta], axis=1)
            else:
                grads[index] = np.concatenate([(delta.T @ h).ravel(), delta.sum(axis=0)])
            if index > 0:
                delta = (delta @ layers[index][0]) * self._act_grad(pre[index - 1], post[index])
        return np.concatenate(grads, axis=-1)

    def grad(self, w, data):
        """Gradient of the mean cross-entropy over ``data``."""
        return self._backward(w, self._check_inputs(data), per_point=False)

    def point_grads(self, w, data):
        """Per-point cross-entropy gradients, shape (N, d)."""
        return self._backward(w, self._check_inputs(data), per_point=True)


class LogisticRegression(Model):
    """Multinomial logistic regression; initialized at zero."""
    name = "logistic"

    def __init__(self, input_dim: int, n_classes: int = 2):
        super().__init__(input_dim, n_classes, [])

    def init_params(self, rng: np.random.Generator):
        return np.zeros(self.dim)


class MLP(Model):
    """Fully connected network with one or two hidden layers."""
    name = "mlp"

    def __init__(self, input_dim: int, n_classes: int, hidden: Sequence[int] = (16,), activation: str = "tanh"):
        hidden = list(hidden)
        if not 1 <= len(hidden) <= MAX_HIDDEN_LAYERS:
            raise ValidationError("MLP needs one or two hidden layers",
                                  param_info=f"hidden = {hidden}")
        if any(h < 1 for h in hidden):
            raise ValidationError("Hidden layer sizes must be positive", param_info=f"hidden = {hidden}")
        super().__init__(input_dim, n_classes, hidden, activation)


def model_from_dict(config):
    """Build a model from ``{"kind": "logistic"|"mlp", "input_dim", "n_classes", ...}``."""
    kind = config.get("kind", "logistic")
    try:
        if kind == "logistic":
            return LogisticRegression(int(config["input_dim"]), int(config.get("n_classes", 2)))
        if kind == "mlp":
            return MLP(int(config["input_dim"]), int(config.get("n_classes", 2)),
                       config.get("hidden", [16]), config.get("activation", "tanh"))
    except KeyError as e:
        raise ValidationError(f"Model config is missing key {e}")
    raise ValidationError(f"Unknown model kind: {kind}", suggestion="Use 'logistic' or 'mlp'.")


def surrogate_loss(model: Model, w, z: DataPoint) -> float:
    return float(model.losses(w, z)[0])


def surrogate_grad(model: Model, w, z: DataPoint) -> np.ndarray:
    return model.grad(w, z)


def true_loss(model: Model, w, z: DataPoint) -> float:
    return float(model.zero_one(w, z)[0])


def empirical_risks(model: Model, w, sample) -> Tuple[float, float]:
    """
    Mean surrogate and mean 0-1 loss over a nonempty sample.

    Args:
        model: The classifier
        w: Flat parameter vector
        sample: Dataset or sequence of DataPoint

    Returns:
        Tuple (surrogate risk, 0-1 risk)
    """
    if sample is None or len(sample) == 0:
        raise ValidationError("Empirical risk needs a nonempty sample")
    data = as_dataset(sample)
    return float(np.mean(model.losses(w, data))), float(np.mean(model.zero_one(w, data)))
