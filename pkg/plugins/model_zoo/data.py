"""
Data sources: seeded Gaussian blobs and IDX image/label file pairs.
"""
import gzip
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from plugins.common.errors import ValidationError, DataExhaustedError
from plugins.model_zoo.model_zoo import Dataset

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataSource:
    """Anything that can draw IID labelled points."""
    kind = "source"

    @property
    def input_dim(self):
        raise NotImplementedError

    @property
    def n_classes(self):
        raise NotImplementedError

    def draw(self, count: int, rng: np.random.Generator) -> Dataset:
        raise NotImplementedError


@dataclass
class SyntheticBlobs(DataSource):
    """
    Gaussian class-conditional blobs.

    Each label c is drawn with probability priors[c]; its features are
    means[c] plus isotropic noise with standard deviation ``scale``.
    """
    means: np.ndarray
    scale: float = 1.0
    priors: Optional[np.ndarray] = None
    seed: int = 0
    kind = "blobs"

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        if self.means.shape[0] < 2:
            raise ValidationError("Blobs need at least two class means", param_info=f"means shape = {self.means.shape}")
        if self.scale <= 0:
            raise ValidationError("Blob scale must be positive", param_info=f"scale = {self.scale}")
        c = self.means.shape[0]
        self.priors = np.full(c, 1.0 / c) if self.priors is None else np.asarray(self.priors, dtype=float)
        if self.priors.shape != (c,) or np.any(self.priors < 0) or abs(self.priors.sum() - 1.0) > 1e-12:
            raise ValidationError("Class priors must be a pmf over the classes", param_info=f"priors = {self.priors}")

    @property
    def input_dim(self):
        return self.means.shape[1]

    @property
    def n_classes(self):
        return self.means.shape[0]

    def draw(self, count, rng):
        labels = rng.choice(self.n_classes, size=count, p=self.priors)
        features = self.means[labels] + self.scale * rng.standard_normal((count, self.input_dim))
        return Dataset(features, labels)

    def generate(self, count):
        """A dataset determined entirely by ``seed``."""
        return self.draw(count, np.random.default_rng(self.seed))


def _open(path):
    path = Path(path)
    return gzip.open(path, 'rb') if path.suffix == '.gz' else open(path, 'rb')


def load_idx(path):
    """
    Read an IDX file (big-endian header) into a numpy array.

    Supports unsigned-byte images (magic 0x00000803, three dims) and labels
    (magic 0x00000801, one dim); ``.gz`` files are decompressed on the fly.
    """
    with _open(path) as handle:
        raw = handle.read()
    if len(raw) < 8:
        raise ValidationError("IDX file is too short", param_info=str(path))
    magic = int(np.frombuffer(raw[:4], dtype='>u4')[0])
    if magic not in (IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC):
        raise ValidationError(
            "Unsupported IDX magic number",
            param_info=f"{path}: 0x{magic:08x}",
            suggestion="Expected 0x00000803 (images) or 0x00000801 (labels)."
        )
    ndim = 3 if magic == IDX_IMAGES_MAGIC else 1
    dims = tuple(int(d) for d in np.frombuffer(raw[4:4 + 4 * ndim], dtype='>u4'))
    offset = 4 + 4 * ndim
    expected = int(np.prod(dims))
    if len(raw) - offset < expected:
        raise ValidationError("IDX payload is shorter than its header declares",
                              param_info=f"{path}: dims = {dims}")
    data = np.frombuffer(raw, dtype=np.uint8, count=expected, offset=offset)
    return data.reshape(dims)


def _pool(images, factor):
    if factor == 1:
        return images
    n, h, w = images.shape
    h2, w2 = h // factor, w // factor
    cropped = images[:, :h2 * factor, :w2 * factor]
    return cropped.reshape(n, h2, factor, w2, factor).mean(axis=(2, 4))


class IdxSource(DataSource):
    """
    Points drawn without replacement from an IDX image/label pair.

    Images are scaled by 1/normalization, optionally average-pooled by
    ``pool`` and restricted to the first ``subset`` points and to ``classes``.
    """
    kind = "idx"

    def __init__(self, images_path, labels_path, normalization=255.0, subset=None, pool=1, classes=None):
        images = load_idx(images_path).astype(float) / float(normalization)
        labels = load_idx(labels_path).astype(np.int64)
        if images.shape[0] != labels.shape[0]:
            raise ValidationError("Image and label files differ in length",
                                  param_info=f"{images.shape[0]} images, {labels.shape[0]} labels")
        images = _pool(images, int(pool))
        if classes is not None:
            classes = list(classes)
            keep = np.isin(labels, classes)
            relabel = {c: i for i, c in enumerate(classes)}
            images = images[keep]
            labels = np.array([relabel[int(lab)] for lab in labels[keep]], dtype=np.int64)
        if subset is not None:
            images, labels = images[:subset], labels[:subset]
        self.features = images.reshape(images.shape[0], -1)
        self.labels = labels
        self._classes = int(labels.max()) + 1 if len(labels) else 0
        logger.info(f"Loaded {len(labels)} IDX points of dimension {self.features.shape[1]}")

    @property
    def input_dim(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return self._classes

    def draw(self, count, rng):
        if count > len(self.labels):
            raise DataExhaustedError(
                "IDX source cannot supply the requested number of points",
                param_info=f"requested {count}, available {len(self.labels)}",
                suggestion="Lower n or raise the subset size."
            )
        index = rng.choice(len(self.labels), size=count, replace=False)
        return Dataset(self.features[index], self.labels[index])


def source_from_dict(config):
    """Build a data source from a JSON-style config."""
    kind = config.get("kind", "blobs")
    if kind == "blobs":
        if "means" in config:
            means = config["means"]
        else:
            dim = int(config.get("input_dim", 2))
            classes = int(config.get("n_classes", 2))
            separation = float(config.get("separation", 1.0))
            means = np.zeros((classes, dim))
            for c in range(classes):
                means[c, c % dim] = separation * (1 if c < dim else -1)
        return SyntheticBlobs(means, float(config.get("scale", 1.0)), config.get("priors"), int(config.get("seed", 0)))
    if kind == "idx":
        try:
            return IdxSource(config["images"], config["labels"], config.get("normalization", 255.0),
                             config.get("subset"), config.get("pool", 1), config.get("classes"))
        except KeyError as e:
            raise ValidationError(f"IDX source config is missing key {e}")
    raise ValidationError(f"Unknown data source kind: {kind}", suggestion="Use 'blobs' or 'idx'.")
