"""Task-free data streams: latent-task splits delivered as ordered minibatches.

Sources: synthetic Gaussian-blob tasks, or raw IDX image/label files split
into disjoint latent tasks. Task identity is carried on samples for
evaluation bookkeeping only; the training path never reads it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .nnet import Batch


class ConfigError(ValueError):
    pass


class IdxFormatError(ValueError):
    pass


@dataclass
class Sample:
    x: np.ndarray
    y: int
    task: int


@dataclass
class StreamSpec:
    source: str = "synthetic"          # "synthetic" | "idx"
    tasks: int = 5
    classes_per_task: int = 2
    samples_per_task: int = 1000
    batch_size: int = 10
    seed: int = 0
    # synthetic only
    dim: int = 16
    spread: float = 2.0                # std of the seeded class means
    noise: float = 0.5                 # per-class isotropic blob std
    # idx only
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None

    def validate(self):
        if self.source not in ("synthetic", "idx"):
            raise ConfigError(f"unknown stream source {self.source!r}")
        if self.tasks < 1 or self.classes_per_task < 1 or self.batch_size < 1:
            raise ConfigError("tasks, classes_per_task and batch_size must be >= 1")
        if self.source == "synthetic":
            if self.samples_per_task < 5 or self.dim < 1:
                raise ConfigError("need samples_per_task >= 5 and dim >= 1")
            if self.noise < 0 or self.spread < 0:
                raise ConfigError("spread and noise must be nonnegative")
        else:
            if not self.images or not self.labels:
                raise ConfigError("idx source needs images and labels paths")


@dataclass
class StreamData:
    """Single-pass batch sequence plus one held-out test set per task."""

    batches: list[Batch]
    test_sets: list[tuple[np.ndarray, np.ndarray]]
    num_classes: int
    dim: int
    domain: tuple[float, float] | None = None


def _chunk(samples: list[Sample], batch_size: int) -> list[Batch]:
    batches = []
    for i in range(0, len(samples), batch_size):
        part = samples[i:i + batch_size]
        batches.append(Batch(
            inputs=np.stack([s.x for s in part]),
            labels=np.array([s.y for s in part], dtype=np.int64),
            tasks=np.array([s.task for s in part], dtype=np.int64),
        ))
    return batches


def make_synthetic_stream(spec: StreamSpec) -> StreamData:
    """Gaussian-blob tasks in arrival order, shuffled within each task.

    Each class is an isotropic blob around a seeded mean; 20% of every task
    is held out for test.
    """
    spec.validate()
    if spec.source != "synthetic":
        raise ConfigError("spec.source must be 'synthetic'")
    rng = np.random.default_rng(np.random.SeedSequence([2026, spec.seed]))
    C = spec.tasks * spec.classes_per_task
    means = rng.normal(0.0, spec.spread, size=(C, spec.dim))

    train: list[Sample] = []
    test_sets = []
    n_train = int(round(0.8 * spec.samples_per_task))
    for t in range(spec.tasks):
        labels = np.arange(t * spec.classes_per_task, (t + 1) * spec.classes_per_task)
        ys = labels[rng.integers(0, len(labels), size=spec.samples_per_task)]
        xs = means[ys] + rng.normal(0.0, spec.noise, size=(spec.samples_per_task, spec.dim))
        order = rng.permutation(spec.samples_per_task)
        xs, ys = xs[order], ys[order]
        train.extend(Sample(x=xs[i], y=int(ys[i]), task=t) for i in range(n_train))
        test_sets.append((xs[n_train:].copy(), ys[n_train:].copy()))
    return StreamData(batches=_chunk(train, spec.batch_size), test_sets=test_sets,
                      num_classes=C, dim=spec.dim, domain=None)


IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


def read_idx(path: str) -> np.ndarray:
    """Parse one IDX file (big-endian, unsigned bytes) into an ndarray.

    Accepts the published image (magic 2051, 3 dims) and label (magic 2049,
    1 dim) layouts. Format errors name the offending byte offset.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated header at byte offset 0")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IDX_IMAGE_MAGIC:
        ndim = 3
    elif magic == IDX_LABEL_MAGIC:
        ndim = 1
    else:
        raise IdxFormatError(f"{path}: bad magic number {magic} at byte offset 0")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"{path}: truncated dimension list at byte offset {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims))
    if len(data) != header + count:
        raise IdxFormatError(
            f"{path}: expected {count} data bytes at byte offset {header}, "
            f"found {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)


def _idx_samples(images_path, labels_path, class_to_task) -> tuple[np.ndarray, np.ndarray]:
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3:
        raise IdxFormatError(f"{images_path}: not an image file")
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: not a label file")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    if y.max() >= len(class_to_task):
        raise ConfigError(f"label {y.max()} outside declared {len(class_to_task)} classes")
    return X, y


def make_split_stream_from_idx(spec: StreamSpec) -> StreamData:
    """Contiguous-label task split of an IDX dataset, pixels scaled to [0, 1].

    With C classes and K tasks, task i holds labels
    [i*C/K, (i+1)*C/K). Tasks arrive in order; samples are shuffled within
    each task; every training sample appears exactly once.
    """
    spec.validate()
    if spec.source != "idx":
        raise ConfigError("spec.source must be 'idx'")
    C = spec.tasks * spec.classes_per_task
    class_to_task = np.repeat(np.arange(spec.tasks), spec.classes_per_task)
    X, y = _idx_samples(spec.images, spec.labels, class_to_task)

    rng = np.random.default_rng(np.random.SeedSequence([2026, spec.seed]))
    train: list[Sample] = []
    test_sets: list[tuple[np.ndarray, np.ndarray]] = []
    has_test = spec.test_images is not None and spec.test_labels is not None
    if has_test:
        Xte, yte = _idx_samples(spec.test_images, spec.test_labels, class_to_task)
    for t in range(spec.tasks):
        mask = class_to_task[y] == t
        Xt, yt = X[mask], y[mask]
        order = rng.permutation(len(yt))
        Xt, yt = Xt[order], yt[order]
        if has_test:
            n_train = len(yt)
            te_mask = class_to_task[yte] == t
            test_sets.append((Xte[te_mask].copy(), yte[te_mask].copy()))
        else:
            n_train = int(round(0.8 * len(yt)))
            test_sets.append((Xt[n_train:].copy(), yt[n_train:].copy()))
        train.extend(Sample(x=Xt[i], y=int(yt[i]), task=t) for i in range(n_train))
    return StreamData(batches=_chunk(train, spec.batch_size), test_sets=test_sets,
                      num_classes=C, dim=X.shape[1], domain=(0.0, 1.0))


def write_idx_images(path: str, images: np.ndarray):
    """Inverse of read_idx for (n, rows, cols) uint8 arrays; used by tests/tools."""
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path: str, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())
