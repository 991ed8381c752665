"""Appearance model learned from tracker-generated pseudo-labels.

The recipe:

1. Run the motion-only tracker over every unlabeled sequence on its own.
2. Give every surviving tracklet its own class label, never shared across
   sequences or across tracklets of one sequence.
3. Fit a one-hidden-layer classifier to those labels with softmax
   cross-entropy; the normalized hidden activation is the appearance embedding.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ValidationError
from .motio import LabelRecord, SequenceBundle, validate_labels
from .trackers import SortConfig, SortTracker, annotate_identities, run_tracker

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"TRID"
CHECKPOINT_VERSION = 1


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    min_tracklet_length: int = 2
    weight_decay: float = 1e-4
    hidden_dim: int = 128

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class EmbeddingModel:
    w1: np.ndarray  # (hidden, input)
    b1: np.ndarray
    w2: np.ndarray  # (classes, hidden)
    b2: np.ndarray
    zero_fallbacks: int = field(default=0, compare=False)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def class_count(self) -> int:
        return self.w2.shape[0]

    def params(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def hidden(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x @ self.w1.T + self.b1, 0.0)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.hidden(x) @ self.w2.T + self.b2


@dataclass
class TrainResult:
    model: EmbeddingModel
    epoch_losses: list
    train_accuracy: float


# ---------------------------------------------------------------- labels


def _check_names(sequences: Sequence[SequenceBundle]) -> None:
    names = [s.name for s in sequences]
    if len(set(names)) != len(names):
        raise ValidationError("sequence names must be unique to serve as video ids")


def tracklets(bundle: SequenceBundle, sort_config: SortConfig | None = None) -> list[list[int]]:
    """Detection positions (into ``bundle.detections``) of each SORT tracklet, by track id."""
    out = run_tracker(SortTracker(sort_config or SortConfig()), bundle)
    by_frame: dict[int, list[int]] = {}
    for pos, d in enumerate(bundle.detections):
        by_frame.setdefault(d.frame_index, []).append(pos)
    return [[by_frame[f][i] for f, i in t.detections] for t in out.tracks]


def _records(video_id, groups, bundle, min_length, first_label):
    records, label = [], first_label
    for group in groups:
        if len(group) < min_length:
            continue
        for pos in group:
            d = bundle.detections[pos]
            records.append(LabelRecord(video_id, label, d.frame_index, d.bbox, d.feature))
        label += 1
    return records, label


def generate_labels(
    sequences: Sequence[SequenceBundle],
    sort_config: SortConfig | None = None,
    min_tracklet_length: int = 2,
) -> list[LabelRecord]:
    """One class per tracklet; labels run contiguously from 0 in sequence order."""
    _check_names(sequences)
    records, next_label = [], 0
    for bundle in sequences:
        recs, next_label = _records(
            bundle.name, tracklets(bundle, sort_config), bundle, min_tracklet_length, next_label
        )
        records.extend(recs)
    validate_labels(records)
    return records


def labels_from_ground_truth(
    sequences: Sequence[SequenceBundle], min_tracklet_length: int = 2
) -> list[LabelRecord]:
    """Supervised counterpart: one class per ground-truth identity per sequence."""
    _check_names(sequences)
    records, next_label = [], 0
    for bundle in sequences:
        ids = annotate_identities(bundle)
        groups: dict[int, list[int]] = {}
        for pos, gid in enumerate(ids):
            if gid is not None:
                groups.setdefault(gid, []).append(pos)
        recs, next_label = _records(
            bundle.name, [groups[k] for k in sorted(groups)], bundle, min_tracklet_length, next_label
        )
        records.extend(recs)
    validate_labels(records)
    return records


# ---------------------------------------------------------------- model


def init_model(input_dim: int, hidden_dim: int, class_count: int, rng: np.random.Generator) -> EmbeddingModel:
    """He-initialized hidden layer; zero output layer so the initial loss is exactly ln K."""
    return EmbeddingModel(
        w1=rng.standard_normal((hidden_dim, input_dim)) * math.sqrt(2.0 / input_dim),
        b1=np.zeros(hidden_dim),
        w2=np.zeros((class_count, hidden_dim)),
        b2=np.zeros(class_count),
    )


def loss_and_grads(model: EmbeddingModel, x: np.ndarray, y: np.ndarray, weight_decay: float = 0.0):
    """Mean softmax cross-entropy (+ L2 on weights) and its gradients."""
    n = x.shape[0]
    z1 = x @ model.w1.T + model.b1
    h = np.maximum(z1, 0.0)
    logits = h @ model.w2.T + model.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_norm[:, None]
    loss = -log_p[np.arange(n), y].mean()
    loss += 0.5 * weight_decay * (np.sum(model.w1 ** 2) + np.sum(model.w2 ** 2))

    d_logits = np.exp(log_p)
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    g_w2 = d_logits.T @ h + weight_decay * model.w2
    g_b2 = d_logits.sum(axis=0)
    d_z1 = (d_logits @ model.w2) * (z1 > 0)
    g_w1 = d_z1.T @ x + weight_decay * model.w1
    g_b1 = d_z1.sum(axis=0)
    return float(loss), {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def dataset_arrays(records: Sequence[LabelRecord]) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise TrainingError("label dataset is empty")
    if any(r.feature is None for r in records):
        raise TrainingError("every label record needs an appearance feature")
    dims = {len(r.feature) for r in records}
    if len(dims) != 1:
        raise TrainingError(f"feature dimensions differ: {sorted(dims)}")
    x = np.array([r.feature for r in records], dtype=np.float64)
    y = np.array([r.label for r in records], dtype=np.int64)
    return x, y


def train(records: Sequence[LabelRecord], config: TrainConfig | None = None) -> TrainResult:
    """Mini-batch SGD with momentum and cosine learning-rate decay.

    Batches are class balanced: draw a label uniformly, then one of its records.
    ``epoch_losses`` holds the full-dataset loss after every epoch.
    """
    config = config or TrainConfig()
    x, y = dataset_arrays(records)
    validate_labels(list(records))
    k = int(y.max()) + 1
    if k < 2:
        raise TrainingError("need at least two classes to train")
    rng = np.random.default_rng(config.seed)
    model = init_model(x.shape[1], config.hidden_dim, k, rng)
    members = [np.nonzero(y == c)[0] for c in range(k)]
    sizes = np.array([len(m) for m in members])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    flat = np.concatenate(members)

    steps_per_epoch = max(1, math.ceil(len(y) / config.batch_size))
    total = steps_per_epoch * config.epochs
    velocity = {name: np.zeros_like(p) for name, p in model.params().items()}
    losses = []
    step = 0
    for epoch in range(config.epochs):
        for _ in range(steps_per_epoch):
            labels = rng.integers(0, k, size=config.batch_size)
            picks = flat[offsets[labels] + (rng.random(config.batch_size) * sizes[labels]).astype(np.int64)]
            _, grads = loss_and_grads(model, x[picks], y[picks], config.weight_decay)
            lr = config.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / total))
            for name, param in model.params().items():
                v = velocity[name]
                v *= config.momentum
                v += grads[name]
                param -= lr * v
            step += 1
        loss, _ = loss_and_grads(model, x, y, 0.0)
        if not math.isfinite(loss):
            raise TrainingError(f"loss diverged at epoch {epoch + 1}")
        losses.append(loss)
        log.info("epoch %d/%d loss %.4f", epoch + 1, config.epochs, loss)
    accuracy = float((model.logits(x).argmax(axis=1) == y).mean())
    return TrainResult(model, losses, accuracy)


def embed_many(model: EmbeddingModel, x: np.ndarray) -> np.ndarray:
    """Unit-length hidden activations; an all-zero activation maps to the first basis vector."""
    h = model.hidden(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    norms = np.linalg.norm(h, axis=1)
    dead = norms == 0
    if dead.any():
        model.zero_fallbacks += int(dead.sum())
        h[dead] = 0.0
        h[dead, 0] = 1.0
        norms[dead] = 1.0
    return h / norms[:, None]


def embed(model: EmbeddingModel, feature) -> np.ndarray:
    x = np.asarray(feature, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature must be finite")
    return embed_many(model, x[None, :])[0]


# ---------------------------------------------------------------- checkpoints


def save_model(model: EmbeddingModel, path) -> None:
    """Binary checkpoint; see README for the layout."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<4I", CHECKPOINT_VERSION, model.input_dim, model.hidden_dim, model.class_count
    )
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params().values())
    Path(path).write_bytes(header + body)


def load_model(path) -> EmbeddingModel:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    version, d, h, k = struct.unpack("<4I", data[4:20])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    shapes = [(h, d), (h,), (k, h), (k,)]
    expected = 20 + 8 * sum(math.prod(s) for s in shapes)
    if len(data) != expected:
        raise ValueError(f"{path}: truncated or oversized checkpoint ({len(data)} != {expected} bytes)")
    arrays, offset = [], 20
    for s in shapes:
        n = math.prod(s)
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=offset).astype(np.float64).reshape(s))
        offset += 8 * n
    return EmbeddingModel(*arrays)


# ---------------------------------------------------------------- embedders


def _stable_seed(*parts) -> list[int]:
    return [p if isinstance(p, int) else zlib.crc32(str(p).encode()) for p in parts]


class ModelEmbedder:
    """Learned embeddings (pseudo-label or supervised training)."""

    needs_identities = False
    needs_features = True

    def __init__(self, model: EmbeddingModel):
        self.model = model

    def embed_sequence(self, bundle: SequenceBundle, identities=None) -> list[np.ndarray]:
        x = np.array([d.feature for d in bundle.detections])
        return list(embed_many(self.model, x)) if len(x) else []


class RandomEmbedder:
    """A fresh random unit vector per detection."""

    needs_identities = False
    needs_features = False

    def __init__(self, dim: int = 128, seed: int = 0):
        self.dim, self.seed = dim, seed

    def embed_sequence(self, bundle: SequenceBundle, identities=None) -> list[np.ndarray]:
        rng = np.random.default_rng(_stable_seed(self.seed, bundle.name))
        v = rng.standard_normal((len(bundle.detections), self.dim))
        return list(v / np.linalg.norm(v, axis=1, keepdims=True))


class GenericProjectionEmbedder:
    """Fixed seeded random linear map of the raw feature, normalized.

    Task-agnostic features: the geometry of the raw appearance space is kept,
    nuisance variation included.
    """

    needs_identities = False
    needs_features = True

    def __init__(self, input_dim: int, dim: int = 128, seed: int = 0):
        rng = np.random.default_rng(_stable_seed(seed, "generic", input_dim, dim))
        self.projection = rng.standard_normal((dim, input_dim)) / math.sqrt(dim)

    def embed_sequence(self, bundle: SequenceBundle, identities=None) -> list[np.ndarray]:
        if not bundle.detections:
            return []
        v = np.array([d.feature for d in bundle.detections]) @ self.projection.T
        return list(v / np.linalg.norm(v, axis=1, keepdims=True))


class OracleEmbedder:
    """One-hot per ground-truth identity; unidentified detections get private axes."""

    needs_identities = True
    needs_features = False

    def embed_sequence(self, bundle: SequenceBundle, identities=None) -> list[np.ndarray]:
        if identities is None:
            identities = annotate_identities(bundle)
        known = sorted({i for i in identities if i is not None})
        slot = {gid: n for n, gid in enumerate(known)}
        anonymous = sum(i is None for i in identities)
        dim = max(1, len(known) + anonymous)
        out, extra = [], len(known)
        for gid in identities:
            v = np.zeros(dim)
            if gid is None:
                v[extra] = 1.0
                extra += 1
            else:
                v[slot[gid]] = 1.0
            out.append(v)
        return out


EMBEDDER_KINDS = ("random_per_detection", "generic_projection", "supervised", "oracle")


def baseline_embedder(
    kind: str,
    *,
    input_dim: int | None = None,
    seed: int = 0,
    supervised_sequences: Sequence[SequenceBundle] | None = None,
    train_config: TrainConfig | None = None,
    dim: int = 128,
):
    if kind == "random_per_detection":
        return RandomEmbedder(dim, seed)
    if kind == "generic_projection":
        if input_dim is None:
            raise ValueError("generic_projection needs input_dim")
        return GenericProjectionEmbedder(input_dim, dim, seed)
    if kind == "supervised":
        if not supervised_sequences or any(s.ground_truth is None for s in supervised_sequences):
            raise ValueError("supervised embedder needs sequences with ground truth")
        cfg = train_config or TrainConfig(seed=seed)
        records = labels_from_ground_truth(supervised_sequences, cfg.min_tracklet_length)
        return ModelEmbedder(train(records, cfg).model)
    if kind == "oracle":
        return OracleEmbedder()
    raise ValueError(f"unknown embedder kind {kind!r}; choose from {EMBEDDER_KINDS}")


def apply_embedder(bundle: SequenceBundle, embedder, identities=None) -> SequenceBundle:
    """Copy of ``bundle`` whose detection features are the embedder's output."""
    if getattr(embedder, "needs_identities", False) and identities is None:
        identities = annotate_identities(bundle)
    if getattr(embedder, "needs_features", True):
        missing = [d for d in bundle.detections if d.feature is None]
        if missing:
            raise ValidationError(f"{bundle.name}: {len(missing)} detections have no raw feature")
    vectors = embedder.embed_sequence(bundle, identities)
    dets = [d.with_feature(v) for d, v in zip(bundle.detections, vectors)]
    return dataclasses.replace(bundle, detections=dets)
