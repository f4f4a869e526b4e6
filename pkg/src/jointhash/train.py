"""Minibatch SGD training and database encoding.

Determinism contract: identical (dataset, config) pairs produce bit-identical
parameters and traces. Parameter init and per-epoch shuffles come from
counter-based Philox streams keyed by (seed, stream), so no global RNG state
is involved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, TrainingDivergedError
from .index import CodeTable
from .model import (
    ModelParams,
    affine_hash,
    binarize,
    class_scores,
    pack_codes,
    predict_labels,
)
from .objective import (
    GradientSet,
    Hyperparams,
    LossParts,
    PairLabelSet,
    grad_params,
    loss_parts,
)

INIT_STREAM = 2**64 - 1
INIT_SCALE = 0.01
DIVERGENCE_LIMIT = 1e12

CHECKPOINT_MAGIC = b"DHCN"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sHIII")
_HYPER = struct.Struct("<dddIIQ")
_EPOCH = struct.Struct("<I")


def _stream_rng(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class TrainConfig:
    """Training-loop settings on top of the objective hyperparameters."""

    hyper: Hyperparams
    lr_decay: float = 1.0
    checkpoint_interval: int = 0
    checkpoint_dir: Path | None = None

    def __post_init__(self):
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError(f"lr decay factor must lie in (0, 1], got {self.lr_decay}")
        if self.checkpoint_interval < 0:
            raise ValueError("checkpoint interval must be >= 0")


@dataclass
class EpochStats:
    """Batch-averaged loss values for one epoch (1-based epoch index)."""

    epoch: int
    total: float
    similarity: float
    label: float


@dataclass
class Checkpoint:
    """Trained parameters plus the hyperparameters that produced them."""

    params: ModelParams
    hyper: Hyperparams
    epoch: int


def build_pair_labels(labels: np.ndarray) -> PairLabelSet:
    """All unordered within-batch pairs, flagged by label equality."""
    return PairLabelSet.from_labels(labels)


def init_params(feature_dim: int, code_bits: int, num_classes: int,
                seed: int) -> ModelParams:
    """Gaussian(0, 0.01) weights, zero biases."""
    rng = _stream_rng(seed, INIT_STREAM)
    return ModelParams(
        hash_weights=rng.normal(0.0, INIT_SCALE, (code_bits, feature_dim)),
        hash_bias=np.zeros(code_bits),
        cls_weights=rng.normal(0.0, INIT_SCALE, (num_classes, code_bits)),
        cls_bias=np.zeros(num_classes),
    )


def sgd_step(params: ModelParams, grads: GradientSet, lr: float) -> ModelParams:
    """One in-place descent step on all four parameter blocks."""
    params.hash_weights -= lr * grads.hash_weights
    params.hash_bias -= lr * grads.hash_bias
    params.cls_weights -= lr * grads.cls_weights
    params.cls_bias -= lr * grads.cls_bias
    return params


def train(dataset, config: TrainConfig) -> tuple[ModelParams, list[EpochStats]]:
    """Run minibatch SGD over the dataset; returns params and per-epoch trace."""
    hyper = config.hyper
    labels = np.asarray(dataset.labels)
    if np.unique(labels).size < 2:
        raise DataError("training requires samples from at least 2 classes")
    n = len(labels)
    params = init_params(dataset.feature_dim, hyper.code_bits,
                         dataset.num_classes, hyper.seed)
    lr = hyper.lr
    trace: list[EpochStats] = []
    for epoch in range(hyper.epochs):
        perm = _stream_rng(hyper.seed, epoch).permutation(n)
        batch_parts: list[LossParts] = []
        for start in range(0, n, hyper.batch_size):
            idx = perm[start:start + hyper.batch_size]
            feats = dataset.features[idx]
            ys = labels[idx]
            parts = loss_parts(feats, ys, params, hyper)
            if not np.isfinite(parts.total) or abs(parts.total) > DIVERGENCE_LIMIT:
                raise TrainingDivergedError(
                    epoch + 1, start // hyper.batch_size, parts.total
                )
            grads = grad_params(feats, ys, params, hyper)
            sgd_step(params, grads, lr)
            batch_parts.append(parts)
        trace.append(EpochStats(
            epoch=epoch + 1,
            total=float(np.mean([p.total for p in batch_parts])),
            similarity=float(np.mean([p.similarity for p in batch_parts])),
            label=float(np.mean([p.label for p in batch_parts])),
        ))
        lr *= config.lr_decay
        if (config.checkpoint_interval > 0 and config.checkpoint_dir is not None
                and (epoch + 1) % config.checkpoint_interval == 0):
            path = Path(config.checkpoint_dir) / f"checkpoint_epoch{epoch + 1:04d}.bin"
            save_checkpoint(Checkpoint(params, hyper, epoch + 1), path)
    return params, trace


def encode_database(params: ModelParams, dataset) -> CodeTable:
    """Hash codes and predicted labels for every item, in dataset order."""
    u = affine_hash(dataset.features, params)
    signs = binarize(u)
    predicted = predict_labels(class_scores(u, params))
    return CodeTable(
        codes=np.atleast_2d(pack_codes(signs)),
        ids=np.arange(len(dataset.labels), dtype=np.int64),
        labels=np.asarray(dataset.labels, dtype=np.int64),
        predicted=np.asarray(predicted, dtype=np.int64),
        code_bits=params.code_bits,
    )


def save_checkpoint(cp: Checkpoint, path) -> None:
    p = cp.params
    h = cp.hyper
    blob = bytearray()
    blob += _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                         p.feature_dim, p.code_bits, p.num_classes)
    for block in p.blocks().values():
        blob += np.ascontiguousarray(block, dtype="<f8").tobytes()
    blob += _HYPER.pack(h.eta, h.beta, h.lr, h.batch_size, h.epochs, h.seed)
    blob += _EPOCH.pack(cp.epoch)
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, d, k, c = _HEADER.unpack_from(raw, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    counts = (k * d, k, c * k, c)
    expected = (_HEADER.size + 8 * sum(counts) + _HYPER.size + _EPOCH.size)
    if len(raw) != expected:
        raise FormatError(
            f"{path}: file length {len(raw)} does not match header "
            f"(expected {expected} bytes)"
        )
    offset = _HEADER.size
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset))
        offset += 8 * count
    eta, beta, lr, batch, epochs, seed = _HYPER.unpack_from(raw, offset)
    offset += _HYPER.size
    (epoch,) = _EPOCH.unpack_from(raw, offset)
    params = ModelParams(
        hash_weights=arrays[0].reshape(k, d).copy(),
        hash_bias=arrays[1].copy(),
        cls_weights=arrays[2].reshape(c, k).copy(),
        cls_bias=arrays[3].copy(),
    )
    hyper = Hyperparams(eta=eta, beta=beta, lr=lr, code_bits=k,
                        batch_size=batch, epochs=epochs, seed=seed)
    return Checkpoint(params=params, hyper=hyper, epoch=epoch)
