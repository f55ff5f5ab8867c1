"""Fit a character encoder (or a linear stand-in) to teacher embeddings.

The objective is the sum over teacher words of ``distance(metric, x^w, student(w))``.
Gradients use the sum; reported losses are per-word means.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .encoder import CharEncoder, encode_backward, encode_word, encode_word_cached
from .errors import DimensionError, TrainingDivergedError
from .metrics import NORM_EPS, DistanceMetric, distance, distance_grad
from .numerics import AdamState, adam_step, clip_global_norm, make_rng

log = logging.getLogger(__name__)

# rng stream ids under the master seed
INIT_STREAM = 0
SHUFFLE_STREAM = 1
DROPOUT_STREAM = 2


@dataclass(frozen=True)
class TrainConfig:
    metric: DistanceMetric = DistanceMetric.D2
    epochs: int = 10
    lr: float = 0.001
    dropout: float = 0.0
    seed: int = 0
    use_highway: bool = False
    batch_size: int = 1
    clip_norm: float = 5.0

    def __post_init__(self):
        if not isinstance(self.metric, DistanceMetric):
            object.__setattr__(self, "metric", DistanceMetric.parse(self.metric))
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class LossTrace:
    losses: list = field(default_factory=list)   # mean loss per word, one per epoch
    seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.losses)

    def to_tsv(self, with_time=False):
        head = "epoch\tmean_loss" + ("\tseconds" if with_time else "")
        rows = [head]
        for i, loss in enumerate(self.losses):
            row = f"{i + 1}\t{loss!r}"
            if with_time:
                row += f"\t{self.seconds[i]:.3f}"
            rows.append(row)
        return "\n".join(rows) + "\n"


class ReconLoss(NamedTuple):
    total: float
    mean: float


def _student_distance(metric, x, student):
    # A rectified student can be exactly zero; cosine is then undefined and the
    # ReLU passes no gradient anyway, so the word counts as orthogonal.
    if metric is DistanceMetric.DCOS and np.linalg.norm(student) <= NORM_EPS:
        return 0.0, np.zeros_like(student)
    return distance(metric, x, student), distance_grad(metric, x, student)


def reconstruction_loss(student, teacher, metric):
    """Sum and per-word mean of the reconstruction distance (inference mode).

    ``student`` is a :class:`CharEncoder` or any callable ``word -> vector``.
    """
    metric = metric if isinstance(metric, DistanceMetric) else DistanceMetric.parse(metric)
    if len(teacher) == 0:
        raise ValueError("empty teacher table")
    if isinstance(student, CharEncoder):
        if student.dim != teacher.dim:
            raise DimensionError(f"encoder dim {student.dim} != teacher dim {teacher.dim}")
        enc = student
        student = lambda w: encode_word(enc, w).output  # noqa: E731
    total = 0.0
    for w, x in teacher.items():
        total += _student_distance(metric, x, np.asarray(student(w), dtype=float))[0]
    return ReconLoss(total, total / len(teacher))


def train_reconstruction(config, teacher, init):
    """Adam on the summed reconstruction loss for ``config.epochs`` passes.

    Returns a trained copy of ``init`` (never mutated) and the loss trace.
    Word order is reshuffled every epoch from ``(seed, SHUFFLE_STREAM, epoch)``;
    dropout masks come from ``(seed, DROPOUT_STREAM, epoch)``.
    """
    if init.dim != teacher.dim:
        raise DimensionError(
            f"character dimension {init.dim} must match teacher embedding dimension {teacher.dim}")
    if len(teacher) == 0:
        raise ValueError("empty teacher table")
    enc = init.copy()
    trace = LossTrace()
    if config.epochs == 0:
        return enc, trace
    params = enc.tensors()
    adam = AdamState()
    words = teacher.words
    metric = config.metric
    for epoch in range(config.epochs):
        start = time.perf_counter()
        order = make_rng(config.seed, SHUFFLE_STREAM, epoch).permutation(len(words))
        drop_rng = make_rng(config.seed, DROPOUT_STREAM, epoch)
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            grads = enc.zero_grads()
            for j in order[lo:lo + config.batch_size]:
                w = words[j]
                out, cache = encode_word_cached(enc, w, True, drop_rng, config.dropout)
                loss, d_out = _student_distance(metric, teacher.vectors[j], out.output)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(f"non-finite loss at epoch {epoch + 1}, word {w!r}")
                total += loss
                encode_backward(enc, cache, d_out, grads)
            clip_global_norm(grads, config.clip_norm)
            adam_step(adam, params, grads, config.lr)
        trace.losses.append(total / len(words))
        trace.seconds.append(time.perf_counter() - start)
        log.info("epoch %d  mean %s loss %.6f  (%.1fs)", epoch + 1, metric, trace.losses[-1], trace.seconds[-1])
    enc.refresh_unk_row()
    return enc, trace


def fit_linear_model(problem, metric, lr=0.1, steps=4000, final_lr=1e-7):
    """Full-batch Adam on the linear student ``h^w = Theta^T z^w``.

    The learning rate decays geometrically from ``lr`` to ``final_lr`` so that
    subgradient oscillation under D1/l-infinity dies out. Starts from zero.
    """
    metric = metric if isinstance(metric, DistanceMetric) else DistanceMetric.parse(metric)
    Z, X = problem.Z, problem.X
    theta = np.zeros((Z.shape[1], X.shape[1]))
    params = {"theta": theta}
    adam = AdamState()
    decay = (final_lr / lr) ** (1.0 / max(steps - 1, 1))
    for step in range(steps):
        H = Z @ theta
        G = np.vstack([distance_grad(metric, X[w], H[w]) for w in range(X.shape[0])])
        adam_step(adam, params, {"theta": Z.T @ G}, lr * decay ** step)
    return theta
