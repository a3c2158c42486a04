"""Mini-batch SGD with momentum, step learning-rate policy and weight decay."""

import json
import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from miembed import kernels, losses
from miembed.bags import InstanceBag
from miembed.embedding import EmbeddingModel, init_model
from miembed.losses import LossConfig, evaluate_pairs, resolve_pair_indices
from miembed.semantic_space import LabelSpace


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults follow the reference recipe
    (momentum 0.9, batch 100, initial LR 0.1 with a step policy,
    weight decay 0.0005)."""

    loss: LossConfig
    epochs: int
    batch_size: int = 100
    momentum: float = 0.9
    initial_lr: float = 0.1
    lr_step_epochs: int = 10
    lr_gamma: float = 0.1
    weight_decay: float = 0.0005
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not self.initial_lr > 0.0:
            raise ValueError("initial_lr must be positive")
        if self.lr_step_epochs < 1:
            raise ValueError("lr_step_epochs must be >= 1")
        if not 0.0 < self.lr_gamma < 1.0:
            raise ValueError("lr_gamma must be in (0, 1)")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_batch_loss: float
    learning_rate: float
    seconds: float


@dataclass(frozen=True)
class TrainHistory:
    records: tuple[EpochRecord, ...]


class NonGenericPointError(ValueError):
    """The evaluation point has a hinge, argmin or rank tie too close to
    a nondifferentiable boundary; perturb the model and retry."""


def learning_rate_for_epoch(config: TrainConfig, epoch: int) -> float:
    """LR for a 1-based epoch index under the step policy."""
    drops = (epoch - 1) // config.lr_step_epochs
    return config.initial_lr * config.lr_gamma**drops


def known_positives(bag: InstanceBag, space: LabelSpace) -> tuple[str, ...]:
    """The bag's ground-truth labels restricted to the vocabulary, in
    vocabulary order."""
    return tuple(name for name in space.names if name in bag.labels)


def _validate_dataset(dataset: Sequence[InstanceBag], space: LabelSpace):
    if not dataset:
        raise ValueError("dataset is empty")
    feature_dim = dataset[0].feature_dim
    positives = []
    for bag in dataset:
        if bag.feature_dim != feature_dim:
            raise ValueError(
                f"bag {bag.bag_id!r} has feature_dim {bag.feature_dim}, "
                f"expected {feature_dim}"
            )
        pos = known_positives(bag, space)
        if not pos:
            raise ValueError(
                f"bag {bag.bag_id!r} has no ground-truth label in the vocabulary"
            )
        positives.append(pos)
    return feature_dim, positives


def train(
    dataset: Sequence[InstanceBag],
    space: LabelSpace,
    config: TrainConfig,
    initial_model: EmbeddingModel | None = None,
) -> tuple[EmbeddingModel, TrainHistory]:
    """Train an embedding model over the dataset.

    Each epoch shuffles (seeded), partitions into batches, and applies
    the momentum update v <- momentum*v - lr*(g_mean + weight_decay*W),
    W <- W + v, with g_mean the batch-mean loss gradient. Identical
    inputs and seed reproduce histories and weights bitwise.
    """
    feature_dim, positives = _validate_dataset(dataset, space)
    rng = np.random.default_rng(config.seed)
    if initial_model is None:
        model = init_model(feature_dim, space.dim, rng)
    else:
        if initial_model.feature_dim != feature_dim or initial_model.semantic_dim != space.dim:
            raise ValueError("initial_model dimensions do not match dataset/space")
        model = EmbeddingModel(initial_model.weight.copy())
    weight = model.weight
    velocity = np.zeros_like(weight)
    loss_fn = losses._LOSS_FUNCTIONS[config.loss.kind]

    records = []
    num_bags = len(dataset)
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        lr = learning_rate_for_epoch(config, epoch)
        order = rng.permutation(num_bags)
        batch_means = []
        for batch_index, batch_start in enumerate(range(0, num_bags, config.batch_size)):
            batch = order[batch_start : batch_start + config.batch_size]
            grad_sum = np.zeros_like(weight)
            value_sum = 0.0
            for bag_index in batch:
                out = loss_fn(
                    model, dataset[bag_index], space, positives[bag_index], config.loss, rng
                )
                value_sum += out.value
                grad_sum += out.grad
            batch_value = value_sum / batch.size
            batch_grad = grad_sum / batch.size
            if not (np.isfinite(batch_value) and np.all(np.isfinite(batch_grad))):
                raise ValueError(
                    f"non-finite loss or gradient at epoch {epoch}, batch {batch_index}"
                )
            velocity *= config.momentum
            velocity -= lr * (batch_grad + config.weight_decay * weight)
            weight = weight + velocity
            model = EmbeddingModel(weight)
            batch_means.append(batch_value)
        records.append(
            EpochRecord(
                epoch=epoch,
                mean_batch_loss=float(np.mean(batch_means)),
                learning_rate=lr,
                seconds=time.perf_counter() - start,
            )
        )
    return model, TrainHistory(tuple(records))


def write_history_jsonl(history: TrainHistory, path) -> None:
    """Write one epoch record per line.

    Wall-clock seconds are kept in memory only so that repeated runs
    with the same seed emit byte-identical files.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for rec in history.records:
            fh.write(
                json.dumps(
                    {
                        "epoch": rec.epoch,
                        "mean_batch_loss": rec.mean_batch_loss,
                        "learning_rate": rec.learning_rate,
                    }
                )
                + "\n"
            )


def _genericity_gaps(model, bag, space, pos_idx, neg_idx, config: LossConfig):
    """Smallest |gap| to each nondifferentiable boundary at this point."""
    whole_only = config.kind == "whole_image_ranking"
    status, emb, _ = kernels.active().embed_features(model.weight, bag.features)
    if status >= 0:
        raise ValueError(
            f"bag {bag.bag_id!r} instance {status} has zero pre-normalization norm"
        )
    diff = emb[:, None, :] - space.vectors[None, :, :]
    dists = np.einsum("itd,itd->it", diff, diff)
    if whole_only:
        dmin = dists[0]
        argmin_gap = np.inf
    else:
        dmin = dists.min(axis=0)
        if dists.shape[0] > 1:
            two = np.sort(dists, axis=0)[:2]
            argmin_gap = float(np.min(two[1] - two[0]))
        else:
            argmin_gap = np.inf
    hinge_gap = float(
        np.min(np.abs(config.margin + dmin[pos_idx][:, None] - dmin[neg_idx][None, :]))
    )
    rank_gap = np.inf
    if config.kind == "mie_rank_weighted":
        if config.exclude_positives_from_rank:
            cand = np.array(
                [i for i in range(len(space)) if i not in set(pos_idx.tolist())],
                dtype=np.intp,
            )
        else:
            cand = np.arange(len(space), dtype=np.intp)
        for j in pos_idx:
            others = cand[cand != j]
            if others.size:
                rank_gap = min(rank_gap, float(np.min(np.abs(dmin[others] - dmin[j]))))
    return hinge_gap, argmin_gap, rank_gap


def finite_difference_check(
    model: EmbeddingModel,
    bag: InstanceBag,
    space: LabelSpace,
    positives,
    config: LossConfig,
    step: float = 1e-5,
    *,
    max_entries: int = 200,
    genericity_tol: float = 1e-6,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The point must be generic: no hinge within genericity_tol of zero,
    argmins unique by genericity_tol, and (for the rank-weighted loss)
    no rank tie within genericity_tol. Entries are checked exhaustively
    up to max_entries, else a seeded random subset of max_entries.
    """
    pos_idx, neg_idx = resolve_pair_indices(space, positives, config, rng)
    hinge_gap, argmin_gap, rank_gap = _genericity_gaps(
        model, bag, space, pos_idx, neg_idx, config
    )
    if min(hinge_gap, argmin_gap, rank_gap) < genericity_tol:
        raise NonGenericPointError(
            "evaluation point is non-generic "
            f"(hinge gap {hinge_gap:.2e}, argmin gap {argmin_gap:.2e}, "
            f"rank gap {rank_gap:.2e} vs tolerance {genericity_tol:.0e}); "
            "perturb the model and retry"
        )

    kwargs = dict(
        whole_image_only=config.kind == "whole_image_ranking",
        rank_weighted=config.kind == "mie_rank_weighted",
        exclude_positives=config.exclude_positives_from_rank,
    )
    analytic = evaluate_pairs(
        model, bag, space, pos_idx, neg_idx, config.margin, **kwargs
    ).grad

    total = model.weight.size
    if total <= max_entries:
        entries = np.arange(total)
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        entries = np.sort(rng.choice(total, size=max_entries, replace=False))

    flat = model.weight.reshape(-1)
    max_rel = 0.0
    for idx in entries:
        for sign in (+1.0, -1.0):
            probe = flat.copy()
            probe[idx] += sign * step
            probed = EmbeddingModel(probe.reshape(model.weight.shape))
            value = evaluate_pairs(
                probed, bag, space, pos_idx, neg_idx, config.margin, **kwargs
            ).value
            if sign > 0:
                plus = value
            else:
                minus = value
        numeric = (plus - minus) / (2.0 * step)
        a = float(analytic.reshape(-1)[idx])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel
