"""Pairwise hinge ranking losses over bags, with exact subgradients.

Three variants share one kernel:

- whole_image_ranking_loss: distances taken from instance 0 only. For
  positives j and negatives k the loss is
  sum_j sum_k max(0, m + D(f(x), y_j) - D(f(x), y_k)).
- mie_loss: each label's distance is the minimum over all instances, so
  the hinge compares min-pooled distances; the subgradient flows through
  each term's argmin instance.
- mie_rank_weighted_loss: each positive's hinge row is scaled by a rank
  weight, 1 while the positive ranks inside the top-#positives of the
  full vocabulary and the rank count otherwise. The weight is a step
  function of the weights and carries no gradient.

All three are pure functions of (model, bag, space, positives, config)
and are safe to evaluate concurrently across bags.
"""

from dataclasses import dataclass

import numpy as np

from miembed import kernels
from miembed.bags import InstanceBag
from miembed.embedding import EmbeddingModel, all_bag_label_distances
from miembed.semantic_space import LabelSpace

LOSS_KINDS = ("whole_image_ranking", "mie", "mie_rank_weighted")


@dataclass(frozen=True)
class LossConfig:
    """Loss selection plus the shared hinge margin.

    negative_cap, when set, samples that many negatives uniformly
    without replacement per evaluation (an rng must then be supplied).
    exclude_positives_from_rank drops other ground-truth positives from
    the rank count of the rank-weighted loss; the default counts every
    other label.
    """

    kind: str = "mie"
    margin: float = 0.1
    negative_cap: int | None = None
    exclude_positives_from_rank: bool = False

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if not self.margin > 0.0:
            raise ValueError("margin must be positive")
        if self.negative_cap is not None and self.negative_cap < 1:
            raise ValueError("negative_cap must be >= 1 when given")


@dataclass(frozen=True)
class LossValueGrad:
    """A loss value and its subgradient with respect to the weight matrix."""

    value: float
    grad: np.ndarray


def resolve_pair_indices(
    space: LabelSpace,
    positives,
    config: LossConfig,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Map positive label names to vocabulary indices and build the
    negative index set (vocabulary minus positives, optionally sampled
    down to negative_cap without replacement)."""
    pos_list = list(dict.fromkeys(positives))
    if not pos_list:
        raise ValueError("positives must be non-empty")
    pos_set = set()
    for name in pos_list:
        pos_set.add(space.index_of(name))
    pos_idx = np.array(sorted(pos_set), dtype=np.intp)
    neg_idx = np.array(
        [i for i in range(len(space)) if i not in pos_set], dtype=np.intp
    )
    if neg_idx.size == 0:
        raise ValueError("negative label set is empty (positives cover the vocabulary)")
    cap = config.negative_cap
    if cap is not None and cap < neg_idx.size:
        if rng is None:
            raise ValueError("negative_cap sampling requires an rng")
        neg_idx = np.sort(rng.choice(neg_idx, size=cap, replace=False)).astype(np.intp)
    return pos_idx, neg_idx


def evaluate_pairs(
    model: EmbeddingModel,
    bag: InstanceBag,
    space: LabelSpace,
    pos_idx: np.ndarray,
    neg_idx: np.ndarray,
    margin: float,
    *,
    whole_image_only: bool = False,
    rank_weighted: bool = False,
    exclude_positives: bool = False,
    force_unit_weights: bool = False,
) -> LossValueGrad:
    """Evaluate the hinge loss for fixed positive/negative index sets."""
    if bag.feature_dim != model.feature_dim:
        raise ValueError(
            f"bag {bag.bag_id!r} has feature_dim {bag.feature_dim}, "
            f"model expects {model.feature_dim}"
        )
    if space.dim != model.semantic_dim:
        raise ValueError(
            f"label space dim {space.dim} != model semantic_dim {model.semantic_dim}"
        )
    grad = np.zeros_like(model.weight)
    status, value = kernels.active().ranking_loss_grad(
        model.weight,
        bag.features,
        space.vectors,
        pos_idx,
        neg_idx,
        margin,
        whole_image_only,
        rank_weighted,
        exclude_positives,
        force_unit_weights,
        grad,
    )
    if status >= 0:
        raise ValueError(
            f"bag {bag.bag_id!r} instance {status} has zero pre-normalization norm"
        )
    return LossValueGrad(float(value), grad)


def whole_image_ranking_loss(
    model, bag, space, positives, config: LossConfig, rng=None
) -> LossValueGrad:
    """Hinge ranking loss using only the whole-image instance."""
    pos_idx, neg_idx = resolve_pair_indices(space, positives, config, rng)
    return evaluate_pairs(
        model, bag, space, pos_idx, neg_idx, config.margin, whole_image_only=True
    )


def mie_loss(model, bag, space, positives, config: LossConfig, rng=None) -> LossValueGrad:
    """Hinge ranking loss on min-over-instances distances."""
    pos_idx, neg_idx = resolve_pair_indices(space, positives, config, rng)
    return evaluate_pairs(model, bag, space, pos_idx, neg_idx, config.margin)


def mie_rank_weighted_loss(
    model,
    bag,
    space,
    positives,
    config: LossConfig,
    rng=None,
    *,
    force_unit_weights: bool = False,
) -> LossValueGrad:
    """Rank-weighted min-pooled hinge loss.

    force_unit_weights is a test hook: the weighted code path runs but
    every weight is pinned to 1, which must reproduce mie_loss.
    """
    pos_idx, neg_idx = resolve_pair_indices(space, positives, config, rng)
    return evaluate_pairs(
        model,
        bag,
        space,
        pos_idx,
        neg_idx,
        config.margin,
        rank_weighted=True,
        exclude_positives=config.exclude_positives_from_rank,
        force_unit_weights=force_unit_weights,
    )


def label_rank(model, bag, space, label: str) -> int:
    """Number of labels t != label whose min-pooled distance is <= label's.

    Ties count; a strictly top-ranked label has rank 0.
    """
    j = space.index_of(label)
    dmin, _ = all_bag_label_distances(model, bag, space.vectors)
    rank = 0
    for t in range(len(space)):
        if t != j and dmin[t] <= dmin[j]:
            rank += 1
    return rank


def rank_weight(rank: int, num_positives: int) -> int:
    """1 while the rank stays inside the top-num_positives, else the rank."""
    if rank < 0:
        raise ValueError("rank must be >= 0")
    if num_positives < 1:
        raise ValueError("num_positives must be >= 1")
    return 1 if rank < num_positives else rank


_LOSS_FUNCTIONS = {
    "whole_image_ranking": whole_image_ranking_loss,
    "mie": mie_loss,
    "mie_rank_weighted": mie_rank_weighted_loss,
}


def evaluate_loss(model, bag, space, positives, config: LossConfig, rng=None) -> LossValueGrad:
    """Dispatch on config.kind."""
    return _LOSS_FUNCTIONS[config.kind](model, bag, space, positives, config, rng)
