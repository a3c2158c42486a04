"""Seeded synthetic data with known region-to-label structure.

Each bag gets one instance per selected label (a hidden full-rank
generator maps label vectors into feature space, plus optional Gaussian
noise), optional distractor instances pointing at random far-away unit
vectors, and a whole-image instance equal to the mean of the label
instances. The mean construction makes multi-label bags genuinely
ambiguous for a whole-image-only model while remaining separable per
instance, which is what the min-pooled losses exploit.
"""

from dataclasses import dataclass

import numpy as np

from miembed.bags import InstanceBag, RegionGeometry, build_bag
from miembed.semantic_space import LabelSpace

# minimum squared distance between any two label vectors; guarantees that
# hinge margins up to ~0.1 are satisfiable on the unit sphere
MIN_LABEL_SEPARATION = 0.5

_MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int
    semantic_dim: int
    feature_dim: int
    labels_per_bag_range: tuple[int, int]
    num_bags: int
    distractor_instances: int = 0
    noise_sigma: float = 0.0
    seed: int = 0
    # held-out count; None means a 90/10 split (num_bags // 10, at least 1)
    num_heldout: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels_per_bag_range", tuple(self.labels_per_bag_range))
        lo, hi = self.labels_per_bag_range
        if self.vocab_size < 1 or self.semantic_dim < 1 or self.feature_dim < 1:
            raise ValueError("vocab_size and dimensions must be positive")
        if not 1 <= lo <= hi <= self.vocab_size:
            raise ValueError("labels_per_bag_range must satisfy 1 <= min <= max <= vocab_size")
        if self.num_bags < 2:
            raise ValueError("num_bags must be >= 2 (train and held-out must be non-empty)")
        if self.distractor_instances < 0:
            raise ValueError("distractor_instances must be >= 0")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.num_heldout is not None and not 1 <= self.num_heldout < self.num_bags:
            raise ValueError("num_heldout must leave both splits non-empty")


@dataclass(frozen=True)
class SynthResult:
    """Generated data plus the hidden generator matrix.

    The generator G (feature_dim x semantic_dim) makes the perfect
    recovery model constructively known: any positive multiple of
    pinv(G) embeds noiseless instances exactly onto their labels.
    """

    space: LabelSpace
    train_bags: tuple[InstanceBag, ...]
    heldout_bags: tuple[InstanceBag, ...]
    generator: np.ndarray


def _sample_separated_unit(rng, dim, anchors, min_sq_sep, what):
    """Unit vector at squared distance >= min_sq_sep from every anchor row."""
    for _ in range(_MAX_ATTEMPTS):
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        v /= norm
        if len(anchors) == 0:
            return v
        gaps = ((np.asarray(anchors) - v) ** 2).sum(axis=1)
        if np.min(gaps) >= min_sq_sep:
            return v
    raise ValueError(
        f"could not sample a {what} with squared separation >= {min_sq_sep} "
        f"after {_MAX_ATTEMPTS} attempts; use a larger semantic_dim"
    )


def _region_geometry(slot: int) -> RegionGeometry:
    # distinct 0.4-sided boxes on a 0.02 lattice; passes the default filter
    row, col = divmod(slot, 25)
    if row > 25:
        raise ValueError("too many instances for the synthetic geometry lattice")
    return RegionGeometry(0.02 * col, 0.02 * row, 0.02 * col + 0.4, 0.02 * row + 0.4)


def generate(config: SynthConfig) -> SynthResult:
    """Generate (label space, train bags, held-out bags) for a seed.

    Fixed seeds reproduce the output bitwise. Every bag's ground-truth
    label set is exactly the set of labels that emitted its instances.
    """
    rng = np.random.default_rng(config.seed)

    label_rows: list[np.ndarray] = []
    for _ in range(config.vocab_size):
        label_rows.append(
            _sample_separated_unit(
                rng, config.semantic_dim, label_rows, MIN_LABEL_SEPARATION, "label vector"
            )
        )
    names = tuple(f"label_{i:03d}" for i in range(config.vocab_size))
    space = LabelSpace(names, np.array(label_rows))

    generator = rng.standard_normal((config.feature_dim, config.semantic_dim))
    while np.linalg.matrix_rank(generator) < min(config.feature_dim, config.semantic_dim):
        generator = rng.standard_normal((config.feature_dim, config.semantic_dim))

    lo, hi = config.labels_per_bag_range
    bags = []
    for bag_index in range(config.num_bags):
        count = int(rng.integers(lo, hi + 1))
        chosen = rng.choice(config.vocab_size, size=count, replace=False)
        regions = []
        for slot, label_index in enumerate(chosen):
            feat = generator @ space.vectors[label_index]
            if config.noise_sigma > 0.0:
                feat = feat + config.noise_sigma * rng.standard_normal(config.feature_dim)
            regions.append((feat, _region_geometry(slot)))
        whole = np.mean([feat for feat, _ in regions], axis=0)
        anchors = space.vectors[chosen]
        for d in range(config.distractor_instances):
            direction = _sample_separated_unit(
                rng, config.semantic_dim, anchors, MIN_LABEL_SEPARATION, "distractor direction"
            )
            regions.append((generator @ direction, _region_geometry(len(chosen) + d)))
        bags.append(
            build_bag(
                f"bag_{bag_index:05d}",
                whole,
                regions,
                labels=[names[i] for i in chosen],
            )
        )

    num_heldout = (
        config.num_heldout if config.num_heldout is not None else max(1, config.num_bags // 10)
    )
    order = rng.permutation(config.num_bags)
    heldout_set = set(order[:num_heldout].tolist())
    train = tuple(bag for i, bag in enumerate(bags) if i not in heldout_set)
    heldout = tuple(bag for i, bag in enumerate(bags) if i in heldout_set)
    return SynthResult(space, train, heldout, generator)
