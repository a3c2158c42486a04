"""The learnable map into the label space: linear transform + L2 normalization."""

import json
import math
from dataclasses import dataclass

import numpy as np

from miembed import kernels
from miembed.bags import InstanceBag

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EmbeddingModel:
    """Linear map (semantic_dim x feature_dim); embeddings are L2-normalized."""

    weight: np.ndarray

    def __post_init__(self):
        weight = np.ascontiguousarray(self.weight, dtype=np.float64)
        object.__setattr__(self, "weight", weight)
        if weight.ndim != 2 or weight.shape[0] < 1 or weight.shape[1] < 1:
            raise ValueError("weight must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(weight)):
            raise ValueError("weight contains non-finite values")

    @property
    def semantic_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class BagDistance:
    """Minimum squared distance from a bag to a label, with its argmin instance."""

    distance: float
    argmin_index: int


def init_model(feature_dim: int, semantic_dim: int, rng: np.random.Generator) -> EmbeddingModel:
    """Symmetric fan-based uniform init in [-a, a], a = sqrt(6/(fan_in+fan_out))."""
    if feature_dim < 1 or semantic_dim < 1:
        raise ValueError("dimensions must be positive")
    bound = math.sqrt(6.0 / (feature_dim + semantic_dim))
    weight = rng.uniform(-bound, bound, size=(semantic_dim, feature_dim))
    return EmbeddingModel(weight)


def embed_instance(model: EmbeddingModel, feature) -> np.ndarray:
    """Return (W x) / ||W x||, a unit vector of length semantic_dim."""
    feature = np.ascontiguousarray(feature, dtype=np.float64)
    if feature.ndim != 1 or feature.size != model.feature_dim:
        raise ValueError(
            f"feature has length {feature.size}, expected {model.feature_dim}"
        )
    status, emb, _ = kernels.active().embed_features(model.weight, feature[None, :])
    if status >= 0:
        raise ValueError("instance embedding has zero pre-normalization norm")
    return emb[0]


def bag_label_distance(model: EmbeddingModel, bag: InstanceBag, label_vec) -> BagDistance:
    """Min over all bag instances of the squared distance to label_vec.

    Ties resolve to the lowest instance index.
    """
    label_vec = np.ascontiguousarray(label_vec, dtype=np.float64)
    if label_vec.ndim != 1 or label_vec.size != model.semantic_dim:
        raise ValueError(
            f"label vector has length {label_vec.size}, expected {model.semantic_dim}"
        )
    if bag.feature_dim != model.feature_dim:
        raise ValueError(
            f"bag {bag.bag_id!r} has feature_dim {bag.feature_dim}, "
            f"model expects {model.feature_dim}"
        )
    status, dmin, argmin = kernels.active().min_label_distances(
        model.weight, bag.features, label_vec[None, :]
    )
    if status >= 0:
        raise ValueError(
            f"bag {bag.bag_id!r} instance {status} has zero pre-normalization norm"
        )
    return BagDistance(float(dmin[0]), int(argmin[0]))


def all_bag_label_distances(model: EmbeddingModel, bag: InstanceBag, label_matrix):
    """Per-label (min distance, argmin instance) arrays for a whole label matrix."""
    if bag.feature_dim != model.feature_dim:
        raise ValueError(
            f"bag {bag.bag_id!r} has feature_dim {bag.feature_dim}, "
            f"model expects {model.feature_dim}"
        )
    status, dmin, argmin = kernels.active().min_label_distances(
        model.weight, bag.features, label_matrix
    )
    if status >= 0:
        raise ValueError(
            f"bag {bag.bag_id!r} instance {status} has zero pre-normalization norm"
        )
    return dmin, argmin


def save_model(model: EmbeddingModel, path) -> None:
    """Write the model as a JSON object with a row-major flat weight array."""
    obj = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_dim": model.feature_dim,
        "semantic_dim": model.semantic_dim,
        "weight": [float(v) for v in model.weight.reshape(-1)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_model(path) -> EmbeddingModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format_version {version}")
    feature_dim = obj["feature_dim"]
    semantic_dim = obj["semantic_dim"]
    flat = np.asarray(obj["weight"], dtype=np.float64)
    if flat.size != feature_dim * semantic_dim:
        raise ValueError(
            f"{path}: weight length {flat.size} != semantic_dim*feature_dim "
            f"({semantic_dim}*{feature_dim})"
        )
    return EmbeddingModel(flat.reshape(semantic_dim, feature_dim))
