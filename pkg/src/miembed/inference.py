"""Annotation and zero-shot prediction with per-label localization."""

import json
from dataclasses import dataclass

import numpy as np

from miembed.bags import InstanceBag, RegionGeometry
from miembed.embedding import EmbeddingModel, all_bag_label_distances, bag_label_distance
from miembed.semantic_space import LabelSpace


@dataclass(frozen=True)
class PredictionEntry:
    label: str
    distance: float
    instance: int
    geometry: RegionGeometry


@dataclass(frozen=True)
class PredictionList:
    """Ranked (label, distance, argmin instance, geometry) entries for one bag."""

    bag_id: str
    entries: tuple[PredictionEntry, ...]


def predict(model: EmbeddingModel, bag: InstanceBag, space: LabelSpace, k: int) -> PredictionList:
    """Rank every vocabulary label by min-instance distance, keep the top k.

    Each entry carries the argmin instance and its geometry, which
    localizes the image subregion supporting the label.
    """
    if not 1 <= k <= len(space):
        raise ValueError(f"k must be in [1, {len(space)}], got {k}")
    if space.dim != model.semantic_dim:
        raise ValueError(
            f"label space dim {space.dim} != model semantic_dim {model.semantic_dim}"
        )
    dmin, argmin = all_bag_label_distances(model, bag, space.vectors)
    order = np.argsort(dmin, kind="stable")[:k]
    entries = tuple(
        PredictionEntry(
            label=space.names[t],
            distance=float(dmin[t]),
            instance=int(argmin[t]),
            geometry=bag.geometries[int(argmin[t])],
        )
        for t in order
    )
    return PredictionList(bag.bag_id, entries)


def localize_label(model: EmbeddingModel, bag: InstanceBag, label_vec) -> tuple[int, RegionGeometry]:
    """The argmin instance for a label vector and its geometry."""
    best = bag_label_distance(model, bag, label_vec)
    return best.argmin_index, bag.geometries[best.argmin_index]


def zero_shot_predict(
    model: EmbeddingModel, bag: InstanceBag, unseen_space: LabelSpace, k: int
) -> PredictionList:
    """predict() over a vocabulary unseen in training; no retraining."""
    if unseen_space.dim != model.semantic_dim:
        raise ValueError(
            f"unseen label space dim {unseen_space.dim} != model semantic_dim "
            f"{model.semantic_dim}"
        )
    return predict(model, bag, unseen_space, k)


def write_predictions_jsonl(path, prediction_lists) -> None:
    """One JSON object per bag, entries in rank order."""
    with open(path, "w", encoding="utf-8") as fh:
        for plist in prediction_lists:
            obj = {
                "id": plist.bag_id,
                "predictions": [
                    {
                        "label": e.label,
                        "distance": e.distance,
                        "instance": e.instance,
                        "geom": e.geometry.as_list(),
                    }
                    for e in plist.entries
                ],
            }
            fh.write(json.dumps(obj) + "\n")


def read_predictions_jsonl(path) -> list[PredictionList]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries = tuple(
                    PredictionEntry(
                        label=e["label"],
                        distance=float(e["distance"]),
                        instance=int(e["instance"]),
                        geometry=RegionGeometry(*e["geom"]),
                    )
                    for e in obj["predictions"]
                )
                out.append(PredictionList(obj["id"], entries))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: invalid prediction record ({exc})") from None
    return out
