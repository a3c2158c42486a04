"""Bags of instances: one image as a whole-image feature plus subregions."""

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

DEFAULT_MIN_SIDE = 0.3
DEFAULT_MAX_ASPECT = 4.0

GRID_CELLS = 4          # rigid grid used by the fixed-subregion variant
GRID_MIN_CELL_SIDE = 2  # minimum width/height of a grid subregion, in cells


@dataclass(frozen=True)
class RegionGeometry:
    """Axis-aligned rectangle in [0,1] image-relative coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for field in ("x0", "y0", "x1", "y1"):
            object.__setattr__(self, field, float(getattr(self, field)))
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise ValueError(
                f"invalid geometry ({self.x0}, {self.y0}, {self.x1}, {self.y1}): "
                "need 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1"
            )

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


WHOLE_IMAGE = RegionGeometry(0.0, 0.0, 1.0, 1.0)


def passes_region_filter(
    geometry: RegionGeometry,
    min_side: float = DEFAULT_MIN_SIDE,
    max_aspect: float = DEFAULT_MAX_ASPECT,
) -> bool:
    """True iff both sides reach min_side and the aspect ratio stays
    within 1:max_aspect .. max_aspect:1."""
    if not 0.0 < min_side <= 1.0:
        raise ValueError("min_side must be in (0, 1]")
    if max_aspect < 1.0:
        raise ValueError("max_aspect must be >= 1")
    w, h = geometry.width, geometry.height
    return (
        w >= min_side
        and h >= min_side
        and w / h <= max_aspect
        and h / w <= max_aspect
    )


@dataclass(frozen=True)
class InstanceBag:
    """One image: instance 0 is always the whole frame."""

    bag_id: str
    features: np.ndarray  # (num_instances, feature_dim) float64
    geometries: tuple[RegionGeometry, ...]
    labels: frozenset[str]

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "geometries", tuple(self.geometries))
        object.__setattr__(self, "labels", frozenset(self.labels))
        if not self.bag_id:
            raise ValueError("bag_id must be non-empty")
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError(f"bag {self.bag_id!r}: features must be a non-empty 2-d array")
        if len(self.geometries) != features.shape[0]:
            raise ValueError(f"bag {self.bag_id!r}: one geometry per instance required")
        if self.geometries[0] != WHOLE_IMAGE:
            raise ValueError(f"bag {self.bag_id!r}: instance 0 must be the whole image")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_instances(self) -> int:
        return self.features.shape[0]


def build_bag(
    bag_id: str,
    whole_image_feature: Sequence[float],
    regions: Sequence[tuple[Sequence[float], RegionGeometry]] = (),
    *,
    min_side: float = DEFAULT_MIN_SIDE,
    max_aspect: float = DEFAULT_MAX_ASPECT,
    labels: Iterable[str] = (),
) -> InstanceBag:
    """Assemble a bag from the whole-image feature plus filtered regions.

    Regions failing the geometric filter are dropped; input order is
    preserved. The whole image is exempt from filtering, so the bag is
    never empty.
    """
    whole = np.asarray(whole_image_feature, dtype=np.float64)
    if whole.ndim != 1 or whole.size < 1:
        raise ValueError(f"bag {bag_id!r}: whole-image feature must be 1-d and non-empty")
    rows = [whole]
    geoms = [WHOLE_IMAGE]
    for index, (feat, geom) in enumerate(regions):
        feat = np.asarray(feat, dtype=np.float64)
        if feat.shape != whole.shape:
            raise ValueError(
                f"bag {bag_id!r}: region {index} feature has length {feat.size}, "
                f"expected {whole.size}"
            )
        if passes_region_filter(geom, min_side, max_aspect):
            rows.append(feat)
            geoms.append(geom)
    return InstanceBag(bag_id, np.array(rows), tuple(geoms), frozenset(labels))


def grid_subregion_geometries() -> tuple[RegionGeometry, ...]:
    """All rectangles on the rigid 4x4 grid with both sides >= 2 cells.

    Ordered row-major by top-left cell, then by (height, width). There
    are 6 placements per axis (3+2+1), hence 36 rectangles overall.
    """
    cell = 1.0 / GRID_CELLS
    out = []
    for row in range(GRID_CELLS):
        for col in range(GRID_CELLS):
            for h in range(GRID_MIN_CELL_SIDE, GRID_CELLS - row + 1):
                for w in range(GRID_MIN_CELL_SIDE, GRID_CELLS - col + 1):
                    out.append(
                        RegionGeometry(col * cell, row * cell, (col + w) * cell, (row + h) * cell)
                    )
    return tuple(out)


def read_bags_jsonl(
    path,
    *,
    min_side: float = DEFAULT_MIN_SIDE,
    max_aspect: float = DEFAULT_MAX_ASPECT,
) -> list[InstanceBag]:
    """Load bags from JSON Lines, applying the region filter to instances 1..n.

    Instance 0 must carry the full-frame geometry [0, 0, 1, 1].
    """
    bags = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            try:
                bag_id = obj["id"]
                labels = obj["labels"]
                instances = obj["instances"]
            except (KeyError, TypeError):
                raise ValueError(
                    f"{path}:{lineno}: bag object needs 'id', 'labels' and 'instances'"
                ) from None
            if not instances:
                raise ValueError(f"{path}:{lineno}: bag {bag_id!r} has no instances")
            first_geom = instances[0].get("geom")
            if first_geom != [0, 0, 1, 1] and first_geom != [0.0, 0.0, 1.0, 1.0]:
                raise ValueError(
                    f"{path}:{lineno}: bag {bag_id!r} instance 0 geometry must be the "
                    f"full frame [0,0,1,1], got {first_geom}"
                )
            try:
                regions = [
                    (inst["feat"], RegionGeometry(*inst["geom"])) for inst in instances[1:]
                ]
                bag = build_bag(
                    bag_id,
                    instances[0]["feat"],
                    regions,
                    min_side=min_side,
                    max_aspect=max_aspect,
                    labels=labels,
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            bags.append(bag)
    return bags


def write_bags_jsonl(path, bags: Iterable[InstanceBag]) -> None:
    """Write bags in the JSON Lines bag format (labels sorted for stable bytes)."""
    with open(path, "w", encoding="utf-8") as fh:
        for bag in bags:
            obj = {
                "id": bag.bag_id,
                "labels": sorted(bag.labels),
                "instances": [
                    {"geom": geom.as_list(), "feat": [float(v) for v in feat]}
                    for feat, geom in zip(bag.features, bag.geometries)
                ],
            }
            fh.write(json.dumps(obj) + "\n")
