"""Continuous label space: named labels with unit-norm semantic vectors."""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

# conventional word-vector dimensionality; any dim >= 1 is accepted
DEFAULT_SEMANTIC_DIM = 300

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class LabelSpace:
    """Ordered label vocabulary with unit-normalized semantic vectors."""

    names: tuple[str, ...]
    vectors: np.ndarray  # (len(names), dim) float64, rows unit norm

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "names", tuple(self.names))
        if vectors.ndim != 2:
            raise ValueError("label vectors must form a 2-d array")
        if len(self.names) != vectors.shape[0]:
            raise ValueError("names and vectors disagree in length")
        if vectors.shape[0] == 0:
            raise ValueError("label space must contain at least one label")
        if vectors.shape[1] < 1:
            raise ValueError("semantic dimensionality must be >= 1")
        seen = set()
        for name in self.names:
            if not name:
                raise ValueError("label names must be non-empty")
            if name in seen:
                raise ValueError(f"duplicate label name: {name!r}")
            seen.add(name)
        norms = np.linalg.norm(vectors, axis=1)
        if not np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL):
            bad = self.names[int(np.argmax(np.abs(norms - 1.0)))]
            raise ValueError(f"label vector for {bad!r} is not unit norm")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValueError(f"unknown label: {name!r}") from None

    def vector(self, name: str) -> np.ndarray:
        return self.vectors[self.index_of(name)]


def load_label_space(records: Iterable[tuple[str, Sequence[float]]]) -> LabelSpace:
    """Build a LabelSpace from (name, raw vector) records.

    Each raw vector is divided by its Euclidean norm; insertion order is
    preserved. Rejects duplicate names, zero vectors and ragged
    dimensionalities.
    """
    names: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    seen: set[str] = set()
    for name, raw in records:
        if not name:
            raise ValueError("label names must be non-empty")
        if name in seen:
            raise ValueError(f"duplicate label name: {name!r}")
        seen.add(name)
        vec = np.asarray(raw, dtype=np.float64)
        if vec.ndim != 1 or vec.size < 1:
            raise ValueError(f"label {name!r} must have a 1-d vector of length >= 1")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ValueError(
                f"label {name!r} has dimension {vec.size}, expected {dim}"
            )
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError(f"label {name!r} has a zero vector")
        names.append(name)
        rows.append(vec / norm)
    if not names:
        raise ValueError("no label records given")
    return LabelSpace(tuple(names), np.array(rows))


def squared_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Squared Euclidean distance between two equal-length vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    diff = p - q
    return float(np.dot(diff, diff))


def rank_labels_by_distance(
    space: LabelSpace, per_label_distance: Mapping[str, float]
) -> list[str]:
    """Sort the vocabulary ascending by distance.

    Ties break by vocabulary insertion order. Every label in the space
    must have a distance entry; extra entries are ignored.
    """
    distances = np.empty(len(space))
    for i, name in enumerate(space.names):
        if name not in per_label_distance:
            raise ValueError(f"missing distance entry for label {name!r}")
        distances[i] = per_label_distance[name]
    order = np.argsort(distances, kind="stable")
    return [space.names[i] for i in order]


def read_label_file(path) -> list[tuple[str, np.ndarray]]:
    """Parse the tab-separated label file format.

    One label per line: ``name\\tv1\\t...\\tvd``. Lines whose field count
    disagrees with the first line are rejected.
    """
    records: list[tuple[str, np.ndarray]] = []
    expected_fields: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if expected_fields is None:
                if len(fields) < 2:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'name\\tv1...' with at least one value"
                    )
                expected_fields = len(fields)
            elif len(fields) != expected_fields:
                raise ValueError(
                    f"{path}:{lineno}: {len(fields)} fields, expected {expected_fields}"
                )
            try:
                vec = np.array([float(v) for v in fields[1:]])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric vector value") from None
            records.append((fields[0], vec))
    if not records:
        raise ValueError(f"{path}: empty label file")
    return records


def write_label_file(path, space: LabelSpace) -> None:
    """Write the space in the tab-separated label file format."""
    with open(path, "w", encoding="utf-8") as fh:
        for name, vec in zip(space.names, space.vectors):
            fh.write(name + "\t" + "\t".join(repr(float(v)) for v in vec) + "\n")
