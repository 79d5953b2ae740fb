"""Hausdorff distances between point sets and Mapper graphs as metric measure spaces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mappergw.geometry import DistanceField, as_distance_field
from mappergw.sampling import fmt_float, read_csv_table


@dataclass(frozen=True)
class MetricMeasureSpace:
    """Finite metric space with a probability vector on its points."""

    labels: tuple[str, ...]
    D: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = np.array(self.D, dtype=np.float64)
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        m = len(w)
        if D.shape != (m, m):
            raise ValueError(f"distance matrix shape {D.shape} does not match {m} weights")
        if len(self.labels) != m:
            raise ValueError("one label per point is required")
        if m == 0:
            raise ValueError("empty metric measure space")
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise ValueError("distances must be finite and nonnegative")
        if not np.array_equal(D, D.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(D) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (sum = {w.sum()!r})")
        D.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "w", w)

    @property
    def size(self) -> int:
        return len(self.w)

    def permuted(self, order) -> "MetricMeasureSpace":
        order = np.asarray(order, dtype=np.intp)
        return MetricMeasureSpace(
            tuple(self.labels[i] for i in order), self.D[np.ix_(order, order)], self.w[order]
        )

    def scaled(self, factor: float) -> "MetricMeasureSpace":
        return MetricMeasureSpace(self.labels, self.D * factor, self.w)

    def save(self, stem) -> tuple[Path, Path]:
        """Write ``<stem>.csv`` (matrix) and ``<stem>.json`` (labels, weights)."""
        stem = Path(stem)
        csv_path = stem.with_suffix(".csv")
        json_path = stem.with_suffix(".json")
        with csv_path.open("w") as fh:
            fh.write(",".join(f"c{j}" for j in range(self.size)) + "\n")
            for row in self.D:
                fh.write(",".join(fmt_float(x) for x in row) + "\n")
        meta = {"matrix": csv_path.name, "labels": list(self.labels), "weights": self.w.tolist()}
        json_path.write_text(json.dumps(meta, indent=2) + "\n")
        return csv_path, json_path

    @classmethod
    def load(cls, json_path) -> "MetricMeasureSpace":
        json_path = Path(json_path)
        meta = json.loads(json_path.read_text())
        _, D = read_csv_table(json_path.parent / meta["matrix"])
        return cls(tuple(meta["labels"]), D, np.array(meta["weights"], dtype=np.float64))


def _directed(dist: DistanceField, A: np.ndarray, B: np.ndarray) -> float:
    return float(dist.nearest(B, queries=A).max())


def hausdorff(A, B, ambient) -> float:
    """Hausdorff distance between two sets of point ids.

    A nonempty set is at distance Diam (the diameter of the whole cloud) from
    the empty set; two empty sets are at distance 0.
    """
    dist = as_distance_field(ambient)
    A = np.asarray(list(A) if not isinstance(A, np.ndarray) else A, dtype=np.intp)
    B = np.asarray(list(B) if not isinstance(B, np.ndarray) else B, dtype=np.intp)
    if A.size == 0 and B.size == 0:
        return 0.0
    if A.size == 0 or B.size == 0:
        return dist.diameter()
    return max(_directed(dist, A, B), _directed(dist, B, A))


def hausdorff_matrix(sets, ambient) -> np.ndarray:
    """Pairwise Hausdorff distances between nonempty id sets."""
    dist = as_distance_field(ambient)
    sets = [np.asarray(s, dtype=np.intp) for s in sets]
    m = len(sets)
    if any(s.size == 0 for s in sets):
        raise ValueError("hausdorff_matrix expects nonempty sets")
    union = np.unique(np.concatenate(sets)) if m else np.zeros(0, dtype=np.intp)
    pos = np.full(dist.n, -1, dtype=np.intp)
    pos[union] = np.arange(union.size)
    # directed[t, s] = sup over points of set t of the distance to set s
    directed = np.zeros((m, m))
    for s in range(m):
        near = dist.nearest(sets[s], queries=union)
        for t in range(m):
            if t != s:
                directed[t, s] = near[pos[sets[t]]].max()
    H = np.maximum(directed, directed.T)
    np.fill_diagonal(H, 0.0)
    return H


def mapper_to_mm(mapper, ambient) -> MetricMeasureSpace:
    """(simplices with positive mass, Hausdorff distance, pushforward of the empirical measure)."""
    masses = mapper.masses
    keep = np.flatnonzero(masses > 0)
    if keep.size == 0:
        raise ValueError("every simplex representative is empty")
    dist = as_distance_field(ambient)
    if dist.n != mapper.n_points:
        raise ValueError("ambient distances and Mapper were built on different clouds")
    labels = mapper.labels()
    D = hausdorff_matrix([mapper.representatives[s] for s in keep], dist)
    w = masses[keep]
    return MetricMeasureSpace(tuple(labels[s] for s in keep), D, w / w.sum())
