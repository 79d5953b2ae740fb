"""Point clouds, ambient metrics, neighborhood graphs and diameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse import csgraph
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import cdist

# Dense n x n matrices are only materialized below this size.
MAX_DENSE_POINTS = 20_000


@dataclass(frozen=True)
class PointCloud:
    """A finite sample of points in R^D, indexed by ids 0..n-1."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if pts.shape[1] < 1:
            raise ValueError("ambient dimension must be >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    def subset(self, ids) -> "PointCloud":
        return PointCloud(self.points[np.asarray(ids, dtype=np.intp)])

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class AmbientMetric:
    """Either plain Euclidean distance or shortest paths in an epsilon-graph."""

    kind: str = "euclidean"
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "geodesic"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "geodesic":
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError("geodesic metric requires epsilon > 0")

    @classmethod
    def euclidean(cls) -> "AmbientMetric":
        return cls("euclidean")

    @classmethod
    def geodesic(cls, epsilon: float) -> "AmbientMetric":
        return cls("geodesic", float(epsilon))

    def to_dict(self) -> dict:
        if self.kind == "euclidean":
            return {"kind": "euclidean"}
        return {"kind": "geodesic", "epsilon": self.epsilon}


EUCLIDEAN = AmbientMetric.euclidean()


@dataclass(frozen=True)
class NeighborhoodGraph:
    """Undirected epsilon-neighborhood graph stored as a symmetric CSR matrix."""

    n: int
    epsilon: float
    adjacency: csr_matrix = field(repr=False)

    @property
    def edges(self) -> np.ndarray:
        upper = self.adjacency.tocoo()
        keep = upper.row < upper.col
        edges = np.stack([upper.row[keep], upper.col[keep]], axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    def degree(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)


def _check_dense_size(n: int):
    if n > MAX_DENSE_POINTS:
        raise ValueError(
            f"refusing to build a dense {n}x{n} distance matrix (limit {MAX_DENSE_POINTS})"
        )


def _symmetric_csr(n: int, rows: np.ndarray, cols: np.ndarray, weights: np.ndarray) -> csr_matrix:
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    w = np.concatenate([weights, weights])
    return coo_matrix((w, (r, c)), shape=(n, n)).tocsr()


def neighborhood_graph(
    cloud: PointCloud, epsilon: float, distances: np.ndarray | None = None
) -> NeighborhoodGraph:
    """Connect every pair of points at distance <= epsilon.

    Euclidean distances are used unless a precomputed ``distances`` matrix
    is given. Edge weights are the corresponding distances.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = cloud.n
    if distances is None:
        pairs = cKDTree(cloud.points).query_pairs(epsilon, output_type="ndarray")
        rows, cols = pairs[:, 0], pairs[:, 1]
        diff = cloud.points[rows] - cloud.points[cols]
        weights = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    else:
        D = np.asarray(distances, dtype=np.float64)
        if D.shape != (n, n):
            raise ValueError("distance matrix does not match the cloud size")
        rows, cols = np.nonzero(np.triu(D <= epsilon, k=1))
        weights = D[rows, cols]
    # csgraph treats stored zeros as missing edges; duplicated points still connect.
    weights = np.maximum(weights, np.finfo(float).tiny)
    return NeighborhoodGraph(n, float(epsilon), _symmetric_csr(n, rows, cols, weights))


def connected_components(graph: NeighborhoodGraph, subset) -> list[np.ndarray]:
    """Connected components of the subgraph induced on ``subset``.

    Components are returned as sorted id arrays, ordered by smallest member.
    """
    ids = np.unique(np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset,
                               dtype=np.intp))
    if ids.size == 0:
        return []
    if ids[0] < 0 or ids[-1] >= graph.n:
        raise IndexError(f"point id out of range 0..{graph.n - 1}")
    sub = graph.adjacency[ids][:, ids]
    _, labels = csgraph.connected_components(sub, directed=False)
    # Relabel by first occurrence so the order follows the smallest member id.
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    return [ids[labels == lab] for lab in order]


def _geodesic_matrix(cloud: PointCloud, epsilon: float) -> np.ndarray:
    graph = neighborhood_graph(cloud, epsilon)
    D = csgraph.shortest_path(graph.adjacency, method="D", directed=False)
    finite = np.isfinite(D)
    if not finite.all():
        far = D[finite].max()
        # Disconnected pairs sit farther than any connected pair.
        D[~finite] = 2.0 * far if far > 0 else 2.0 * epsilon
    np.fill_diagonal(D, 0.0)
    return D


def pairwise_distances(cloud: PointCloud, metric: AmbientMetric = EUCLIDEAN) -> np.ndarray:
    """Dense symmetric matrix of ambient distances."""
    _check_dense_size(cloud.n)
    if metric.kind == "euclidean":
        D = cdist(cloud.points, cloud.points)
        np.fill_diagonal(D, 0.0)
        return np.maximum(D, D.T)
    return _geodesic_matrix(cloud, metric.epsilon)


def _euclidean_diameter(points: np.ndarray) -> float:
    n, dim = points.shape
    if n == 1:
        return 0.0
    if dim == 1:
        return float(points.max() - points.min())
    candidates = points
    if n > 2000 and dim <= 3:
        try:
            candidates = points[ConvexHull(points).vertices]
        except Exception:  # degenerate (flat) clouds
            candidates = points
    best = 0.0
    step = 1024
    for start in range(0, len(candidates), step):
        block = cdist(candidates[start:start + step], candidates)
        best = max(best, float(block.max()))
    return best


def diameter(cloud: PointCloud, metric: AmbientMetric = EUCLIDEAN) -> float:
    """Largest pairwise distance of the cloud (0 for a single point)."""
    if cloud.n == 1:
        return 0.0
    if metric.kind == "euclidean":
        return _euclidean_diameter(cloud.points)
    return float(pairwise_distances(cloud, metric).max())


class DistanceField:
    """Ambient distances between the points of one cloud.

    Wraps either a dense precomputed matrix or Euclidean coordinates, in which
    case distances are evaluated on demand and never stored as an n x n array.
    """

    def __init__(self, matrix: np.ndarray | None = None, points: np.ndarray | None = None):
        if (matrix is None) == (points is None):
            raise ValueError("give exactly one of matrix or points")
        self.matrix = None if matrix is None else np.asarray(matrix, dtype=np.float64)
        self.points = None if points is None else np.asarray(points, dtype=np.float64)
        if self.matrix is not None:
            if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
                raise ValueError("distance matrix must be square")
        self._diameter: float | None = None

    @classmethod
    def for_cloud(cls, cloud: PointCloud, metric: AmbientMetric = EUCLIDEAN) -> "DistanceField":
        if metric.kind == "euclidean":
            return cls(points=cloud.points)
        return cls(matrix=pairwise_distances(cloud, metric))

    @property
    def n(self) -> int:
        return len(self.matrix) if self.matrix is not None else len(self.points)

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if self.matrix is not None:
            return self.matrix[np.ix_(rows, cols)]
        return cdist(self.points[rows], self.points[cols])

    def nearest(self, targets: Sequence[int], queries: Sequence[int] | None = None) -> np.ndarray:
        """Distance from each query point (default: all) to the nearest target."""
        targets = np.asarray(targets, dtype=np.intp)
        if queries is None:
            queries = np.arange(self.n)
        queries = np.asarray(queries, dtype=np.intp)
        if self.matrix is not None:
            return self.matrix[np.ix_(queries, targets)].min(axis=1)
        if len(targets) * len(queries) <= 1 << 16:
            return cdist(self.points[queries], self.points[targets]).min(axis=1)
        dist, _ = cKDTree(self.points[targets]).query(self.points[queries])
        return dist

    def diameter(self) -> float:
        if self._diameter is None:
            if self.matrix is not None:
                self._diameter = float(self.matrix.max()) if self.n > 1 else 0.0
            else:
                self._diameter = _euclidean_diameter(self.points)
        return self._diameter


def as_distance_field(ambient) -> DistanceField:
    if isinstance(ambient, DistanceField):
        return ambient
    if isinstance(ambient, PointCloud):
        return DistanceField(points=ambient.points)
    return DistanceField(matrix=np.asarray(ambient, dtype=np.float64))
