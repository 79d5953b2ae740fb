"""Homogeneous covers, pullback clustering and the Mapper graph with simplex masses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse import csgraph

from mappergw.geometry import (
    EUCLIDEAN,
    AmbientMetric,
    NeighborhoodGraph,
    PointCloud,
    connected_components,
    neighborhood_graph,
    pairwise_distances,
)
from mappergw.sampling import FilterValues


@dataclass(frozen=True)
class CoverScheme:
    """Resolution-r cover of [min f, max f] by equal closed intervals with gain g."""

    r: int
    g: float
    min_f: float
    max_f: float
    intervals: np.ndarray = field(repr=False)

    @property
    def width(self) -> float:
        """Maximal width W(r) of the refined cover."""
        return (self.max_f - self.min_f) / self.r

    def membership(self, values) -> np.ndarray:
        """Boolean (n, r) matrix: value i lies in closed interval j."""
        v = np.asarray(values, dtype=np.float64)[:, None]
        return (v >= self.intervals[None, :, 0]) & (v <= self.intervals[None, :, 1])

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "g": self.g,
            "min_f": self.min_f,
            "max_f": self.max_f,
            "intervals": self.intervals.tolist(),
        }


def build_cover(filter, r: int, g: float) -> CoverScheme:
    """Homogeneous cover of resolution ``r`` and gain ``g`` of the filter range.

    ``filter`` is a :class:`FilterValues` or any array of filter values; only
    its minimum and maximum matter.
    """
    values = filter.values if isinstance(filter, FilterValues) else np.asarray(filter, dtype=float)
    if int(r) != r or r < 1:
        raise ValueError(f"resolution must be an integer >= 1 (got {r})")
    if not (0 < g < 0.5):
        raise ValueError(f"gain must lie in (0, 1/2) (got {g})")
    lo, hi = float(np.min(values)), float(np.max(values))
    if not hi > lo:
        raise ValueError("degenerate filter range")
    r = int(r)
    step = (hi - lo) / r
    overhang = g / (2 - 2 * g) * step
    j = np.arange(1, r + 1)
    a = lo + (j - 1) * step - overhang
    b = lo + j * step + overhang
    intervals = np.stack([a, b], axis=1)
    intervals.setflags(write=False)
    return CoverScheme(r, float(g), lo, hi, intervals)


@dataclass(frozen=True)
class RefinedCover:
    """Elementary blocks I_1\\I_2, I_1 & I_2, I_2\\(I_1 u I_3), ... of a cover."""

    pieces: np.ndarray = field(repr=False)  # (2r - 1, 2) closed [lo, hi]
    kinds: tuple[str, ...]

    @property
    def lengths(self) -> np.ndarray:
        return self.pieces[:, 1] - self.pieces[:, 0]

    @property
    def max_width(self) -> float:
        return float(self.lengths.max())

    @property
    def min_width(self) -> float:
        return float(self.lengths.min())

    def piece_index(self, values) -> np.ndarray:
        """Index of the piece holding each value; shared endpoints go to the lower piece."""
        v = np.asarray(values, dtype=np.float64)
        idx = np.searchsorted(self.pieces[:, 1], v, side="left")
        return np.clip(idx, 0, len(self.pieces) - 1)


def refine_cover(cover: CoverScheme) -> RefinedCover:
    a, b = cover.intervals[:, 0], cover.intervals[:, 1]
    pieces, kinds = [], []
    for j in range(cover.r):
        lo = a[j] if j == 0 else b[j - 1]
        hi = b[j] if j == cover.r - 1 else a[j + 1]
        pieces.append((lo, hi))
        kinds.append("plain")
        if j < cover.r - 1:
            pieces.append((a[j + 1], b[j]))
            kinds.append("intersection")
    arr = np.array(pieces, dtype=np.float64)
    arr.setflags(write=False)
    return RefinedCover(arr, tuple(kinds))


# --- clusterers --------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonGraph:
    """Connected components of the epsilon-neighborhood graph."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def to_dict(self) -> dict:
        return {"kind": "epsilon", "epsilon": self.epsilon}


@dataclass(frozen=True)
class KMeans:
    """Lloyd iterations with k-means++ seeding; k is capped at the preimage size."""

    k: int = 3
    max_iter: int = 100
    seed: int = 42
    tol: float = 1e-8

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": "kmeans", "k": self.k, "max_iter": self.max_iter, "seed": self.seed}


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeans_labels(points: np.ndarray, spec: KMeans, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    k = min(int(spec.k), n)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[c] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[c:c + 1])[:, 0])
    for _ in range(spec.max_iter):
        labels = np.argmin(_sq_dists(points, centers), axis=1)
        updated = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                updated[c] = points[members].mean(axis=0)
        shift = float(np.sqrt(((updated - centers) ** 2).sum(axis=1)).max())
        centers = updated
        if shift <= spec.tol:
            break
    return np.argmin(_sq_dists(points, centers), axis=1)


def _group_labels(ids: np.ndarray, labels: np.ndarray) -> list[np.ndarray]:
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    uniq = labels[first[order]]
    return [ids[labels == lab] for lab in uniq]


# --- Mapper graph ------------------------------------------------------------


@dataclass(frozen=True)
class MapperVertex:
    interval: int
    cluster: int
    members: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MapperGraph:
    """1-skeleton of the nerve of the pullback cover, with disjoint representatives.

    Simplices are numbered vertices first, then edges. ``assignment[i]`` is the
    simplex whose representative holds point ``i``.
    """

    n_points: int
    vertices: tuple[MapperVertex, ...]
    edges: tuple[tuple[int, int], ...]
    representatives: tuple[np.ndarray, ...] = field(repr=False)
    assignment: np.ndarray = field(repr=False)
    cover: CoverScheme | None = None

    @property
    def n_simplices(self) -> int:
        return len(self.vertices) + len(self.edges)

    @property
    def masses(self) -> np.ndarray:
        counts = np.array([len(rep) for rep in self.representatives], dtype=np.float64)
        return counts / self.n_points

    def labels(self) -> list[str]:
        out = [f"v{v.interval}.{v.cluster}" for v in self.vertices]
        for u, w in self.edges:
            a, b = self.vertices[u], self.vertices[w]
            out.append(f"e{a.interval}.{a.cluster}-{b.interval}.{b.cluster}")
        return out

    def is_edge(self, simplex: int) -> bool:
        return simplex >= len(self.vertices)

    def betti_1(self) -> int:
        """Number of independent cycles of the graph (E - V + components)."""
        nv = len(self.vertices)
        if nv == 0:
            return 0
        if self.edges:
            e = np.array(self.edges)
            adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(nv, nv))
        else:
            adj = coo_matrix((nv, nv))
        n_comp, _ = csgraph.connected_components(adj, directed=False)
        return len(self.edges) - nv + n_comp

    def check(self) -> None:
        """Raise AssertionError unless the representatives partition the sample."""
        seen = np.zeros(self.n_points, dtype=np.int64)
        for s, rep in enumerate(self.representatives):
            seen[rep] += 1
            assert np.all(self.assignment[rep] == s), "assignment disagrees with representatives"
        assert np.all(seen == 1), "representatives must partition the sample"
        for u, w in self.edges:
            assert u != w, "self edge"
            assert self.vertices[w].interval == self.vertices[u].interval + 1

    def to_dict(self) -> dict:
        labels = self.labels()
        return {
            "n_points": self.n_points,
            "cover": None if self.cover is None else self.cover.to_dict(),
            "vertices": [
                {"interval": v.interval, "cluster": v.cluster, "members": v.members.tolist()}
                for v in self.vertices
            ],
            "edges": [list(e) for e in self.edges],
            "simplices": labels,
            "representatives": [rep.tolist() for rep in self.representatives],
            "masses": self.masses.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MapperGraph":
        n = int(data["n_points"])
        reps = tuple(np.array(r, dtype=np.intp) for r in data["representatives"])
        assignment = np.full(n, -1, dtype=np.intp)
        for s, rep in enumerate(reps):
            assignment[rep] = s
        cover = None
        if data.get("cover"):
            c = data["cover"]
            cover = CoverScheme(int(c["r"]), float(c["g"]), float(c["min_f"]), float(c["max_f"]),
                                np.array(c["intervals"], dtype=np.float64))
        graph = cls(
            n_points=n,
            vertices=tuple(
                MapperVertex(int(v["interval"]), int(v["cluster"]), np.array(v["members"], dtype=np.intp))
                for v in data["vertices"]
            ),
            edges=tuple((int(u), int(w)) for u, w in data["edges"]),
            representatives=reps,
            assignment=assignment,
            cover=cover,
        )
        graph.check()
        return graph

    def to_dot(self) -> str:
        """GraphViz description of the nerve, with masses as attributes."""
        masses = self.masses
        nv = len(self.vertices)
        lines = ["graph mapper {"]
        for i, v in enumerate(self.vertices):
            lines.append(f'  {i} [interval={v.interval}, cluster={v.cluster}, mass="{masses[i]!r}"];')
        for s, (u, w) in enumerate(self.edges):
            lines.append(f'  {u} -- {w} [mass="{masses[nv + s]!r}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _cluster_preimages(cloud, metric, filter_values, cover, clusterer):
    member = cover.membership(filter_values)
    graph: NeighborhoodGraph | None = None
    if isinstance(clusterer, EpsilonGraph):
        distances = None if metric.kind == "euclidean" else pairwise_distances(cloud, metric)
        graph = neighborhood_graph(cloud, clusterer.epsilon, distances=distances)
    elif not isinstance(clusterer, KMeans):
        raise TypeError(f"unsupported clusterer {clusterer!r}")
    clusters = []
    for j in range(cover.r):
        ids = np.flatnonzero(member[:, j])
        if ids.size == 0:
            clusters.append([])
            continue
        if graph is not None:
            clusters.append(connected_components(graph, ids))
        else:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(clusterer.seed), j])))
            labels = kmeans_labels(cloud.points[ids], clusterer, rng)
            clusters.append(_group_labels(ids, labels))
    return clusters


def build_mapper(
    cloud: PointCloud,
    metric: AmbientMetric | None,
    filter: FilterValues,
    cover: CoverScheme,
    clusterer,
) -> MapperGraph:
    """Build the Mapper graph and assign every point to exactly one simplex.

    A vertex is represented by the points of its cluster that lie in no other
    cluster, an edge by the points shared by exactly its two clusters. Because
    the gain is below 1/2 a point lies in at most two clusters, so these
    representatives partition the sample.
    """
    metric = metric or EUCLIDEAN
    values = filter.values if isinstance(filter, FilterValues) else np.asarray(filter, dtype=float)
    n = cloud.n
    if values.shape != (n,):
        raise ValueError(f"filter has {values.size} values for {n} points")
    per_interval = _cluster_preimages(cloud, metric, values, cover, clusterer)

    vertices = []
    first = np.full(n, -1, dtype=np.intp)
    second = np.full(n, -1, dtype=np.intp)
    for j, clusters in enumerate(per_interval):
        for k, members in enumerate(clusters):
            vid = len(vertices)
            vertices.append(MapperVertex(j, k, members))
            free = first[members] < 0
            first[members[free]] = vid
            taken = members[~free]
            if np.any(second[taken] >= 0):
                raise RuntimeError("a point lies in more than two clusters")
            second[taken] = vid
    if np.any(first < 0):
        raise RuntimeError("some points fall outside every cluster")

    nv = len(vertices)
    in_edge = second >= 0
    pair_keys = first[in_edge] * nv + second[in_edge]
    edge_keys = np.unique(pair_keys)
    edges = tuple((int(key // nv), int(key % nv)) for key in edge_keys)

    assignment = first.copy()
    assignment[in_edge] = nv + np.searchsorted(edge_keys, pair_keys)
    order = np.argsort(assignment, kind="stable")
    bounds = np.searchsorted(assignment[order], np.arange(nv + len(edges) + 1))
    reps = tuple(order[bounds[s]:bounds[s + 1]] for s in range(nv + len(edges)))

    return MapperGraph(n, tuple(vertices), edges, reps, assignment, cover)


def delta_map(mapper: MapperGraph, point_id: int) -> int:
    """The simplex whose representative contains ``point_id``."""
    if not 0 <= point_id < mapper.n_points:
        raise IndexError(f"point id {point_id} out of range")
    return int(mapper.assignment[point_id])


def clusterer_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "epsilon":
        return EpsilonGraph(float(spec["epsilon"]))
    if kind == "kmeans":
        return KMeans(int(spec.get("k", 3)), int(spec.get("max_iter", 100)), int(spec.get("seed", 42)))
    raise ValueError(f"unknown clusterer kind {kind!r}")
