"""Filter sweep, torus measure grid, convergence study, A_n diagnostic and classical MDS."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from mappergw.geometry import (
    EUCLIDEAN,
    AmbientMetric,
    DistanceField,
    PointCloud,
    connected_components,
    neighborhood_graph,
)
from mappergw.mapper import EpsilonGraph, KMeans, MapperGraph, build_cover, build_mapper
from mappergw.metric_measure import MetricMeasureSpace, mapper_to_mm
from mappergw.sampling import (
    FilterValues,
    TorusParams,
    fmt_float,
    interpolated_direction,
    linear_filter,
    sample_torus,
)
from mappergw.transport import GWOptions, gw_hat_p

TORUS_GRID = (
    ("a", 1 / 12, 1 / 12),
    ("b", 1 / 12, 1 / 6),
    ("c", 1 / 12, 1 / 3),
    ("d", 1 / 6, 1 / 12),
    ("e", 1 / 6, 1 / 6),
    ("f", 1 / 6, 1 / 3),
    ("g", 1 / 3, 1 / 12),
    ("h", 1 / 3, 1 / 6),
    ("i", 1 / 3, 1 / 3),
)
SYMMETRIC_PAIRS = (("b", "d"), ("c", "g"), ("f", "h"))
HEIGHT = (1.0, 0.0, 0.0)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for a sub-task, stable across runs and thread counts."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def parallel_map(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def mapper_space(cloud: PointCloud, filter: FilterValues, r: int, g: float, clusterer,
                 metric: AmbientMetric = EUCLIDEAN) -> tuple[MapperGraph, MetricMeasureSpace]:
    cover = build_cover(filter, r, g)
    graph = build_mapper(cloud, metric, filter, cover, clusterer)
    return graph, mapper_to_mm(graph, DistanceField.for_cloud(cloud, metric))


# --- classical MDS -----------------------------------------------------------


def classical_mds(D, dim: int = 2) -> np.ndarray:
    """Embed a distance matrix in R^dim by double centering and eigendecomposition."""
    D = np.asarray(D, dtype=np.float64)
    m = D.shape[0]
    if D.shape != (m, m):
        raise ValueError("distance matrix must be square")
    if dim > m:
        raise ValueError(f"cannot embed {m} points in {dim} dimensions")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12) or np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must be symmetric with zero diagonal")
    J = np.eye(m) - 1.0 / m
    B = -0.5 * J @ (D * D) @ J
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    top = np.argsort(vals, kind="stable")[::-1][:dim]
    coords = vecs[:, top] * np.sqrt(np.clip(vals[top], 0.0, None))
    for k in range(dim):
        col = coords[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            coords[:, k] = -col
    return coords


# --- filter sweep ------------------------------------------------------------


@dataclass
class FilterSweepReport:
    ts: list[float]
    sup_norms: list[float]
    gw_values: list[float]
    n_simplices: list[int]
    config: dict = field(default_factory=dict)

    @property
    def spearman(self) -> float:
        return float(stats.spearmanr(self.sup_norms, self.gw_values).statistic)

    def to_dict(self) -> dict:
        return {
            "kind": "filter-sweep",
            "config": self.config,
            "ts": self.ts,
            "sup_norms": self.sup_norms,
            "gw_values": self.gw_values,
            "n_simplices": self.n_simplices,
            "spearman": self.spearman,
        }

    def write(self, out_dir, plots: bool = False) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", self.to_dict())
        write_csv(out / "curve.csv", ["t", "sup_norm", "gw"], zip(self.ts, self.sup_norms, self.gw_values))
        if plots:
            from mappergw.plots import line_svg

            (out / "curve.svg").write_text(
                line_svg(self.sup_norms, self.gw_values, "sup |f_0 - f_t|", "GW_2")
            )


def run_filter_sweep(
    cloud: PointCloud,
    u,
    v,
    ts,
    r: int = 25,
    g: float = 0.3,
    clusterer=None,
    metric: AmbientMetric = EUCLIDEAN,
    solver: GWOptions | None = None,
    threads: int = 1,
) -> FilterSweepReport:
    """Compare the Mapper of f_t(x) = <x, t u + (1 - t) v> against the one of f_0."""
    ts = [float(t) for t in ts]
    if not ts or ts[0] != 0.0 or any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("ts must be sorted and start at 0")
    if any(t < 0 or t > 1 for t in ts):
        raise ValueError("ts must lie in [0, 1]")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    for vec in (u, v):
        if abs(np.linalg.norm(vec) - 1.0) > 1e-9:
            raise ValueError("u and v must be unit vectors")
    clusterer = clusterer or KMeans(3)
    solver = solver or GWOptions(p=2)
    dist = DistanceField.for_cloud(cloud, metric)

    def space(t):
        f = linear_filter(cloud, interpolated_direction(u, v, t))
        graph = build_mapper(cloud, metric, f, build_cover(f, r, g), clusterer)
        return f, mapper_to_mm(graph, dist)

    built = parallel_map(space, ts, threads)
    f0, base = built[0]
    sup_norms = [float(np.max(np.abs(f0.values - f.values))) for f, _ in built]
    gw = parallel_map(lambda item: gw_hat_p(base, item[1], opts=solver).value, built, threads)
    config = {
        "u": u.tolist(), "v": v.tolist(), "r": r, "g": g,
        "clusterer": clusterer.to_dict(), "metric": metric.to_dict(), "solver": solver.to_dict(),
    }
    return FilterSweepReport(ts, sup_norms, gw, [mm.size for _, mm in built], config)


# --- torus grid --------------------------------------------------------------


@dataclass
class GridReport:
    labels: list[str]
    params: list[tuple[float, float]]
    gw_matrix: np.ndarray
    mds_coords: np.ndarray
    n_simplices: list[int]
    config: dict = field(default_factory=dict)

    def value(self, a: str, b: str) -> float:
        return float(self.gw_matrix[self.labels.index(a), self.labels.index(b)])

    def off_diagonal_median(self) -> float:
        m = len(self.labels)
        return float(np.median(self.gw_matrix[np.triu_indices(m, 1)]))

    def mean_distances(self) -> dict[str, float]:
        m = len(self.labels)
        return {lab: float(self.gw_matrix[k].sum() / (m - 1)) for k, lab in enumerate(self.labels)}

    def farthest(self, count: int = 2) -> list[str]:
        means = self.mean_distances()
        return sorted(means, key=lambda lab: (-means[lab], lab))[:count]

    def to_dict(self) -> dict:
        return {
            "kind": "torus-grid",
            "config": self.config,
            "labels": self.labels,
            "params": [{"label": lab, "p": p, "q": q} for lab, (p, q) in zip(self.labels, self.params)],
            "gw_matrix": self.gw_matrix.tolist(),
            "mds_coords": self.mds_coords.tolist(),
            "n_simplices": self.n_simplices,
            "off_diagonal_median": self.off_diagonal_median(),
            "mean_distances": self.mean_distances(),
        }

    def write(self, out_dir, plots: bool = False) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", self.to_dict())
        write_csv(out / "gw_matrix.csv", [""] + self.labels,
                  ([lab, *row] for lab, row in zip(self.labels, self.gw_matrix)))
        write_csv(out / "mds.csv", ["label", "x", "y"],
                  ([lab, *row[:2]] for lab, row in zip(self.labels, self.mds_coords)))
        if plots:
            from mappergw.plots import scatter_svg

            (out / "mds.svg").write_text(scatter_svg(self.mds_coords[:, 0], self.mds_coords[:, 1], self.labels))


def run_torus_grid(
    grid=TORUS_GRID,
    n: int = 20_000,
    r: int = 30,
    g: float = 0.3,
    clusterer=None,
    a: float = 0.75,
    b: float = 0.25,
    solver: GWOptions | None = None,
    seed: int = 42,
    threads: int = 1,
) -> GridReport:
    """Nine torus measures m_{p,q}, their Mappers under the height filter, and the GW matrix.

    ``grid`` is a sequence of ``(label, p, q)``; it defaults to the nine
    cells a..i over {1/12, 1/6, 1/3}².
    """
    if n < 1000:
        raise ValueError("the grid experiment needs n >= 1000 points per cell")
    grid = [(str(lab), float(p), float(q)) for lab, p, q in grid]
    clusterer = clusterer or EpsilonGraph(0.06)
    solver = solver or GWOptions(p=2)

    def cell(k):
        lab, p, q = grid[k]
        cloud = sample_torus(TorusParams(a, b, p, q), n, seed=derive_seed(seed, k))
        _, mm = mapper_space(cloud, linear_filter(cloud, HEIGHT), r, g, clusterer)
        return mm

    spaces = parallel_map(cell, range(len(grid)), threads)
    m = len(grid)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    values = parallel_map(lambda ij: gw_hat_p(spaces[ij[0]], spaces[ij[1]], opts=solver).value, pairs, threads)
    M = np.zeros((m, m))
    for (i, j), val in zip(pairs, values):
        M[i, j] = M[j, i] = val
    config = {
        "n": n, "r": r, "g": g, "a": a, "b": b, "seed": seed,
        "clusterer": clusterer.to_dict(), "solver": solver.to_dict(),
    }
    return GridReport(
        [lab for lab, _, _ in grid], [(p, q) for _, p, q in grid], M,
        classical_mds(M, 2), [s.size for s in spaces], config,
    )


# --- convergence study -------------------------------------------------------


def resolution_schedule(ns, c: float, alpha: float, d: int = 2) -> list[int]:
    return [max(1, int(round(c * n ** (1.0 / (d + alpha))))) for n in ns]


def theoretical_exponent(d: int, p: float, alpha: float) -> float:
    """The exponent -nu / (d + alpha) with nu = min(1/2, d / (p (d + 1)))."""
    nu = min(0.5, d / (p * (d + 1)))
    return -nu / (d + alpha)


@dataclass
class ConvergenceReport:
    ns: list[int]
    r_of_n: list[int]
    gw_values: list[list[float]]  # [n index][trial]
    trials: int
    slope: float
    intercept: float
    target_exponent: float
    reference: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def gw_medians(self) -> list[float]:
        return [float(np.median(v)) for v in self.gw_values]

    def nonincreasing_fraction(self) -> float:
        med = self.gw_medians
        steps = [b <= a for a, b in zip(med, med[1:])]
        return sum(steps) / len(steps) if steps else 1.0

    def to_dict(self) -> dict:
        return {
            "kind": "convergence",
            "config": self.config,
            "reference": self.reference,
            "ns": self.ns,
            "r_of_n": self.r_of_n,
            "trials": self.trials,
            "gw_values": self.gw_values,
            "gw_medians": self.gw_medians,
            "slope": self.slope,
            "intercept": self.intercept,
            "target_exponent": self.target_exponent,
            "nonincreasing_fraction": self.nonincreasing_fraction(),
        }

    def write(self, out_dir, plots: bool = False) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", self.to_dict())
        write_csv(out / "curve.csv", ["n", "r", "median_gw"], zip(self.ns, self.r_of_n, self.gw_medians))
        if plots:
            from mappergw.plots import line_svg

            (out / "convergence.svg").write_text(
                line_svg(np.log(self.ns), np.log(self.gw_medians), "log n", "log median GW")
            )


def loglog_slope(ns, values) -> tuple[float, float]:
    fit = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(values, dtype=float)), 1)
    return float(fit[0]), float(fit[1])


def run_convergence(
    ns=(250, 500, 1000, 2000, 4000),
    trials: int = 5,
    alpha: float = 1.0,
    p: int = 2,
    c: float | None = None,
    g: float = 0.3,
    eps_coef: float = 8.0,
    torus: TorusParams | None = None,
    solver: GWOptions | None = None,
    seed: int = 42,
    threads: int = 1,
) -> ConvergenceReport:
    """GW between Mappers of growing samples and a dense reference Mapper.

    Resolution follows r(n) = round(c n^{1/(d+alpha)}) with d = 2; the
    epsilon-graph clusterer uses eps(n) = eps_coef / sqrt(n). The reference is
    a Mapper on 4 max(ns) points at resolution 4 max r(n).
    """
    ns = [int(x) for x in ns]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing")
    if trials < 3:
        raise ValueError("at least 3 trials are required")
    d = 2
    torus = torus or TorusParams()
    solver = solver or GWOptions(p=p)
    if solver.p != p:
        raise ValueError("solver p does not match the study's p")
    if c is None:
        c = 5.0 / ns[0] ** (1.0 / (d + alpha))
    rs = resolution_schedule(ns, c, alpha, d)

    def eps(n):
        return eps_coef / math.sqrt(n)

    def space(n, r, s):
        cloud = sample_torus(torus, n, seed=s)
        return mapper_space(cloud, linear_filter(cloud, HEIGHT), r, g, EpsilonGraph(eps(n)))[1]

    n_ref, r_ref = 4 * max(ns), 4 * max(rs)
    try:
        reference = space(n_ref, r_ref, derive_seed(seed, 999_999))
    except ValueError as exc:
        raise RuntimeError(f"reference Mapper failed: {exc}") from exc

    jobs = [(k, t) for k in range(len(ns)) for t in range(trials)]

    def job(kt):
        k, t = kt
        mm = space(ns[k], rs[k], derive_seed(seed, k, t))
        return gw_hat_p(mm, reference, opts=solver).value

    flat = parallel_map(job, jobs, threads)
    values = [flat[k * trials:(k + 1) * trials] for k in range(len(ns))]
    medians = [float(np.median(v)) for v in values]
    slope, intercept = loglog_slope(ns, medians)
    config = {
        "ns": ns, "trials": trials, "alpha": alpha, "p": p, "c": c, "g": g, "eps_coef": eps_coef,
        "torus": {"a": torus.a, "b": torus.b, "p": torus.p, "q": torus.q}, "seed": seed,
        "solver": solver.to_dict(),
    }
    return ConvergenceReport(
        ns, rs, values, trials, slope, intercept, theoretical_exponent(d, p, alpha),
        {"n": n_ref, "r": r_ref, "epsilon": eps(n_ref), "n_simplices": reference.size}, config,
    )


# --- approximation error diagnostic -----------------------------------------


@dataclass
class DecompositionDiagnostic:
    A_n: float
    band_delta: float
    p: float
    diameter: float
    per_point: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"A_n": self.A_n, "band_delta": self.band_delta, "p": self.p, "diameter": self.diameter}


def decomposition_diagnostic(
    cloud: PointCloud,
    filter: FilterValues,
    mapper: MapperGraph,
    reference: PointCloud,
    reference_filter: FilterValues,
    band_delta: float,
    p: float = 2,
    epsilon: float | None = None,
) -> DecompositionDiagnostic:
    """Estimate A_n = (1/n sum_i d_H([x_i], Delta(x_i))^p)^(1/p).

    The level-set class [x_i] is approximated on the denser reference sample:
    among reference points whose filter value is within ``band_delta`` of
    f(x_i), take the one nearest to x_i and its connected component in the
    reference epsilon-graph restricted to that band. Distances are Euclidean.
    """
    if not band_delta > 0:
        raise ValueError("band_delta must be positive")
    if mapper.n_points != cloud.n or len(filter) != cloud.n:
        raise ValueError("cloud, filter and Mapper sizes differ")
    if reference.dim != cloud.dim or len(reference_filter) != reference.n:
        raise ValueError("reference cloud and filter are inconsistent")
    if epsilon is None:
        epsilon = 2.0 * band_delta
    graph = neighborhood_graph(reference, epsilon)
    ref_f = reference_filter.values
    order = np.argsort(ref_f, kind="stable")
    sorted_f = ref_f[order]

    per_point = np.empty(cloud.n)
    cache: dict[tuple[int, int], list[np.ndarray]] = {}
    for i in range(cloud.n):
        fx = filter.values[i]
        lo = np.searchsorted(sorted_f, fx - band_delta, side="left")
        hi = np.searchsorted(sorted_f, fx + band_delta, side="right")
        if hi <= lo:
            raise ValueError(f"empty reference band around point {i}")
        key = (int(lo), int(hi))
        if key not in cache:
            cache[key] = connected_components(graph, order[lo:hi])
        comps = cache[key]
        band = order[lo:hi]
        nearest = band[np.argmin(cdist(cloud.points[i:i + 1], reference.points[band])[0])]
        comp = next(cp for cp in comps if np.any(cp == nearest))
        rep = mapper.representatives[mapper.assignment[i]]
        block = cdist(reference.points[comp], cloud.points[rep])
        per_point[i] = max(block.min(axis=1).max(), block.min(axis=0).max())
    A_n = float(np.mean(per_point**p) ** (1.0 / p))
    union = PointCloud(np.vstack([cloud.points, reference.points]))
    return DecompositionDiagnostic(A_n, float(band_delta), float(p),
                                   DistanceField(points=union.points).diameter(), per_point)


# --- output helpers ----------------------------------------------------------


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return fmt_float(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    with Path(path).open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")
