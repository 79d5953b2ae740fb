"""Samplers for the torus measure family, linear filters, and cloud file I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mappergw.geometry import PointCloud

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TorusParams:
    """Torus radii and the masses ``p`` (around phi = pi) and ``q`` (around phi = 0)."""

    a: float = 0.75
    b: float = 0.25
    p: float = 1 / 6
    q: float = 1 / 6

    def __post_init__(self):
        if not (self.a > self.b > 0):
            raise ValueError(f"torus radii must satisfy a > b > 0 (got a={self.a}, b={self.b})")
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise ValueError(f"p and q must lie in (0, 1) (got p={self.p}, q={self.q})")
        if not self.p + self.q < 1:
            raise ValueError(f"p + q < 1 is required (got p + q = {self.p + self.q})")

    def phi_segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints on [0, 2pi] and the mass carried by each constant piece."""
        pi = math.pi
        rest = 1.0 - self.p - self.q
        edges = np.array([0.0, pi / 6, 5 * pi / 6, 7 * pi / 6, 11 * pi / 6, TWO_PI])
        masses = np.array([self.q / 2, rest / 2, self.p, rest / 2, self.q / 2])
        return edges, masses

    def phi_density(self, phi) -> np.ndarray:
        phi = np.mod(np.asarray(phi, dtype=np.float64), TWO_PI)
        edges, masses = self.phi_segments()
        heights = masses / np.diff(edges)
        idx = np.clip(np.searchsorted(edges, phi, side="right") - 1, 0, len(masses) - 1)
        return heights[idx]

    def phi_cdf(self, phi) -> np.ndarray:
        phi = np.clip(np.asarray(phi, dtype=np.float64), 0.0, TWO_PI)
        edges, masses = self.phi_segments()
        return np.interp(phi, edges, np.concatenate([[0.0], np.cumsum(masses)]))


@dataclass(frozen=True)
class FilterValues:
    """Scalar filter evaluated at every point of a cloud."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise ValueError("filter has no values")
        if not np.all(np.isfinite(v)):
            raise ValueError("filter values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def min_f(self) -> float:
        return float(self.values.min())

    @property
    def max_f(self) -> float:
        return float(self.values.max())

    def __len__(self) -> int:
        return self.values.size


def _streams(seed: int, k: int = 2) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(k)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def _sample_phi(params: TorusParams, n: int, rng: np.random.Generator) -> np.ndarray:
    edges, masses = params.phi_segments()
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    u = rng.random(n) * cum[-1]
    seg = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(masses) - 1)
    frac = (u - cum[seg]) / masses[seg]
    return edges[seg] + frac * (edges[seg + 1] - edges[seg])


def _sample_theta(params: TorusParams, n: int, rng: np.random.Generator) -> np.ndarray:
    # Uniform proposal with envelope (a + b) / (2 pi a); acceptance (a + b cos t) / (a + b).
    out = np.empty(n)
    filled = 0
    bound = params.a + params.b
    while filled < n:
        batch = max(1024, int(1.3 * (n - filled)))
        theta = rng.random(batch) * TWO_PI
        accept = rng.random(batch) * bound <= params.a + params.b * np.cos(theta)
        kept = theta[accept][: n - filled]
        out[filled:filled + kept.size] = kept
        filled += kept.size
    return out


def torus_embedding(theta: np.ndarray, phi: np.ndarray, a: float, b: float) -> np.ndarray:
    ring = a + b * np.cos(theta)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), b * np.sin(theta)], axis=1)


def sample_torus_angles(params: TorusParams, n: int, seed: int = 42) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` i.i.d. angle pairs (theta, phi) from m_{p,q}.

    phi comes from the exact inverse CDF of the three-plateau density and theta
    from rejection sampling, each on its own sub-stream of ``seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    phi_rng, theta_rng = _streams(seed)
    return _sample_theta(params, n, theta_rng), _sample_phi(params, n, phi_rng)


def sample_torus(params: TorusParams, n: int, seed: int = 42) -> PointCloud:
    theta, phi = sample_torus_angles(params, n, seed)
    return PointCloud(torus_embedding(theta, phi, params.a, params.b))


def linear_filter(cloud: PointCloud, direction) -> FilterValues:
    """Inner product of every point with ``direction`` (not normalized)."""
    w = np.asarray(direction, dtype=np.float64).reshape(-1)
    if w.size != cloud.dim:
        raise ValueError(f"direction has dimension {w.size}, cloud has {cloud.dim}")
    return FilterValues(cloud.points @ w)


def height_filter(cloud: PointCloud, direction) -> FilterValues:
    w = np.asarray(direction, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector (norm {norm!r})")
    return linear_filter(cloud, w)


def interpolated_direction(u, v, t: float) -> np.ndarray:
    """The direction t*u + (1 - t)*v of the filter family f_t."""
    return t * np.asarray(u, dtype=np.float64) + (1.0 - t) * np.asarray(v, dtype=np.float64)


def sample_mesh_surface(vertices: np.ndarray, faces: np.ndarray, n: int, seed: int = 42) -> PointCloud:
    """Area-weighted uniform sample on a triangle mesh."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.intp)
    if faces.ndim != 2 or faces.shape[1] != 3 or len(faces) == 0:
        raise ValueError("mesh sampling needs triangular faces")
    tri = vertices[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    if area.sum() <= 0:
        raise ValueError("mesh has zero area")
    face_rng, bary_rng = _streams(seed)
    pick = face_rng.choice(len(faces), size=n, p=area / area.sum())
    r1 = np.sqrt(bary_rng.random(n))[:, None]
    r2 = bary_rng.random(n)[:, None]
    t = tri[pick]
    return PointCloud((1 - r1) * t[:, 0] + r1 * (1 - r2) * t[:, 1] + r1 * r2 * t[:, 2])


# --- file formats -----------------------------------------------------------


class CloudFormatError(ValueError):
    pass


def fmt_float(x: float) -> str:
    return "%.17g" % x


def read_csv_table(path) -> tuple[list[str], np.ndarray]:
    """Read a headered numeric CSV; returns (column names, rows)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CloudFormatError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CloudFormatError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise CloudFormatError(f"{path}:{reader.line_num}: non-numeric value") from None
    if not rows:
        raise CloudFormatError(f"{path}: no data rows")
    return header, np.array(rows, dtype=np.float64)


def _coordinate_columns(header: list[str], path) -> list[int]:
    coords = {}
    for i, name in enumerate(header):
        if len(name) > 1 and name[0] == "x" and name[1:].isdigit():
            coords[int(name[1:])] = i
    if not coords:
        raise CloudFormatError(f"{path}:1: header has no x0, x1, ... columns")
    if sorted(coords) != list(range(len(coords))):
        raise CloudFormatError(f"{path}:1: coordinate columns must be x0..x{len(coords) - 1}")
    return [coords[k] for k in range(len(coords))]


def load_csv(path) -> tuple[PointCloud, dict[str, np.ndarray]]:
    """Load a CSV cloud; extra (non-coordinate) columns are returned by name."""
    header, data = read_csv_table(path)
    cols = _coordinate_columns(header, path)
    extras = {name: data[:, i].copy() for i, name in enumerate(header) if i not in cols}
    pts = data[:, cols]
    bad = np.nonzero(~np.all(np.isfinite(pts), axis=1))[0]
    if bad.size:
        raise CloudFormatError(f"{path}:{bad[0] + 2}: non-finite coordinate")
    return PointCloud(pts), extras


def _off_tokens(path):
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0]
            for tok in line.split():
                yield lineno, tok


def load_off(path) -> tuple[PointCloud, np.ndarray]:
    """Parse an OFF mesh; returns the vertex cloud and triangle faces (possibly empty)."""
    tokens = _off_tokens(path)

    def take(kind):
        try:
            lineno, tok = next(tokens)
        except StopIteration:
            raise CloudFormatError(f"{path}: unexpected end of file") from None
        try:
            return lineno, kind(tok)
        except ValueError:
            raise CloudFormatError(f"{path}:{lineno}: cannot parse {tok!r}") from None

    try:
        lineno, head = next(tokens)
    except StopIteration:
        raise CloudFormatError(f"{path}: empty file") from None
    if head != "OFF":
        if head.startswith("OFF"):
            raise CloudFormatError(f"{path}:{lineno}: unsupported OFF variant {head!r}")
        raise CloudFormatError(f"{path}:{lineno}: missing OFF header")
    _, nv = take(int)
    _, nf = take(int)
    take(int)
    if nv < 1:
        raise CloudFormatError(f"{path}: mesh has no vertices")
    verts = np.array([[take(float)[1] for _ in range(3)] for _ in range(nv)])
    faces = []
    for _ in range(nf):
        lineno, k = take(int)
        idx = [take(int)[1] for _ in range(k)]
        if any(i < 0 or i >= nv for i in idx):
            raise CloudFormatError(f"{path}:{lineno}: face index out of range")
        # fan-triangulate polygons
        faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, k - 1))
    if not np.all(np.isfinite(verts)):
        raise CloudFormatError(f"{path}: non-finite vertex coordinate")
    return PointCloud(verts), np.array(faces, dtype=np.intp).reshape(-1, 3)


def load_cloud(path, format: str | None = None) -> PointCloud:
    """Load a point cloud from CSV (header x0..x{D-1}) or OFF (vertices only)."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        return load_csv(path)[0]
    if fmt == "off":
        return load_off(path)[0]
    raise CloudFormatError(f"unknown cloud format {fmt!r}")


def save_cloud(cloud: PointCloud, path, extras: dict[str, np.ndarray] | None = None) -> None:
    """Write a CSV cloud with round-trip (17 significant digit) formatting."""
    extras = extras or {}
    header = [f"x{k}" for k in range(cloud.dim)] + list(extras)
    cols = [cloud.points[:, k] for k in range(cloud.dim)] + [np.asarray(v) for v in extras.values()]
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(fmt_float(x) for x in row) + "\n")


def save_off(cloud: PointCloud, path, faces: np.ndarray | None = None) -> None:
    faces = np.zeros((0, 3), dtype=np.intp) if faces is None else np.asarray(faces)
    with Path(path).open("w") as fh:
        fh.write(f"OFF\n{cloud.n} {len(faces)} 0\n")
        for p in cloud.points:
            fh.write(" ".join(fmt_float(x) for x in p) + "\n")
        for f in faces:
            fh.write(f"{len(f)} " + " ".join(str(int(i)) for i in f) + "\n")
