"""A small synthetic human-like point cloud used by the filter-sweep experiment."""

from __future__ import annotations

from importlib import resources

import numpy as np

from mappergw.geometry import PointCloud

# (start, end, radius, rings, points per ring)
_LIMBS = [
    ((-0.10, 0.0, 0.90), (-0.16, 0.0, 0.02), 0.055, 14, 6),  # left leg
    ((0.10, 0.0, 0.90), (0.16, 0.0, 0.02), 0.055, 14, 6),  # right leg
    ((0.0, 0.0, 0.92), (0.0, 0.0, 1.42), 0.14, 11, 10),  # torso
    ((-0.20, 0.0, 1.40), (-0.52, 0.0, 0.88), 0.04, 11, 5),  # left arm
    ((0.20, 0.0, 1.40), (0.52, 0.0, 0.88), 0.04, 11, 5),  # right arm
    ((0.0, 0.0, 1.42), (0.0, 0.0, 1.50), 0.04, 3, 5),  # neck
]
_HEAD_CENTER = (0.0, 0.0, 1.62)
_HEAD_RADIUS = 0.11
_HEAD_POINTS = 60


def _tube(start, end, radius, rings, per_ring, twist):
    start, end = np.asarray(start), np.asarray(end)
    axis = end - start
    axis = axis / np.linalg.norm(axis)
    helper = np.array([0.0, 1.0, 0.0]) if abs(axis[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    pts = []
    for k, s in enumerate(np.linspace(0.0, 1.0, rings)):
        center = start + s * (end - start)
        angles = 2 * np.pi * (np.arange(per_ring) + 0.5 * (k % 2)) / per_ring + twist
        for a in angles:
            pts.append(center + radius * (np.cos(a) * e1 + np.sin(a) * e2))
    return pts


def _sphere(center, radius, count):
    # Fibonacci lattice
    i = np.arange(count) + 0.5
    polar = np.arccos(1 - 2 * i / count)
    azim = np.pi * (1 + 5**0.5) * i
    unit = np.stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)], axis=1)
    return list(np.asarray(center) + radius * unit)


def stick_figure_points() -> np.ndarray:
    """Vertices of a standing figure with arms lowered to the sides (z is up)."""
    pts = []
    for idx, (start, end, radius, rings, per_ring) in enumerate(_LIMBS):
        pts.extend(_tube(start, end, radius, rings, per_ring, twist=0.3 * idx))
    pts.extend(_sphere(_HEAD_CENTER, _HEAD_RADIUS, _HEAD_POINTS))
    return np.round(np.array(pts), 12)


def stick_figure_path():
    return resources.files("mappergw") / "data" / "stick_figure.off"


def stick_figure() -> PointCloud:
    """The bundled stick-figure cloud, read from the shipped OFF file."""
    from mappergw.sampling import load_off

    with resources.as_file(stick_figure_path()) as path:
        return load_off(path)[0]
