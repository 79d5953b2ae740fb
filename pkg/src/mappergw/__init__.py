"""Mapper graphs as metric measure spaces, compared with Gromov-Wasserstein transport."""

from mappergw.geometry import (
    AmbientMetric,
    NeighborhoodGraph,
    PointCloud,
    connected_components,
    diameter,
    neighborhood_graph,
    pairwise_distances,
)
from mappergw.sampling import (
    FilterValues,
    TorusParams,
    height_filter,
    linear_filter,
    load_cloud,
    sample_torus,
    save_cloud,
)
from mappergw.mapper import (
    CoverScheme,
    EpsilonGraph,
    KMeans,
    MapperGraph,
    RefinedCover,
    build_cover,
    build_mapper,
    delta_map,
    refine_cover,
)
from mappergw.metric_measure import MetricMeasureSpace, hausdorff, mapper_to_mm
from mappergw.transport import GWOptions, GWResult, gw_hat_p, gw_objective, wasserstein_p

__version__ = "0.1.0"

__all__ = [
    "AmbientMetric",
    "CoverScheme",
    "EpsilonGraph",
    "FilterValues",
    "GWOptions",
    "GWResult",
    "KMeans",
    "MapperGraph",
    "MetricMeasureSpace",
    "NeighborhoodGraph",
    "PointCloud",
    "RefinedCover",
    "TorusParams",
    "build_cover",
    "build_mapper",
    "connected_components",
    "delta_map",
    "diameter",
    "gw_hat_p",
    "gw_objective",
    "hausdorff",
    "height_filter",
    "linear_filter",
    "load_cloud",
    "mapper_to_mm",
    "neighborhood_graph",
    "pairwise_distances",
    "refine_cover",
    "sample_torus",
    "save_cloud",
    "wasserstein_p",
]
