"""Moment maps of circle barycenters, singular Moser-Trudinger functionals,
and radial solvers for singular Liouville equations on the disk and sphere."""

__version__ = "0.1.0"

from .barycenters import (
    Barycenter,
    classify_point,
    count_preimages,
    det_A2k,
    homotopy_H,
    invert_moments,
    moment_map,
    phi_k,
    project_Xi,
    random_barycenter,
    solve_phi,
)
from .fields import Field
from .grids import CylinderGrid, PolarGrid, SphereGrid, geodesic_distance
from .measures import (
    CircleMeasure,
    DiskDensity,
    SphereDensity,
    angular_pushforward,
    delta_circle,
    kr_distance,
    meridian_pushforward,
    uniform_circle,
)

__all__ = [
    "Barycenter",
    "CircleMeasure",
    "CylinderGrid",
    "DiskDensity",
    "Field",
    "PolarGrid",
    "SphereDensity",
    "SphereGrid",
    "angular_pushforward",
    "classify_point",
    "count_preimages",
    "delta_circle",
    "det_A2k",
    "geodesic_distance",
    "homotopy_H",
    "invert_moments",
    "kr_distance",
    "meridian_pushforward",
    "moment_map",
    "phi_k",
    "project_Xi",
    "random_barycenter",
    "solve_phi",
    "uniform_circle",
]
