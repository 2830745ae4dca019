"""Quadrature grids for the unit disk, the round sphere, and the log-radial cylinder.

Disk cells are polar boxes with midpoint nodes; the innermost radial node sits
at h_r/2, so r = 0 (where the conical weight vanishes or degenerates) is never
a node.  Sphere cells are latitude-longitude boxes with exact area weights, so
the poles are never nodes either.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PolarGrid:
    """Midpoint polar grid on the unit disk.

    Cell (i, j) is [i*h_r, (i+1)*h_r] x [j*h_t, (j+1)*h_t] with node at the
    center.  The midpoint rule is exact for the area element r dr dtheta, so
    the cell areas sum to pi exactly.
    """

    n_r: int = 512
    n_theta: int = 256

    def __post_init__(self):
        if self.n_r < 2 or self.n_theta < 4:
            raise ValueError("polar grid too coarse")

    @property
    def h_r(self) -> float:
        return 1.0 / self.n_r

    @property
    def h_theta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.h_r

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.h_theta

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def nodes_xy(self) -> tuple[np.ndarray, np.ndarray]:
        rr, tt = self.mesh()
        return rr * np.cos(tt), rr * np.sin(tt)

    def cell_areas(self) -> np.ndarray:
        w = self.r * self.h_r * self.h_theta
        return np.broadcast_to(w[:, None], (self.n_r, self.n_theta)).copy()

    def radial_power_areas(self, two_alpha: float) -> np.ndarray:
        """Per-cell integral of r^{2a} r dr dtheta, exact in r.

        Used so that densities carrying the conical factor |x|^{2a} are
        integrated without quadrature bias near the origin.
        """
        p = two_alpha + 2.0
        edges = np.arange(self.n_r + 1) * self.h_r
        radial = (edges[1:] ** p - edges[:-1] ** p) / p
        w = radial * self.h_theta
        return np.broadcast_to(w[:, None], (self.n_r, self.n_theta)).copy()

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.cell_areas()))


@dataclass(frozen=True)
class SphereGrid:
    """Latitude-longitude grid on the unit round sphere (area 4 pi).

    Nodes at colatitude/longitude cell midpoints; per-cell areas use the exact
    integral of sin(phi), so the weights sum to 4 pi to machine precision.
    """

    n_lat: int = 256
    n_lon: int = 512

    @property
    def h_lat(self) -> float:
        return np.pi / self.n_lat

    @property
    def h_lon(self) -> float:
        return 2.0 * np.pi / self.n_lon

    @property
    def colat(self) -> np.ndarray:
        return (np.arange(self.n_lat) + 0.5) * self.h_lat

    @property
    def lon(self) -> np.ndarray:
        return (np.arange(self.n_lon) + 0.5) * self.h_lon

    def cell_areas(self) -> np.ndarray:
        edges = np.arange(self.n_lat + 1) * self.h_lat
        band = np.cos(edges[:-1]) - np.cos(edges[1:])
        w = band * self.h_lon
        return np.broadcast_to(w[:, None], (self.n_lat, self.n_lon)).copy()

    def nodes_xyz(self) -> np.ndarray:
        ph, lm = np.meshgrid(self.colat, self.lon, indexing="ij")
        return np.stack(
            [np.sin(ph) * np.cos(lm), np.sin(ph) * np.sin(lm), np.cos(ph)], axis=-1
        )

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.cell_areas()))


def south_pole() -> np.ndarray:
    return np.array([0.0, 0.0, -1.0])


def north_pole() -> np.ndarray:
    return np.array([0.0, 0.0, 1.0])


def geodesic_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Great-circle distance on the unit sphere; x, y broadcastable (..., 3)."""
    dot = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


@dataclass(frozen=True)
class CylinderGrid:
    """Uniform grid in t = log r on [t_min, 0]; node M-1 is r = 1."""

    m: int = 4097
    t_min: float = -30.0

    def __post_init__(self):
        if self.m < 8:
            raise ValueError("cylinder grid too coarse")
        if self.t_min >= 0:
            raise ValueError("t_min must be negative")

    @property
    def h(self) -> float:
        return -self.t_min / (self.m - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, 0.0, self.m)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.t)
