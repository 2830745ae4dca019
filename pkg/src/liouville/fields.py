"""Scalar fields on disk/sphere/cylinder grids: calculus and serialization.

The binary layout is a 12-byte header of little-endian int32 (domain tag,
dim1, dim2) followed by float64 payload rows in row-major order.  Domain tags:
1 = disk (polar grid), 2 = sphere (lat-lon grid), 3 = cylinder (payload rows
are the t nodes then the values).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .grids import CylinderGrid, PolarGrid, SphereGrid

_TAG_DISK = 1
_TAG_SPHERE = 2
_TAG_CYLINDER = 3


@dataclass
class Field:
    """Real scalar field sampled at the nodes of a disk or sphere grid."""

    grid: PolarGrid | SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self._shape()
        if self.values.shape != expected:
            raise ValueError(f"field shape {self.values.shape} != grid shape {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")

    def _shape(self):
        if isinstance(self.grid, PolarGrid):
            return (self.grid.n_r, self.grid.n_theta)
        return (self.grid.n_lat, self.grid.n_lon)

    @property
    def domain(self) -> str:
        return "disk" if isinstance(self.grid, PolarGrid) else "sphere"

    # -- calculus -----------------------------------------------------------

    def boundary_trace(self) -> np.ndarray:
        """Linear extrapolation of the disk field to r = 1 (per angle)."""
        if self.domain != "disk":
            raise ValueError("boundary trace only defined on the disk")
        u = self.values
        return 1.5 * u[-1, :] - 0.5 * u[-2, :]

    def grad_squared(self, dirichlet: bool = False) -> np.ndarray:
        """|grad u|^2 at nodes by centered differences.

        On the disk, `dirichlet` extends u by odd reflection across r = 1
        (zero trace); otherwise one-sided differences are used at the rim.
        """
        u = self.values
        if self.domain == "disk":
            g: PolarGrid = self.grid
            h_r, h_t = g.h_r, g.h_theta
            du_r = np.empty_like(u)
            du_r[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2 * h_r)
            du_r[0, :] = (u[1, :] - u[0, :]) / h_r
            if dirichlet:
                du_r[-1, :] = (-u[-1, :] - u[-2, :]) / (2 * h_r)
            else:
                du_r[-1, :] = (u[-1, :] - u[-2, :]) / h_r
            du_t = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * h_t)
            return du_r**2 + (du_t / g.r[:, None]) ** 2
        g: SphereGrid = self.grid
        h_p, h_l = g.h_lat, g.h_lon
        du_p = np.empty_like(u)
        du_p[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2 * h_p)
        du_p[0, :] = (u[1, :] - u[0, :]) / h_p
        du_p[-1, :] = (u[-1, :] - u[-2, :]) / h_p
        du_l = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * h_l)
        sin_p = np.sin(g.colat)[:, None]
        return du_p**2 + (du_l / sin_p) ** 2

    def dirichlet_energy(self, dirichlet: bool | None = None) -> float:
        """Integral of |grad u|^2 over the domain."""
        if dirichlet is None:
            dirichlet = self.domain == "disk"
        return self.grid.integrate(self.grad_squared(dirichlet=dirichlet))

    def mean(self) -> float:
        area = 4.0 * np.pi if self.domain == "sphere" else np.pi
        return self.grid.integrate(self.values) / area

    def rotated(self, shift: int) -> "Field":
        """Rotate about the symmetry axis by an integer number of angular cells."""
        return Field(self.grid, np.roll(self.values, shift, axis=1))

    # -- serialization ------------------------------------------------------

    def to_binary(self) -> bytes:
        tag = _TAG_DISK if self.domain == "disk" else _TAG_SPHERE
        n1, n2 = self.values.shape
        head = struct.pack("<iii", tag, n1, n2)
        return head + self.values.astype("<f8").tobytes(order="C")

    @staticmethod
    def from_binary(blob: bytes) -> "Field":
        tag, n1, n2 = struct.unpack_from("<iii", blob, 0)
        payload = np.frombuffer(blob, dtype="<f8", offset=12)
        if tag == _TAG_DISK:
            grid: PolarGrid | SphereGrid = PolarGrid(n_r=n1, n_theta=n2)
        elif tag == _TAG_SPHERE:
            grid = SphereGrid(n_lat=n1, n_lon=n2)
        else:
            raise ValueError(f"unknown domain tag {tag}")
        return Field(grid, payload.reshape(n1, n2).copy())

    def to_json(self) -> str:
        g = self.grid
        if self.domain == "disk":
            dims = {"n_r": g.n_r, "n_theta": g.n_theta}
        else:
            dims = {"n_lat": g.n_lat, "n_lon": g.n_lon}
        return json.dumps(
            {"domain": self.domain, "grid": dims, "values": self.values.ravel().tolist()},
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Field":
        doc = json.loads(text)
        if doc["domain"] == "disk":
            grid = PolarGrid(n_r=doc["grid"]["n_r"], n_theta=doc["grid"]["n_theta"])
            shape = (grid.n_r, grid.n_theta)
        else:
            grid = SphereGrid(n_lat=doc["grid"]["n_lat"], n_lon=doc["grid"]["n_lon"])
            shape = (grid.n_lat, grid.n_lon)
        return Field(grid, np.asarray(doc["values"], dtype=float).reshape(shape))


def cylinder_field_to_binary(t: np.ndarray, values: np.ndarray) -> bytes:
    head = struct.pack("<iii", _TAG_CYLINDER, 2, len(t))
    rows = np.vstack([t, values]).astype("<f8")
    return head + rows.tobytes(order="C")


def cylinder_field_from_binary(blob: bytes) -> tuple[np.ndarray, np.ndarray]:
    tag, n1, n2 = struct.unpack_from("<iii", blob, 0)
    if tag != _TAG_CYLINDER or n1 != 2:
        raise ValueError("not a cylinder field blob")
    rows = np.frombuffer(blob, dtype="<f8", offset=12).reshape(2, n2)
    return rows[0].copy(), rows[1].copy()
