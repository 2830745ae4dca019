"""Probability measures on the circle, the unit disk, and the sphere.

Provides the Kantorovich-Rubinstein (W1) distance -- exact on the circle via
the circular quantile reduction, and an assignment/transport LP on the disk --
together with the angular cone push-forward disk -> circle and the meridian
push-forward sphere -> circle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .grids import PolarGrid, SphereGrid

MASS_TOL = 1e-8
_TWO_PI = 2.0 * np.pi


def canonical_angle(theta):
    return np.mod(theta, _TWO_PI)


# ---------------------------------------------------------------------------
# measure types
# ---------------------------------------------------------------------------


@dataclass
class CircleMeasure:
    """Probability measure on S^1: weighted atoms or samples on a uniform grid.

    Exactly one of (atoms, weights) / (values,) is set.  Atom angles are
    canonicalized to [0, 2 pi); weights must be nonnegative and sum to 1
    within 1e-12 (use `normalized` to repair small drift).
    """

    angles: np.ndarray | None = None
    weights: np.ndarray | None = None
    values: np.ndarray | None = None  # density samples, uniform angular grid

    def __post_init__(self):
        if (self.angles is None) == (self.values is None):
            raise ValueError("measure is either atomic or gridded, not both")
        if self.angles is not None:
            self.angles = canonical_angle(np.asarray(self.angles, dtype=float))
            self.weights = np.asarray(self.weights, dtype=float)
            if self.angles.shape != self.weights.shape:
                raise ValueError("angles/weights shape mismatch")
            if np.any(self.weights < -1e-14):
                raise ValueError("negative atom weight")
            self.weights = np.clip(self.weights, 0.0, None)
        else:
            self.values = np.asarray(self.values, dtype=float)
            if np.any(self.values < -1e-14):
                raise ValueError("negative density value")
            self.values = np.clip(self.values, 0.0, None)

    @property
    def is_atomic(self) -> bool:
        return self.angles is not None

    def mass(self) -> float:
        if self.is_atomic:
            return float(np.sum(self.weights))
        return float(np.sum(self.values) * _TWO_PI / len(self.values))

    def validate(self, tol: float = 1e-12) -> "CircleMeasure":
        if abs(self.mass() - 1.0) > tol:
            raise ValueError(f"total mass {self.mass()} != 1")
        return self

    def normalized(self) -> "CircleMeasure":
        m = self.mass()
        if m <= 0:
            raise ValueError("cannot normalize a zero measure")
        if self.is_atomic:
            return CircleMeasure(angles=self.angles, weights=self.weights / m)
        return CircleMeasure(values=self.values / m)

    def as_atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Atomic representation (grid samples become atoms at cell centers)."""
        if self.is_atomic:
            return self.angles.copy(), self.weights.copy()
        n = len(self.values)
        ang = (np.arange(n) + 0.5) * _TWO_PI / n
        return ang, self.values * _TWO_PI / n

    def rotated(self, phi: float) -> "CircleMeasure":
        if self.is_atomic:
            return CircleMeasure(angles=self.angles + phi, weights=self.weights.copy())
        shift = phi / (_TWO_PI / len(self.values))
        if abs(shift - round(shift)) > 1e-9:
            ang, w = self.as_atoms()
            return CircleMeasure(angles=ang + phi, weights=w)
        return CircleMeasure(values=np.roll(self.values, int(round(shift))))

    def to_json(self) -> str:
        if self.is_atomic:
            doc = {"domain": "circle", "atoms": [[float(a), float(w)] for a, w in zip(self.angles, self.weights)]}
        else:
            doc = {"domain": "circle", "grid": {"n_angles": len(self.values)}, "values": self.values.tolist()}
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "CircleMeasure":
        doc = json.loads(text)
        if doc.get("domain") != "circle":
            raise ValueError("not a circle measure")
        if "atoms" in doc:
            arr = np.asarray(doc["atoms"], dtype=float).reshape(-1, 2)
            return CircleMeasure(angles=arr[:, 0], weights=arr[:, 1])
        return CircleMeasure(values=np.asarray(doc["values"], dtype=float))


@dataclass
class DiskDensity:
    """Nonnegative density on a polar grid of the unit disk.

    `weights` are the per-cell quadrature weights (default: exact cell areas);
    cell masses are values * weights and must sum to 1 within 1e-10 for a
    probability density.
    """

    grid: PolarGrid
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_r, self.grid.n_theta):
            raise ValueError("values shape does not match grid")
        if np.any(self.values < -1e-14):
            raise ValueError("negative density value")
        self.values = np.clip(self.values, 0.0, None)
        if self.weights is None:
            self.weights = self.grid.cell_areas()
        else:
            self.weights = np.asarray(self.weights, dtype=float)

    def cell_masses(self) -> np.ndarray:
        return self.values * self.weights

    def mass(self) -> float:
        return float(np.sum(self.cell_masses()))

    def validate(self, tol: float = 1e-10) -> "DiskDensity":
        if abs(self.mass() - 1.0) > tol:
            raise ValueError(f"total mass {self.mass()} != 1")
        return self

    def normalized(self) -> "DiskDensity":
        m = self.mass()
        if m <= 0:
            raise ValueError("cannot normalize a zero density")
        return DiskDensity(self.grid, self.values / m, self.weights)

    def radial_cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """(radial cell edges, cumulative mass in B_r) with linear interpolation intent."""
        shell = self.cell_masses().sum(axis=1)
        edges = np.arange(self.grid.n_r + 1) * self.grid.h_r
        return edges, np.concatenate([[0.0], np.cumsum(shell)])

    def to_json(self) -> str:
        doc = {
            "domain": "disk",
            "grid": {"n_r": self.grid.n_r, "n_theta": self.grid.n_theta},
            "values": self.values.ravel().tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "DiskDensity":
        doc = json.loads(text)
        if doc.get("domain") != "disk":
            raise ValueError("not a disk density")
        grid = PolarGrid(n_r=doc["grid"]["n_r"], n_theta=doc["grid"]["n_theta"])
        vals = np.asarray(doc["values"], dtype=float).reshape(grid.n_r, grid.n_theta)
        return DiskDensity(grid, vals)


@dataclass
class SphereDensity:
    """Nonnegative density on a lat-lon grid of S^2 (poles excluded)."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_lat, self.grid.n_lon):
            raise ValueError("values shape does not match grid")
        if np.any(self.values < -1e-14):
            raise ValueError("negative density value")
        self.values = np.clip(self.values, 0.0, None)

    def cell_masses(self) -> np.ndarray:
        return self.values * self.grid.cell_areas()

    def mass(self) -> float:
        return float(np.sum(self.cell_masses()))

    def validate(self, tol: float = 1e-10) -> "SphereDensity":
        if abs(self.mass() - 1.0) > tol:
            raise ValueError(f"total mass {self.mass()} != 1")
        return self

    def normalized(self) -> "SphereDensity":
        m = self.mass()
        if m <= 0:
            raise ValueError("cannot normalize a zero density")
        return SphereDensity(self.grid, self.values / m)

    def to_json(self) -> str:
        doc = {
            "domain": "sphere",
            "grid": {"n_lat": self.grid.n_lat, "n_lon": self.grid.n_lon},
            "values": self.values.ravel().tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SphereDensity":
        doc = json.loads(text)
        if doc.get("domain") != "sphere":
            raise ValueError("not a sphere density")
        grid = SphereGrid(n_lat=doc["grid"]["n_lat"], n_lon=doc["grid"]["n_lon"])
        vals = np.asarray(doc["values"], dtype=float).reshape(grid.n_lat, grid.n_lon)
        return SphereDensity(grid, vals)


# ---------------------------------------------------------------------------
# push-forwards
# ---------------------------------------------------------------------------


def angular_pushforward(f: DiskDensity) -> CircleMeasure:
    """Push f forward along rays: sector mass = integral over the cone t*A, t in (0,1]."""
    masses = f.cell_masses().sum(axis=0)
    total = masses.sum()
    if total <= 0:
        raise ValueError("density has zero mass")
    return CircleMeasure(angles=f.grid.theta, weights=masses / total)


def meridian_pushforward(f: SphereDensity) -> CircleMeasure:
    """Project f onto the equator along meridians (longitude marginal)."""
    masses = f.cell_masses().sum(axis=0)
    total = masses.sum()
    if total <= 0:
        raise ValueError("density has zero mass")
    return CircleMeasure(angles=f.grid.lon, weights=masses / total)


# ---------------------------------------------------------------------------
# Kantorovich-Rubinstein distance
# ---------------------------------------------------------------------------


def _w1_circle(mu1: CircleMeasure, mu2: CircleMeasure) -> float:
    """Exact circular W1 with arc-length ground metric.

    Reduction: with G the difference of the two CDFs from an arbitrary cut,
    W1 = min_c integral |G - c|; the optimal c is the length-weighted median
    of G, which also optimizes over the cut point.
    """
    a1, w1 = mu1.as_atoms()
    a2, w2 = mu2.as_atoms()
    pos = np.concatenate([a1, a2])
    sgn = np.concatenate([w1, -w2])
    order = np.argsort(pos, kind="stable")
    pos, sgn = pos[order], sgn[order]
    # collapse duplicate positions
    uniq, inv = np.unique(pos, return_inverse=True)
    acc = np.zeros(len(uniq))
    np.add.at(acc, inv, sgn)
    g = np.cumsum(acc)  # CDF difference on [uniq[i], uniq[i+1])
    seg = np.diff(np.concatenate([uniq, [uniq[0] + _TWO_PI]]))
    keep = seg > 0
    g, seg = g[keep], seg[keep]
    # length-weighted median of g
    order = np.argsort(g, kind="stable")
    gs, ls = g[order], seg[order]
    cum = np.cumsum(ls)
    c = gs[np.searchsorted(cum, cum[-1] / 2.0)]
    return float(np.sum(seg * np.abs(g - c)))


def _aggregate_disk(f: DiskDensity, max_atoms: int) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a disk density to <= max_atoms weighted atoms by cell-block aggregation."""
    g = f.grid
    masses = f.cell_masses()
    x, y = g.nodes_xy()
    n_r, n_t = g.n_r, g.n_theta
    # block factors chosen so the block count fits the cap
    br, bt = 1, 1
    while (-(-n_r // br)) * (-(-n_t // bt)) > max_atoms:
        if n_r / br >= n_t / bt:
            br += 1
        else:
            bt += 1
    pts, wts = [], []
    for i0 in range(0, n_r, br):
        for j0 in range(0, n_t, bt):
            mm = masses[i0 : i0 + br, j0 : j0 + bt]
            m = mm.sum()
            if m <= 0:
                continue
            xb = float(np.sum(mm * x[i0 : i0 + br, j0 : j0 + bt]) / m)
            yb = float(np.sum(mm * y[i0 : i0 + br, j0 : j0 + bt]) / m)
            pts.append((xb, yb))
            wts.append(m)
    return np.asarray(pts), np.asarray(wts)


def transport_lp(points1: np.ndarray, w1: np.ndarray, points2: np.ndarray, w2: np.ndarray) -> float:
    """Exact W1 between weighted atom clouds by the transport LP (HiGHS)."""
    m, n = len(w1), len(w2)
    cost = np.sqrt(
        np.sum((points1[:, None, :] - points2[None, :, :]) ** 2, axis=-1)
    ).ravel()
    cols = np.arange(m * n)
    rows = np.concatenate([cols // n, m + cols % n])
    a_eq = sparse.coo_matrix(
        (np.ones(2 * m * n), (rows, np.concatenate([cols, cols]))), shape=(m + n, m * n)
    )
    b_eq = np.concatenate([w1, w2])
    res = linprog(cost, A_eq=a_eq.tocsr(), b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def disk_atoms(measure, max_atoms: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Atomic form of a disk measure: pass-through for atom clouds, aggregation for densities."""
    if isinstance(measure, DiskDensity):
        return _aggregate_disk(measure, max_atoms)
    pts, wts = measure
    return np.asarray(pts, dtype=float).reshape(-1, 2), np.asarray(wts, dtype=float)


def kr_distance(mu1, mu2, domain: str, max_atoms: int = 512) -> float:
    """Kantorovich-Rubinstein (W1) distance between probability measures.

    domain="circle": both arguments are CircleMeasure; ground metric is the
    geodesic (arc-length) distance; exact sorted-quantile method.
    domain="disk": arguments are DiskDensity or (points, weights) atom clouds;
    Euclidean ground metric; densities are aggregated to <= max_atoms atoms
    and the transport LP is solved exactly on the supports.
    """
    if domain == "circle":
        if not isinstance(mu1, CircleMeasure) or not isinstance(mu2, CircleMeasure):
            raise ValueError("circle distance requires CircleMeasure inputs")
        if abs(mu1.mass() - 1.0) > MASS_TOL or abs(mu2.mass() - 1.0) > MASS_TOL:
            raise ValueError("not probability measures")
        return _w1_circle(mu1.normalized(), mu2.normalized())
    if domain == "disk":
        if isinstance(mu1, (CircleMeasure, SphereDensity)) or isinstance(
            mu2, (CircleMeasure, SphereDensity)
        ):
            raise ValueError("mixed domains")
        p1, w1 = disk_atoms(mu1, max_atoms)
        p2, w2 = disk_atoms(mu2, max_atoms)
        if abs(w1.sum() - 1.0) > MASS_TOL or abs(w2.sum() - 1.0) > MASS_TOL:
            raise ValueError("not probability measures")
        w1, w2 = w1 / w1.sum(), w2 / w2.sum()
        return transport_lp(p1, w1, p2, w2)
    raise ValueError(f"unknown domain {domain!r}")


# -- convenience constructors (used across tests and demos) ------------------


def delta_circle(theta: float) -> CircleMeasure:
    return CircleMeasure(angles=np.array([theta]), weights=np.array([1.0]))


def uniform_circle(n: int = 1024) -> CircleMeasure:
    return CircleMeasure(values=np.full(n, 1.0 / _TWO_PI))
