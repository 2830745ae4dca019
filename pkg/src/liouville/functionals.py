"""Singular weights, Green's functions, the Euler-Lagrange functional,
bubbles and test functions, concentration functionals, harmonic liftings,
and the quantization set of critical parameter values.

Conventions.  The conical weight is h_tilde = h * exp(-4 pi sum_j a_j G_{p_j}),
which on the unit disk with one singularity at the origin is exactly
h(x) |x|^{2a}.  The disk functional (Dirichlet data) is
I(u) = int |grad u|^2 - rho log int h_tilde e^{2u}; the sphere functional adds
the average term 2 (rho/|S^2|) int u.  The exponential integral is always
evaluated in log-sum-exp form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barycenters import Barycenter
from .fields import Field
from .grids import PolarGrid, SphereGrid, geodesic_distance, north_pole, south_pole
from .measures import CircleMeasure, DiskDensity, SphereDensity

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class SingularConfig:
    """Problem data: domain, conical singularities, parameter rho, smooth factor h.

    Disk positions are complex numbers (0 is the canonical single singularity);
    sphere positions are unit 3-vectors (default: south and north poles).
    `h` is a callable of the node coordinates, or None for h == 1.
    """

    domain: str = "disk"
    alphas: tuple = (1.0,)
    positions: tuple | None = None
    rho: float = 1.0
    h: object = None

    def __post_init__(self):
        if self.domain not in ("disk", "sphere"):
            raise ValueError("domain must be 'disk' or 'sphere'")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("singularity weights must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.positions is None:
            if self.domain == "disk":
                self.positions = tuple(0.0 + 0.0j for _ in self.alphas)
            else:
                poles = [south_pole(), north_pole()]
                if len(self.alphas) > 2:
                    raise ValueError("specify sphere positions for m > 2")
                self.positions = tuple(poles[: len(self.alphas)])

    @property
    def canonical_disk(self) -> bool:
        return (
            self.domain == "disk"
            and len(self.alphas) == 1
            and abs(complex(self.positions[0])) < 1e-15
        )


def k_alpha(alpha: float) -> int:
    """Smallest positive integer >= alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return max(1, math.ceil(alpha - 1e-12))


@dataclass
class CriticalSet:
    """Sorted quantization values 4 k pi + 4 pi sum_{j in J} (1 + a_j), with generators."""

    values: list
    generators: list  # list of lists of (k, J) pairs, aligned with values


def critical_set(alphas, rho_max: float) -> CriticalSet:
    if rho_max <= 0:
        raise ValueError("rho_max must be positive")
    alphas = tuple(float(a) for a in alphas)
    m = len(alphas)
    found: dict[float, list] = {}
    k_max = int(rho_max / (4 * np.pi)) + 1
    for k in range(0, k_max + 1):
        for mask in range(2**m):
            subset = tuple(j for j in range(m) if mask >> j & 1)
            if k == 0 and not subset:
                continue
            val = 4 * np.pi * k + 4 * np.pi * sum(1 + alphas[j] for j in subset)
            if val > rho_max + 1e-12:
                continue
            key = round(val, 9)
            found.setdefault(key, []).append((k, subset))
    keys = sorted(found)
    return CriticalSet(values=[float(v) for v in keys], generators=[found[v] for v in keys])


def nearest_critical(alphas, rho: float) -> tuple[float, float]:
    """(nearest quantization value, absolute distance) to rho."""
    cs = critical_set(alphas, rho + 8 * np.pi * (2 + sum(alphas)))
    vals = np.asarray(cs.values)
    idx = int(np.argmin(np.abs(vals - rho)))
    return float(vals[idx]), float(abs(vals[idx] - rho))


# ---------------------------------------------------------------------------
# Green's functions and the singular weight
# ---------------------------------------------------------------------------


def green_disk(p: complex, x) -> np.ndarray:
    """Dirichlet Green's function of -Laplace on the unit disk, pole p.

    G_p(x) = (1/2pi) log(|p| |x - p/|p|^2| / |x - p|), and -(1/2pi) log|x| for
    p = 0; vanishes on |x| = 1 and is symmetric in (p, x).
    """
    p = complex(p)
    x = np.asarray(x, dtype=complex)
    d = np.abs(x - p)
    if np.any(d == 0):
        raise ValueError("pole: x == p")
    if abs(p) < 1e-300:
        return -np.log(np.abs(x)) / _TWO_PI
    refl = np.abs(x - p / (abs(p) ** 2)) * abs(p)
    return np.log(refl / d) / _TWO_PI


def green_sphere(x, pole=None) -> np.ndarray:
    """Green's function of -Laplace on the round unit sphere, zero mean.

    In stereographic coordinates z from the antipode of the pole (|z| =
    tan(d/2), d = geodesic distance to the pole) this is
    (1/4pi)[log((1+|z|^2)/(2|z|^2)) - log(e/2)], equivalently
    -(1/2pi) log sin(d/2) - 1/(4pi); the additive constant enforces
    int_{S^2} G dV = 0.
    """
    if pole is None:
        pole = south_pole()
    x = np.asarray(x, dtype=float)
    d = geodesic_distance(x, pole)
    if np.any(d == 0):
        raise ValueError("pole: x coincides with the Green pole")
    z2 = np.tan(d / 2.0) ** 2
    return (np.log((1.0 + z2) / (2.0 * z2)) - (1.0 - np.log(2.0))) / (4.0 * np.pi)


def singular_weight(cfg: SingularConfig, x) -> np.ndarray:
    """Conical weight h_tilde(x) = h(x) exp(-4 pi sum_j a_j G_{p_j}(x)).

    Exactly |x|^{2a} h(x) in the canonical disk case; vanishes like
    d(x, p_j)^{2 a_j} at each singularity (value 0 at the points themselves).
    """
    if cfg.domain == "disk":
        x = np.asarray(x, dtype=complex)
        if cfg.canonical_disk:
            out = np.abs(x) ** (2.0 * cfg.alphas[0])
        else:
            expo = np.zeros(x.shape, dtype=float)
            for a, p in zip(cfg.alphas, cfg.positions):
                d = np.abs(x - complex(p))
                safe = np.where(d > 0, d, 1.0)
                g = np.where(d > 0, _green_disk_safe(complex(p), x, safe), np.inf)
                expo = expo + 4 * np.pi * a * g
            out = np.exp(-expo)
        if cfg.h is not None:
            out = out * cfg.h(x)
        return out
    x = np.asarray(x, dtype=float)
    expo = np.zeros(x.shape[:-1], dtype=float)
    for a, p in zip(cfg.alphas, cfg.positions):
        d = geodesic_distance(x, np.asarray(p))
        s = np.sin(np.clip(d, 0.0, np.pi) / 2.0)
        g = np.where(s > 0, -np.log(np.where(s > 0, s, 1.0)) / _TWO_PI - 1.0 / (4 * np.pi), np.inf)
        expo = expo + 4 * np.pi * a * g
    out = np.exp(-expo)
    if cfg.h is not None:
        out = out * cfg.h(x)
    return out


def _green_disk_safe(p: complex, x: np.ndarray, safe_d: np.ndarray) -> np.ndarray:
    if abs(p) < 1e-300:
        return -np.log(np.abs(np.where(np.abs(x) > 0, x, 1.0))) / _TWO_PI
    refl = np.abs(x - p / (abs(p) ** 2)) * abs(p)
    return np.log(refl / safe_d) / _TWO_PI


def weight_on_grid(cfg: SingularConfig, grid) -> np.ndarray:
    if cfg.domain == "disk":
        xx, yy = grid.nodes_xy()
        return singular_weight(cfg, xx + 1j * yy)
    return singular_weight(cfg, grid.nodes_xyz())


def _mass_terms(u: Field, cfg: SingularConfig):
    """(log-offset, per-cell mass of h_tilde e^{2u} scaled by e^{-offset}).

    Canonical disk configs integrate the |x|^{2a} factor exactly per radial
    cell; other configs use midpoint values of the weight.
    """
    g = u.grid
    if cfg.domain == "disk" and cfg.canonical_disk:
        w = g.radial_power_areas(2.0 * cfg.alphas[0])
        smooth = np.ones_like(u.values)
        if cfg.h is not None:
            xx, yy = g.nodes_xy()
            smooth = cfg.h(xx + 1j * yy)
    else:
        w = g.cell_areas()
        smooth = weight_on_grid(cfg, g)
    expo = 2.0 * u.values
    offset = float(np.max(expo))
    cells = smooth * w * np.exp(expo - offset)
    return offset, cells


def log_conformal_mass(u: Field, cfg: SingularConfig) -> float:
    """log int h_tilde e^{2u}, evaluated in log-sum-exp form (no overflow)."""
    offset, cells = _mass_terms(u, cfg)
    total = float(np.sum(cells))
    if total <= 0 or not np.isfinite(total):
        raise ValueError("conformal volume vanishes or is not finite")
    return offset + math.log(total)


def conformal_density(u: Field, cfg: SingularConfig):
    """(f_u as a Field, normalized density f_tilde_u) for the weight h_tilde e^{2u}."""
    offset, cells = _mass_terms(u, cfg)
    total = float(np.sum(cells))
    if total <= 0 or not np.isfinite(total):
        raise ValueError("conformal volume vanishes")
    htilde = weight_on_grid(cfg, u.grid)
    f_u = Field(u.grid, htilde * np.exp(np.clip(2.0 * u.values, None, 700.0)))
    g = u.grid
    if cfg.domain == "disk":
        if cfg.canonical_disk:
            w = g.radial_power_areas(2.0 * cfg.alphas[0])
            smooth = np.ones_like(u.values)
            if cfg.h is not None:
                xx, yy = g.nodes_xy()
                smooth = cfg.h(xx + 1j * yy)
            vals = smooth * np.exp(2.0 * u.values - offset) / total
            return f_u, DiskDensity(g, vals, weights=w)
        vals = htilde * np.exp(2.0 * u.values - offset) / total
        return f_u, DiskDensity(g, vals)
    vals = htilde * np.exp(2.0 * u.values - offset) / total
    return f_u, SphereDensity(g, vals)


# ---------------------------------------------------------------------------
# the Euler-Lagrange functional
# ---------------------------------------------------------------------------


def functional_I(u: Field, cfg: SingularConfig, boundary_tol: float = 1e-3) -> float:
    """Euler-Lagrange functional of the mean-field equation.

    Disk (H^1_0): int |grad u|^2 - rho log int h_tilde e^{2u}; raises if the
    extrapolated boundary trace is not (numerically) zero.  Sphere: adds
    2 (rho/|S^2|) int u, so constants are invariant directions.
    """
    if u.domain != cfg.domain:
        raise ValueError("field/config domain mismatch")
    if not np.all(np.isfinite(u.values)):
        raise ValueError("field has non-finite values")
    if cfg.domain == "disk":
        trace = np.max(np.abs(u.boundary_trace()))
        if trace > boundary_tol:
            raise ValueError(f"boundary trace {trace:.2e} violates the Dirichlet condition")
        energy = u.dirichlet_energy(dirichlet=True)
        return energy - cfg.rho * log_conformal_mass(u, cfg)
    energy = u.dirichlet_energy(dirichlet=False)
    avg_term = 2.0 * cfg.rho / (4.0 * np.pi) * u.grid.integrate(u.values)
    return energy + avg_term - cfg.rho * log_conformal_mass(u, cfg)


# ---------------------------------------------------------------------------
# bubbles, cutoff, test functions
# ---------------------------------------------------------------------------


def bubble(lam: float, center, grid) -> Field:
    """Standard bubble log(lam / (1 + lam^2 dist^2)) sampled on the grid."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if isinstance(grid, PolarGrid):
        xx, yy = grid.nodes_xy()
        c = complex(center)
        d2 = (xx - c.real) ** 2 + (yy - c.imag) ** 2
    else:
        d2 = geodesic_distance(grid.nodes_xyz(), np.asarray(center, dtype=float)) ** 2
    return Field(grid, np.log(lam) - np.log1p(lam**2 * d2))


def cutoff_chi(r: np.ndarray) -> np.ndarray:
    """Quintic smoothstep cutoff: 1 for r <= 3/4, 0 at r = 1, C^2 in between."""
    s = np.clip((np.asarray(r, dtype=float) - 0.75) / 0.25, 0.0, 1.0)
    return 1.0 - (10.0 * s**3 - 15.0 * s**4 + 6.0 * s**5)


def cutoff_chi_prime(r: np.ndarray) -> np.ndarray:
    s = np.clip((np.asarray(r, dtype=float) - 0.75) / 0.25, 0.0, 1.0)
    inside = (r > 0.75) & (r < 1.0)
    return np.where(inside, -(30.0 * s**2 - 60.0 * s**3 + 30.0 * s**4) / 0.25, 0.0)


def disk_atoms_of(sigma: Barycenter) -> np.ndarray:
    """Test-function atom positions x_i/2 at radius 1/2 (complex)."""
    return 0.5 * np.exp(1j * sigma.angles)


def _log_sum_profile(lam: float, t: np.ndarray, d2_list) -> np.ndarray:
    """(1/2) log sum_i t_i (lam^2/(1+lam^2 d_i^2))^2, numerically stable."""
    logs = [
        np.log(ti) + 2.0 * (2.0 * np.log(lam) - np.log1p(lam**2 * d2))
        for ti, d2 in zip(t, d2_list)
    ]
    stack = np.stack(logs, axis=0)
    m = np.max(stack, axis=0)
    return 0.5 * (m + np.log(np.sum(np.exp(stack - m), axis=0)))


def test_function_disk(lam: float, sigma: Barycenter, grid: PolarGrid | None = None) -> Field:
    """Concentrating H^1_0 test function attached to a barycenter.

    phi(x) = chi(|x|) * (1/2) log sum_i t_i (lam^2 / (1 + lam^2 |x - x_i/2|^2))^2
    with atoms x_i/2 at radius 1/2; the quintic cutoff kills the boundary trace.
    The conformal volume of phi concentrates at the atoms with weights t_i.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if grid is None:
        grid = PolarGrid()
    atoms = disk_atoms_of(sigma)
    xx, yy = grid.nodes_xy()
    z = xx + 1j * yy
    d2 = [np.abs(z - a) ** 2 for a in atoms]
    g = _log_sum_profile(lam, sigma.weights, d2)
    rr = np.sqrt(xx**2 + yy**2)
    return Field(grid, cutoff_chi(rr) * g)


def equator_atoms_of(sigma: Barycenter) -> np.ndarray:
    ang = sigma.angles
    return np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1)


def test_function_sphere(lam: float, sigma: Barycenter, grid: SphereGrid | None = None) -> Field:
    """Sphere analogue with atoms on the equator and geodesic distances (no cutoff)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if grid is None:
        grid = SphereGrid()
    xyz = grid.nodes_xyz()
    d2 = [geodesic_distance(xyz, a) ** 2 for a in equator_atoms_of(sigma)]
    return Field(grid, _log_sum_profile(lam, sigma.weights, d2))


# ---------------------------------------------------------------------------
# concentration functional J_{k,delta}
# ---------------------------------------------------------------------------


def _greedy_ball_mass(points, masses, radii_of, k, n_candidates, refine_rounds, cand_points=None):
    """Greedy k-ball cover maximizing captured mass, with local refinement.

    `radii_of(centers)` maps candidate centers to admissible ball radii.
    Returns (captured mass, chosen centers).  The result is a certified lower
    bound for the supremum over continuum centers.
    """
    n = len(masses)
    if cand_points is None:
        top = np.argsort(masses)[::-1][: min(n_candidates // 2, n)]
        stride = max(1, n // max(1, n_candidates - len(top)))
        cand_idx = np.unique(np.concatenate([top, np.arange(0, n, stride)]))
        cand_points = points[cand_idx]
    cand_radii = radii_of(cand_points)
    valid = cand_radii > 0
    cand_points, cand_radii = cand_points[valid], cand_radii[valid]

    def covered_mass(centers_pts, centers_rad, mass_vec):
        out = np.zeros(len(centers_pts))
        chunk = max(1, int(2e7) // max(1, n))
        for lo in range(0, len(centers_pts), chunk):
            sl = slice(lo, lo + chunk)
            d2 = np.sum((centers_pts[sl, None, :] - points[None, :, :]) ** 2, axis=-1)
            out[sl] = np.sum((d2 <= centers_rad[sl, None] ** 2) * mass_vec[None, :], axis=1)
        return out

    remaining = masses.copy()
    chosen_pts, chosen_rad = [], []
    for _ in range(k):
        gains = covered_mass(cand_points, cand_radii, remaining)
        best = int(np.argmax(gains))
        if gains[best] <= 0:
            break
        c, rad = cand_points[best].copy(), float(cand_radii[best])
        for _ in range(refine_rounds):
            step = 0.35 * rad
            improved = True
            while improved and step > 1e-4 * rad:
                offs = np.array(
                    [[step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step],
                     [step, step], [step, -step], [-step, step], [-step, -step]]
                )
                trials = c[None, :] + offs if points.shape[1] == 2 else None
                if trials is None:
                    break
                tr = radii_of(trials)
                ok = tr > 0
                if not np.any(ok):
                    break
                gains_t = covered_mass(trials[ok], tr[ok], remaining)
                cur = covered_mass(c[None, :], np.array([rad]), remaining)[0]
                if gains_t.max() > cur + 1e-15:
                    ix = int(np.argmax(gains_t))
                    c = trials[ok][ix].copy()
                    rad = float(tr[ok][ix])
                else:
                    step *= 0.5
                improved = gains_t.max() > cur + 1e-15
        d2 = np.sum((points - c[None, :]) ** 2, axis=-1)
        inside = d2 <= rad**2
        chosen_pts.append(c)
        chosen_rad.append(rad)
        remaining = np.where(inside, 0.0, remaining)
    captured = masses.sum() - remaining.sum()
    return float(captured), np.asarray(chosen_pts)


def concentration_J(f, k: int, delta: float, n_candidates: int = 4096, refine_rounds: int = 2):
    """Concentration functional: largest mass captured by k admissible balls.

    Disk: balls B_{delta |x|}(x), x != 0 (radius shrinks toward the
    singularity).  Sphere: radius delta * min geodesic distance to the two
    poles.  Greedy selection over grid candidates plus local refinement;
    the value is a lower bound on the true supremum, tight for atomic data.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if isinstance(f, DiskDensity):
        xx, yy = f.grid.nodes_xy()
        points = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        masses = f.cell_masses().ravel()

        def radii_of(centers):
            return delta * np.sqrt(np.sum(centers**2, axis=-1))

        val, _ = _greedy_ball_mass(points, masses, radii_of, k, n_candidates, refine_rounds)
        return val
    if isinstance(f, SphereDensity):
        xyz = f.grid.nodes_xyz().reshape(-1, 3)
        masses = f.cell_masses().ravel()
        p1, p2 = south_pole(), north_pole()

        # geodesic balls via chordal comparison: |x-c| <= 2 sin(r/2)
        def radii_of(centers):
            cn = centers / np.maximum(np.linalg.norm(centers, axis=-1, keepdims=True), 1e-300)
            r = delta * np.minimum(geodesic_distance(cn, p1), geodesic_distance(cn, p2))
            return 2.0 * np.sin(np.clip(r, 0.0, np.pi) / 2.0)

        xyzn = xyz
        val, _ = _greedy_ball_mass(xyzn, masses, radii_of, k, n_candidates, refine_rounds=0)
        return val
    raise TypeError("expected DiskDensity or SphereDensity")


# ---------------------------------------------------------------------------
# harmonic lifting
# ---------------------------------------------------------------------------


def _interp_polar(u: Field, r: np.ndarray, th: np.ndarray) -> np.ndarray:
    """Bilinear interpolation on the polar grid (periodic in theta)."""
    g: PolarGrid = u.grid
    fi = np.clip(r / g.h_r - 0.5, 0.0, g.n_r - 1.0)
    i0 = np.clip(np.floor(fi).astype(int), 0, g.n_r - 2)
    wi = fi - i0
    fj = np.mod(th, _TWO_PI) / g.h_theta - 0.5
    j0 = np.floor(fj).astype(int) % g.n_theta
    wj = fj - np.floor(fj)
    j1 = (j0 + 1) % g.n_theta
    v = u.values
    return (
        v[i0, j0] * (1 - wi) * (1 - wj)
        + v[i0 + 1, j0] * wi * (1 - wj)
        + v[i0, j1] * (1 - wi) * wj
        + v[i0 + 1, j1] * wi * wj
    )


def harmonic_lift(u: Field, center, radius: float, n_trace: int = 256, n_modes: int = 64) -> Field:
    """Replace u inside B_radius(center) by the Poisson extension of its trace.

    The trace on the circle is sampled at n_trace uniform angles (bilinear
    interpolation from the grid), truncated to n_modes Fourier modes, and the
    Poisson kernel series is evaluated at the interior nodes.  The field is
    unchanged outside the ball.
    """
    if u.domain != "disk":
        raise ValueError("harmonic lift implemented on the disk")
    c = complex(center)
    if abs(c) + radius >= 1.0:
        raise ValueError("ball not contained in the domain")
    psis = (np.arange(n_trace) + 0.5) * _TWO_PI / n_trace
    pts = c + radius * np.exp(1j * psis)
    trace = _interp_polar(u, np.abs(pts), np.angle(pts))
    coeff = np.fft.rfft(trace) / n_trace
    n_keep = min(n_modes, len(coeff) - 1)

    g: PolarGrid = u.grid
    xx, yy = g.nodes_xy()
    z = (xx + 1j * yy) - c
    inside = np.abs(z) < radius
    zi = z[inside] / radius
    vals = np.full(zi.shape, float(coeff[0].real))
    zp = np.ones_like(zi)
    for n in range(1, n_keep + 1):
        zp = zp * zi
        # trace samples carry the half-cell angular offset; undo it per mode
        vals = vals + 2.0 * (coeff[n] * np.exp(-1j * n * psis[0]) * zp).real
    out = u.values.copy()
    out[inside] = vals
    return Field(g, out)
