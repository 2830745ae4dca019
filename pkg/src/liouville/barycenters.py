"""Formal barycenters of the circle and their moment-map geometry.

A k-barycenter is an atomic probability measure sum_i t_i delta_{theta_i}
with at most k atoms.  Its image under the moment map (the first k complex
Fourier moments) traces a topological sphere S_k in C^k, realized as
Phi_k(boundary of the simplex region R_k) in the w_i = t_i z_i variables.
This module provides the forward maps, the constructive inverse (Prony with a
Gauss-Newton polish), multistart Newton solvers for Phi_k(w) = b with
preimage counting, the degree homotopy, and the Jacobian determinant factor
det A_2k.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.stats import qmc

from .measures import CircleMeasure, canonical_angle

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# barycenters
# ---------------------------------------------------------------------------


@dataclass
class Barycenter:
    """Atomic probability measure on S^1 with at most k atoms.

    Atoms closer than 1e-10 in angle are merged (weights summed), zero-weight
    atoms are dropped, and angles are canonicalized to [0, 2 pi) and sorted.
    """

    angles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ang = canonical_angle(np.asarray(self.angles, dtype=float).ravel())
        wts = np.asarray(self.weights, dtype=float).ravel()
        if ang.shape != wts.shape or ang.size == 0:
            raise ValueError("angles/weights must be equal-length and nonempty")
        if np.any(wts < -1e-12):
            raise ValueError("negative weight")
        order = np.argsort(ang, kind="stable")
        ang, wts = ang[order], np.clip(wts[order], 0.0, None)
        # merge coincident atoms (circular closeness)
        merged_a, merged_w = [ang[0]], [wts[0]]
        for a, w in zip(ang[1:], wts[1:]):
            if a - merged_a[-1] < 1e-10:
                merged_w[-1] += w
            else:
                merged_a.append(a)
                merged_w.append(w)
        if len(merged_a) > 1 and (merged_a[0] + _TWO_PI) - merged_a[-1] < 1e-10:
            merged_w[0] += merged_w[-1]
            merged_a.pop()
            merged_w.pop()
        a = np.asarray(merged_a)
        w = np.asarray(merged_w)
        keep = w > 0.0
        if not np.any(keep):
            raise ValueError("all weights vanish")
        self.angles, self.weights = a[keep], w[keep]

    def validate(self, tol: float = 1e-12) -> "Barycenter":
        if abs(self.weights.sum() - 1.0) > tol:
            raise ValueError(f"weights sum to {self.weights.sum()} != 1")
        return self

    def normalized(self) -> "Barycenter":
        return Barycenter(self.angles, self.weights / self.weights.sum())

    @property
    def order(self) -> int:
        return len(self.angles)

    def as_measure(self) -> CircleMeasure:
        return CircleMeasure(angles=self.angles, weights=self.weights)

    def rotated(self, phi: float) -> "Barycenter":
        return Barycenter(self.angles + phi, self.weights.copy())

    def to_json(self) -> str:
        return json.dumps(
            {"atoms": [[float(a), float(w)] for a, w in zip(self.angles, self.weights)]},
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Barycenter":
        arr = np.asarray(json.loads(text)["atoms"], dtype=float).reshape(-1, 2)
        return Barycenter(arr[:, 0], arr[:, 1])


def random_barycenter(
    k: int, rng: np.random.Generator, min_gap: float = 0.1, min_weight: float = 0.05
) -> Barycenter:
    """Random k-atom barycenter with pairwise angular gaps >= min_gap and weights >= min_weight."""
    if k * min_weight > 1.0 or k * min_gap > _TWO_PI:
        raise ValueError("infeasible separation constraints")
    while True:
        ang = np.sort(rng.uniform(0.0, _TWO_PI, size=k))
        gaps = np.diff(np.concatenate([ang, [ang[0] + _TWO_PI]]))
        if k == 1 or np.min(gaps) >= min_gap:
            break
    while True:
        w = rng.dirichlet(np.ones(k))
        if np.min(w) >= min_weight:
            break
    return Barycenter(ang, w)


# ---------------------------------------------------------------------------
# moment map and Phi_k
# ---------------------------------------------------------------------------


def moment_map(mu, k: int) -> np.ndarray:
    """First k complex moments b_j = int z^j d mu of a circle measure.

    Exact sums for atomic inputs; trapezoidal (periodic rectangle) quadrature
    for gridded densities.
    """
    if k <= 0:
        raise ValueError("moment order k must be positive")
    if isinstance(mu, Barycenter):
        ang, w = mu.angles, mu.weights
    elif isinstance(mu, CircleMeasure):
        ang, w = mu.as_atoms()
    else:
        raise TypeError("expected CircleMeasure or Barycenter")
    js = np.arange(1, k + 1)
    return (w[None, :] * np.exp(1j * js[:, None] * ang[None, :])).sum(axis=1)


def simplex_norm(w: np.ndarray) -> float:
    return float(np.sum(np.abs(w)))


def phi_k(w: np.ndarray) -> np.ndarray:
    """The map Phi with j-th entry sum_i |w_i|^{1-j} w_i^j (0 terms contribute 0)."""
    w = np.asarray(w, dtype=complex)
    k = w.shape[-1]
    r = np.abs(w)
    unit = np.where(r > 0, w / np.where(r > 0, r, 1.0), 0.0)
    js = np.arange(1, k + 1)
    powers = unit[..., None, :] ** js[..., :, None]  # (..., j, i)
    return (r[..., None, :] * powers).sum(axis=-1)


def homotopy_H(w: np.ndarray, s: float) -> np.ndarray:
    """Degree homotopy between Phi_k (s=0) and the equal-weight power map (s=1).

    j-th entry: (sk + 1 - s)^{-1} sum_i w_i (w_i / sqrt(s + (1-s)|w_i|^2))^{j-1},
    with H(0, s) = 0.
    """
    w = np.asarray(w, dtype=complex)
    k = w.shape[-1]
    denom = np.sqrt(s + (1.0 - s) * np.abs(w) ** 2)
    base = np.where(denom > 0, w / np.where(denom > 0, denom, 1.0), 0.0)
    js = np.arange(k)
    powers = base[..., None, :] ** js[..., :, None]
    out = (w[..., None, :] * powers).sum(axis=-1) / (s * k + 1.0 - s)
    return out


def det_A2k(thetas) -> float:
    """Determinant of the 2k x 2k angular Jacobian factor A_2k.

    Block rows for j = 1..k:  [cos(j th_i) | -j sin(j th_i)] and
    [sin(j th_i) | j cos(j th_i)]; vanishes exactly when two angles coincide.
    """
    th = np.asarray(thetas, dtype=float).ravel()
    k = len(th)
    a = np.empty((2 * k, 2 * k))
    for j in range(1, k + 1):
        a[2 * j - 2, :k] = np.cos(j * th)
        a[2 * j - 2, k:] = -j * np.sin(j * th)
        a[2 * j - 1, :k] = np.sin(j * th)
        a[2 * j - 1, k:] = j * np.cos(j * th)
    return float(np.linalg.det(a))


def barycenter_from_w(w: np.ndarray) -> Barycenter:
    """Barycenter with atoms (arg w_i) and weights |w_i| (normalized)."""
    w = np.asarray(w, dtype=complex).ravel()
    r = np.abs(w)
    keep = r > 1e-14
    if not np.any(keep):
        raise ValueError("zero point has no barycenter")
    return Barycenter(np.angle(w[keep]), r[keep] / r[keep].sum())


# ---------------------------------------------------------------------------
# multistart Newton for Phi_k(w) = b
# ---------------------------------------------------------------------------


def _phi_real(W: np.ndarray, k: int) -> np.ndarray:
    w = W[:, :k] + 1j * W[:, k:]
    p = phi_k(w)
    return np.concatenate([p.real, p.imag], axis=1)


def _phi_jacobian(W: np.ndarray, k: int) -> np.ndarray:
    """Batched real Jacobian of Phi_k; rows (Re phi_j, Im phi_j), cols (x_i, y_i)."""
    n = W.shape[0]
    x, y = W[:, :k], W[:, k:]
    th = np.arctan2(y, x)  # 0 at the origin; Phi is not differentiable there
    js = np.arange(1, k + 1)[None, :, None]
    jt = js * th[:, None, :]  # (n, j, i)
    cj, sj = np.cos(jt), np.sin(jt)
    c1, s1 = np.cos(th)[:, None, :], np.sin(th)[:, None, :]
    jac = np.empty((n, 2 * k, 2 * k))
    jac[:, :k, :k] = cj * c1 + js * sj * s1  # dRe/dx
    jac[:, :k, k:] = cj * s1 - js * sj * c1  # dRe/dy
    jac[:, k:, :k] = sj * c1 - js * cj * s1  # dIm/dx
    jac[:, k:, k:] = sj * s1 + js * cj * c1  # dIm/dy
    return jac


def _sobol_starts(k: int, n: int, seed: int, scale: float) -> np.ndarray:
    """Deterministic low-discrepancy starts over the region sum |w_i| <= scale."""
    eng = qmc.Sobol(d=2 * k, scramble=True, seed=seed)
    u = eng.random_base2(int(np.ceil(np.log2(max(n, 2)))))[:n]
    ang = _TWO_PI * u[:, :k]
    rad = u[:, k:] / k * scale
    return np.concatenate([rad * np.cos(ang), rad * np.sin(ang)], axis=1)


def _batched_solve(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    ridge = 0.0
    eye = np.eye(jac.shape[-1])
    for _ in range(4):
        try:
            if ridge == 0.0:
                return np.linalg.solve(jac, rhs[..., None])[..., 0]
            jtj = np.einsum("nij,nik->njk", jac, jac) + ridge * eye
            jtr = np.einsum("nij,ni->nj", jac, rhs)
            return np.linalg.solve(jtj, jtr[..., None])[..., 0]
        except np.linalg.LinAlgError:
            ridge = max(ridge * 100.0, 1e-10)  # Levenberg-Marquardt fallback near the singular set
    raise np.linalg.LinAlgError("bordered solve failed")


def solve_phi(
    b: np.ndarray,
    n_starts: int = 200,
    seed: int = 0,
    tol: float = 1e-11,
    max_iter: int = 60,
    scale: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Multistart damped Newton for Phi_k(w) = b.

    Returns (solutions (m, k) complex, residual two-norms (m,)), deduplicated
    at Euclidean tolerance 1e-6 and sorted by (residual, lexicographic), so the
    result is independent of scheduling.
    """
    b = np.asarray(b, dtype=complex).ravel()
    k = len(b)
    if scale is None:
        scale = max(1.0, 1.25 * float(np.max(np.abs(b))))
    target = np.concatenate([b.real, b.imag])
    W = _sobol_starts(k, n_starts, seed, scale)
    for _ in range(max_iter):
        F = _phi_real(W, k) - target
        norms = np.linalg.norm(F, axis=1)
        if np.all(norms < tol):
            break
        delta = _batched_solve(_phi_jacobian(W, k), -F)
        dn = np.linalg.norm(delta, axis=1, keepdims=True)
        cap = 2.0 * scale + 1.0
        delta = delta * np.where(dn > cap, cap / np.maximum(dn, 1e-300), 1.0)
        t = np.ones((W.shape[0], 1))
        for _ in range(10):  # backtracking on the residual norm
            trial = W + t * delta
            tn = np.linalg.norm(_phi_real(trial, k) - target, axis=1)
            worse = (tn > norms) & (norms >= tol)
            if not np.any(worse):
                break
            t[worse] *= 0.5
        W = W + t * delta
    F = _phi_real(W, k) - target
    norms = np.linalg.norm(F, axis=1)
    ok = norms < tol
    sols = W[ok, :k] + 1j * W[ok, k:]
    res = norms[ok]
    return _dedupe(sols, res)


def _dedupe(sols: np.ndarray, res: np.ndarray, tol: float = 1e-6):
    """Merge solutions within tol; deterministic order (residual, then lexicographic)."""
    if len(sols) == 0:
        return sols, res
    reals = np.concatenate([sols.real, sols.imag], axis=1)
    order = np.lexsort(tuple(reals[:, c] for c in range(reals.shape[1] - 1, -1, -1)))
    order = order[np.argsort(res[order], kind="stable")]
    kept, kept_res = [], []
    for idx in order:
        cand = sols[idx]
        if all(np.linalg.norm(cand - kc) > tol for kc in kept):
            kept.append(cand)
            kept_res.append(res[idx])
    kept = np.asarray(kept)
    kept_res = np.asarray(kept_res)
    order = np.lexsort(
        tuple(
            np.concatenate([kept.real, kept.imag], axis=1)[:, c]
            for c in range(2 * kept.shape[1] - 1, -1, -1)
        )
    )
    return kept[order], kept_res[order]


def count_preimages(b: np.ndarray, n_starts: int = 500, seed: int = 0, tol: float = 1e-9):
    """Number of distinct solutions of Phi_k(w) = b (merged at 1e-6).

    Found solutions are completed with their permutation orbit (Phi_k is
    symmetric in the w_i, so permuting a solution yields a solution).  With
    insufficient starts the count is a lower bound.
    """
    from itertools import permutations

    b = np.asarray(b, dtype=complex).ravel()
    k = len(b)
    sols, res = solve_phi(b, n_starts=n_starts, seed=seed, tol=tol)
    if len(sols) and k <= 6:
        orbit = []
        orbit_res = []
        for s, r in zip(sols, res):
            for perm in permutations(range(k)):
                orbit.append(s[list(perm)])
                orbit_res.append(r)
        sols, res = _dedupe(np.asarray(orbit), np.asarray(orbit_res))
    return len(sols), sols


# ---------------------------------------------------------------------------
# inversion, classification, projection
# ---------------------------------------------------------------------------


def invert_moments(b: np.ndarray, tol: float = 1e-8) -> Barycenter:
    """Recover the barycenter with moments b by Prony's method.

    Steps: augment with the zeroth moment 1 and the conjugate moments, solve
    the Hankel-type linear system for the monic annihilating polynomial,
    root-find on its companion matrix, project the roots to |z| = 1, solve a
    nonnegative least-squares for the weights, drop negligible atoms, polish
    with a few Gauss-Newton sweeps, and renormalize.  Raises ValueError when
    the final moment residual exceeds tol (the input is not on S_k).
    """
    b = np.asarray(b, dtype=complex).ravel()
    k = len(b)
    if k == 0:
        raise ValueError("empty moment vector")

    def mom(i: int) -> complex:
        if i == 0:
            return 1.0 + 0.0j
        return b[i - 1] if i > 0 else np.conj(b[-i - 1])

    rows = range(-k, 0)
    m_mat = np.array([[mom(j + l) for l in range(k)] for j in rows])
    rhs = -np.array([mom(j + k) for j in rows])
    coeffs, *_ = np.linalg.lstsq(m_mat, rhs, rcond=None)
    poly = np.concatenate([[1.0 + 0j], coeffs[::-1]])
    roots = np.roots(poly)
    mags = np.abs(roots)
    roots = roots[mags > 1e-8] / mags[mags > 1e-8]
    if len(roots) == 0:
        raise ValueError(f"not on S_k within tolerance (no unit roots); residual=inf")

    def weights_for(angles: np.ndarray) -> np.ndarray:
        js = np.arange(0, k + 1)
        vand = np.exp(1j * js[:, None] * angles[None, :])
        target = np.concatenate([[1.0 + 0j], b])
        a_real = np.concatenate([vand.real, vand.imag], axis=0)
        t_real = np.concatenate([target.real, target.imag])
        w, _ = nnls(a_real, t_real)
        return w

    angles = np.angle(roots)
    t = weights_for(angles)
    keep = t > 1e-12
    if not np.any(keep):
        raise ValueError("not on S_k within tolerance (all weights vanish)")
    angles, t = angles[keep], t[keep]

    # Gauss-Newton polish on (theta, t) against the moment equations + mass
    js = np.arange(1, k + 1)
    for _ in range(6):
        e = np.exp(1j * js[:, None] * angles[None, :])
        resid_c = (t[None, :] * e).sum(axis=1) - b
        resid = np.concatenate([resid_c.real, resid_c.imag, [t.sum() - 1.0]])
        if np.linalg.norm(resid) < 1e-14:
            break
        d_th = 1j * js[:, None] * t[None, :] * e
        d_t = e
        jac = np.block(
            [
                [d_th.real, d_t.real],
                [d_th.imag, d_t.imag],
                [np.zeros((1, len(angles))), np.ones((1, len(angles)))],
            ]
        )
        step, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
        angles = angles + step[: len(angles)]
        t = t + step[len(angles) :]
    t = np.clip(t, 0.0, None)
    if t.sum() <= 0:
        raise ValueError("not on S_k within tolerance (weights collapse)")
    bary = Barycenter(angles, t / t.sum())
    resid = float(np.linalg.norm(moment_map(bary, k) - b))
    if resid > tol:
        raise ValueError(f"not on S_k within tolerance; residual={resid:.3e}")
    return bary


@dataclass
class ClassifyResult:
    region: str  # "interior" | "boundary" | "exterior" | "unresolved"
    witness: np.ndarray | None
    simplex_norm: float | None
    residual: float | None
    diagnostics: str = ""


def classify_point(
    b: np.ndarray,
    n_starts: int = 400,
    seed: int = 0,
    tol: float = 0.05,
    res_tol: float = 1e-9,
) -> ClassifyResult:
    """Locate b relative to the moment sphere S_k = Phi_k(boundary of R_k).

    Classification is by the simplex norm sum |w_i| of the best Phi-preimage:
    below 1-tol interior (inside U_k), within tol of 1 boundary, above
    exterior.  If no preimage converges the point is reported unresolved.
    """
    b = np.asarray(b, dtype=complex).ravel()
    if np.linalg.norm(b) < 1e-13:
        return ClassifyResult("interior", np.zeros(len(b), dtype=complex), 0.0, 0.0)
    sols, res = solve_phi(b, n_starts=n_starts, seed=seed, tol=res_tol)
    if len(sols) == 0:
        return ClassifyResult(
            "unresolved", None, None, None, diagnostics=f"no preimage among {n_starts} starts"
        )
    norms = np.array([simplex_norm(s) for s in sols])
    best = int(np.argmin(norms))
    s = float(norms[best])
    if s < 1.0 - tol:
        region = "interior"
    elif s <= 1.0 + tol:
        region = "boundary"
    else:
        region = "exterior"
    return ClassifyResult(region, sols[best], s, float(res[best]))


def project_Xi(
    f, k: int, eps_proj: float = 0.05, n_starts: int = 400, seed: int = 0
) -> tuple[np.ndarray, Barycenter]:
    """Retraction onto S_k: solve Phi_k(w) = F_k(f), rescale w to the simplex boundary.

    Accepts a DiskDensity (its cone push-forward is used), a CircleMeasure, or
    a Barycenter.  Raises when the best witness is farther than eps_proj from
    the simplex boundary (the input is outside the projection neighborhood).
    """
    from .measures import DiskDensity, angular_pushforward

    if isinstance(f, DiskDensity):
        mu = angular_pushforward(f)
    elif isinstance(f, (CircleMeasure, Barycenter)):
        mu = f
    else:
        raise TypeError("expected DiskDensity, CircleMeasure, or Barycenter")
    b = moment_map(mu, k)
    sols, _ = solve_phi(b, n_starts=n_starts, seed=seed)
    if len(sols) == 0:
        raise ValueError("outside N_k (no Phi-preimage found)")
    norms = np.array([simplex_norm(s) for s in sols])
    best = int(np.argmin(np.abs(norms - 1.0)))
    if abs(norms[best] - 1.0) > eps_proj:
        raise ValueError(f"outside N_k (nearest witness at simplex norm {norms[best]:.4f})")
    w = sols[best] / norms[best]
    return phi_k(w), barycenter_from_w(w)


def moments_to_json(b: np.ndarray) -> str:
    b = np.asarray(b, dtype=complex).ravel()
    return json.dumps({"moments": [[float(z.real), float(z.imag)] for z in b]}, sort_keys=True)


def moments_from_json(text: str) -> np.ndarray:
    arr = np.asarray(json.loads(text)["moments"], dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]
