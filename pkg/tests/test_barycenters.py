import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liouville.barycenters import (
    Barycenter,
    barycenter_from_w,
    classify_point,
    count_preimages,
    det_A2k,
    homotopy_H,
    invert_moments,
    moment_map,
    moments_from_json,
    moments_to_json,
    phi_k,
    project_Xi,
    random_barycenter,
    simplex_norm,
    solve_phi,
)
from liouville.grids import PolarGrid
from liouville.measures import DiskDensity, kr_distance, uniform_circle


def kr(a: Barycenter, b: Barycenter) -> float:
    return kr_distance(a.as_measure(), b.as_measure(), "circle")


# ---------------------------------------------------------------------------
# moment map
# ---------------------------------------------------------------------------


def test_moment_map_single_atom_powers():
    th = 1.1
    b = moment_map(Barycenter([th], [1.0]), 5)
    assert np.allclose(b, np.exp(1j * th * np.arange(1, 6)), atol=1e-14)


def test_moment_map_two_atoms():
    b = moment_map(Barycenter([0.0, np.pi / 2], [0.5, 0.5]), 2)
    assert b[0] == pytest.approx(0.5 + 0.5j, abs=1e-14)
    assert abs(b[1]) < 1e-14


def test_moment_map_uniform_vanishes():
    b = moment_map(uniform_circle(4096), 4)
    assert np.max(np.abs(b)) < 1e-12


def test_moment_map_rejects_bad_order():
    with pytest.raises(ValueError):
        moment_map(Barycenter([0.0], [1.0]), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 2 * np.pi), st.integers(1, 5))
def test_moment_rotation_equivariance(seed, phi, k):
    rng = np.random.default_rng(seed)
    sig = random_barycenter(min(k, 3), rng)
    b = moment_map(sig, k)
    br = moment_map(sig.rotated(phi), k)
    js = np.arange(1, k + 1)
    assert np.allclose(br, np.exp(1j * js * phi) * b, atol=1e-12)


# ---------------------------------------------------------------------------
# Phi_k
# ---------------------------------------------------------------------------


def test_phi_zero_map():
    for k in range(1, 5):
        assert np.all(phi_k(np.zeros(k, dtype=complex)) == 0)


def test_phi_k1_identity():
    w = np.array([0.37 * np.exp(1.3j)])
    assert np.allclose(phi_k(w), w, atol=1e-15)


def test_phi_matches_moment_map_on_simplex_boundary():
    rng = np.random.default_rng(7)
    for k in (2, 3, 5):
        sig = random_barycenter(k, rng)
        w = sig.weights * np.exp(1j * sig.angles)
        assert simplex_norm(w) == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(phi_k(w) - moment_map(sig, k))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 5))
def test_phi_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 1 / k, k) * np.exp(1j * rng.uniform(0, 2 * np.pi, k))
    perm = rng.permutation(k)
    assert np.allclose(phi_k(w), phi_k(w[perm]), atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_phi_image_containment(seed, k):
    # sum |w_i| <= 1 implies every coordinate of Phi lies in the unit disk
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0, 1, k)
    w = raw / max(raw.sum(), 1.0) * rng.uniform(0, 1) * np.exp(1j * rng.uniform(0, 2 * np.pi, k))
    assert np.all(np.abs(phi_k(w)) <= 1 + 1e-12)


# ---------------------------------------------------------------------------
# homotopy
# ---------------------------------------------------------------------------


def test_homotopy_endpoints():
    rng = np.random.default_rng(11)
    for k in (1, 2, 4):
        w = rng.uniform(0.05, 0.3, k) * np.exp(1j * rng.uniform(0, 2 * np.pi, k))
        assert np.allclose(homotopy_H(w, 0.0), phi_k(w), atol=1e-13)
        mean_powers = np.array([(w ** j).mean() for j in range(1, k + 1)])
        assert np.allclose(homotopy_H(w, 1.0), mean_powers, atol=1e-13)
    assert np.all(homotopy_H(np.zeros(3, dtype=complex), 0.5) == 0)


def test_homotopy_never_vanishes_on_sphere():
    # property (P)_k: H(w, s) = 0 only at w = 0
    rng = np.random.default_rng(2)
    for k in (1, 2, 3, 4):
        for _ in range(200):
            w = rng.normal(size=k) + 1j * rng.normal(size=k)
            w = w / np.linalg.norm(w)  # on the unit sphere of C^k
            for s in np.linspace(0.0, 1.0, 50):
                assert np.linalg.norm(homotopy_H(w, s)) > 1e-12


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------


def test_invert_k1_closed_form():
    b = moment_map(Barycenter([np.pi / 3], [1.0]), 1)
    rec = invert_moments(b)
    assert rec.order == 1
    assert rec.angles[0] == pytest.approx(np.pi / 3, abs=1e-12)


def test_invert_roundtrip_k4():
    rng = np.random.default_rng(123)
    for _ in range(25):
        sig = random_barycenter(4, rng, min_gap=0.1, min_weight=0.05)
        rec = invert_moments(moment_map(sig, 4))
        assert kr(sig, rec) < 1e-8


def test_invert_interior_point_rejected():
    # the origin is interior to S_2: Phi_k(w)=0 iff w=0, which is not a barycenter
    with pytest.raises(ValueError, match="not on S_k"):
        invert_moments(np.zeros(2, dtype=complex))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_invert_roundtrip_property(seed, k):
    rng = np.random.default_rng(seed)
    sig = random_barycenter(k, rng, min_gap=0.1, min_weight=0.05)
    rec = invert_moments(moment_map(sig, k))
    assert kr(sig, rec) < 1e-8


# ---------------------------------------------------------------------------
# classification and projection
# ---------------------------------------------------------------------------


def test_classify_origin_interior():
    res = classify_point(np.zeros(3, dtype=complex))
    assert res.region == "interior"
    assert np.all(res.witness == 0)


def test_classify_boundary_and_exterior():
    b = moment_map(Barycenter([0.8], [1.0]), 3)
    assert classify_point(b, seed=1).region == "boundary"
    # |b_1| = 2 > 1 violates the moment bound; no preimage in the closed simplex region
    res = classify_point(2.0 * moment_map(Barycenter([0.0], [1.0]), 3), seed=2)
    assert res.region == "exterior"
    assert res.simplex_norm > 1.05


def test_project_fixed_point_on_atomic_measures():
    rng = np.random.default_rng(5)
    sig = random_barycenter(2, rng)
    point, bary = project_Xi(sig, 2)
    assert np.max(np.abs(point - moment_map(sig, 2))) < 1e-9
    assert kr(sig, bary) < 1e-8


def test_project_converges_along_mollified_atoms():
    """f_n -> sigma in KR implies Xi_k(f_n) -> F_k(sigma)."""
    sig = Barycenter([1.0, 2.5], [0.4, 0.6])
    target = moment_map(sig, 2)
    prev_err = np.inf
    for width in (0.3, 0.1, 0.03):
        n = 4096
        ang = (np.arange(n) + 0.5) * 2 * np.pi / n
        vals = np.zeros(n)
        for th, w in zip(sig.angles, sig.weights):
            d = np.minimum(np.abs(ang - th), 2 * np.pi - np.abs(ang - th))
            vals += w * np.exp(-(d**2) / (2 * width**2))
        from liouville.measures import CircleMeasure

        mu = CircleMeasure(values=vals).normalized()
        point, _ = project_Xi(mu, 2, eps_proj=0.5)
        err = np.max(np.abs(point - target))
        assert err < prev_err + 1e-12
        prev_err = err
    assert prev_err < 0.02


def test_project_perturbation_stability():
    rng = np.random.default_rng(9)
    sig = random_barycenter(2, rng)
    b = moment_map(sig, 2)
    eta = 1e-3 * np.exp(1j * np.array([0.3, 1.7]))
    eta = eta / np.linalg.norm(eta) * 1e-3
    # emit the perturbed projection through a circle measure with those moments:
    # solve directly on the perturbed target via the Phi witness
    sols, _ = solve_phi(b + eta, seed=4)
    norms = np.array([simplex_norm(s) for s in sols])
    w = sols[np.argmin(np.abs(norms - 1))]
    w = w / simplex_norm(w)
    assert np.max(np.abs(phi_k(w) - b)) < 50 * 1e-3  # empirical stability constant
    assert simplex_norm(w) == pytest.approx(1.0, abs=1e-12)


def test_project_outside_neighborhood_rejected():
    with pytest.raises(ValueError, match="outside N_k"):
        project_Xi(uniform_circle(512), 2, eps_proj=0.05)


# ---------------------------------------------------------------------------
# determinant factor
# ---------------------------------------------------------------------------


def _det_oracle(thetas):
    """Exact cofactor expansion through sympy, independent of numpy.linalg."""
    import sympy as sp

    k = len(thetas)
    a = sp.zeros(2 * k, 2 * k)
    for j in range(1, k + 1):
        for i, th in enumerate(thetas):
            th = sp.nsimplify(th, [sp.pi]) if abs(th) > 0 else sp.Integer(0)
            a[2 * j - 2, i] = sp.cos(j * th)
            a[2 * j - 2, k + i] = -j * sp.sin(j * th)
            a[2 * j - 1, i] = sp.sin(j * th)
            a[2 * j - 1, k + i] = j * sp.cos(j * th)
    return float(a.det(method="berkowitz"))


def test_det_k1_is_rotation_determinant():
    for th in (0.0, 0.7, 3.9):
        assert det_A2k([th]) == pytest.approx(1.0, abs=1e-12)


def test_det_vanishes_on_coincidence():
    assert abs(det_A2k([1.0, 1.0])) < 1e-12
    assert abs(det_A2k([0.5, 2.0, 0.5])) < 1e-10


def test_det_k2_against_symbolic_oracle():
    val = det_A2k([0.0, np.pi / 2])
    assert val == pytest.approx(-4.0, abs=1e-12)  # frozen from the sympy cofactor oracle
    assert _det_oracle([0.0, np.pi / 2]) == pytest.approx(-4.0, abs=1e-12)
    # one generic angle pair cross-checked symbolically
    ths = [0.3, 1.9]
    assert det_A2k(ths) == pytest.approx(_det_oracle(ths), rel=1e-10)


def test_det_sweep_to_zero_and_separation():
    base = 0.9
    vals = [abs(det_A2k([base, base + gap])) for gap in (0.5, 0.1, 0.02, 0.004)]
    assert all(vals[i + 1] < vals[i] for i in range(3))
    # vanishing order in the pairwise gap is quartic (calibrates the 1e-4 floor)
    orders = [np.log2(abs(det_A2k([0, 2 * g])) / abs(det_A2k([0, g]))) for g in (0.05, 0.1)]
    assert all(abs(o - 4.0) < 0.1 for o in orders)
    assert abs(det_A2k([0.0, 0.1])) > 1e-4  # k=2 floor at the minimal admissible gap
    rng = np.random.default_rng(42)
    for k in (2, 3, 4):
        for _ in range(20):
            ths = random_barycenter(k, rng, min_gap=0.1, min_weight=1e-6).angles
            if len(ths) == k:
                assert abs(det_A2k(ths)) > 1e-4


# ---------------------------------------------------------------------------
# preimage counting
# ---------------------------------------------------------------------------


def test_count_k1_single_preimage():
    for b in (0.3 + 0.1j, np.exp(0.4j), 0.0):
        cnt, _ = count_preimages(np.array([b]), n_starts=64, seed=0)
        assert cnt == 1


def test_count_k2_swap_orbit():
    b = moment_map(Barycenter([0.0, np.pi / 2], [0.3, 0.7]), 2)
    cnt, sols = count_preimages(b, n_starts=200, seed=1)
    assert cnt == 2
    # the two solutions are each other's swaps
    assert np.allclose(sorted(np.abs(sols[0])), sorted(np.abs(sols[1])), atol=1e-8)


def test_count_k3_interior_six_and_reseeding_stable():
    rng = np.random.default_rng(17)
    w = 0.28 * np.exp(1j * np.array([0.4, 2.2, 4.4]))
    b = phi_k(w)
    counts = {count_preimages(b, n_starts=500, seed=s)[0] for s in (0, 1, 2)}
    assert counts == {6}


def test_injectivity_separation():
    rng = np.random.default_rng(21)
    k = 3
    for _ in range(100):
        s1 = random_barycenter(k, rng)
        s2 = random_barycenter(k, rng)
        if kr(s1, s2) < 1e-3:
            continue
        assert np.linalg.norm(moment_map(s1, k) - moment_map(s2, k)) > 1e-9


def test_moments_json_roundtrip():
    b = moment_map(Barycenter([0.2, 1.0], [0.5, 0.5]), 3)
    assert np.allclose(moments_from_json(moments_to_json(b)), b)
    sig = Barycenter([0.1, 4.0], [0.3, 0.7])
    sig2 = Barycenter.from_json(sig.to_json())
    assert np.allclose(sig.angles, sig2.angles)


def test_barycenter_merging_and_zero_weights():
    sig = Barycenter([1.0, 1.0 + 1e-12, 2.0], [0.3, 0.2, 0.5])
    assert sig.order == 2
    assert sig.weights[0] == pytest.approx(0.5)
    sig2 = Barycenter([0.5, 1.5], [1.0, 0.0])
    assert sig2.order == 1
