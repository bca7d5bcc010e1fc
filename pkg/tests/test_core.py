import math

import numpy as np
import pytest

from hypernet.core import (
    Coupling,
    DistanceParams,
    MeasureHypernetwork,
    MeasureNetwork,
    coot_distortion,
    collapse_canonical,
    dualize,
    geodesic_point,
    gw_distortion,
)
from hypernet.coot import coot_distance_bruteforce
from hypernet.errors import ValidationError

from oracles import coot_sum, coot_sup, random_hypernetwork


def test_network_rejects_zero_mass():
    with pytest.raises(ValidationError):
        MeasureNetwork(np.zeros((2, 2)), [1.0, 0.0])


def test_network_rejects_bad_total():
    with pytest.raises(ValidationError):
        MeasureNetwork(np.zeros((2, 2)), [0.5, 0.6])


def test_hypernetwork_rejects_negative_omega():
    with pytest.raises(ValidationError):
        MeasureHypernetwork([[1.0, -1.0]])


def test_hypernetwork_rejects_nan():
    with pytest.raises(ValidationError):
        MeasureHypernetwork([[np.nan]])


def test_hypernetwork_shape_mismatch():
    with pytest.raises(ValidationError):
        MeasureHypernetwork(np.ones((2, 3)), mu=[1.0])


def test_immutable_arrays():
    H = MeasureHypernetwork(np.ones((2, 2)))
    with pytest.raises(ValueError):
        H.omega[0, 0] = 5.0


def test_coupling_marginal_check():
    a = np.array([0.5, 0.5])
    Coupling(np.diag(a), a, a)
    with pytest.raises(ValidationError):
        Coupling(np.array([[0.5, 0.1], [0.0, 0.4]]), a, a)
    with pytest.raises(ValidationError):
        Coupling(np.array([[0.6, -0.1], [-0.1, 0.6]]), a, a)


def test_coupling_tolerance_is_1e9():
    a = np.array([0.5, 0.5])
    Coupling(np.diag(a) + np.array([[5e-10, 0], [0, 0]]), a, a)
    with pytest.raises(ValidationError):
        Coupling(np.diag(a) + np.array([[5e-9, 0], [0, 0]]), a, a)


def test_distance_params_validation():
    assert math.isinf(DistanceParams(p="inf").p)
    with pytest.raises(ValidationError):
        DistanceParams(p=0.5)
    with pytest.raises(ValidationError):
        DistanceParams(restarts=0)
    with pytest.raises(ValidationError):
        DistanceParams(tol=0)


def test_gw_distortion_identity_is_zero():
    rng = np.random.default_rng(0)
    N = MeasureNetwork(rng.random((4, 4)))
    assert gw_distortion(N, N, np.diag(N.mu), 2) == 0.0


def test_gw_distortion_single_point():
    assert gw_distortion(MeasureNetwork([[3.0]]), MeasureNetwork([[1.5]]), [[1.0]], 2) == 1.5


def test_gw_distortion_product_matches_quadruple_sum():
    rng = np.random.default_rng(1)
    N = MeasureNetwork(rng.random((3, 3)))
    N2 = MeasureNetwork(rng.random((3, 3)))
    pi = np.outer(N.mu, N2.mu)
    ref = coot_sum(N.omega, N2.omega, pi, pi, 2) ** 0.5
    assert abs(gw_distortion(N, N2, pi, 2) - ref) < 1e-12


def test_gw_distortion_dimension_mismatch():
    with pytest.raises(ValidationError):
        gw_distortion(MeasureNetwork(np.zeros((2, 2))), MeasureNetwork(np.zeros((3, 3))), np.full((2, 2), 0.25))


def test_coot_distortion_identity_is_zero():
    rng = np.random.default_rng(2)
    H = random_hypernetwork(rng, 3, 4)
    assert coot_distortion(H, H, np.diag(H.mu), np.diag(H.nu), 2) == 0.0


def test_coot_distortion_h_alpha_diag():
    for alpha in (2.0, 4.0, 8.0):
        Ha = MeasureHypernetwork(np.diag([alpha, alpha]))
        H1 = MeasureHypernetwork(np.eye(2))
        half = 0.5 * np.eye(2)
        assert abs(coot_distortion(Ha, H1, half, half, 2) - (alpha - 1) / math.sqrt(2)) < 1e-12


@pytest.mark.parametrize("shape", [(2, 2), (3, 3), (2, 3)])
def test_coot_distortion_p1_matches_quadruple_sum(shape):
    rng = np.random.default_rng(3)
    H = random_hypernetwork(rng, *shape)
    H2 = random_hypernetwork(rng, *shape[::-1])
    pi, xi = np.outer(H.mu, H2.mu), np.outer(H.nu, H2.nu)
    assert abs(coot_distortion(H, H2, pi, xi, 1) - coot_sum(H.omega, H2.omega, pi, xi, 1)) < 1e-12


def test_coot_distortion_general_p_and_inf():
    rng = np.random.default_rng(4)
    H = random_hypernetwork(rng, 3, 2)
    H2 = random_hypernetwork(rng, 2, 3)
    pi, xi = np.outer(H.mu, H2.mu), np.outer(H.nu, H2.nu)
    ref = coot_sum(H.omega, H2.omega, pi, xi, 3.5) ** (1 / 3.5)
    assert abs(coot_distortion(H, H2, pi, xi, 3.5) - ref) < 1e-12
    assert coot_distortion(H, H2, pi, xi, "inf") == coot_sup(H.omega, H2.omega, pi, xi)


def test_inf_distortion_uses_support_only():
    H = MeasureHypernetwork([[0.0, 10.0], [0.0, 10.0]])
    H2 = MeasureHypernetwork([[0.0, 10.0], [0.0, 10.0]])
    diag = 0.5 * np.eye(2)
    assert coot_distortion(H, H2, diag, diag, math.inf) == 0.0


def test_coot_distortion_symmetry_exact():
    rng = np.random.default_rng(5)
    for _ in range(5):
        H = random_hypernetwork(rng, 3, 2)
        H2 = random_hypernetwork(rng, 2, 4)
        pi, xi = np.outer(H.mu, H2.mu), np.outer(H.nu, H2.nu)
        assert coot_distortion(H, H2, pi, xi, 2) == pytest.approx(coot_distortion(H2, H, pi.T, xi.T, 2), abs=1e-15)


def test_coot_distortion_marginal_violation():
    H = MeasureHypernetwork(np.eye(2))
    with pytest.raises(ValidationError):
        coot_distortion(H, H, np.array([[0.5, 0.0], [0.1, 0.4]]), 0.5 * np.eye(2))


def test_dualize_involution():
    rng = np.random.default_rng(6)
    H = random_hypernetwork(rng, 3, 4)
    assert dualize(dualize(H)) == H


def test_dualize_five_node_incidence():
    inc = np.array([[1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 1, 1, 1], [0, 0, 1, 0]], float)
    H = MeasureHypernetwork(inc, node_ids="12345", hyperedge_ids="abcd")
    D = dualize(H)
    assert D.shape == (4, 5)
    assert np.array_equal(D.omega, inc.T)
    assert np.array_equal(D.mu, H.nu) and np.array_equal(D.nu, H.mu)
    assert D.node_ids == tuple("abcd")


def test_dualize_preserves_distortion():
    rng = np.random.default_rng(7)
    for _ in range(10):
        H = random_hypernetwork(rng, 3, 2)
        H2 = random_hypernetwork(rng, 2, 3)
        pi = np.outer(H.mu, H2.mu)
        xi = np.outer(H.nu, H2.nu)
        a = coot_distortion(H, H2, pi, xi, 2)
        b = coot_distortion(dualize(H), dualize(H2), xi, pi, 2)
        assert abs(a - b) < 1e-12


def test_geodesic_endpoints():
    rng = np.random.default_rng(8)
    H = random_hypernetwork(rng, 2, 2)
    H2 = random_hypernetwork(rng, 2, 2)
    res = coot_distance_bruteforce(H, H2, 2)
    g0 = geodesic_point(H, H2, res.pi, res.xi, 0.0)
    g1 = geodesic_point(H, H2, res.pi, res.xi, 1.0)
    assert coot_distance_bruteforce(g0, H, 2).distance < 1e-12
    assert coot_distance_bruteforce(g1, H2, 2).distance < 1e-12


def test_geodesic_rejects_bad_t():
    H = MeasureHypernetwork(np.eye(2))
    with pytest.raises(ValidationError):
        geodesic_point(H, H, 0.5 * np.eye(2), 0.5 * np.eye(2), 1.5)


def test_geodesic_drops_zero_cells():
    H = MeasureHypernetwork(np.eye(2))
    g = geodesic_point(H, H, 0.5 * np.eye(2), np.full((2, 2), 0.25), 0.5)
    assert g.shape == (2, 4)


def test_collapse_identical_nodes():
    H = MeasureHypernetwork([[1.0, 2.0], [1.0, 2.0]], [1 / 3, 2 / 3], [0.5, 0.5])
    C = collapse_canonical(H)
    assert C.shape == (1, 2)
    assert C.mu[0] == pytest.approx(1.0, abs=1e-15)


def test_collapse_weak_isomorphism_pair():
    W = MeasureHypernetwork([[0, 2, 2], [1, 2, 2]], [1 / 3, 2 / 3], [1 / 3] * 3)
    W2 = MeasureHypernetwork([[0, 2], [1, 2], [1, 2]], [1 / 3] * 3, [1 / 3, 2 / 3])
    C1, C2 = collapse_canonical(W), collapse_canonical(W2)
    assert np.array_equal(C1.omega, C2.omega)
    assert coot_distance_bruteforce(C1, C2, 2).distance == 0.0


def test_collapse_duplicated_column():
    rng = np.random.default_rng(9)
    H = random_hypernetwork(rng, 3, 3)
    w = np.column_stack([H.omega, H.omega[:, 1]])
    nu = np.r_[H.nu * 0.8, 0.2]
    Hd = MeasureHypernetwork(w, H.mu, nu / nu.sum())
    C = collapse_canonical(Hd)
    assert C.shape == (3, 3)
    assert abs(C.nu.sum() - 1.0) < 1e-12
    assert C.nu[1] == pytest.approx(Hd.nu[1] + Hd.nu[3], abs=1e-15)


def test_collapse_tolerance():
    H = MeasureHypernetwork([[1.0, 2.0], [1.0 + 1e-9, 2.0]])
    assert collapse_canonical(H).shape == (2, 2)
    assert collapse_canonical(H, tol=1e-8).shape == (1, 2)


def test_collapse_conserves_mass_and_distance_zero():
    rng = np.random.default_rng(10)
    for _ in range(10):
        w = rng.integers(0, 2, size=(4, 3)).astype(float)
        H = random_hypernetwork(rng, 4, 3)
        H = MeasureHypernetwork(w, H.mu, H.nu)
        C = collapse_canonical(H)
        assert abs(C.mu.sum() - 1) < 1e-12 and abs(C.nu.sum() - 1) < 1e-12
        assert coot_distance_bruteforce(H, C, 2).distance <= 1e-9
        # fixpoint: rows and columns pairwise distinct
        assert len({tuple(r) for r in C.omega}) == C.shape[0]
        assert len({tuple(c) for c in C.omega.T}) == C.shape[1]


def test_doc_roundtrip():
    rng = np.random.default_rng(11)
    H = random_hypernetwork(rng, 2, 3)
    assert MeasureHypernetwork.from_doc(H.to_doc()) == H
