import json
import warnings
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse
from scipy.linalg import eigh

from hodgekit import SCHEMES, Cochain, CochainSpace, OperatorSet, d, delta, inner, laplacian, mass_matrix, meshgen
from hodgekit.cochain import DegreeWarning, _dual_volumes, _primal_volumes
from hodgekit.mesh import MeshError, SimplicialComplex

SURFACES = ["triangle", "octahedron", "torus3", "torus8"]


def cot_weights(K):
    """Cotangent formula: (cot a + cot b) / 2 over the angles opposite each edge."""
    index = K.index(1)
    w = np.zeros(len(K.simplices[1]))
    for tri in K.simplices[2]:
        for k in range(3):
            o = tri[k]
            a, b = (v for v in tri if v != o)
            u, v = K.positions[a] - K.positions[o], K.positions[b] - K.positions[o]
            w[index[(a, b)]] += 0.5 * np.dot(u, v) / np.linalg.norm(np.cross(u, v))
    return w


def regular_tet():
    P = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return SimplicialComplex.from_cells([(0, 1, 2, 3)], positions=P)


@pytest.mark.parametrize("name", sorted(meshgen.BUNDLED))
def test_combinatorial_mass_is_identity(name):
    K = meshgen.bundled(name)
    for p in range(K.dim + 1):
        sp = mass_matrix(K, p)
        assert sp.count == len(K.simplices[p])
        assert (sp.mass != sparse.identity(sp.count)).nnz == 0


def test_barycentric_triangle_entries():
    K = meshgen.triangle()
    area = 0.5 * np.linalg.norm(np.cross(K.positions[1] - K.positions[0], K.positions[2] - K.positions[0]))
    np.testing.assert_allclose(mass_matrix(K, 2, "lumped-barycentric").mass.diagonal(), [1 / area], rtol=1e-14)
    np.testing.assert_allclose(mass_matrix(K, 2, "lumped-barycentric").mass.diagonal(), [4 / np.sqrt(3)], rtol=1e-14)
    np.testing.assert_allclose(mass_matrix(K, 0, "lumped-barycentric").mass.diagonal(), [area / 3] * 3, rtol=1e-14)
    # midpoint-to-centroid distance over unit edge length
    np.testing.assert_allclose(mass_matrix(K, 1, "lumped-barycentric").mass.diagonal(),
                               [np.sqrt(3) / 6] * 3, rtol=1e-14)


@pytest.mark.parametrize("name", ["octahedron", "torus3", "torus8"])
def test_circumcentric_edges_match_cotangent_formula(name):
    K = meshgen.bundled(name)
    M = mass_matrix(K, 1, "lumped-circumcentric").mass.diagonal()
    np.testing.assert_allclose(M, cot_weights(K), rtol=1e-12)


@pytest.mark.parametrize("name", SURFACES)
@pytest.mark.parametrize("scheme", ["lumped-barycentric", "lumped-circumcentric"])
def test_vertex_duals_tile_the_surface(name, scheme):
    K = meshgen.bundled(name)
    total = _primal_volumes(K, 2).sum()
    assert mass_matrix(K, 0, scheme).mass.diagonal().sum() == pytest.approx(total, rel=1e-13)


def test_octahedron_vertex_masses_by_symmetry():
    K = meshgen.octahedron()
    total = 8 * np.sqrt(3) / 2
    for scheme in ("lumped-barycentric", "lumped-circumcentric"):
        np.testing.assert_allclose(mass_matrix(K, 0, scheme).mass.diagonal(), [total / 6] * 6, rtol=1e-13)


@pytest.mark.parametrize("p", range(4))
def test_circumcentric_volume_identity_on_tet(p):
    # sum over p-simplices of |s| |dual s| = C(n, p) |T| for well-centered simplices
    K = regular_tet()
    vol = _primal_volumes(K, 3)[0]
    pairs = _primal_volumes(K, p) * _dual_volumes(K, p, circumcentric=True)
    assert pairs.sum() == pytest.approx(comb(3, p) * vol, rel=1e-13)


def test_tet_vertex_mass_quarter_volume():
    K = regular_tet()
    vol = _primal_volumes(K, 3)[0]
    for scheme in ("lumped-barycentric", "lumped-circumcentric"):
        np.testing.assert_allclose(mass_matrix(K, 0, scheme).mass.diagonal(), [vol / 4] * 4, rtol=1e-13)


def test_cycle_vertex_masses_are_half_edges():
    K = meshgen.cycle(12)
    edge = 2 * np.sin(np.pi / 12)
    for scheme in ("lumped-barycentric", "lumped-circumcentric"):
        np.testing.assert_allclose(mass_matrix(K, 0, scheme).mass.diagonal(), [edge] * 12, rtol=1e-13)
        np.testing.assert_allclose(mass_matrix(K, 1, scheme).mass.diagonal(), [1 / edge] * 12, rtol=1e-13)


def test_mass_errors():
    with pytest.raises(MeshError, match="positions"):
        mass_matrix(SimplicialComplex.from_cells([(0, 1, 2)]), 0, "lumped-barycentric")
    flat = SimplicialComplex.from_cells([(0, 1, 2)], positions=[[0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.raises(MeshError, match="degenerate"):
        mass_matrix(flat, 0, "lumped-barycentric")
    obtuse = SimplicialComplex.from_cells([(0, 1, 2), (1, 2, 3)],
                                          positions=[[0, 0, 0], [4, 0, 0], [2, 0.3, 0], [2, -3, 0]])
    with pytest.raises(MeshError, match="well-centered"):
        mass_matrix(obtuse, 1, "lumped-circumcentric")
    with pytest.raises(ValueError):
        mass_matrix(meshgen.triangle(), 0, "galerkin")


def test_standard_torus_grid_is_not_well_centered():
    with pytest.raises(MeshError, match="well-centered"):
        OperatorSet.build(meshgen.torus(8), "lumped-circumcentric")


def test_df_on_edge():
    ops = OperatorSet.build(SimplicialComplex.from_cells([(0, 1)]))
    f = Cochain(0, [2.5, 7.0])
    np.testing.assert_allclose(d(ops, f).values, [4.5])


@pytest.mark.parametrize("name", sorted(meshgen.BUNDLED))
def test_d_of_constant_is_zero(name):
    ops = OperatorSet.build(meshgen.bundled(name))
    assert not d(ops, Cochain(0, np.ones(ops.count(0)))).values.any()


def test_dd_octahedron():
    ops = OperatorSet.build(meshgen.octahedron(), "lumped-barycentric")
    a = Cochain(0, np.random.default_rng(0).standard_normal(6))
    da = d(ops, a)
    assert np.abs(d(ops, da).values).max() <= 1e-12 * np.abs(da.values).max()


def test_delta_single_edge():
    ops = OperatorSet.build(SimplicialComplex.from_cells([(0, 1)]))
    np.testing.assert_array_equal(delta(ops, Cochain(1, [1.0])).values, [-1.0, 1.0])


def test_delta_of_d_constant():
    ops = OperatorSet.build(meshgen.octahedron(), "lumped-circumcentric")
    assert not delta(ops, d(ops, Cochain(0, np.ones(6)))).values.any()


def test_delta_matches_dense_formula():
    K = meshgen.torus3()
    ops = OperatorSet.build(K, "lumped-barycentric")
    rng = np.random.default_rng(4)
    for p in (1, 2):
        M0 = ops.mass(p - 1).toarray()
        M1 = ops.mass(p).toarray()
        D = (ops.complex.boundary[p].T).toarray().astype(float)
        b = rng.standard_normal(ops.count(p))
        np.testing.assert_allclose(delta(ops, Cochain(p, b)).values, np.linalg.solve(M0, D.T @ M1 @ b),
                                   rtol=1e-12, atol=1e-12)


def test_degree_edge_cases_warn():
    ops = OperatorSet.build(meshgen.triangle())
    with pytest.warns(DegreeWarning):
        top = d(ops, Cochain(2, [1.0]))
    assert top.degree == 3 and len(top) == 0
    with pytest.warns(DegreeWarning):
        low = delta(ops, Cochain(0, [1.0, 2.0, 3.0]))
    assert low.degree == -1 and len(low) == 0


def test_k3_laplacian():
    ops = OperatorSet.build(meshgen.cycle(3))
    np.testing.assert_allclose(laplacian(ops, Cochain(0, [1, 0, 0])).values, [2, -1, -1])


@pytest.mark.parametrize("name", sorted(meshgen.BUNDLED))
def test_laplacian_kills_constants(name):
    ops = OperatorSet.build(meshgen.bundled(name), "lumped-barycentric")
    out = laplacian(ops, Cochain(0, np.ones(ops.count(0))))
    assert np.abs(out.values).max() <= 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_laplacian_equals_dd_plus_dd_and_stiffness(scheme):
    ops = OperatorSet.build(meshgen.torus8(), scheme)
    rng = np.random.default_rng(1)
    for p in range(3):
        a = Cochain(p, rng.standard_normal(ops.count(p)))
        parts = np.zeros(ops.count(p))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegreeWarning)
            if p < 2:
                parts += delta(ops, d(ops, a)).values
            if p > 0:
                parts += d(ops, delta(ops, a)).values
        lap = laplacian(ops, a).values
        via_k = ops.solve_mass(p, ops.stiffness(p) @ a.values)
        scale = np.abs(lap).max()
        assert np.abs(lap - parts).max() <= 1e-10 * scale
        assert np.abs(lap - via_k).max() <= 1e-10 * scale


def test_laplacian_on_eigencochain():
    ops = OperatorSet.build(meshgen.octahedron(), "lumped-circumcentric")
    K1, M1 = ops.stiffness(1).toarray(), ops.mass(1).toarray()
    w, V = eigh(K1, M1)
    for j in (0, 5, 11):
        out = laplacian(ops, Cochain(1, V[:, j])).values
        assert np.linalg.norm(out - w[j] * V[:, j]) <= 1e-8 * max(w[j], 1.0) * np.linalg.norm(V[:, j])


def test_inner_examples():
    sp = mass_matrix(SimplicialComplex.from_cells([(0, 1)]), 0)
    assert inner(sp, Cochain(0, [1, 2]), Cochain(0, [3, 4])) == 11
    assert inner(sp, Cochain(0, [0, 0]), Cochain(0, [0, 0])) == 0
    lumped = CochainSpace(0, 2, sparse.diags([2.0, 0.5], format="csr"))
    assert inner(lumped, Cochain(0, [1, 1]), Cochain(0, [1, 1])) == 2.5
    with pytest.raises(ValueError):
        inner(sp, Cochain(1, [1]), Cochain(0, [1, 2]))


@pytest.mark.parametrize("name", ["octahedron", "torus8", "c12"])
@pytest.mark.parametrize("scheme", SCHEMES)
def test_operator_invariants(name, scheme):
    ops = OperatorSet.build(meshgen.bundled(name), scheme)
    rng = np.random.default_rng(2)
    for p in range(ops.dim + 1):
        M = ops.mass(p).toarray()
        assert np.all(M == M.T) and np.all(np.linalg.eigvalsh(M) > 0)
        K = ops.stiffness(p).toarray()
        assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
        X = rng.standard_normal((ops.count(p), 50))
        Y = rng.standard_normal((ops.count(p), 50))
        q = np.einsum("ij,ij->j", X, K @ X)
        assert q.min() >= -1e-12 * np.einsum("ij,ij->j", X, X).max()
        lhs = ops.inner(p, ops.apply_laplacian(p, X), Y)
        rhs = ops.inner(p, X, ops.apply_laplacian(p, Y))
        assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(lhs).max()
        if p < ops.dim:
            B = rng.standard_normal((ops.count(p + 1), 50))
            gap = ops.inner(p + 1, ops.apply_d(p, X), B) - ops.inner(p, X, ops.apply_delta(p + 1, B))
            assert np.abs(gap).max() <= 1e-10 * (ops.norm(p, X) * ops.norm(p + 1, B)).max()
            # d commutes with the Laplacian
            lhs = ops.apply_d(p, ops.apply_laplacian(p, X))
            rhs = ops.apply_laplacian(p + 1, ops.apply_d(p, X))
            assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(lhs).max()
            # delta commutes with the Laplacian
            lhs = ops.apply_delta(p + 1, ops.apply_laplacian(p + 1, B))
            rhs = ops.apply_laplacian(p, ops.apply_delta(p + 1, B))
            assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(lhs).max()


def test_kernel_of_laplacian_is_closed_and_coclosed():
    ops = OperatorSet.build(meshgen.torus8(), "lumped-circumcentric")
    w, X = ops.pencil(1)
    lam_max = w[-1]
    for j in range(len(w)):
        x = X[:, j]
        lap = ops.norm(1, ops.apply_laplacian(1, x))
        eps = lap / ops.norm(1, x)
        if eps <= 1e-8 * lam_max:
            energy = ops.norm(2, ops.apply_d(1, x)) ** 2 + ops.norm(0, ops.apply_delta(1, x)) ** 2
            assert energy <= lam_max * eps * ops.norm(1, x) ** 2 + 1e-14


def test_asymmetric_mass_rejected():
    K = meshgen.cycle(4)
    spaces = [mass_matrix(K, p) for p in range(2)]
    M = spaces[0].mass.tolil()
    M[0, 1] = 0.5
    spaces[0] = CochainSpace(0, 4, sparse.csr_matrix(M))
    with pytest.raises(ValueError):
        OperatorSet(K, spaces)


def test_cochain_json_round_trip_and_length_check():
    a = Cochain(1, [0.1, -2.0, 3.5])
    b = Cochain.from_json(a.to_json(), count=3)
    assert b.degree == 1 and np.array_equal(a.values, b.values)
    assert json.loads(a.to_json()) == {"degree": 1, "values": [0.1, -2.0, 3.5]}
    with pytest.raises(ValueError, match="3 values"):
        Cochain.from_json(a.to_json(), count=4)
    with pytest.raises(ValueError):
        Cochain.from_json('{"values": [1]}')


def test_cochain_is_immutable_and_arithmetic():
    a = Cochain(0, [1.0, 2.0])
    with pytest.raises(ValueError):
        a.values[0] = 5.0
    np.testing.assert_array_equal((a + 2 * a - a).values, [2.0, 4.0])
    with pytest.raises(ValueError):
        a + Cochain(1, [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2**31 - 1), st.sampled_from(SCHEMES))
def test_adjointness_hypothesis(p, seed, scheme):
    ops = _torus3_ops(scheme)
    if p == ops.dim:
        p -= 1
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(ops.count(p)) * rng.uniform(1e-3, 1e3)
    b = rng.standard_normal(ops.count(p + 1)) * rng.uniform(1e-3, 1e3)
    gap = ops.inner(p + 1, ops.apply_d(p, a), b) - ops.inner(p, a, ops.apply_delta(p + 1, b))
    assert abs(gap) <= 1e-10 * ops.norm(p, a) * ops.norm(p + 1, b)


_CACHE = {}


def _torus3_ops(scheme):
    if scheme not in _CACHE:
        _CACHE[scheme] = OperatorSet.build(meshgen.torus3(), scheme)
    return _CACHE[scheme]
