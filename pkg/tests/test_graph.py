import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chebdist.graph import (
    DisconnectedGraphError,
    GraphError,
    WeightedGraph,
    build_geometric_graph,
    connection_radius,
    gaussian_weight,
    gft,
    igft,
    lambda_max_bound,
    laplacian,
    smoothness,
    spectrum,
)

from conftest import complete_graph, path_graph, random_graph

# P3 eigenpairs from the characteristic polynomial x(x - 1)(x - 3)
P3_EIGENVALUES = np.array([0.0, 1.0, 3.0])
P3_EIGENVECTORS = np.column_stack([
    np.array([1.0, 1.0, 1.0]) / math.sqrt(3),
    np.array([1.0, 0.0, -1.0]) / math.sqrt(2),
    np.array([1.0, -2.0, 1.0]) / math.sqrt(6),
])


class TestWeightedGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(GraphError):
            WeightedGraph(2, [(0, 0, 1.0)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(GraphError):
            WeightedGraph(2, [(0, 1, 0.0)])

    def test_rejects_duplicate_pair(self):
        with pytest.raises(GraphError):
            WeightedGraph(2, [(0, 1, 1.0), (1, 0, 2.0)])

    def test_rejects_disconnected(self):
        with pytest.raises(DisconnectedGraphError):
            WeightedGraph(3, [(0, 1, 1.0)])

    def test_edges_normalized_and_sorted(self):
        g = WeightedGraph(3, [(2, 1, 0.5), (1, 0, 2.0)])
        assert g.edges == ((0, 1, 2.0), (1, 2, 0.5))
        assert g.neighbor_lists[1] == ((0, 2.0), (2, 0.5))

    def test_adjacency_symmetric(self, rng):
        g = random_graph(rng, 40)
        a = g.adjacency.toarray()
        np.testing.assert_array_equal(a, a.T)
        assert np.all(np.diag(a) == 0)

    def test_json_round_trip(self, rng):
        g = random_graph(rng, 20)
        data = json.loads(g.to_json())
        assert set(data) == {"n", "edges", "positions"}
        h = WeightedGraph.from_json(g.to_json())
        assert h.edges == g.edges
        np.testing.assert_array_equal(h.positions, g.positions)


class TestGeometricGraph:
    def test_coincident_points_weight_one(self):
        g = build_geometric_graph([[0.3, 0.3], [0.3, 0.3]], sigma=0.074, kappa=1.0)
        assert g.edges == ((0, 1, 1.0),)

    def test_weight_at_distance_005(self):
        g = build_geometric_graph([[0.0, 0.0], [0.05, 0.0]], sigma=0.074, kappa=0.6)
        assert g.edges[0][2] == pytest.approx(0.7959, abs=1e-4)
        assert float(gaussian_weight(0.05, 0.074)) == pytest.approx(0.7959102829515173, rel=1e-12)

    def test_connection_radius_matches_075(self):
        assert connection_radius(0.074, 0.6) == pytest.approx(0.075, abs=5e-4)
        near = build_geometric_graph([[0.1, 0.1], [0.1 + 0.0745, 0.1]], 0.074, 0.6, require_connected=False)
        far = build_geometric_graph([[0.1, 0.1], [0.1 + 0.0755, 0.1]], 0.074, 0.6, require_connected=False)
        assert near.num_edges == 1 and far.num_edges == 0

    def test_threshold_is_on_weight(self, rng):
        pts = rng.random((200, 2))
        g = build_geometric_graph(pts, 0.074, 0.6, require_connected=False)
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        w = np.exp(-d**2 / (2 * 0.074**2))
        iu = np.triu_indices(200, 1)
        expected = {(int(i), int(j)) for i, j in zip(*iu) if w[i, j] >= 0.6}
        assert {(m, k) for m, k, _ in g.edges} == expected

    def test_distance_threshold_flag(self):
        pts = [[0.0, 0.0], [0.3, 0.0]]
        g = build_geometric_graph(pts, 0.074, 0.35, threshold="distance")
        assert g.num_edges == 1
        assert g.edges[0][2] == pytest.approx(math.exp(-0.09 / (2 * 0.074**2)))

    def test_too_few_points(self):
        with pytest.raises(GraphError):
            build_geometric_graph([[0.5, 0.5]], 0.1, 0.6)

    def test_disconnected_is_distinct_error(self):
        with pytest.raises(DisconnectedGraphError):
            build_geometric_graph([[0.0, 0.0], [1.0, 1.0]], 0.074, 0.6)


class TestLaplacian:
    def test_path3(self, p3):
        expected = np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=float)
        np.testing.assert_array_equal(laplacian(p3).toarray(), expected)

    def test_constant_in_kernel(self, rng):
        g = random_graph(rng, 50)
        lap = laplacian(g)
        np.testing.assert_allclose(lap @ np.full(50, 3.7), 0.0, atol=1e-12 * g.degrees.max() * 3.7)

    def test_stencil_formula(self, rng):
        g = random_graph(rng, 30)
        f = rng.standard_normal(30)
        stencil = np.array([sum(w * (f[m] - f[k]) for k, w in g.neighbor_lists[m]) for m in range(30)])
        np.testing.assert_allclose(laplacian(g) @ f, stencil, rtol=1e-12, atol=1e-12)

    def test_single_edge_eigenvalues(self):
        w = 0.37
        s = spectrum(laplacian(WeightedGraph(2, [(0, 1, w)])))
        np.testing.assert_allclose(s.eigenvalues, [0.0, 2 * w], atol=1e-14)

    def test_row_sums_and_psd_on_generated_graphs(self, rng):
        for _ in range(10):
            g = random_graph(rng, int(rng.integers(10, 80)))
            lap = laplacian(g)
            rows = np.asarray(lap.matrix.sum(axis=1)).ravel()
            assert np.all(np.abs(rows) <= 1e-12 * np.maximum(g.degrees, 1.0))
            for _ in range(10):
                f = rng.standard_normal(g.num_vertices)
                assert f @ (lap @ f) >= 0


class TestSpectrum:
    def test_path3(self, p3):
        s = spectrum(laplacian(p3))
        np.testing.assert_allclose(s.eigenvalues, P3_EIGENVALUES, atol=1e-14)
        # eigenvectors agree with the hand-derived ones up to sign
        overlap = np.abs(s.eigenvectors.T @ P3_EIGENVECTORS)
        np.testing.assert_allclose(overlap, np.eye(3), atol=1e-12)

    def test_complete_graph_k4(self):
        s = spectrum(laplacian(complete_graph(4)))
        np.testing.assert_allclose(s.eigenvalues, [0, 4, 4, 4], atol=1e-12)

    def test_invariants(self, rng):
        g = random_graph(rng, 60)
        lap = laplacian(g)
        s = spectrum(lap)
        assert abs(s.eigenvalues[0]) < 1e-10
        assert s.eigenvalues[1] > 0
        assert np.all(np.diff(s.eigenvalues) >= 0)
        x = s.eigenvectors
        np.testing.assert_allclose(x.T @ x, np.eye(60), atol=1e-10)
        resid = np.linalg.norm(lap @ x - x * s.eigenvalues, axis=0)
        assert np.all(resid <= 1e-9 * max(s.lambda_max, 1.0))
        chi0 = x[:, 0]
        np.testing.assert_allclose(chi0, chi0[0], atol=1e-10)

    def test_size_guard(self, rng):
        g = random_graph(rng, 30)
        with pytest.raises(GraphError):
            spectrum(laplacian(g), max_size=20)

    def test_fiedler_vector_splits_path(self):
        for n in (5, 12, 31):
            s = spectrum(laplacian(path_graph(n)))
            signs = np.sign(s.eigenvectors[:, 1])
            nonzero = signs[signs != 0]
            assert np.count_nonzero(np.diff(nonzero)) == 1


class TestFourier:
    def test_eigenvector_maps_to_unit(self, rng):
        s = spectrum(laplacian(random_graph(rng, 25)))
        for ell in (0, 5, 24):
            e = np.zeros(25)
            e[ell] = 1.0
            np.testing.assert_allclose(gft(s, s.eigenvectors[:, ell]), e, atol=1e-12)
            np.testing.assert_allclose(igft(s, e), s.eigenvectors[:, ell], atol=1e-15)

    def test_constant_on_path3(self, p3):
        s = spectrum(laplacian(p3))
        c = 2.5
        fhat = gft(s, np.full(3, c))
        np.testing.assert_allclose(np.abs(fhat), [c * math.sqrt(3), 0, 0], atol=1e-12)

    def test_zero(self, p3):
        s = spectrum(laplacian(p3))
        np.testing.assert_array_equal(igft(s, np.zeros(3)), np.zeros(3))

    def test_dimension_mismatch(self, p3):
        s = spectrum(laplacian(p3))
        with pytest.raises(ValueError):
            gft(s, np.zeros(4))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=20, max_size=20))
    def test_round_trip(self, values):
        s = _N20_SPECTRUM
        f = np.array(values)
        assert np.max(np.abs(igft(s, gft(s, f)) - f)) < 1e-12 * max(1.0, np.abs(f).max())


_N20_SPECTRUM = spectrum(laplacian(random_graph(np.random.default_rng(7), 20)))


class TestLambdaMaxBound:
    def test_single_edge_exact(self):
        w = 1.7
        assert lambda_max_bound(WeightedGraph(2, [(0, 1, w)])) == pytest.approx(2 * w)

    def test_path3(self, p3):
        assert lambda_max_bound(p3) == 3.0

    def test_k4(self):
        assert lambda_max_bound(complete_graph(4)) == 6.0

    def test_edgeless(self):
        with pytest.raises(GraphError):
            lambda_max_bound(WeightedGraph(1, []))

    def test_dominates_true_lambda_max(self, rng):
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(5, 100)))
            assert lambda_max_bound(g) >= spectrum(laplacian(g)).lambda_max


class TestSmoothness:
    def test_constant_is_zero(self, rng):
        g = random_graph(rng, 30)
        for r in (1, 2, 3):
            assert smoothness(g, np.full(30, -4.0), r) == pytest.approx(0.0, abs=1e-20)

    def test_single_edge(self):
        assert smoothness(WeightedGraph(2, [(0, 1, 1.0)]), [1.0, 0.0], 1) == pytest.approx(1.0)

    def test_eigenvector(self, rng):
        g = random_graph(rng, 30)
        s = spectrum(laplacian(g))
        for r in (1, 2, 3):
            assert smoothness(g, s.eigenvectors[:, 7], r) == pytest.approx(s.eigenvalues[7] ** r, rel=1e-9)

    def test_pairwise_form(self, rng):
        g = random_graph(rng, 30)
        f = rng.standard_normal(30)
        pairwise = 0.5 * sum(w * (f[m] - f[k]) ** 2 for m in range(30) for k, w in g.neighbor_lists[m])
        assert smoothness(g, f, 1) == pytest.approx(pairwise, rel=1e-12)

    def test_matches_spectral(self, rng):
        for _ in range(5):
            g = random_graph(rng, int(rng.integers(10, 50)))
            s = spectrum(laplacian(g))
            f = rng.standard_normal(g.num_vertices)
            fhat = gft(s, f)
            for r in (1, 2, 3):
                ref = float(np.sum(s.eigenvalues**r * fhat**2))
                assert smoothness(g, f, r) == pytest.approx(ref, rel=1e-8)
