import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ammkit.errors import InvalidMatrixError, TopologyError
from ammkit.graph_topology import (
    Topology,
    WeightPair,
    build_laplacian,
    build_metropolis,
    complete_graph,
    laplacian_matrix,
    lambda_max,
    lambda_max_upper_bound,
    metropolis_average_matrix,
    metropolis_matrix,
    parse_edge_list,
    path_graph,
    psd_pinv_sqrt,
    psd_sqrt,
    random_connected_graph,
    read_edge_list,
    smallest_nonzero_eigenvalue,
    validate_weight_pair,
    write_edge_list,
)

SINGLE_EDGE = Topology(2, ((0, 1),))


class TestTopology:
    def test_edges_are_canonical(self):
        t = Topology(3, ((1, 0), (2, 1)))
        assert t.edges == ((0, 1), (1, 2))
        assert t.neighbors(1) == (0, 2)
        assert t.degree(1) == 2

    @pytest.mark.parametrize("edges, msg", [
        (((0, 0),), "self-loop"),
        (((0, 1), (1, 0)), "duplicate"),
        (((0, 5),), "out of range"),
        (((0, 1),), "disconnected"),
    ])
    def test_rejects_malformed(self, edges, msg):
        with pytest.raises(TopologyError, match=msg):
            Topology(3, edges)

    def test_random_graph_edge_count(self):
        t = random_connected_graph(20, 26, seed=1)
        assert t.n_edges == 26
        assert t.is_connected()

    def test_random_graph_impossible(self):
        with pytest.raises(TopologyError):
            random_connected_graph(5, 3, seed=0)
        with pytest.raises(TopologyError):
            random_connected_graph(4, 7, seed=0)

    def test_edge_list_round_trip(self, tmp_path):
        t = random_connected_graph(12, 20, seed=3)
        path = tmp_path / "g.txt"
        write_edge_list(t, path)
        assert path.read_text().splitlines()[0].split() == [str(t.edges[0][0] + 1), str(t.edges[0][1] + 1)]
        assert read_edge_list(path, 12) == t

    def test_edge_list_parse_errors(self):
        with pytest.raises(TopologyError, match="line 2"):
            parse_edge_list("1 2\n2 x\n")
        with pytest.raises(TopologyError, match="1-indexed"):
            parse_edge_list("0 1\n")


class TestMetropolis:
    def test_path3_entries(self):
        M = metropolis_matrix(path_graph(3))
        assert M[0, 1] == pytest.approx(-1 / 3)
        assert M[1, 2] == pytest.approx(-1 / 3)
        assert M[0, 0] == pytest.approx(1 / 3)
        assert M[1, 1] == pytest.approx(2 / 3)
        assert M[0, 2] == 0.0

    def test_single_edge(self):
        M = metropolis_matrix(SINGLE_EDGE)
        np.testing.assert_allclose(M, [[0.5, -0.5], [-0.5, 0.5]])
        np.testing.assert_allclose(np.linalg.eigvalsh(M), [0.0, 1.0], atol=1e-15)

    def test_complete3(self):
        M = metropolis_matrix(complete_graph(3))
        off = M[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off, -1 / 3)
        np.testing.assert_allclose(np.diag(M), 2 / 3)
        ev, U = np.linalg.eigh(M)
        assert abs(ev[0]) < 1e-14 and ev[1] > 1e-9
        np.testing.assert_allclose(np.abs(U[:, 0]), 1 / np.sqrt(3))

    def test_average_matrix_doubly_stochastic(self):
        W = metropolis_average_matrix(random_connected_graph(10, 15, seed=2))
        np.testing.assert_allclose(W.sum(axis=0), 1.0, atol=1e-14)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-14)
        assert (W >= 0).all()


class TestLaplacian:
    def test_path3(self):
        L = laplacian_matrix(path_graph(3))
        np.testing.assert_array_equal(np.diag(L), [1, 2, 1])
        np.testing.assert_allclose(np.linalg.eigvalsh(L), [0, 1, 3], atol=1e-14)

    def test_single_edge(self):
        np.testing.assert_array_equal(laplacian_matrix(SINGLE_EDGE), [[1, -1], [-1, 1]])

    def test_complete3(self):
        np.testing.assert_allclose(np.linalg.eigvalsh(laplacian_matrix(complete_graph(3))), [0, 3, 3], atol=1e-14)

    def test_nonpositive_scale(self):
        with pytest.raises(InvalidMatrixError):
            build_laplacian(path_graph(3), scale=0.0)


class TestValidator:
    def test_metropolis_passes(self):
        t = random_connected_graph(8, 12, seed=4)
        assert validate_weight_pair(build_metropolis(t), t, require_dominated=True).ok

    def test_sparsity_violation(self):
        t = path_graph(3)
        P = laplacian_matrix(t).astype(float)
        P[0, 2] = P[2, 0] = -0.1
        P[0, 0] += 0.1
        P[2, 2] += 0.1
        rep = validate_weight_pair(WeightPair(P, laplacian_matrix(t)), t)
        assert not rep.ok
        chk = rep.get("P neighbor-sparse")
        assert not chk.passed and "(1,3)" in chk.detail

    def test_domination_failure(self):
        t = path_graph(4)
        L = laplacian_matrix(t)
        rep = validate_weight_pair(WeightPair(L, 2 * L), t, require_dominated=True)
        assert [c.name for c in rep.failures] == ["P ⪰ P̃"]

    def test_null_space_failure(self):
        t = path_graph(3)
        rep = validate_weight_pair(WeightPair(np.eye(3), laplacian_matrix(t)), t, require_sparse=False)
        assert not rep.get("P null space = span(1)").passed

    def test_asymmetry_reported(self):
        t = path_graph(3)
        P = laplacian_matrix(t).astype(float)
        P[0, 1] -= 0.5
        assert not validate_weight_pair(WeightPair(P, laplacian_matrix(t)), t).get("P symmetric").passed

    def test_shape_mismatch(self):
        with pytest.raises(InvalidMatrixError):
            WeightPair(np.eye(2), np.eye(3))

    @pytest.mark.parametrize("seed", range(100))
    def test_random_graphs(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 15))
        m = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
        t = random_connected_graph(n, m, seed=seed)
        for wp in (build_metropolis(t), build_laplacian(t), build_metropolis(t).scaled(0.5)):
            assert validate_weight_pair(wp, t, require_dominated=True).ok
            assert np.linalg.norm(wp.P @ np.ones(n)) <= 1e-12


class TestSpectral:
    def test_upper_bound_single_edge(self):
        wp = build_metropolis(SINGLE_EDGE)
        assert lambda_max_upper_bound(wp) == pytest.approx(1.0)
        assert lambda_max(wp.P) == pytest.approx(1.0)

    def test_upper_bound_path3_laplacian(self):
        wp = build_laplacian(path_graph(3))
        assert lambda_max_upper_bound(wp) == pytest.approx(3.0)
        assert lambda_max(wp.P) == pytest.approx(3.0)

    @given(st.integers(2, 12), st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_upper_bound_dominates(self, n, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
        t = random_connected_graph(n, m, seed=seed)
        for wp in (build_metropolis(t), build_laplacian(t)):
            assert lambda_max_upper_bound(wp) >= lambda_max(wp.P) - 1e-12

    @pytest.mark.parametrize("wp, expected", [
        (build_metropolis(SINGLE_EDGE), 1.0),
        (build_laplacian(path_graph(3)), 1.0),
        (build_laplacian(complete_graph(3)), 3.0),
    ])
    def test_smallest_nonzero(self, wp, expected):
        assert smallest_nonzero_eigenvalue(wp) == pytest.approx(expected)

    def test_smallest_nonzero_rejects_large_null_space(self):
        with pytest.raises(InvalidMatrixError):
            smallest_nonzero_eigenvalue(np.zeros((3, 3)))

    def test_psd_roots(self):
        L = laplacian_matrix(random_connected_graph(7, 10, seed=5)).astype(float)
        R = psd_sqrt(L)
        np.testing.assert_allclose(R @ R, L, atol=1e-12)
        Ri = psd_pinv_sqrt(L)
        proj = np.eye(7) - np.ones((7, 7)) / 7
        np.testing.assert_allclose(Ri @ R, proj, atol=1e-10)
