"""Diffusion flows, residual blending, Dirichlet energy, and full runs."""

import numpy as np
import pytest

from hypdiff import ball
from hypdiff.ball import Curvature
from hypdiff.diffusion import (
    EmbeddingState,
    ResidualSpec,
    build_flow,
    diffusion_flow,
    dirichlet_energy,
    features_to_state,
    gradient,
    initial_state,
    residual_flow,
    run_diffusion,
)
from hypdiff.diffusivity import DiffusivityConfig, DiffusivityMatrix, isotropic_weights
from hypdiff.graphs import Graph, erdos_renyi
from hypdiff.solvers import SolverSpec

from _oracles import rk38_step

K1 = Curvature(-1.0)
KSMALL = Curvature(-1e-6)


def two_point_state(kappa=K1):
    return np.array([[0.2, 0.1], [-0.3, 0.25]])


class TestEmbeddingState:
    def test_projects_rows(self):
        st = EmbeddingState(points=np.array([[5.0, 0.0]]), curvature=K1)
        assert np.linalg.norm(st.points[0]) < 1.0

    def test_shape_check(self):
        with pytest.raises(ValueError):
            EmbeddingState(points=np.zeros(3), curvature=K1)


class TestResidualSpec:
    def test_defaults(self):
        assert ResidualSpec().eta == (1.0, 0.6, 0.1)

    def test_validation(self):
        with pytest.raises(ValueError):
            ResidualSpec(eta=(1.0, 2.0))
        with pytest.raises(ValueError):
            ResidualSpec(eta=(0.0, 0.0, 0.0))


class TestGradient:
    def test_zero_at_same_point(self):
        pts = two_point_state()
        out = gradient(pts, [(0, 0), (1, 1)], K1)
        np.testing.assert_array_equal(out, np.zeros((2, 2)))

    def test_flat_limit(self):
        pts = two_point_state()
        out = gradient(pts, [(0, 1)], KSMALL)
        np.testing.assert_allclose(out[0], pts[1] - pts[0], atol=1e-6)

    def test_exp_inverts(self):
        pts = two_point_state()
        out = gradient(pts, [(0, 1)], K1)
        np.testing.assert_allclose(
            ball.exp_map(pts[0], out[0], K1), pts[1], atol=1e-12
        )

    def test_index_check(self):
        with pytest.raises(IndexError):
            gradient(two_point_state(), [(0, 5)], K1)


class TestDiffusionFlow:
    def test_zero_weights_identity(self):
        pts = two_point_state()
        dmat = DiffusivityMatrix(
            n=2, edge_index=[[0, 1], [1, 0]], edge_weights=[0.0, 0.0]
        )
        np.testing.assert_allclose(diffusion_flow(pts, dmat, K1), pts, atol=1e-15)

    def test_unit_weight_single_neighbor_swaps(self):
        pts = two_point_state()
        dmat = DiffusivityMatrix(
            n=2, edge_index=[[0, 1], [1, 0]], edge_weights=[1.0, 1.0]
        )
        out = diffusion_flow(pts, dmat, K1)
        np.testing.assert_allclose(out[0], pts[1], atol=1e-12)
        np.testing.assert_allclose(out[1], pts[0], atol=1e-12)

    def test_flat_limit_matches_graph_diffusion(self):
        g = erdos_renyi(12, 0.4, seed=2)
        rng = np.random.default_rng(3)
        pts = 0.1 * rng.standard_normal((12, 3))
        out = diffusion_flow(pts, isotropic_weights(g), KSMALL)
        deg = g.degrees
        expected = pts.copy()
        for u, v in g.edges:
            w = 1.0 / np.sqrt(deg[u] * deg[v])
            expected[u] += w * (pts[v] - pts[u])
            expected[v] += w * (pts[u] - pts[v])
        np.testing.assert_allclose(out, expected, atol=1e-5)

    def test_tanh_activation(self):
        pts = two_point_state()
        dmat = DiffusivityMatrix(
            n=2, edge_index=[[0, 1], [1, 0]], edge_weights=[1.0, 1.0]
        )
        out = diffusion_flow(pts, dmat, K1, sigma="tanh")
        want = ball.exp_map(pts, np.tanh(ball.log_map(pts, pts[::-1], K1)), K1)
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_unknown_sigma(self):
        pts = two_point_state()
        dmat = DiffusivityMatrix(n=2, edge_index=[[0], [1]], edge_weights=[1.0])
        with pytest.raises(ValueError):
            diffusion_flow(pts, dmat, K1, sigma="relu")

    def test_nonfinite_aggregate_names_node(self):
        pts = two_point_state()
        dmat = DiffusivityMatrix(
            n=2, edge_index=[[0, 1], [1, 0]], edge_weights=[np.inf, 1.0]
        )
        with pytest.raises(FloatingPointError, match="node 0"):
            diffusion_flow(pts, dmat, K1)


class TestResidualFlow:
    def test_pure_dynamic(self):
        rng = np.random.default_rng(4)
        z_dot, z_t, z_0 = (0.3 * rng.standard_normal((5, 2)) for _ in range(3))
        out = residual_flow(z_dot, z_t, z_0, ResidualSpec(eta=(1.0, 0.0, 0.0)), K1)
        np.testing.assert_allclose(out, z_dot, atol=1e-12)

    def test_all_equal_states(self):
        z = two_point_state()
        out = residual_flow(z, z, z, ResidualSpec(), K1)
        np.testing.assert_allclose(out, z, atol=1e-12)

    def test_shape_mismatch(self):
        z = two_point_state()
        with pytest.raises(ValueError):
            residual_flow(z, z, z[:1], ResidualSpec(), K1)


class TestDirichletEnergy:
    def test_edgeless_graph(self):
        g = Graph.from_edges([], n=3)
        assert dirichlet_energy(np.zeros((3, 2)), g, K1) == 0.0

    def test_equal_points_regular_graph(self):
        g = Graph.from_edges([(0, 1), (1, 2), (2, 3), (0, 3)])
        pts = np.tile(np.array([0.2, -0.1]), (4, 1))
        assert dirichlet_energy(pts, g, K1) == pytest.approx(0.0, abs=1e-25)

    def test_single_edge_hand_value(self):
        g = Graph.from_edges([(0, 1)])
        z2 = np.array([np.tanh(0.5), 0.0])
        pts = np.array([[0.0, 0.0], z2])
        o = np.zeros(2)
        img = ball.exp_map(o, ball.log_map(o, z2, K1) / np.sqrt(2.0), K1)
        want = 0.5 * float(ball.distance(o, img, K1)) ** 2
        assert dirichlet_energy(pts, g, K1) == pytest.approx(want, rel=1e-12)

    def test_nonnegative(self):
        g = erdos_renyi(10, 0.4, seed=6)
        rng = np.random.default_rng(7)
        pts = ball.project_to_ball(0.4 * rng.standard_normal((10, 3)), K1)
        assert dirichlet_energy(pts, g, K1) >= 0.0


class TestRunDiffusion:
    def test_single_heuler_step_is_one_flow_application(self):
        g = erdos_renyi(10, 0.4, seed=8)
        z0 = initial_state(10, 3, K1, seed=8)
        dcfg = DiffusivityConfig(scheme="isotropic")
        spec = SolverSpec(method="heuler", tau=1.0, t_final=1.0)
        final, trace = run_diffusion(z0, g, dcfg, spec)
        want = diffusion_flow(z0.points, isotropic_weights(g), K1)
        np.testing.assert_allclose(final.points, want, atol=1e-12)
        assert [t for t, _ in trace] == [0.0, 1.0]

    def test_energy_decays_without_residual(self):
        g = erdos_renyi(50, 0.1, seed=3)
        z0 = initial_state(50, 8, K1, seed=3)
        dcfg = DiffusivityConfig(scheme="isotropic")
        spec = SolverSpec(method="hrk4", tau=1.0, t_final=16.0)
        _, trace = run_diffusion(z0, g, dcfg, spec)
        energies = [e for _, e in trace]
        assert energies[-1] < 0.05 * energies[0]
        diffs = np.diff(energies[1:])
        assert np.all(diffs <= 1e-12)

    def test_residual_keeps_energy_floor(self):
        g = erdos_renyi(50, 0.1, seed=3)
        z0 = initial_state(50, 8, K1, seed=3)
        dcfg = DiffusivityConfig(scheme="isotropic")
        spec = SolverSpec(method="hrk4", tau=1.0, t_final=16.0)
        _, trace_plain = run_diffusion(z0, g, dcfg, spec)
        _, trace_res = run_diffusion(z0, g, dcfg, spec, residual=ResidualSpec())
        by_t = dict(trace_res)
        assert trace_res[-1][1] > trace_plain[-1][1]
        assert abs(by_t[16.0] - by_t[12.0]) < 0.1 * by_t[12.0]

    def test_flat_limit_full_run(self):
        g = erdos_renyi(50, 0.1, seed=3)
        z0 = initial_state(50, 8, KSMALL, seed=3)
        dcfg = DiffusivityConfig(scheme="isotropic")
        spec = SolverSpec(method="hrk4", tau=1.0, t_final=4.0)
        final, _ = run_diffusion(z0, g, dcfg, spec)
        deg = g.degrees
        w = np.zeros((50, 50))
        for u, v in g.edges:
            w[u, v] = w[v, u] = 1.0 / np.sqrt(deg[u] * deg[v])

        def field(z, t):
            return w @ z - w.sum(axis=1)[:, None] * z

        z = z0.points.copy()
        for i in range(4):
            z = rk38_step(z, float(i), 1.0, field)
        assert np.abs(final.points - z).max() < 1e-3

    def test_all_schemes_run_and_stay_in_ball(self):
        g = erdos_renyi(12, 0.3, seed=10)
        z0 = initial_state(12, 4, K1, seed=10)
        spec = SolverSpec(method="heuler", tau=1.0, t_final=3.0)
        limit = 1.0 - ball.BOUNDARY_EPS
        for scheme in ("isotropic", "local", "global", "local_global"):
            dcfg = DiffusivityConfig(scheme=scheme, beta=0.4, heads=2, seed=10)
            final, trace = run_diffusion(z0, g, dcfg, spec)
            assert np.linalg.norm(final.points, axis=1).max() <= limit
            assert all(np.isfinite(e) for _, e in trace)

    def test_node_count_mismatch(self):
        g = erdos_renyi(5, 0.5, seed=1)
        z0 = initial_state(4, 2, K1, seed=1)
        with pytest.raises(ValueError):
            run_diffusion(z0, g, DiffusivityConfig(), SolverSpec(tau=1.0, t_final=1.0))

    def test_features_to_state(self):
        feats = np.array([[0.3, 0.0], [0.0, 0.4]])
        st = features_to_state(feats, K1)
        np.testing.assert_allclose(
            st.points, ball.exp_map(np.zeros(2), feats, K1), atol=1e-15
        )

    def test_residual_needs_initial_state(self):
        g = erdos_renyi(5, 0.5, seed=1)
        with pytest.raises(ValueError):
            build_flow(g, DiffusivityConfig(), 2, K1, residual=ResidualSpec())


class TestEnergyMonotonicityStudy:
    def test_single_step_energy_study_logged(self, capsys):
        """One HEuler step with symmetric isotropic weights: energy should not
        increase.  Proven only for message passing in the literature, so
        violations are counted and reported, not asserted."""
        increases = 0
        for seed in range(100):
            g = erdos_renyi(12, 0.35, seed=200 + seed)
            if not g.edges:
                continue
            z0 = initial_state(12, 4, K1, seed=seed)
            dcfg = DiffusivityConfig(scheme="isotropic")
            spec = SolverSpec(method="heuler", tau=1.0, t_final=1.0)
            _, trace = run_diffusion(z0, g, dcfg, spec)
            assert all(np.isfinite(e) for _, e in trace)
            if trace[-1][1] > trace[0][1] * (1.0 + 1e-12):
                increases += 1
        with capsys.disabled():
            print(f"\n[energy study] single-step increases: {increases}/100 seeds")
