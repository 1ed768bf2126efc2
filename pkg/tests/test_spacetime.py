import numpy as np
import pytest

from threatprop.errors import GraphError
from threatprop.graph import ObservationSet, build_graph
from threatprop.priors import PriorSpec, compute_prior
from threatprop.spacetime import (
    TimeGrid,
    assemble_spacetime,
    coordination_prior,
    default_rate,
    kernel_profile,
    reduce_to_vertex_scores,
    solve_spacetime,
)
from threatprop.spatial import solve_harmonic

from conftest import make_er, rng_for


class TestTimeGrid:
    def test_bins_cover_halfopen_intervals(self):
        grid = TimeGrid(t0=0.0, dt=2.0, nt=3)
        assert grid.bin_of(0.0) == 0
        assert grid.bin_of(1.99) == 0
        assert grid.bin_of(2.0) == 1
        assert grid.bin_of(5.9) == 2
        assert np.allclose(grid.centers, [1.0, 3.0, 5.0])

    def test_out_of_range_rejected(self):
        grid = TimeGrid(0.0, 1.0, 4)
        with pytest.raises(GraphError, match="outside grid"):
            grid.bin_of(12.0)
        with pytest.raises(GraphError, match="outside grid"):
            grid.bin_of(-2.0)

    def test_validation(self):
        with pytest.raises(GraphError):
            TimeGrid(0.0, 0.0, 4)
        with pytest.raises(GraphError):
            TimeGrid(0.0, 1.0, 0)

    def test_cover_spans_times(self):
        times = np.array([1.0, 4.5, 9.9])
        grid = TimeGrid.cover(times, dt=1.0)
        assert grid.t0 == 1.0
        assert grid.bin_of(9.9) == grid.nt - 1
        forced = TimeGrid.cover(times, nt=5)
        assert forced.nt == 5 and forced.bin_of(9.9) == 4

    def test_cover_default_dt_tracks_rate(self):
        grid = TimeGrid.cover(np.array([0.0, 1.0]), lam=2.0)
        assert grid.dt <= 0.02 / 2.0 + 1e-12


class TestAssembly:
    def test_kernel_column_halving_profile(self):
        # lam*dt = ln 2 halves the kernel per bin away from the interaction
        grid = TimeGrid(0.0, 1.0, 6)
        t3 = grid.centers[3]
        g = build_graph([(0, 1, 1.0, t3, t3)])
        sys_ = assemble_spacetime(g, grid, rates=np.log(2.0))
        col = sys_.adjacency.toarray()[6:12, 3]
        assert np.allclose(col, [0.125, 0.25, 0.5, 1.0, 0.5, 0.25])

    def test_clique_block_uniform(self):
        g = build_graph([(0, 1, 1.0)])
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 4), mode_default="clique")
        block = sys_.adjacency.toarray()[0:4, 4:8]
        assert np.array_equal(block, np.full((4, 4), 0.25))

    def test_instant_block_identity(self):
        g = build_graph([(0, 1, 1.0)])
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 4), mode_default="instant")
        block = sys_.adjacency.toarray()[0:4, 4:8]
        assert np.array_equal(block, np.eye(4))

    def test_no_temporal_self_block(self):
        rng = rng_for("selfblock")
        g = make_er(rng, 8)
        times = rng.uniform(0, 5, g.size)
        gt = build_graph([(e.u, e.v, e.weight, t, t) for e, t in zip(g.interactions, times)], n=g.n)
        sys_ = assemble_spacetime(gt, TimeGrid(0.0, 1.0, 5), rates=1.0)
        a = sys_.adjacency.toarray()
        for v in range(g.n):
            assert np.array_equal(a[v * 5:(v + 1) * 5, v * 5:(v + 1) * 5], np.zeros((5, 5)))

    def test_timestamp_outside_grid_names_edge(self):
        g = build_graph([(0, 1, 1.0, 99.0, 99.0)])
        with pytest.raises(GraphError, match="outside grid"):
            assemble_spacetime(g, TimeGrid(0.0, 1.0, 4), rates=1.0)

    def test_rate_validation(self):
        g = build_graph([(0, 1, 1.0, 0.5, 0.5)])
        with pytest.raises(GraphError, match="positive"):
            assemble_spacetime(g, TimeGrid(0.0, 1.0, 2), rates=0.0)
        with pytest.raises(GraphError, match="positive"):
            assemble_spacetime(g, TimeGrid(0.0, 1.0, 2), rates=np.array([1.0, -1.0]))

    def test_kernel_mode_needs_timestamps(self):
        g = build_graph([(0, 1, 1.0)])
        with pytest.raises(GraphError, match="no timestamps"):
            assemble_spacetime(g, TimeGrid(0.0, 1.0, 2), mode_default="kernel")

    def test_truncation_preserves_sparsity(self):
        grid = TimeGrid(0.0, 1.0, 200)
        g = build_graph([(0, 1, 1.0, 0.5, 0.5)])
        sys_ = assemble_spacetime(g, grid, rates=2.0)
        # exp(-2*|lag|) < 1e-4 beyond ~4.6 time units -> far bins dropped
        assert sys_.adjacency.nnz < 2 * 12

    def test_kernel_weight_scaling(self):
        grid = TimeGrid(0.0, 1.0, 3)
        g = build_graph([(0, 1, 3.0, 1.5, 1.5)])
        sys_ = assemble_spacetime(g, grid, rates=1.0)
        assert sys_.adjacency.toarray()[3 + 1, 1] == pytest.approx(3.0)

    def test_default_rate_median_gap(self):
        g = build_graph([(0, 1, 1.0, 0.0, 0.0), (0, 1, 1.0, 2.0, 2.0), (0, 1, 1.0, 6.0, 6.0)])
        # per-endpoint gaps pooled: both vertices see gaps (2, 4) -> median 3
        assert default_rate(g) == pytest.approx(np.log(2.0) / 3.0)

    def test_per_vertex_rates_use_the_receiver(self):
        grid = TimeGrid(0.0, 1.0, 5)
        t2 = grid.centers[2]
        g = build_graph([(0, 1, 1.0, t2, t2)])
        lam = np.array([2.0, 0.25])
        sys_ = assemble_spacetime(g, grid, rates=lam, truncation=0.0)
        a = sys_.adjacency.toarray()
        # block row 0 receives with rate lam[0], block row 1 with lam[1]
        assert a[0 * 5 + 1, 1 * 5 + 2] == pytest.approx(np.exp(-2.0))
        assert a[1 * 5 + 1, 0 * 5 + 2] == pytest.approx(np.exp(-0.25))


class TestCoordinationPrior:
    def test_perfect_alignment_is_unity(self):
        grid = TimeGrid(0.0, 1.0, 6)
        t = grid.centers[2]
        g = build_graph([(0, 1, 1.0, t, t), (0, 2, 1.0, t, t)])
        psi = coordination_prior(assemble_spacetime(g, grid, rates=1.0))
        assert psi[0, 2] == pytest.approx(1.0)

    def test_split_mass_at_large_lag(self):
        grid = TimeGrid(0.0, 1.0, 40)
        t0, t_far = grid.centers[0], grid.centers[39]
        g = build_graph([(0, 1, 1.0, t0, t0), (0, 2, 1.0, t_far, t_far)])
        psi = coordination_prior(assemble_spacetime(g, grid, rates=2.0))
        assert psi[0, 0] == pytest.approx(0.5, abs=1e-3)

    def test_intermediate_lag_matches_kernel_oracle(self):
        # two interactions at lags 0 and 1/lam: psi = (1 + e^{-1})/2
        lam = 0.5
        grid = TimeGrid(0.0, 1.0, 8)
        t_a = grid.centers[2]
        t_b = t_a + 1.0 / lam
        g = build_graph([(0, 1, 1.0, t_a, t_a), (0, 2, 1.0, t_b, t_b)])
        psi = coordination_prior(assemble_spacetime(g, grid, rates=lam))
        oracle = (kernel_profile(lam, np.array([0.0]))[0] + kernel_profile(lam, np.array([1.0 / lam]))[0]) / 2
        assert psi[0, 2] == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx((1 + np.exp(-1)) / 2)

    def test_isolated_vertex_policy(self):
        g = build_graph([(0, 1, 1.0, 0.5, 0.5)], n=3)
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 2), rates=1.0)
        with pytest.raises(GraphError, match="isolated"):
            coordination_prior(sys_)
        psi = coordination_prior(sys_, on_isolated="zero")
        assert np.array_equal(psi[2], [0.0, 0.0])

    def test_monotone_under_tightening(self):
        # pulling a vertex's interactions toward one instant cannot decrease
        # its alignment there
        lam, grid = 1.0, TimeGrid(0.0, 1.0, 12)
        anchor = grid.centers[5]
        spreads = [4.0, 2.0, 1.0, 0.0]
        vals = []
        for s in spreads:
            g = build_graph([
                (0, 1, 1.0, anchor, anchor),
                (0, 2, 1.0, min(anchor + s, grid.centers[-1]), anchor),
                (0, 3, 1.0, max(anchor - s, grid.centers[0]), anchor),
            ])
            psi = coordination_prior(assemble_spacetime(g, grid, rates=lam))
            vals.append(psi[0, 5])
        assert np.all(np.diff(vals) >= -1e-12)
        assert vals[-1] == pytest.approx(1.0)


def dense_spacetime_oracle(sys_, obs, variant="coordinated"):
    """Direct dense solve of the space-time boundary-value system."""
    a = sys_.adjacency.toarray()
    w = a.sum(axis=1)
    winv = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0)
    p = np.diag(winv) @ a
    if variant == "coordinated":
        psi = coordination_prior(sys_).ravel()
        p = np.diag(psi) @ p
    nt = sys_.grid.nt
    order = sys_.order
    bidx, bval = [], []
    for e in obs.entries:
        bidx.append(e.vertex * nt + sys_.grid.bin_of(e.t))
        bval.append(e.p)
    interior = np.array([i for i in range(order) if i not in set(bidx)])
    theta = np.zeros(order)
    theta[bidx] = bval
    lii = np.eye(interior.size) - p[np.ix_(interior, interior)]
    rhs = p[np.ix_(interior, bidx)] @ np.asarray(bval)
    theta[interior] = np.linalg.solve(lii, rhs)
    return np.clip(theta.reshape(sys_.graph.n, nt), 0.0, 1.0)


class TestSolveSpacetime:
    def test_uniform_prior_constant_field(self):
        rng = rng_for("st-const")
        g = make_er(rng, 10)
        times = rng.uniform(0, 8, g.size)
        gt = build_graph([(e.u, e.v, e.weight, t, t) for e, t in zip(g.interactions, times)], n=g.n)
        sys_ = assemble_spacetime(gt, TimeGrid(0.0, 1.0, 8), rates=0.3)
        p0 = 0.61
        # the cue must sit at one of the cue vertex's own interaction bins
        cue = gt.interactions[0].u
        theta = solve_spacetime(sys_, ObservationSet.of((cue, p0, times[0])), variant="weighted", tol=1e-12)
        assert np.abs(theta - p0).max() <= 1e-8

    def test_two_vertex_shared_interaction_closed_form(self):
        # single interaction at one bin, coordinated variant, cue at that bin:
        # partner hits 1 there and decays by the kernel across bins
        lam = 0.8
        grid = TimeGrid(0.0, 1.0, 5)
        t2 = grid.centers[2]
        g = build_graph([(0, 1, 1.0, t2, t2)])
        sys_ = assemble_spacetime(g, grid, rates=lam, truncation=0.0)
        obs = ObservationSet.of((0, 1.0, t2))
        theta = solve_spacetime(sys_, obs, variant="coordinated", tol=1e-12)
        oracle = dense_spacetime_oracle(sys_, obs)
        assert np.abs(theta - oracle).max() <= 1e-10
        assert theta[1, 2] == pytest.approx(1.0)
        lags = np.abs(grid.centers - t2)
        assert np.allclose(theta[1], kernel_profile(lam, lags), atol=1e-10)

    def test_matches_dense_oracle_on_random_systems(self):
        rng = rng_for("st-oracle")
        for _ in range(4):
            g = make_er(rng, 8)
            times = rng.uniform(0, 6, g.size)
            gt = build_graph([(e.u, e.v, e.weight, t, t) for e, t in zip(g.interactions, times)], n=g.n)
            sys_ = assemble_spacetime(gt, TimeGrid(0.0, 1.0, 6), rates=0.5)
            cue = int(rng.integers(g.n))
            obs = ObservationSet.of((cue, 1.0, float(times[0])))
            theta = solve_spacetime(sys_, obs, variant="coordinated", tol=1e-12)
            assert np.abs(theta - dense_spacetime_oracle(sys_, obs)).max() <= 1e-9

    def test_clique_cue_constant_at_partner(self):
        g = build_graph([(0, 1, 1.0)])
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 4), mode_default="clique")
        theta = solve_spacetime(sys_, ObservationSet.of((0, 0.9, 1.5)), variant="weighted", tol=1e-12)
        assert np.allclose(theta[1], theta[1, 0])

    def test_untimed_cue_broadcasts(self):
        g = build_graph([(0, 1, 1.0)])
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 4), mode_default="instant")
        theta = solve_spacetime(sys_, ObservationSet.of((0, 0.8)), variant="weighted", tol=1e-12)
        assert np.allclose(theta[0], 0.8)

    def test_single_bin_clique_equals_spatial(self):
        rng = rng_for("st-equiv")
        for _ in range(5):
            g = make_er(rng, 12)
            obs = ObservationSet.of((int(rng.integers(g.n)), 1.0))
            psi = compute_prior(g, PriorSpec("dwtp"))
            ref = solve_harmonic(g, psi, obs, tol=1e-12)
            sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 1), mode_default="clique")
            theta = solve_spacetime(sys_, obs, variant="weighted", spatial_psi=psi, tol=1e-12)
            assert np.abs(theta[:, 0] - ref).max() <= 1e-10

    def test_coordinated_spatial_variant_damps(self):
        grid = TimeGrid(0.0, 1.0, 3)
        t1 = grid.centers[1]
        g = build_graph([(0, 1, 1.0, t1, t1), (1, 2, 1.0, t1, t1)])
        sys_ = assemble_spacetime(g, grid, rates=1.0)
        obs = ObservationSet.of((0, 1.0, t1))
        full = solve_spacetime(sys_, obs, variant="coordinated", tol=1e-12)
        damped = solve_spacetime(
            sys_, obs, variant="coordinated-spatial", spatial_psi=np.full(3, 0.5), tol=1e-12
        )
        assert np.all(damped <= full + 1e-12)
        assert damped[2].max() < full[2].max()

    def test_variant_validation(self):
        g = build_graph([(0, 1, 1.0, 0.5, 0.5)])
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 2), rates=1.0)
        with pytest.raises(GraphError, match="unknown variant"):
            solve_spacetime(sys_, ObservationSet.of((0, 1.0, 0.5)), variant="odd")
        with pytest.raises(GraphError, match="spatial prior"):
            solve_spacetime(sys_, ObservationSet.of((0, 1.0, 0.5)), variant="coordinated-spatial")

    def test_observation_time_outside_grid(self):
        g = build_graph([(0, 1, 1.0, 0.5, 0.5)])
        sys_ = assemble_spacetime(g, TimeGrid(0.0, 1.0, 2), rates=1.0)
        with pytest.raises(GraphError, match="outside grid"):
            solve_spacetime(sys_, ObservationSet.of((0, 1.0, 55.0)))


class TestReduce:
    def test_constant_field(self):
        field = np.full((3, 4), 0.3)
        assert np.allclose(reduce_to_vertex_scores(field, "max"), 0.3)
        assert np.allclose(reduce_to_vertex_scores(field, "mean"), 0.3)

    def test_single_bin_spike(self):
        field = np.zeros((2, 5))
        field[1, 3] = 1.0
        assert reduce_to_vertex_scores(field, "max")[1] == 1.0
        assert reduce_to_vertex_scores(field, "mean")[1] == pytest.approx(0.2)

    def test_unknown_reducer(self):
        with pytest.raises(GraphError):
            reduce_to_vertex_scores(np.zeros((2, 2)), "median")
