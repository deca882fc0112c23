import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import itersal
from itersal.automaton import CLAMP_EPS, LayeredAutomaton
from oracles import automaton_finalize, automaton_init, automaton_step


class TestInitGrid:
    def test_log_of_one_is_zero(self):
        grid = itersal.init_grid([np.ones((2, 2))], lam=0.1)
        assert np.allclose(grid.values, 0.0)

    def test_zero_clamps(self):
        grid = itersal.init_grid([np.zeros((2, 2))], lam=0.1)
        assert np.allclose(grid.values, np.log(CLAMP_EPS))

    def test_layer_mean(self):
        grid = itersal.init_grid([np.array([[0.2, 0.4, 0.6]])], lam=0.1)
        assert grid.mu[0] == pytest.approx(0.4)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            itersal.init_grid([np.ones((2, 2)), np.ones((3, 2))], lam=0.1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            itersal.init_grid([], lam=0.1)


class TestStep:
    def test_constant_stack_is_fixed_point(self):
        grid = itersal.init_grid([np.full((4, 4), 0.3), np.full((4, 4), 0.8)], lam=0.05)
        stepped = itersal.step(grid)
        assert np.array_equal(stepped.values, grid.values)

    def test_high_cell_among_low_neighbors_drops(self):
        # center above the layer mean, everything else below: the center's 4
        # neighbors each vote -1, so it loses 4 * lam
        layer = np.full((3, 3), 0.2)
        layer[1, 1] = 0.9
        lam = 0.01
        grid = itersal.init_grid([layer], lam=lam)
        stepped = itersal.step(grid)
        assert stepped.values[1, 1, 0] == pytest.approx(grid.values[1, 1, 0] - 4 * lam)

    def test_matches_brute_force_oracle(self, rng):
        maps = [rng.random((4, 4)) for _ in range(2)]
        grid = itersal.init_grid(maps, lam=0.07)
        values_o, mu_o = automaton_init(maps)
        assert np.allclose(grid.values, values_o)
        assert np.allclose(grid.mu, mu_o)
        stepped = itersal.step(itersal.step(grid))
        expected = automaton_step(automaton_step(values_o, mu_o, 0.07), mu_o, 0.07)
        assert np.max(np.abs(stepped.values - expected)) < 1e-12

    def test_change_bounded_by_lam_times_neighbors(self, rng):
        m = 3
        maps = [rng.random((5, 5)) for _ in range(m)]
        grid = itersal.init_grid(maps, lam=0.02)
        stepped = itersal.step(grid)
        assert np.max(np.abs(stepped.values - grid.values)) <= 0.02 * 4 * m + 1e-15


class TestFinalize:
    def test_single_map_closed_form(self, rng):
        v = rng.random((3, 3)) * 0.9 + 0.05
        grid = itersal.init_grid([v], lam=0.1)
        out = itersal.finalize(grid)
        assert np.allclose(out, itersal.minmax_normalize(v / (1.0 + v)))

    def test_two_identical_layers_match_single(self, rng):
        v = rng.random((3, 3))
        single = itersal.finalize(itersal.init_grid([v], lam=0.1))
        double = itersal.finalize(itersal.init_grid([v, v], lam=0.1))
        assert np.allclose(single, double)

    def test_matches_oracle(self, rng):
        maps = [rng.random((4, 4)) for _ in range(3)]
        grid = itersal.init_grid(maps, lam=0.05)
        grid = itersal.step(grid)
        assert np.max(np.abs(itersal.finalize(grid) - automaton_finalize(grid.values))) < 1e-12

    def test_output_in_unit_interval(self, rng):
        maps = [rng.random((6, 6)) for _ in range(2)]
        out = itersal.integrate(maps, lam=0.3, steps=5)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestIntegrate:
    def test_single_map_zero_steps_preserves_ranking(self, rng):
        v = rng.random((5, 5))
        out = itersal.integrate([v], lam=0.1, steps=0)
        assert np.array_equal(np.argsort(out.ravel()), np.argsort(v.ravel()))

    def test_three_maps_one_step_matches_composed_oracle(self, rng):
        maps = [rng.random((4, 4)) for _ in range(3)]
        out = itersal.integrate(maps, lam=0.04, steps=1)
        values_o, mu_o = automaton_init(maps)
        expected = automaton_finalize(automaton_step(values_o, mu_o, 0.04))
        assert np.max(np.abs(out - expected)) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(2, 6), st.integers(0, 3))
    def test_fixed_point_property(self, m, size, steps):
        maps = [np.full((size, size), 0.4)] * m
        out = itersal.integrate(maps, lam=0.2, steps=steps)
        assert np.allclose(out, 0.5)  # constant map normalizes to 0.5


class TestLayeredAutomaton:
    def test_new_layers_join_existing_keep_state(self, rng):
        auto = LayeredAutomaton(lam=0.05)
        a = rng.random((4, 4))
        auto.ensure_layer("a", a)
        auto.step(2)
        evolved = auto.grid.values[:, :, 0].copy()
        auto.ensure_layer("a", rng.random((4, 4)))  # re-offer: ignored
        assert np.array_equal(auto.grid.values[:, :, 0], evolved)
        auto.ensure_layer("b", rng.random((4, 4)))
        assert auto.layer_names == ("a", "b")
        assert np.array_equal(auto.grid.values[:, :, 0], evolved)
        auto.step(1)
        out = auto.finalize()
        assert out.shape == (4, 4)

    def test_dimension_mismatch_rejected(self, rng):
        auto = LayeredAutomaton(lam=0.05)
        auto.ensure_layer("a", rng.random((4, 4)))
        with pytest.raises(ValueError):
            auto.ensure_layer("b", rng.random((5, 4)))
