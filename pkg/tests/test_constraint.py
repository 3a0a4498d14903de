"""Tests for boundary initialization and the per-epoch constraint."""

import numpy as np
import pytest

from devosnn.constraint import (
    ConstraintConfig,
    apply_constraint,
    init_boundaries,
    synapse_range,
)
from devosnn.mask import StructureMask
from devosnn.network import Parameters
from devosnn.spec import NetworkSpec, fc

from tests.oracles import constraint_trajectory


def _params(*rows):
    weights = [np.array(r, dtype=float).reshape(-1, 1) for r in rows]
    return Parameters(weights, [np.zeros(w.shape[0]) for w in weights])


def _run(weights, prev0, bounds, cfg, mask=None):
    """Feed a per-epoch sequence of single-synapse weights through apply_constraint."""
    prev = _params([prev0])
    history = []
    for w in weights:
        prev, bounds = apply_constraint(_params([w]), prev, bounds, cfg, mask)
        history.append((prev.weights[0][0, 0], bounds))
    return history


class TestInitBoundaries:
    def test_layer_maximum(self):
        bounds = init_boundaries(_params([0.3, -0.8, 0.1]))
        np.testing.assert_allclose(bounds.r_pos[0], 0.8)
        np.testing.assert_allclose(bounds.r_neg[0], -0.8)
        assert not bounds.n_pos[0].any() and not bounds.c_neg[0].any()

    def test_zero_layer(self):
        bounds = init_boundaries(_params([0.0, 0.0]))
        assert not bounds.r_pos[0].any() and not bounds.r_neg[0].any()

    def test_per_layer(self):
        bounds = init_boundaries(_params([0.2, 0.1], [0.5]))
        assert bounds.r_pos[0][0, 0] == 0.2
        assert bounds.r_pos[1][0, 0] == 0.5


class TestApplyConstraint:
    def test_expansion_after_streak(self):
        bounds = init_boundaries(_params([1.0]))
        history = _run([1.1, 1.2, 1.3, 1.4], 1.0, bounds, ConstraintConfig(t_num=3))
        for w, b in history[:3]:
            assert w == 1.0
            assert b.r_pos[0][0, 0] == 1.0
        w, b = history[3]
        assert w == 1.0
        assert b.r_pos[0][0, 0] == pytest.approx(1.0 + 1.0 / 3)
        assert b.n_pos[0][0, 0] == 0 and b.c_pos[0][0, 0] == 0.0

    def test_negative_expansion(self):
        bounds = init_boundaries(_params([1.0]))
        history = _run([-1.5, -1.5, -1.5, -1.5], -1.0, bounds, ConstraintConfig(t_num=3))
        assert history[2][1].n_neg[0][0, 0] == 3
        assert history[3][1].r_neg[0][0, 0] == pytest.approx(-1.0 - 2.0 / 3)

    def test_inside_resets_counters(self):
        bounds = init_boundaries(_params([1.0]))
        history = _run([1.2, 1.0], 0.5, bounds, ConstraintConfig(t_num=3))
        w, b = history[1]
        assert w == 1.0
        assert b.n_pos[0][0, 0] == 0 and b.c_pos[0][0, 0] == 0.0 and b.n_decay[0][0, 0] == 0

    def test_contraction_after_decay(self):
        bounds = init_boundaries(_params([1.0]))
        history = _run([0.9, 0.8, 0.7, 0.6], 0.95, bounds, ConstraintConfig(t_num=3, epsilon=0.75))
        assert history[2][1].r_pos[0][0, 0] == 1.0
        _, b = history[3]
        assert b.r_pos[0][0, 0] == pytest.approx(0.75)
        assert b.r_neg[0][0, 0] == pytest.approx(-0.75)
        assert b.n_decay[0][0, 0] == 0

    def test_contraction_clamps_weight(self):
        bounds = init_boundaries(_params([1.0]))
        history = _run([0.95, 0.9], 1.0, bounds, ConstraintConfig(t_num=1, epsilon=0.75))
        w, b = history[1]
        assert b.r_pos[0][0, 0] == pytest.approx(0.75)
        assert w == pytest.approx(0.75)

    def test_zero_range_forces_zero_weight(self):
        bounds = init_boundaries(_params([0.0, 0.0]))
        out, new = apply_constraint(_params([0.5, -0.3]), _params([0.0, 0.0]), bounds, ConstraintConfig())
        assert np.all(synapse_range(new)[0] == 0.0)
        np.testing.assert_array_equal(out.weights[0], 0.0)

    def test_weights_inside_bounds_after_every_call(self):
        rng = np.random.default_rng(5)
        start = rng.uniform(-1.0, 1.0, size=200)
        cfg = ConstraintConfig(t_num=1, epsilon=0.5)
        bounds = init_boundaries(_params(start))
        prev = _params(start)
        for _ in range(40):
            w_in = prev.weights[0][:, 0] * rng.uniform(0.6, 1.3, size=start.size)
            prev, bounds = apply_constraint(_params(w_in), prev, bounds, cfg)
            w = prev.weights[0]
            assert np.all(bounds.r_neg[0] <= w) and np.all(w <= bounds.r_pos[0])
            assert np.all(w[synapse_range(bounds)[0] == 0.0] == 0.0)

    def test_biases_untouched(self):
        params = _params([5.0])
        params.biases[0][:] = 9.0
        out, _ = apply_constraint(params, _params([1.0]), init_boundaries(_params([1.0])), ConstraintConfig())
        assert out.weights[0][0, 0] == 1.0
        assert out.biases[0][0] == 9.0

    def test_dead_synapses_frozen(self):
        spec = NetworkSpec(layers=[fc(2)], input_shape=(1, 1, 1))
        mask = StructureMask.full(spec)
        mask.kill_units(0, np.array([0]))
        bounds = init_boundaries(_params([1.0, 1.0]))
        out, new = apply_constraint(_params([3.0, 3.0]), _params([1.0, 1.0]), bounds, ConstraintConfig(), mask)
        np.testing.assert_array_equal(out.weights[0][:, 0], [3.0, 1.0])
        assert new.n_pos[0][0, 0] == 0 and new.n_pos[0][1, 0] == 1

    def test_input_bounds_not_mutated(self):
        bounds = init_boundaries(_params([1.0]))
        apply_constraint(_params([2.0]), _params([1.0]), bounds, ConstraintConfig())
        assert bounds.n_pos[0][0, 0] == 0

    def test_layer_count_mismatch(self):
        with pytest.raises(ValueError, match="layer count mismatch"):
            apply_constraint(_params([1.0], [1.0]), _params([1.0]), init_boundaries(_params([1.0])), ConstraintConfig())

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(11)
        n, epochs, t_num, epsilon = 1000, 60, 3, 0.75
        start = rng.uniform(-1.0, 1.0, size=n)
        drift = rng.choice([-0.15, 0.0, 0.15], size=n)
        cfg = ConstraintConfig(t_num=t_num, epsilon=epsilon)
        bounds = init_boundaries(_params(start))
        r0 = bounds.r_pos[0][0, 0]
        prev = _params(start)
        inputs, results = [], []
        for _ in range(epochs):
            w_in = prev.weights[0][:, 0] + drift + rng.normal(0.0, 0.1, size=n)
            inputs.append(w_in)
            prev, bounds = apply_constraint(_params(w_in), prev, bounds, cfg)
            results.append((prev.weights[0][:, 0].copy(), bounds.copy()))

        for k in range(n):
            expected = constraint_trajectory([x[k] for x in inputs], start[k], r0, -r0, t_num, epsilon)
            for (w, b), ref in zip(results, expected):
                got = (w[k], b.r_pos[0][k, 0], b.r_neg[0][k, 0], b.n_pos[0][k, 0], b.n_neg[0][k, 0],
                       b.n_decay[0][k, 0], b.c_pos[0][k, 0], b.c_neg[0][k, 0])
                assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)


class TestSynapseRange:
    def test_values(self):
        bounds = init_boundaries(_params([0.5]))
        bounds.r_neg[0][:] = -0.3
        assert synapse_range(bounds)[0][0, 0] == pytest.approx(0.8)
        bounds.r_pos[0][:] = bounds.r_neg[0][:] = 0.0
        assert synapse_range(bounds)[0][0, 0] == 0.0

    def test_symmetric(self):
        assert synapse_range(init_boundaries(_params([0.4, -0.2])))[0][0, 0] == pytest.approx(0.8)
