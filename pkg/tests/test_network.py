import numpy as np
import pytest

from mtrnnlab.activations import bounded_sigmoid, softmax
from mtrnnlab.errors import ConfigError
from mtrnnlab.network import (
    ClosedLoop,
    Direction,
    IoActivation,
    NetworkParams,
    NetworkTopology,
    OpenLoop,
    TeacherForced,
    forward_step,
    initial_state,
    run_sequence,
)
from mtrnnlab.seeding import seed_stream


def topo(io=3, cf=4, cs=4, csc=0, tau_io=2.0, tau_cf=5.0, tau_cs=10.0,
         direction=Direction.CONTEXT_ABSTRACTION,
         act=IoActivation.SIGMOID):
    return NetworkTopology(io_count=io, cf_count=cf, cs_count=cs,
                           csc_count=csc, direction=direction,
                           io_activation=act, tau_io=tau_io, tau_cf=tau_cf,
                           tau_cs=tau_cs)


class TestTopology:
    def test_default_csc_count_is_half_cs_rounded_up(self):
        assert topo(cs=4).csc_count == 2
        assert topo(cs=23).csc_count == 12
        assert topo(cs=5).csc_count == 3

    def test_rejects_csc_larger_than_cs(self):
        with pytest.raises(ConfigError):
            topo(cs=4, csc=5)

    @pytest.mark.parametrize("field", ["io_count", "cf_count", "cs_count"])
    def test_rejects_nonpositive_counts(self, field):
        kwargs = {"io": 3, "cf": 4, "cs": 4}
        kwargs[{"io_count": "io", "cf_count": "cf", "cs_count": "cs"}[field]] = 0
        with pytest.raises(ConfigError):
            topo(**kwargs)

    def test_rejects_tau_below_one(self):
        with pytest.raises(ConfigError):
            topo(tau_cf=0.5)

    def test_mask_blocks_io_cs_shortcuts_only(self):
        t = topo()
        mask = t.connectivity_mask()
        assert not mask[t.io_slice, t.cs_slice].any()
        assert not mask[t.cs_slice, t.io_slice].any()
        assert mask[t.io_slice, t.io_slice].all()
        assert mask[t.io_slice, t.cf_slice].all()
        assert mask[t.cf_slice, t.cs_slice].all()
        assert mask[t.cs_slice, t.cs_slice].all()

    def test_masked_weights_start_zero(self):
        t = topo()
        params = NetworkParams.init_random(t, seed_stream(0, 1))
        assert np.all(params.weights[~t.connectivity_mask()] == 0.0)


class TestForwardStep:
    def test_tau_one_reduces_to_plain_recurrent_step(self):
        t = topo(tau_io=1.0, tau_cf=1.0, tau_cs=1.0)
        params = NetworkParams.init_random(t, seed_stream(1, 1), 0.4)
        z_prev = seed_stream(1, 2).normal(size=t.total)
        y_prev = bounded_sigmoid(z_prev)
        series = seed_stream(1, 3).uniform(0.1, 0.9, size=(3, t.io_count))
        x, z, _ = forward_step(t, params, z_prev, y_prev, 1, OpenLoop(series))
        assert np.allclose(z, params.weights @ x + params.biases, atol=1e-15)

    def test_single_step_halves_constant_drive_at_tau_two(self):
        t = topo(io=1, cf=1, cs=1, csc=1, tau_io=2.0, tau_cf=2.0, tau_cs=2.0)
        params = NetworkParams(np.zeros((3, 3)), np.full(3, 0.8))
        series = np.zeros((2, 1))
        _, z, _ = forward_step(t, params, np.zeros(3), np.zeros(3), 1,
                               OpenLoop(series))
        assert np.allclose(z, 0.4, atol=1e-15)

    def test_leak_accumulation_matches_geometric_closed_form(self):
        # constant drive a from z=0: z_n = a * (1 - (1 - 1/tau)^n)
        tau, n, a = 70.0, 70, 1.3
        t = topo(io=1, cf=1, cs=1, csc=1, tau_io=tau, tau_cf=tau, tau_cs=tau)
        params = NetworkParams(np.zeros((3, 3)), np.full(3, a))
        z = np.zeros(3)
        y = bounded_sigmoid(z)
        series = np.zeros((n + 1, 1))
        for step in range(1, n + 1):
            _, z, y = forward_step(t, params, z, y, step, OpenLoop(series))
        expected = a * (1.0 - (1.0 - 1.0 / tau) ** n)
        assert np.allclose(z, expected, atol=1e-12)
        assert expected / a == pytest.approx(0.634764, abs=5e-6)

    def test_dimension_mismatch_raises(self):
        t = topo()
        bad = NetworkParams(np.zeros((4, 4)), np.zeros(4))
        with pytest.raises(ConfigError):
            forward_step(t, bad, np.zeros(t.total), np.zeros(t.total), 1,
                         ClosedLoop())


class TestRunSequence:
    def test_zero_params_give_half_activation_everywhere(self):
        t = topo()
        params = NetworkParams(np.zeros((t.total, t.total)), np.zeros(t.total))
        series = seed_stream(2, 1).uniform(0.0, 1.0, size=(9, t.io_count))
        state = run_sequence(t, params, OpenLoop(series))
        assert np.allclose(state.y[:, t.cf_slice.start:], 0.5, atol=1e-15)

    def test_huge_tau_freezes_context_states(self):
        t = topo(tau_cs=1e9)
        params = NetworkParams.init_random(t, seed_stream(3, 1), 0.4)
        series = seed_stream(3, 2).uniform(0.0, 1.0, size=(21, t.io_count))
        state = run_sequence(t, params, OpenLoop(series))
        assert np.all(np.abs(state.z[:, t.csc_slice]) < 1e-6)

    def test_steps_below_one_rejected(self):
        t = topo()
        params = NetworkParams.init_random(t, seed_stream(4, 1))
        with pytest.raises(ValueError):
            run_sequence(t, params, ClosedLoop(), steps=0, csc=None)

    def test_generation_requires_csc(self):
        t = topo(direction=Direction.CONTEXT_BIAS,
                 act=IoActivation.DECISIVE_NORMALISATION)
        params = NetworkParams.init_random(t, seed_stream(5, 1))
        with pytest.raises(ConfigError):
            run_sequence(t, params, ClosedLoop(), steps=5)

    def test_trajectory_matches_hand_rolled_oracle(self):
        # independent straight-line reimplementation of the update rules
        t = topo(io=5, cf=5, cs=4, tau_io=2.0, tau_cf=4.0, tau_cs=8.0)
        rng = seed_stream(6, 1)
        params = NetworkParams.init_random(t, rng, 0.5)
        params.biases = rng.uniform(-0.2, 0.2, t.total)
        series = rng.uniform(0.1, 0.9, size=(11, t.io_count))
        state = run_sequence(t, params, OpenLoop(series))

        n = t.total
        tau = np.array([2.0] * 5 + [4.0] * 5 + [8.0] * 4)
        z = np.zeros(n)
        y = bounded_sigmoid(z)
        for step in range(1, 11):
            x = np.empty(n)
            x[:5] = series[step]
            x[5:] = y[5:]
            z_new = np.empty(n)
            for i in range(n):
                acc = sum(params.weights[i, j] * x[j] for j in range(n))
                z_new[i] = (1 - 1 / tau[i]) * z[i] + (acc + params.biases[i]) / tau[i]
            z = z_new
            y = bounded_sigmoid(z)
            # equality up to summation-order reassociation
            assert np.allclose(state.z[step], z, rtol=0, atol=1e-12)
            assert np.allclose(state.y[step], y, rtol=0, atol=1e-12)

    def test_softmax_rows_sum_to_one(self):
        t = topo(io=6, direction=Direction.CONTEXT_BIAS,
                 act=IoActivation.DECISIVE_NORMALISATION)
        rng = seed_stream(7, 1)
        params = NetworkParams.init_random(t, rng, 0.5)
        csc = rng.uniform(-1, 1, t.csc_count)
        state = run_sequence(t, params, ClosedLoop(), steps=12, csc=csc)
        sums = state.y[:, t.io_slice].sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-12)

    def test_leak_magnitude_monotone_and_bounded_under_constant_drive(self):
        tau, a = 7.0, -0.9
        t = topo(io=1, cf=1, cs=1, csc=1, tau_io=tau, tau_cf=tau, tau_cs=tau)
        params = NetworkParams(np.zeros((3, 3)), np.full(3, a))
        series = np.zeros((41, 1))
        state = run_sequence(t, params, OpenLoop(series))
        mags = np.abs(state.z[:, 1])
        assert np.all(np.diff(mags) >= 0)
        assert np.all(mags <= abs(a) + 1e-15)

    def test_determinism_bit_identical(self):
        t = topo()
        runs = []
        for _ in range(2):
            rng = seed_stream(8, 1)
            params = NetworkParams.init_random(t, rng, 0.3)
            series = seed_stream(8, 2).uniform(0, 1, size=(15, t.io_count))
            runs.append(run_sequence(t, params, OpenLoop(series)))
        assert np.array_equal(runs[0].z, runs[1].z)
        assert np.array_equal(runs[0].y, runs[1].y)

    def test_full_teacher_forcing_equals_open_loop(self):
        t = topo(io=4, direction=Direction.CONTEXT_BIAS,
                 act=IoActivation.DECISIVE_NORMALISATION)
        rng = seed_stream(9, 1)
        params = NetworkParams.init_random(t, rng, 0.5)
        csc = rng.uniform(-1, 1, t.csc_count)
        raw = rng.normal(size=(13, t.io_count))
        target = np.exp(raw) / np.exp(raw).sum(axis=1, keepdims=True)
        open_state = run_sequence(t, params, OpenLoop(target), csc=csc)
        tf_state = run_sequence(t, params, TeacherForced(1.0, target), csc=csc)
        assert np.array_equal(open_state.z, tf_state.z)

    def test_initial_state_seeds_context_units_only(self):
        t = topo(direction=Direction.CONTEXT_BIAS,
                 act=IoActivation.DECISIVE_NORMALISATION)
        csc = np.array([0.4, -0.2])
        z0, y0 = initial_state(t, csc)
        assert np.array_equal(z0[t.csc_slice], csc)
        others = np.ones(t.total, dtype=bool)
        others[t.csc_slice] = False
        assert np.all(z0[others] == 0.0)
        assert np.allclose(y0[t.io_slice], 1.0 / t.io_count)
