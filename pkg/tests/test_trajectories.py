"""Conditioned trajectories: single steps, records, ensembles, determinism."""

import numpy as np
import pytest

from spinsqueeze import (FeedbackLaw, MeanSpinCollapse, MeParams, SpinSystem,
                         build_spin_operators, css_x, ensemble_average,
                         expect_real, integrate_me, rotate,
                         simulate_trajectory, sme_step, trajectory_noise)
from spinsqueeze.trajectories import _run_chunk
from util import trace_distance


class TestSmeStep:
    def test_measurement_fixed_point(self):
        # eigenprojectors of Jz are untouched; the current reads the eigenvalue
        n = 6
        ops = build_spin_operators(SpinSystem(n))
        params = MeParams(m=1.0, eta=1.0, dt=1e-4)
        rho = np.zeros((n + 1, n + 1), dtype=complex)
        rho[1, 1] = 1.0                       # m = j - 1 = 2
        dw = 0.013 * np.sqrt(params.dt)
        out, current = sme_step(rho, dw, params, 0.0, ops)
        assert np.max(np.abs(out - rho)) <= 1e-14
        assert current == pytest.approx(2 * 2.0 + dw / params.dt, rel=1e-12)

    def test_current_formula_with_efficiency(self):
        n = 4
        ops = build_spin_operators(SpinSystem(n))
        params = MeParams(m=4.0, eta=0.36, dt=1e-4)
        rho = css_x(SpinSystem(n))
        dw = -0.4 * np.sqrt(params.dt)
        _, current = sme_step(rho, dw, params, 0.0, ops)
        ejz = expect_real(ops.jz, rho)
        want = 2 * 0.36 * 2.0 * ejz + 0.6 * dw / params.dt
        assert current == pytest.approx(want, abs=1e-9)

    def test_single_step_mean_shift(self):
        # d<Jz>_c = 2 sqrt(eta M) dW (Delta Jz)^2_c to O(dt): the residual
        # must shrink linearly with the step
        s = SpinSystem(10)
        ops = build_spin_operators(s)
        rho = rotate(css_x(s), "y", -0.2)     # displaced: <Jz> != 0
        jz = expect_real(ops.jz, rho)
        var = expect_real(ops.jz @ ops.jz, rho) - jz**2
        residuals = []
        for dt in (1e-4, 1e-5, 1e-6):
            params = MeParams(m=1.0, eta=1.0, dt=dt)
            dw = 0.8 * np.sqrt(dt)
            out, _ = sme_step(rho, dw, params, 0.0, ops)
            shift = expect_real(ops.jz, out) - jz
            residuals.append(abs(shift - 2.0 * dw * var))
        assert residuals[1] <= residuals[0] / 3
        assert residuals[2] <= residuals[1] / 3

    def test_feedback_without_measurement_rejected(self):
        ops = build_spin_operators(SpinSystem(4))
        with pytest.raises(ValueError):
            sme_step(css_x(SpinSystem(4)), 0.0, MeParams(m=0.0, dt=1e-4), 0.3, ops)

    def test_matches_batch_engine(self):
        # stepping one state by hand reproduces the batched engine
        n, dt, steps = 6, 1e-3, 40
        s = SpinSystem(n)
        ops = build_spin_operators(s)
        params = MeParams(m=1.0, eta=1.0, dt=dt, t_max=steps * dt, sample_dt=dt)
        law = FeedbackLaw.analytic(n)
        rec = simulate_trajectory(css_x(s), params, law, seed=123)
        noise = trajectory_noise(123, 0, steps)
        rho = css_x(s)
        for k in range(steps):
            lam = law.value(k * dt, rho, 1.0, ops)
            rho, _ = sme_step(rho, noise[k] * np.sqrt(dt), params, lam, ops)
        assert np.max(np.abs(rho - rec.final_state)) <= 1e-12


class TestTrajectoryRecord:
    def test_lengths_and_invariants(self):
        s = SpinSystem(8)
        params = MeParams(t_max=0.2, dt=1e-3)
        rec = simulate_trajectory(css_x(s), params, FeedbackLaw.analytic(8), seed=5)
        n_samples = len(rec.times)
        assert rec.photocurrent.shape == (n_samples,)
        assert rec.cond_means.shape == (n_samples, 3)
        assert rec.cond_purity.shape == (n_samples,)
        assert np.all(rec.cond_purity > 0)
        assert np.all(rec.cond_purity <= 1 + 1e-9)
        assert abs(np.trace(rec.final_state).real - 1.0) <= 1e-13
        assert np.max(np.abs(rec.final_state - rec.final_state.conj().T)) <= 1e-10

    def test_unit_efficiency_keeps_states_pure(self):
        s = SpinSystem(10)
        params = MeParams(t_max=2.0, dt=1e-4)
        rec = simulate_trajectory(css_x(s), params, FeedbackLaw.analytic(10), seed=7)
        assert np.min(rec.cond_purity) >= 1 - 1e-6

    def test_lossy_detection_mixes_states(self):
        s = SpinSystem(10)
        params = MeParams(eta=0.5, t_max=1.0, dt=1e-3)
        rec = simulate_trajectory(css_x(s), params,
                                  FeedbackLaw.analytic(10, eta=0.5), seed=9)
        assert np.min(rec.cond_purity) < 0.9

    def test_determinism_bitwise(self):
        s = SpinSystem(6)
        params = MeParams(t_max=0.3, dt=1e-3)
        a = simulate_trajectory(css_x(s), params, FeedbackLaw.analytic(6), seed=42)
        b = simulate_trajectory(css_x(s), params, FeedbackLaw.analytic(6), seed=42)
        assert np.array_equal(a.photocurrent, b.photocurrent)
        assert np.array_equal(a.cond_means, b.cond_means)
        assert np.array_equal(a.final_state, b.final_state)
        c = simulate_trajectory(css_x(s), params, FeedbackLaw.analytic(6), seed=43)
        assert not np.array_equal(a.photocurrent, c.photocurrent)

    def test_noise_contract(self):
        # the documented stream: PCG64(SeedSequence(master, spawn_key=(k,)))
        want = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=77, spawn_key=(3,)))).standard_normal(5)
        assert np.array_equal(trajectory_noise(77, 3, 5), want)


class TestStatisticalBehavior:
    def test_mean_conditional_jz_is_martingale_without_feedback(self):
        # over many seeds the conditional mean must hover around zero
        n, count = 4, 1000
        s = SpinSystem(n)
        params = MeParams(t_max=0.5, dt=1e-3)
        res = ensemble_average(css_x(s), params, FeedbackLaw.off(), count, 2024,
                               keep_trajectories=True)
        jz = res.trajectories["jz"]            # (count, n_samples)
        mean = jz.mean(axis=0)
        stderr = jz.std(axis=0, ddof=1) / np.sqrt(count) + 1e-12
        assert np.all(np.abs(mean) <= 4 * stderr + 1e-9)

    def test_feedback_pins_conditional_mean(self):
        # with the conditional law, |<Jz>_c| stays inside the single-step
        # noise band at nearly all samples
        n, count, dt = 10, 100, 1e-4
        s = SpinSystem(n)
        params = MeParams(t_max=1.0, dt=dt)
        res = ensemble_average(css_x(s), params, FeedbackLaw.conditional(),
                               count, 11, keep_trajectories=True)
        jz = res.trajectories["jz"]
        jz2 = res.trajectories["jz2"]
        band = 3.0 * np.sqrt(jz2 * dt)
        inside = np.abs(jz) <= band
        assert inside.mean() >= 0.99

    def test_conditional_mean_wanders_without_feedback(self):
        # E[<Jz>_c^2] grows from 0 toward the initial variance J/2
        n, count = 10, 500
        s = SpinSystem(n)
        params = MeParams(t_max=1.5, dt=1e-3)
        res = ensemble_average(css_x(s), params, FeedbackLaw.off(), count, 5,
                               keep_trajectories=True)
        second_moment = (res.trajectories["jz"] ** 2).mean(axis=0)
        j_half = n / 4.0                      # J/2 with J = N/2
        assert second_moment[0] <= 1e-12
        assert second_moment[-1] > 0.6 * (n / 4.0)
        assert second_moment[-1] > second_moment[len(second_moment) // 4]
        assert j_half == pytest.approx(2.5)


class TestEnsembleAverage:
    def test_matches_master_equation(self):
        s = SpinSystem(6)
        params = MeParams(t_max=1.0, dt=1e-3)
        res = ensemble_average(css_x(s), params, FeedbackLaw.analytic(6), 200, 31)
        assert res.stat_scale == pytest.approx(1 / np.sqrt(200))
        assert np.max(res.trace_dist) <= 0.1

    def test_single_member_equals_single_trajectory(self):
        s = SpinSystem(5)
        params = MeParams(t_max=0.2, dt=1e-3)
        law = FeedbackLaw.analytic(5)
        res = ensemble_average(css_x(s), params, law, 1, 99,
                               keep_trajectories=True)
        rec = simulate_trajectory(css_x(s), params, law, seed=99)
        assert np.allclose(res.series.jx, rec.cond_means[:, 0], rtol=0, atol=1e-13)
        assert np.allclose(res.series.purity, rec.cond_purity, rtol=0, atol=1e-13)
        assert np.array_equal(res.trajectories["charge"][0], rec.photocurrent)
        assert np.max(np.abs(res.mean_final_state - rec.final_state)) <= 1e-14

    def test_doubling_size_shrinks_deviation(self):
        s = SpinSystem(4)
        params = MeParams(t_max=0.5, dt=1e-3)
        law = FeedbackLaw.analytic(4)
        small = ensemble_average(css_x(s), params, law, 200, 1)
        large = ensemble_average(css_x(s), params, law, 800, 1)
        assert np.max(large.trace_dist) <= 0.8 * np.max(small.trace_dist)

    def test_worker_count_does_not_change_results(self):
        s = SpinSystem(4)
        params = MeParams(t_max=0.2, dt=1e-3)
        law = FeedbackLaw.analytic(4)
        serial = ensemble_average(css_x(s), params, law, 140, 7,
                                  keep_trajectories=True)
        parallel = ensemble_average(css_x(s), params, law, 140, 7, workers=2,
                                    keep_trajectories=True)
        assert np.array_equal(serial.series.jx, parallel.series.jx)
        assert np.array_equal(serial.trace_dist, parallel.trace_dist)
        assert np.array_equal(serial.trajectories["jz"], parallel.trajectories["jz"])

    def test_frozen_measurement_keeps_ensemble_on_oracle(self):
        s = SpinSystem(4)
        params = MeParams(m=0.0, t_max=0.1, dt=1e-3)
        res = ensemble_average(css_x(s), params, FeedbackLaw.off(), 10, 3)
        assert np.max(res.trace_dist) <= 1e-12

    def test_conditional_collapse_propagates(self):
        # drive long enough that |<Jx>_c| crosses the validity cutoff
        s = SpinSystem(2)
        params = MeParams(t_max=40.0, dt=1e-2)
        with pytest.raises(MeanSpinCollapse):
            ensemble_average(css_x(s), params, FeedbackLaw.conditional(), 2, 12)

    def test_rejects_empty_ensemble(self):
        with pytest.raises(ValueError):
            ensemble_average(css_x(SpinSystem(2)), MeParams(), FeedbackLaw.off(), 0, 1)


class TestEfficiencyGainMapping:
    def test_scaled_gain_reproduces_unconditional_equation(self):
        # the detected-current feedback with gain lambda/eta averages to the
        # unconditional equation with gain lambda: run eta = 0.5 trajectories
        # at scale/eta and compare against the eta = 0.5 master equation
        n, eta, count = 6, 0.5, 300
        s = SpinSystem(n)
        ops = build_spin_operators(s)
        params = MeParams(eta=eta, t_max=1.0, dt=1e-3, sample_dt=0.1)
        traj_law = FeedbackLaw.analytic(n, eta=eta, scale=1.0 / eta)
        chunks = []
        done = 0
        while done < count:
            b = min(128, count - done)
            chunks.append(_run_chunk(css_x(s), params, traj_law, 321, done, b))
            done += b
        mean_states = sum(ch["state_sum"] for ch in chunks) / count

        me_law = FeedbackLaw.analytic(n, eta=eta, scale=1.0)
        from spinsqueeze.dynamics import _integrate
        _, _, me_states = _integrate(css_x(s), params, me_law, ops,
                                     record_states=True)
        dists = [trace_distance(a, b) for a, b in zip(mean_states, me_states)]
        assert max(dists) <= 3.0 / np.sqrt(count)

    def test_literal_gain_at_low_efficiency_deviates(self):
        # sanity check of the documented mismatch: same-gain trajectories sit
        # measurably off the unconditional equation once eta < 1
        n, eta, count = 6, 0.5, 300
        s = SpinSystem(n)
        params = MeParams(eta=eta, t_max=1.0, dt=1e-3, sample_dt=0.1)
        law = FeedbackLaw.analytic(n, eta=eta, scale=1.0)
        res = ensemble_average(css_x(s), params, law, count, 321)
        assert np.max(res.trace_dist) > 5.0 / np.sqrt(count)
