"""Trajectories, steady-state detection, ensembles, sweeps, h_c search."""

import numpy as np
import pytest

import oligosim.engine as engine
from oligosim import (
    AdvertisingField,
    ConfigError,
    DomainError,
    EnsembleResult,
    ModelKind,
    ScanAmbiguityError,
    Shares,
    SimConfig,
    ensemble_steady,
    find_hc,
    incumbent_share,
    mfa_fixed_point,
    run_to_steady,
    run_trajectory,
    sweep,
)

H433 = AdvertisingField(0.4, 0.3, 0.3)


def cfg(model=ModelKind.CAP, L=20, p=0.5, h=H433, c0=Shares(0.4, 0.3, 0.3),
        seed=1, max_sweeps=5000):
    return SimConfig(model, L, p, h, c0, seed, max_sweeps)


class TestRunTrajectory:
    def test_zero_updates_rejected(self):
        with pytest.raises(ConfigError):
            run_trajectory(cfg(), 0)

    def test_unanimous_lattice_is_absorbing_under_cf(self):
        c = cfg(model=ModelKind.CF, c0=Shares(1.0, 0.0, 0.0), p=0.3)
        traj = run_trajectory(c, 5 * 20 * 20)
        assert np.all(traj.shares == np.array([1.0, 0.0, 0.0]))

    def test_deterministic_given_seed(self):
        a = run_trajectory(cfg(seed=123), 2000, 200)
        b = run_trajectory(cfg(seed=123), 2000, 200)
        assert np.array_equal(a.shares, b.shares)
        assert np.array_equal(a.times, b.times)

    def test_recording_grid(self):
        traj = run_trajectory(cfg(L=20), 10 * 400, record_every=400)
        assert traj.times.tolist() == list(np.arange(11.0))
        assert traj.shares.shape == (11, 3)

    def test_partial_tail_recorded(self):
        traj = run_trajectory(cfg(L=20), 1000, record_every=400)
        assert traj.times.tolist() == [0.0, 1.0, 2.0, 2.5]

    def test_recorded_points_stay_on_simplex(self):
        traj = run_trajectory(cfg(p=0.2, seed=9), 4000, 100)
        assert np.all(traj.shares >= 0.0) and np.all(traj.shares <= 1.0)
        assert np.max(np.abs(traj.shares.sum(axis=1) - 1.0)) <= 1e-12

    def test_cap_p0_long_run_matches_field(self):
        # conformity off: every resample is an independent field draw
        means = []
        for i in range(20):
            c = cfg(p=0.0, L=24, seed=100 + i)
            traj = run_trajectory(c, 30 * 24 * 24)
            means.append(traj.shares[-1])
        mean = np.mean(means, axis=0)
        assert np.max(np.abs(mean - np.array([0.4, 0.3, 0.3]))) < 0.02


class TestRunToSteady:
    def test_monochromatic_cf_immediate(self):
        c = cfg(model=ModelKind.CF, c0=Shares(1.0, 0.0, 0.0))
        res = run_to_steady(c, delta_T=50)
        assert res.converged
        assert res.t_T == 0
        assert (res.c_inf.c1, res.c_inf.c2, res.c_inf.c3) == (1.0, 0.0, 0.0)

    def test_window_width_insensitivity(self):
        c = cfg(p=0.3, L=30, h=AdvertisingField(0.3, 0.3, 0.4),
                c0=Shares(0.4, 0.4, 0.2), seed=5)
        values = [run_to_steady(c, delta_T=dt).c_inf.as_array()
                  for dt in (10, 50, 100)]
        spread = np.max(values, axis=0) - np.min(values, axis=0)
        assert np.max(spread) < 0.01

    def test_matches_mean_field_for_cap(self):
        c = cfg(p=0.5, L=30, h=AdvertisingField(0.4, 0.3, 0.3),
                c0=Shares(0.3, 0.3, 0.4), seed=3)
        mc = np.mean([run_to_steady(engine.SimConfig(c.model, c.L, c.p, c.field,
                                                     c.c0, s)).c_inf.as_array()
                      for s in range(3, 8)], axis=0)
        fp = mfa_fixed_point(ModelKind.CAP, c.c0, 0.5, c.field).c_inf.as_array()
        assert np.max(np.abs(mc - fp)) < 0.03

    def test_nonconvergence_flagged_not_raised(self):
        c = cfg(p=0.5, max_sweeps=30)
        res = run_to_steady(c, delta_T=100, epsilon=1e-12)
        assert not res.converged
        assert res.delta_T == 100
        # final-window average is still a valid simplex point
        assert abs(res.c_inf.c1 + res.c_inf.c2 + res.c_inf.c3 - 1.0) <= 1e-12

    def test_parameter_validation(self):
        with pytest.raises(ConfigError):
            run_to_steady(cfg(), delta_T=0)
        with pytest.raises(ConfigError):
            run_to_steady(cfg(), epsilon=0.0)


class TestEnsemble:
    def test_minimum_replicas(self):
        with pytest.raises(ConfigError):
            ensemble_steady(cfg(), 1)

    def test_degenerate_field_zero_stderr(self):
        c = cfg(p=0.0, h=AdvertisingField(1.0, 0.0, 0.0), L=10, max_sweeps=300)
        res = ensemble_steady(c, 4, delta_T=20)
        assert (res.mean.c1, res.mean.c2, res.mean.c3) == (1.0, 0.0, 0.0)
        assert np.all(res.se == 0.0)

    def test_mean_recomputed_from_replicas(self):
        res = ensemble_steady(cfg(L=16, seed=21), 6, delta_T=20)
        assert np.array_equal(res.mean.as_array(), res.replicas.mean(axis=0))
        se = res.replicas.std(axis=0, ddof=1) / np.sqrt(6)
        assert np.array_equal(res.se, se)

    def test_thread_count_does_not_change_results(self):
        serial = ensemble_steady(cfg(L=16, seed=22), 6, delta_T=20, threads=1)
        parallel = ensemble_steady(cfg(L=16, seed=22), 6, delta_T=20, threads=3)
        assert np.array_equal(serial.replicas, parallel.replicas)
        assert np.array_equal(serial.se, parallel.se)


class TestSweep:
    def test_single_node_equals_ensemble(self):
        diagram = sweep(ModelKind.CAP, [0.3], [0.2], [0.3], L=16, n_samples=4,
                        seed=31, delta_T=20)
        c = SimConfig(ModelKind.CAP, 16, 0.3, AdvertisingField.symmetric(0.2),
                      Shares.symmetric(0.3), 31)
        res = ensemble_steady(c, 4, delta_T=20, seed_path=(0,))
        pt = diagram.points[0]
        assert pt.mean == res.mean
        assert np.array_equal(pt.se, res.se)

    def test_domain_bounds(self):
        with pytest.raises(DomainError):
            sweep(ModelKind.CF, [0.3], [0.6], [0.3], 16, 4, 1)
        with pytest.raises(DomainError):
            sweep(ModelKind.CF, [0.3], [0.2], [0.5], 16, 4, 1)
        with pytest.raises(ConfigError):
            sweep(ModelKind.CF, [], [0.2], [0.3], 16, 4, 1)

    def test_h_boundary_allowed(self):
        diagram = sweep(ModelKind.CAP, [0.0], [0.5], [0.25], L=10, n_samples=2,
                        seed=32, delta_T=10, max_sweeps=200)
        assert diagram.points[0].h == 0.5  # entrant field is exactly zero

    def test_cap_low_p_tracks_field_diagonal(self):
        h_grid = [0.1, 0.2, 0.3, 0.4]
        diagram = sweep(ModelKind.CAP, [0.2], h_grid, [0.3], L=24, n_samples=8,
                        seed=33, delta_T=50)
        inc = [incumbent_share(pt.mean) for pt in diagram.points]
        ses = [np.sqrt(pt.se[0] ** 2 + pt.se[1] ** 2) for pt in diagram.points]
        for k in range(3):
            assert inc[k + 1] - inc[k] > -2 * np.hypot(ses[k], ses[k + 1])
        assert np.max(np.abs(np.array(inc) - np.array(h_grid))) < 0.05


class TestFindHc:
    def test_zero_threshold_never_declares_extinction(self):
        # shares that are exactly zero across the window do not count as
        # extinct under a zero threshold, so no critical level is reported
        res = find_hc(ModelKind.CF, 0.5, 0.4, L=10, extinction_threshold=0.0,
                      n_samples=2, seed=41, delta_T=10, max_sweeps=150)
        assert res.h_c is None

    def test_cf_desk_scale_bracketing(self):
        res = find_hc(ModelKind.CF, 0.5, 0.4, L=16, n_samples=4, seed=42,
                      delta_T=20, threads=2)
        assert res.h_c is not None
        lo, hi = res.bracket
        assert lo < res.h_c < hi
        assert hi - lo <= res.tolerance + 1e-12
        # scan points cover the initial grid plus the bisection evaluations
        assert len(res.scan) >= engine.HC_SCAN_POINTS

    def test_cap_desk_scale_none(self):
        res = find_hc(ModelKind.CAP, 0.5, 0.4, L=16, n_samples=4, seed=43,
                      delta_T=20, threads=2)
        assert res.h_c is None
        assert res.bracket is None

    def test_non_monotone_scan_raises(self, monkeypatch):
        pattern = {0.0: 0.0, 0.05: 0.2, 0.1: 0.0}  # extinct, surviving, extinct

        def fake(model, p, h, c0, L, n_samples, seed, eval_index,
                 delta_T, epsilon, max_sweeps, threads):
            inc = pattern.get(round(h, 2), 0.4)
            mean = Shares(inc, inc, 1 - 2 * inc)
            return EnsembleResult(mean, np.zeros(3), np.array([mean.as_array()] * 2), 2)

        monkeypatch.setattr(engine, "_evaluate_h", fake)
        with pytest.raises(ScanAmbiguityError) as err:
            find_hc(ModelKind.CF, 0.5, 0.4, L=16, n_samples=2, seed=1)
        assert len(err.value.scan) == engine.HC_SCAN_POINTS

    def test_validation(self):
        with pytest.raises(DomainError):
            find_hc(ModelKind.CF, 1.5, 0.4, L=16)
        with pytest.raises(ConfigError):
            find_hc(ModelKind.CF, 0.5, 0.4, L=16, tolerance=0.0)
