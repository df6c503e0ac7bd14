import math

import numpy as np
import pytest

import kfp


@pytest.fixture(scope="module")
def params():
    return kfp.ModelParams.exponential(1.5, 0.5)


def test_grid_and_initial_condition():
    grid = kfp.build_grid(400.0, 400.0, 400, 400)
    assert grid.dx == 2.0
    assert grid.x[0] == -399.0
    f0 = kfp.default_initial_condition(grid)
    assert f0.values.shape == (400, 400)
    assert abs(kfp.mass(f0) - 1.0) < 1e-3
    with pytest.raises(ValueError):
        kfp.build_grid(1.0, 1.0, 3, 2)


def test_steps_conserve_mass_and_positivity(params):
    grid = kfp.build_grid(20.0, 20.0, 32, 32)
    solver = kfp.KineticSolver(grid, params)
    dt = solver.cfl_timestep(0.5)
    f0 = kfp.default_initial_condition(grid)
    f = solver.step(f0, dt, steps=200)
    assert f.time == pytest.approx(200 * dt)
    assert abs(kfp.mass(f) - kfp.mass(f0)) < 1e-12
    assert f.values.min() >= 0.0
    with pytest.raises(ValueError):
        solver.step(f0, 2.0 * solver.cfl_timestep(1.0))


def test_field_round_trip_and_density(params):
    grid = kfp.build_grid(10.0, 10.0, 8, 8)
    values = np.arange(64, dtype=float).reshape(8, 8)
    f = kfp.Field(grid, values, time=0.25)
    np.testing.assert_array_equal(f.values, values)
    rho = kfp.density(f)
    assert rho.shape == (8,)
    assert np.sum(rho) * grid.dx == pytest.approx(kfp.mass(f), rel=1e-15)
    with pytest.raises(ValueError):
        kfp.Field(grid, np.zeros((8, 7)))


def test_run_and_steady_state(params):
    grid = kfp.build_grid(8.0, 8.0, 16, 16)
    f = kfp.run(params, grid, t_final=0.5)
    assert f.time == pytest.approx(0.5)
    g, rate, steps = kfp.steady_state_reference(params, grid, tol_rate=1e-7)
    assert rate < 1e-7
    assert steps % 200 == 0
    assert kfp.l1_distance(g, g) == 0.0
    scatter = kfp.energy_scatter(g, params)
    assert scatter.pairs.shape == (256, 2)
    assert scatter.dispersion >= 0.0


def test_reference_profile(params):
    grid = kfp.build_grid(1e-9, 1e-9, 2, 2)
    ref = kfp.reference_profile(grid, params, 1.15)
    assert ref.values[0, 0] == pytest.approx(math.exp(-1.15 * (1 / 1.5) ** 0.25), rel=1e-9)


def test_rate_fit_recovers_generators():
    t = np.linspace(0.0, 100.0, 200)
    fit = kfp.rate_fit(t, np.exp(-0.3 * np.sqrt(t)), kfp.RateMode.exp_theta, theta=0.5)
    assert abs(fit.fitted - 0.3) < 1e-6
    fit = kfp.rate_fit(t, (1.0 + t) ** -2.0, kfp.RateMode.poly_k)
    assert abs(fit.fitted - 2.0) < 1e-6
    with pytest.raises(ValueError):
        kfp.rate_fit(t[:5], t[:5] + 1.0)


def test_lyapunov_certificate():
    params = kfp.ModelParams.exponential(1.5, 0.5)
    spec = kfp.LyapunovSpec.exp_weight(ell=2.0, eps=0.05, A=1.0, B=0.95, theta=0.25, delta=0.01)
    cfg = kfp.ScanConfig()
    cfg.samples_per_axis = 64
    report = kfp.scan_drift_inequality(params, spec, cfg)
    assert report.passed
    degenerate = kfp.LyapunovSpec.exp_weight(ell=2.0, eps=0.0, A=1.0, B=0.95, theta=0.25, delta=0.01)
    report = kfp.scan_drift_inequality(params, degenerate, cfg)
    assert not report.passed
    assert report.worst_point[1] == 0.0
    assert kfp.apply_lstar_exact(0.0, 1.0, kfp.ModelParams.exponential(2.0, 2.0),
                                 kfp.LyapunovSpec.exp_weight(2.0, 0.0, 0.0, 0.5, 0.5, 0.1),
                                 kfp.LstarTarget.energy_power) == pytest.approx(2.0)


def test_invalid_parameters():
    with pytest.raises(ValueError, match="alpha must exceed 1"):
        kfp.ModelParams.exponential(0.9, 0.5)
