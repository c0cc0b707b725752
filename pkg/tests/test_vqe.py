import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundary_vqe.ansatz import HvaConfig, random_params
from boundary_vqe.free_fermion import dense_ed
from boundary_vqe.spin_model import IsingChainSpec
from boundary_vqe.vqe import (
    VqeConfig,
    adjoint_energy_and_gradient,
    cost,
    gradient,
    lbfgs,
    minimize,
    parameter_shift_gradient,
    sweep,
)


def central_difference(params, spec, config, step=1e-5):
    out = np.empty_like(params)
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = step
        out[k] = (cost(params + e, spec, config) - cost(params - e, spec, config)) / (2 * step)
    return out


@given(
    seed=st.integers(0, 2**32 - 1),
    L=st.integers(2, 6),
    p=st.integers(1, 4),
    mode=st.sampled_from(["tied", "untied"]),
)
@settings(max_examples=25)
def test_parameter_shift_matches_finite_differences(seed, L, p, mode):
    rng = np.random.default_rng(seed)
    config = HvaConfig(p, mode)
    spec = IsingChainSpec(L, 1.0, rng.uniform(0.05, 0.95), rng.uniform(-1.5, 1.5),
                          rng.uniform(-1.5, 1.5))
    theta = random_params(config, rng, (-np.pi, np.pi))
    shift = parameter_shift_gradient(theta, spec, config)
    assert np.max(np.abs(shift - central_difference(theta, spec, config))) <= 1e-6


@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 6), p=st.integers(1, 4))
@settings(max_examples=25)
def test_adjoint_matches_parameter_shift(seed, L, p):
    rng = np.random.default_rng(seed)
    config = HvaConfig(p, "untied" if seed % 2 else "tied")
    spec = IsingChainSpec(L, 1.0, 0.5, 0.7, -0.4)
    theta = random_params(config, rng, (-np.pi, np.pi))
    energy, grad = adjoint_energy_and_gradient(theta, spec, config)
    assert energy == pytest.approx(cost(theta, spec, config), abs=1e-12)
    np.testing.assert_allclose(grad, parameter_shift_gradient(theta, spec, config), atol=1e-10)
    np.testing.assert_allclose(gradient(theta, spec, config, method="parameter-shift"),
                               grad, atol=1e-10)


def test_zero_parameters_energy():
    spec = IsingChainSpec(4, 1.0, 0.5, 0.7, -0.7)
    assert cost(np.zeros(3), spec, HvaConfig(1)) == pytest.approx(-2.0, abs=1e-14)


def test_quadratic_objective_converges_fast():
    rng = np.random.default_rng(3)
    dim = 8
    Q = rng.normal(size=(dim, dim))
    A = Q @ Q.T + dim * np.eye(dim)
    b = rng.normal(size=dim)

    def objective(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b

    result = lbfgs(objective, np.zeros(dim), 200, history_size=10)
    assert result.converged
    assert result.iterations <= dim + 5
    np.testing.assert_allclose(result.optimal_params, np.linalg.solve(A, b), atol=1e-7)


def test_minimize_accepts_injected_objective():
    def objective(x):
        return float((x - 1) @ (x - 1)), 2 * (x - 1)

    result = minimize(None, HvaConfig(1), VqeConfig(), np.zeros(3), objective=objective)
    np.testing.assert_allclose(result.optimal_params, 1.0, atol=1e-8)
    np.testing.assert_array_equal(result.initial_params, np.zeros(3))


@given(seed=st.integers(0, 1000), L=st.integers(2, 6), p=st.integers(1, 3))
@settings(max_examples=15)
def test_reported_energies_respect_variational_bound(seed, L, p):
    rng = np.random.default_rng(seed)
    h = rng.uniform(0.01, 1.5) * rng.choice([-1, 1])
    spec = IsingChainSpec(L, 1.0, rng.uniform(0.05, 0.95), h, -h)
    config = HvaConfig(p)
    floor = dense_ed(spec).eigenvalues[0]
    result = minimize(spec, config, VqeConfig(), random_params(config, rng), max_iters=200)
    energies = [e for _, e in result.iteration_trace] + [result.energy]
    assert min(energies) >= floor - 1e-10
    # the trace records accepted iterates only, so it never goes up
    assert np.all(np.diff([e for _, e in result.iteration_trace]) <= 1e-14)


def test_l4_ground_state_reached():
    spec = IsingChainSpec(4, 1.0, 0.5, 0.71, -0.71)
    config = HvaConfig(6)
    theta = random_params(config, np.random.default_rng(0))
    result = minimize(spec, config, VqeConfig(), theta)
    exact = -3.6912093227248164
    assert abs(result.energy - exact) / abs(exact) < 1e-8


def test_minimize_deterministic():
    spec = IsingChainSpec(4, 1.0, 0.5, 0.6, -0.6)
    config = HvaConfig(2)
    theta = random_params(config, np.random.default_rng(9))
    a = minimize(spec, config, VqeConfig(), theta, max_iters=50)
    b = minimize(spec, config, VqeConfig(), theta, max_iters=50)
    np.testing.assert_array_equal(a.optimal_params, b.optimal_params)
    assert a.iteration_trace == b.iteration_trace


def test_vqe_config_validation():
    with pytest.raises(ValueError):
        VqeConfig(init_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        VqeConfig(max_iters_first=0)
    with pytest.raises(ValueError):
        VqeConfig(gradient_method="spsa")


def test_sweep_warm_start_and_bookkeeping():
    template = IsingChainSpec(4, 1.0, 0.5, 1.0, -1.0)
    grid = np.linspace(1.0, 0.4, 5)
    result = sweep(template, grid, HvaConfig(6), VqeConfig(seed=4))
    assert result.direction == "decreasing"
    assert all(p.ok for p in result.points)
    np.testing.assert_allclose(result.h_values, grid)
    for i, point in enumerate(result.points):
        assert point.h_r == -point.h_l
        exact = dense_ed(result.spec_at(i)).eigenvalues[0]
        assert abs(point.result.energy - exact) / abs(exact) < 1e-6
    for prev, point in zip(result.points, result.points[1:]):
        np.testing.assert_array_equal(point.result.initial_params, prev.result.optimal_params)
    # warm starts need far fewer iterations than the cold first point
    later = np.mean([p.result.iterations for p in result.points[1:]])
    assert later < result.points[0].result.iterations


def test_sweep_reproducible_for_seed():
    template = IsingChainSpec(3, 1.0, 0.5, 0.5, -0.5)
    a = sweep(template, [0.4, 0.6, 0.8], HvaConfig(2), VqeConfig(seed=2, max_iters_first=40))
    b = sweep(template, [0.4, 0.6, 0.8], HvaConfig(2), VqeConfig(seed=2, max_iters_first=40))
    assert a.direction == "increasing"
    for pa, pb in zip(a.points, b.points):
        np.testing.assert_array_equal(pa.result.optimal_params, pb.result.optimal_params)


def test_sweep_fixed_right_field_and_restarts():
    template = IsingChainSpec(3, 1.0, 0.8, 0.0, -0.3)
    result = sweep(template, [-0.2, 0.2], HvaConfig(2), VqeConfig(restarts=2, max_iters_first=60),
                   mirror_right=False)
    assert [p.h_r for p in result.points] == [-0.3, -0.3]
    assert all(p.ok for p in result.points)


def test_sweep_rejects_non_monotone_grid():
    with pytest.raises(ValueError):
        sweep(IsingChainSpec(3), [0.4, 0.6, 0.5], HvaConfig(1), VqeConfig())


def test_sweep_records_failures_and_continues(monkeypatch):
    from boundary_vqe import vqe as vqe_module

    real = vqe_module.minimize

    def flaky(spec, *args, **kwargs):
        if spec.h_l == 0.6:
            raise FloatingPointError("simulated breakdown")
        return real(spec, *args, **kwargs)

    monkeypatch.setattr(vqe_module, "minimize", flaky)
    result = sweep(IsingChainSpec(3), [0.4, 0.6, 0.8], HvaConfig(1), VqeConfig(max_iters_first=30))
    assert [p.ok for p in result.points] == [True, False, True]
    assert "simulated" in result.points[1].error
    # the point after a failure warm-starts from the last success
    np.testing.assert_array_equal(result.points[2].result.initial_params,
                                  result.points[0].result.optimal_params)
