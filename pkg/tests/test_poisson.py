import numpy as np
import pytest

from pmlsv.exceptions import ConfigError, DimensionError
from pmlsv.linalg import nuclear_norm
from pmlsv.poisson import ObjectiveParams, gradient, neg_log_likelihood, objective
from pmlsv.sensing import SensingConfig, adjoint, forward, generate, sample_poisson

from oracles import dense_sensing_matrix, poisson_nll_direct

FLOOR = 1e-12


def instance(seed, shape=(16, 16), n_meas=50, scale=100.0):
    op = generate(SensingConfig(shape[0], shape[1], n_meas, zero_prob=0.5, seed=seed))
    rng = np.random.default_rng(seed)
    m = scale * (0.5 + rng.random(shape))
    y = sample_poisson(op, m, seed + 1)
    return op, y, m


def fd_gradient(fun, m, h):
    g = np.zeros_like(m)
    for idx in np.ndindex(m.shape):
        e = np.zeros_like(m)
        e[idx] = h
        g[idx] = (fun(m + e) - fun(m - e)) / (2 * h)
    return g


def test_params_validation():
    with pytest.raises(ConfigError):
        ObjectiveParams(lam=-1.0, rate_floor=1e-12)
    with pytest.raises(ConfigError):
        ObjectiveParams(lam=0.1, rate_floor=0.0)


def test_zero_counts_leave_only_the_rate_sum():
    op, _, m = instance(0)
    params = ObjectiveParams(0.01, FLOOR)
    y = np.zeros(op.n_meas)
    assert neg_log_likelihood(op, y, m, params) == pytest.approx(forward(op, m).sum(), rel=1e-14)


def test_single_measurement_value():
    op = generate(SensingConfig(1, 1, 1, zero_prob=0.0, seed=0))
    # r = <A_1, m> = 1 with A_1 = [[1]]
    assert neg_log_likelihood(op, np.array([1]), np.array([[1.0]]), ObjectiveParams(0.1, FLOOR)) == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_matches_direct_formula(seed):
    op, y, m = instance(seed, shape=(5, 4), n_meas=12)
    params = ObjectiveParams(0.01, FLOOR)
    expected = poisson_nll_direct(dense_sensing_matrix(op), m, y.counts, FLOOR)
    assert neg_log_likelihood(op, y, m, params) == pytest.approx(expected, rel=1e-12)


def test_dimension_mismatch():
    op, y, m = instance(0)
    params = ObjectiveParams(0.01, FLOOR)
    with pytest.raises(DimensionError):
        neg_log_likelihood(op, y.counts[:-1], m, params)
    with pytest.raises(DimensionError):
        gradient(op, y, m[:-1], params)


def test_gradient_zero_at_matched_rates():
    op, _, m = instance(1)
    y = forward(op, m)  # real-valued "counts" equal to the rates
    g = gradient(op, y, m, ObjectiveParams(0.01, FLOOR))
    assert np.max(np.abs(g)) <= 1e-14


def test_gradient_zero_counts_is_mask_sum():
    op, _, m = instance(2)
    g = gradient(op, np.zeros(op.n_meas), m, ObjectiveParams(0.01, FLOOR))
    np.testing.assert_allclose(g, adjoint(op, np.ones(op.n_meas)), rtol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_finite_differences(seed):
    op, y, m = instance(seed)
    params = ObjectiveParams(0.01, FLOOR)
    h = 1e-5 * np.abs(m).max()
    fd = fd_gradient(lambda x: neg_log_likelihood(op, y, x, params), m, h)
    g = gradient(op, y, m, params)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) <= 1e-6


def test_objective_composition():
    op, y, m = instance(3)
    params = ObjectiveParams(0.07, FLOOR)
    parts = neg_log_likelihood(op, y, m, params) + 0.07 * nuclear_norm(m)
    assert objective(op, y, m, params) == pytest.approx(parts, rel=1e-12)
    params0 = ObjectiveParams(0.0, FLOOR)
    assert objective(op, y, m, params0) == neg_log_likelihood(op, y, m, params0)


def test_objective_floor_dominated_degenerate_case():
    op, _, m = instance(4)
    floor = 1e-9
    value = objective(op, np.zeros(op.n_meas), np.zeros_like(m), ObjectiveParams(0.5, floor))
    assert value == pytest.approx(op.n_meas * floor)


@pytest.mark.parametrize("seed", range(5))
def test_convexity_probe(seed):
    op, y, m1 = instance(seed)
    m2 = instance(seed + 100)[2]
    params = ObjectiveParams(0.01, FLOOR)
    f = lambda x: neg_log_likelihood(op, y, x, params)  # noqa: E731
    for t in (0.25, 0.5, 0.75):
        assert f(t * m1 + (1 - t) * m2) <= t * f(m1) + (1 - t) * f(m2) + 1e-9


def test_floor_is_transparent_for_large_rates():
    op, y, m = instance(5)
    assert forward(op, m).min() > 10 * FLOOR
    with_floor = ObjectiveParams(0.01, FLOOR)
    tiny_floor = ObjectiveParams(0.01, np.finfo(float).tiny)
    assert neg_log_likelihood(op, y, m, with_floor) == neg_log_likelihood(op, y, m, tiny_floor)
    np.testing.assert_array_equal(gradient(op, y, m, with_floor), gradient(op, y, m, tiny_floor))


def test_floor_keeps_zero_rates_finite():
    op, y, m = instance(6)
    value = neg_log_likelihood(op, y, np.zeros_like(m), ObjectiveParams(0.01, FLOOR))
    assert np.isfinite(value)
