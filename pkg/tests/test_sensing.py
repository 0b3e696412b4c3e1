import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmlsv._backend import DenseKernel, available_backends
from pmlsv.exceptions import ConfigError, DimensionError
from pmlsv.linalg import entry_sum_norm
from pmlsv.sensing import (
    SensingConfig,
    SensingOperator,
    adjoint,
    forward,
    generate,
    load_config,
    sample_poisson,
    save_config,
    verify_flux_preserving,
)

from oracles import dense_sensing_matrix


@pytest.fixture(scope="module")
def op():
    return generate(SensingConfig(m1=6, m2=5, n_meas=40, zero_prob=0.5, seed=1234))


@pytest.mark.parametrize("kwargs", [
    dict(m1=0, m2=3, n_meas=2),
    dict(m1=3, m2=3, n_meas=0),
    dict(m1=3, m2=3, n_meas=2, zero_prob=1.0),
    dict(m1=3, m2=3, n_meas=2, zero_prob=-0.1),
    dict(m1=3, m2=3, n_meas=2, seed=-1),
    dict(m1=3, m2=3, n_meas=2, seed=2**64),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SensingConfig(**kwargs)


def test_zero_prob_zero_gives_constant_masks():
    o = generate(SensingConfig(4, 3, 7, zero_prob=0.0, seed=5))
    for i in range(7):
        np.testing.assert_array_equal(o.mask(i), np.full((4, 3), 1 / 7))


def test_entries_are_zero_or_one_over_n(op):
    values = np.unique(op.matrix)
    assert set(values) <= {0.0, 1 / 40}


def test_generation_is_deterministic(op):
    again = generate(op.config)
    np.testing.assert_array_equal(again.support, op.support)
    for i in (0, 17, 39):
        for a, b in zip(again.nonzero_positions(i), op.nonzero_positions(i)):
            np.testing.assert_array_equal(a, b)


def test_different_seeds_differ(op):
    other = generate(dataclasses.replace(op.config, seed=op.config.seed + 1))
    assert not np.array_equal(other.support, op.support)


def test_mask_independent_of_operator_size():
    # Keyed by (seed, mask index): the first masks do not depend on N.
    small = generate(SensingConfig(5, 5, 3, seed=9))
    large = generate(SensingConfig(5, 5, 10, seed=9))
    np.testing.assert_array_equal(small.support, large.support[:3])


def test_fill_fraction_binomial():
    o = generate(SensingConfig(16, 16, 100, zero_prob=0.5, seed=77))
    n = o.support.size
    filled = o.support.sum()
    assert abs(filled - 0.5 * n) <= 3 * np.sqrt(n * 0.25)


def test_forward_zero_and_constant(op):
    assert np.all(forward(op, np.zeros(op.shape)) == 0)
    m = np.random.default_rng(0).random((4, 3))
    o = generate(SensingConfig(4, 3, 9, zero_prob=0.0, seed=1))
    np.testing.assert_allclose(forward(o, m), entry_sum_norm(m) / 9, rtol=1e-14)


def test_forward_matches_dense_column_stacked_oracle(op):
    A = dense_sensing_matrix(op)
    m = np.random.default_rng(2).standard_normal(op.shape)
    f = m.ravel(order="F")
    np.testing.assert_allclose(forward(op, m), A @ f, rtol=0, atol=1e-12)


def test_forward_dimension_mismatch(op):
    with pytest.raises(DimensionError):
        forward(op, np.zeros((5, 6)))


def test_adjoint_zero_and_unit(op):
    assert np.all(adjoint(op, np.zeros(40)) == 0)
    e = np.zeros(40)
    e[13] = 1.0
    np.testing.assert_array_equal(adjoint(op, e), op.mask(13))


def test_adjoint_length_mismatch(op):
    with pytest.raises(DimensionError):
        adjoint(op, np.zeros(39))


@pytest.mark.parametrize("seed", range(10))
def test_adjoint_identity(op, seed):
    rng = np.random.default_rng(seed)
    m, w = rng.standard_normal(op.shape), rng.standard_normal(40)
    lhs, rhs = forward(op, m) @ w, np.sum(m * adjoint(op, w))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_sample_poisson_zero_signal(op):
    y = sample_poisson(op, np.zeros(op.shape), 3)
    assert np.all(y.counts == 0) and len(y) == 40


def test_sample_poisson_deterministic(op):
    m = 50 * np.random.default_rng(1).random(op.shape)
    a, b = sample_poisson(op, m, 99), sample_poisson(op, m, 99)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, sample_poisson(op, m, 100).counts)


def test_sample_poisson_large_rate_mean():
    o = generate(SensingConfig(2, 2, 200, zero_prob=0.0, seed=3))
    # every rate = sum(m) / 200 = 1e6
    m = np.full((2, 2), 200 * 1e6 / 4)
    y = sample_poisson(o, m, 5).counts
    assert abs(y.mean() - 1e6) <= 5 * np.sqrt(1e6 / 200)


def test_sample_poisson_rejects_negative_signal(op):
    m = np.ones(op.shape)
    m[0, 0] = -1.0
    with pytest.raises(ValueError):
        sample_poisson(op, m, 0)


def test_flux_preserving_true(op):
    assert verify_flux_preserving(op, trials=200, seed=1)


def test_flux_preserving_detects_corrupt_entry(op):
    weights = op.support.astype(float)
    weights[:, 0] = 2.0  # every mask sees pixel 0 at weight 2/N
    bad = SensingOperator(config=op.config, support=op.support, kernel=DenseKernel(weights))
    assert not verify_flux_preserving(bad, trials=200, seed=1)


def test_flux_preserving_rejects_zero_trials(op):
    with pytest.raises(ValueError):
        verify_flux_preserving(op, trials=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.95))
def test_positivity_preserving(seed, p):
    rng = np.random.default_rng(seed)
    o = generate(SensingConfig(4, 4, 12, zero_prob=p, seed=seed))
    m = rng.exponential(size=(4, 4)) * (rng.random((4, 4)) < 0.5)
    assert np.all(forward(o, m) >= 0)


def test_lower_bound_property(op):
    c = 0.37
    m = c + np.random.default_rng(4).random(op.shape)
    rates = forward(op, m)
    nonempty = op.support.any(axis=1)
    assert nonempty.all()
    assert np.all(rates[nonempty] >= c / 40)


def test_config_roundtrip(tmp_path, op):
    path = tmp_path / "sensing.cfg"
    save_config(op.config, path)
    text = path.read_text()
    for key in ("m1", "m2", "n_meas", "zero_prob", "seed"):
        assert f"{key} =" in text
    loaded = load_config(path)
    assert loaded == op.config
    np.testing.assert_array_equal(generate(loaded).support, op.support)


def test_config_missing_key(tmp_path):
    path = tmp_path / "sensing.cfg"
    path.write_text("m1 = 3\nm2 = 3\n")
    with pytest.raises(ConfigError):
        load_config(path)


@pytest.mark.parametrize("backend", available_backends())
@pytest.mark.parametrize("shape, n_meas", [((6, 5), 40), ((64, 64), 300), ((3, 3), 1)])
def test_backends_agree_with_dense_masks(backend, shape, n_meas):
    o = generate(SensingConfig(*shape, n_meas, seed=21), backend=backend)
    assert o.backend == backend
    rng = np.random.default_rng(8)
    m, w = rng.standard_normal(shape), rng.standard_normal(n_meas)
    np.testing.assert_allclose(forward(o, m), o.matrix @ m.ravel(), rtol=0, atol=1e-12 * np.abs(m).sum())
    np.testing.assert_allclose(adjoint(o, w).ravel(), w @ o.matrix, rtol=0, atol=1e-12 * np.abs(w).sum())


def test_unknown_backend():
    with pytest.raises(ValueError):
        generate(SensingConfig(2, 2, 2), backend="fortran")
