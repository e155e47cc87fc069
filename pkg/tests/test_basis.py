"""Basis construction, constraint reparameterization, and reduced regressors."""
import numpy as np
import pytest

from midasvi.basis import (
    almon_basis,
    bspline_basis,
    lag_weights,
    make_basis,
    reduced_regressors,
    reparameterize,
)

RNG = np.random.default_rng(20240817)


# -- polynomial basis ---------------------------------------------------------


def test_polynomial_basis_frozen_rows_k9_p3():
    basis = almon_basis(9, 3)
    assert basis.shape == (9, 3)
    np.testing.assert_array_equal(basis[0], [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(basis[8], [1.0, 8.0, 64.0])
    np.testing.assert_array_equal(basis.sum(axis=0), [9.0, 36.0, 204.0])


def test_polynomial_basis_zero_exponent_convention():
    # the lag-0 row must carry a constant term: 0**0 == 1
    for order in (1, 2, 4):
        basis = almon_basis(6, order)
        assert basis[0, 0] == 1.0
        assert np.all(basis[0, 1:] == 0.0)


def test_polynomial_basis_general_entry_formula():
    basis = almon_basis(12, 4)
    k = np.arange(12, dtype=float)
    for p in range(4):
        np.testing.assert_allclose(basis[:, p], k**p, rtol=0, atol=0)


@pytest.mark.parametrize("bad", [(2, 3), (0, 1), (3, 0)])
def test_polynomial_basis_dimension_errors(bad):
    with pytest.raises(ValueError):
        almon_basis(*bad)


# -- spline basis -------------------------------------------------------------


def test_spline_basis_partition_of_unity_and_range():
    basis = bspline_basis(9, 4)
    assert basis.shape == (9, 4)
    np.testing.assert_allclose(basis.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(basis >= 0.0) and np.all(basis <= 1.0)


@pytest.mark.parametrize("n_lags,order", [(10, 5), (22, 6), (65, 8), (5, 4)])
def test_spline_basis_partition_of_unity_various_sizes(n_lags, order):
    basis = bspline_basis(n_lags, order)
    np.testing.assert_allclose(basis.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("bad", [(9, 3), (9, 2), (3, 4), (9, 10)])
def test_spline_basis_dimension_errors(bad):
    with pytest.raises(ValueError):
        bspline_basis(*bad)


def test_make_basis_dispatch_and_unknown_kind():
    np.testing.assert_array_equal(make_basis("almon", 9, 3), almon_basis(9, 3))
    np.testing.assert_array_equal(make_basis("bspline", 9, 4), bspline_basis(9, 4))
    with pytest.raises(ValueError):
        make_basis("fourier", 9, 3)


# -- constraint reparameterization -------------------------------------------


def test_reparam_frozen_values_k9_p3():
    rep = reparameterize(almon_basis(9, 3))
    np.testing.assert_array_equal(rep.constraint, [9.0, 36.0, 204.0])
    norm_sq = 9.0**2 + 36.0**2 + 204.0**2
    assert norm_sq == 42993.0
    np.testing.assert_allclose(
        rep.base, np.array([9.0, 36.0, 204.0]) / 42993.0, rtol=1e-15
    )
    assert rep.kernel.shape == (3, 2)


def test_reparam_frozen_unit_kernel_k2_p2():
    # constraint (2, 1); its one-dimensional kernel is spanned by ±(-1, 2)/sqrt(5)
    rep = reparameterize(almon_basis(2, 2))
    np.testing.assert_allclose(rep.base, [0.4, 0.2], rtol=1e-15)
    expected = np.array([-1.0, 2.0]) / np.sqrt(5.0)
    assert np.allclose(rep.kernel[:, 0], expected) or np.allclose(
        rep.kernel[:, 0], -expected
    )


def test_reparam_identities_random_bases():
    for _ in range(50):
        n_lags = int(RNG.integers(3, 40))
        order = int(RNG.integers(2, min(n_lags, 5) + 1))
        basis = almon_basis(n_lags, order)
        rep = reparameterize(basis)
        c = rep.constraint
        assert abs(c @ rep.base - 1.0) < 1e-12
        eye = rep.kernel.T @ rep.kernel
        np.testing.assert_allclose(eye, np.eye(order - 1), atol=1e-12)
        assert np.all(np.abs(c @ rep.kernel) < 1e-12 * np.linalg.norm(c))


def test_reparam_bitwise_deterministic():
    basis = almon_basis(17, 4)
    first = reparameterize(basis)
    second = reparameterize(basis)
    assert np.array_equal(first.kernel, second.kernel)
    assert np.array_equal(first.base, second.base)


def test_reparam_degenerate_constraint_error():
    # a basis whose columns each sum to zero has no feasible normalization
    degenerate = np.array([[1.0, 2.0], [-1.0, -2.0]])
    with pytest.raises(ValueError):
        reparameterize(degenerate)


# -- reduced regressors -------------------------------------------------------


def test_reduced_regressors_zero_block():
    basis = almon_basis(9, 3)
    rep = reparameterize(basis)
    red = reduced_regressors(np.zeros((4, 9)), basis, rep)
    np.testing.assert_array_equal(red.fixed, np.zeros(4))
    np.testing.assert_array_equal(red.free, np.zeros((4, 2)))


def test_reduced_regressors_all_ones_row_gives_unit_fixed_term():
    # row of ones: fixed part = sum over lags of (basis @ base) = constraint identity
    basis = almon_basis(9, 3)
    rep = reparameterize(basis)
    red = reduced_regressors(np.ones((3, 9)), basis, rep)
    np.testing.assert_allclose(red.fixed, 1.0, rtol=1e-12)


def test_reduced_regressors_unit_impulse_row_frozen_value():
    basis = almon_basis(9, 3)
    rep = reparameterize(basis)
    row = np.zeros((1, 9))
    row[0, 0] = 1.0
    red = reduced_regressors(row, basis, rep)
    np.testing.assert_allclose(red.fixed[0], 9.0 / 42993.0, rtol=1e-12)


def test_reduced_regressors_dimension_mismatch():
    basis = almon_basis(9, 3)
    rep = reparameterize(basis)
    with pytest.raises(ValueError):
        reduced_regressors(np.zeros((4, 8)), basis, rep)


# -- lag weights --------------------------------------------------------------


def test_lag_weights_at_zero_frozen_quadratic():
    basis = almon_basis(9, 3)
    rep = reparameterize(basis)
    weights = lag_weights(basis, rep, np.zeros(2))
    k = np.arange(9, dtype=float)
    np.testing.assert_allclose(
        weights, (9.0 + 36.0 * k + 204.0 * k**2) / 42993.0, rtol=1e-12
    )


def test_lag_weights_equal_basis_times_base_at_zero():
    for kind, order in (("almon", 3), ("bspline", 4)):
        basis = make_basis(kind, 12, order)
        rep = reparameterize(basis)
        np.testing.assert_allclose(
            lag_weights(basis, rep, np.zeros(order - 1)), basis @ rep.base, rtol=1e-14
        )


# -- invariants over randomized cases ----------------------------------------


def test_weight_sums_collapse_to_one_randomized():
    for _ in range(300):
        n_lags = int(RNG.integers(3, 71))
        order = int(RNG.integers(3, min(n_lags, 5) + 1))
        kind = "bspline" if (order >= 4 and RNG.random() < 0.4) else "almon"
        basis = make_basis(kind, n_lags, order)
        rep = reparameterize(basis)
        free = RNG.normal(scale=3.0, size=order - 1)
        assert abs(lag_weights(basis, rep, free).sum() - 1.0) < 1e-9


def test_scale_indeterminacy_of_unconstrained_form():
    # without the sum-to-one constraint, (slope, profile) is identified only
    # up to a reciprocal rescaling: slope*(x @ basis @ profile) is unchanged
    # under (c*slope, profile/c)
    for _ in range(100):
        n_lags = int(RNG.integers(3, 30))
        order = int(RNG.integers(2, min(n_lags, 4) + 1))
        basis = almon_basis(n_lags, order)
        x = RNG.normal(size=n_lags)
        theta = RNG.normal(size=order)
        slope = RNG.normal()
        scale = RNG.normal()
        if abs(scale) < 1e-3:
            scale = 1.0
        reference = slope * (x @ basis @ theta)
        rescaled = (scale * slope) * (x @ basis @ (theta / scale))
        assert abs(reference - rescaled) <= 1e-12 * max(abs(reference), 1.0)


def test_reduced_form_reconstructs_weighted_aggregates():
    for _ in range(100):
        n_lags = int(RNG.integers(3, 40))
        order = int(RNG.integers(2, min(n_lags, 5) + 1))
        basis = almon_basis(n_lags, order)
        rep = reparameterize(basis)
        block = RNG.normal(size=(7, n_lags))
        red = reduced_regressors(block, basis, rep)
        free = RNG.normal(size=order - 1)
        direct = block @ lag_weights(basis, rep, free)
        reduced = red.fixed + red.free @ free
        np.testing.assert_allclose(reduced, direct, rtol=1e-10, atol=1e-12)
