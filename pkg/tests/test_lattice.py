import numpy as np
import pytest

from adslab.errors import BudgetError, ValidationError
from adslab.kernels import spectral_params
from adslab.lattice import (LatticeSpec, build_model, continuum_match,
                            model_summary, sample_fields, sample_matrix,
                            wick_power)


@pytest.fixture(scope="module")
def small_model():
    return build_model(
        LatticeSpec(z0=0.2, A=5.0, l=4.0, d=1, n_z=16, n_x=16, m2=6.25)
    )


def test_spec_validation():
    with pytest.raises(ValidationError):
        LatticeSpec(z0=2.0, A=1.0, l=1.0, d=1, n_z=4, n_x=4, m2=0.0)
    with pytest.raises(ValidationError):
        LatticeSpec(z0=0.1, A=1.0, l=-1.0, d=1, n_z=4, n_x=4, m2=0.0)
    with pytest.raises(ValidationError):
        LatticeSpec(z0=0.1, A=1.0, l=1.0, d=1, n_z=1, n_x=4, m2=0.0)


def test_site_budget_enforced():
    with pytest.raises(BudgetError):
        LatticeSpec(z0=0.1, A=1.0, l=1.0, d=2, n_z=32, n_x=32, m2=0.0)
    # explicit budget override allows it at spec level
    spec = LatticeSpec(z0=0.1, A=1.0, l=1.0, d=1, n_z=64, n_x=64,
                       m2=0.0, site_budget=4096)
    assert spec.n_sites == 4096


def test_positive_definite_covariance(small_model):
    s = model_summary(small_model)
    assert s["min_cov_eigenvalue"] > 0
    assert s["factor_residual"] < 1e-10
    assert np.allclose(small_model.wick_diag,
                       np.diag(small_model.covariance))
    assert small_model.c_kappa == pytest.approx(
        np.max(np.abs(small_model.covariance))
    )


def test_operator_symmetric_sparse(small_model):
    op = small_model.operator.toarray()
    assert np.allclose(op, op.T, atol=1e-14)


def test_min_eigenvalue_positive_massless():
    m = build_model(
        LatticeSpec(z0=0.2, A=2.0, l=1.0, d=1, n_z=16, n_x=16, m2=0.0)
    )
    assert model_summary(m)["min_cov_eigenvalue"] > 0


def test_cell_weights_tile_the_box(small_model):
    # sum of cell volumes (weights without the metric density) equals the
    # coordinate volume of [z0, A] x [-l, l] up to the x-face margin
    spec = small_model.spec
    z = np.array([s.z for s in small_model.sites])
    vol_z = np.sum((small_model.weights * z ** (spec.d + 1))[: spec.n_z * 0
                                                             + len(z)])
    h = 2.0 * spec.l / (spec.n_x + 1)
    expect = (spec.A - spec.z0) * spec.n_x * h
    assert vol_z == pytest.approx(expect, rel=1e-12)


def test_sampling_deterministic(small_model):
    a = sample_fields(small_model, seed=7, n=3)
    b = sample_fields(small_model, seed=7, n=3)
    for s1, s2 in zip(a, b):
        assert np.array_equal(s1.values, s2.values)
    m1 = sample_matrix(small_model, seed=7, n=5)
    m2 = sample_matrix(small_model, seed=7, n=5)
    assert np.array_equal(m1, m2)
    assert not np.array_equal(m1[0], sample_matrix(small_model, 8, 1)[0])


def test_sample_statistics(small_model):
    n = 10000
    S = sample_matrix(small_model, seed=1, n=n)
    means = S.mean(axis=0)
    tol = 4.0 * np.sqrt(small_model.wick_diag / n)
    assert np.all(np.abs(means) < tol)
    emp = S.T @ S / n
    C = small_model.covariance
    big = np.abs(C) > 0.5 * small_model.c_kappa
    rel = np.abs(emp[big] - C[big]) / np.abs(C[big])
    assert np.max(rel) < 0.05


def test_wick_power_values():
    assert wick_power(0.0, 1.0, 4) == pytest.approx(3.0)
    assert wick_power(1.0, 1.0, 4) == pytest.approx(-2.0)
    assert wick_power(2.0, 1.5, 2) == pytest.approx(4.0 - 1.5)
    assert wick_power(2.0, 1.5, 3) == pytest.approx(8.0 - 3 * 1.5 * 2.0)
    v = np.sqrt(3 * 1.7)
    grid = np.linspace(-5, 5, 2001)
    assert wick_power(v, 1.7, 4) == pytest.approx(-6.0 * 1.7**2)
    assert np.min(wick_power(grid, 1.7, 4)) >= -6.0 * 1.7**2 - 1e-9
    with pytest.raises(ValidationError):
        wick_power(1.0, 1.0, 5)


def test_wick_orthogonality_montecarlo():
    model = build_model(
        LatticeSpec(z0=0.3, A=3.0, l=2.0, d=1, n_z=8, n_x=8, m2=6.25)
    )
    n = 100000
    S = sample_matrix(model, seed=3, n=n)
    C = model.covariance
    off = np.abs(C - np.diag(np.diag(C)))
    i, j = np.unravel_index(np.argmax(off), C.shape)
    import math
    for a in (1, 2, 3):
        wa = wick_power(S[:, i], model.wick_diag[i], a)
        wb = wick_power(S[:, j], model.wick_diag[j], a)
        prod = wa * wb
        emp = float(np.mean(prod))
        stderr = float(np.std(prod) / math.sqrt(n))
        exact = math.factorial(a) * C[i, j] ** a
        assert abs(emp - exact) < 4.0 * stderr + 0.02 * abs(exact)
        # cross moments of different degrees vanish
        wc = wick_power(S[:, j], model.wick_diag[j], a + 1)
        cross = wa * wc
        assert abs(float(np.mean(cross))) < \
            4.0 * float(np.std(cross)) / math.sqrt(n)


def test_covariance_matches_continuum():
    p = spectral_params(1, 6.25)
    m = build_model(
        LatticeSpec(z0=0.2, A=5.0, l=4.0, d=1, n_z=32, n_x=32, m2=6.25)
    )
    assert continuum_match(m, p) < 0.05


def test_refinement_shrinks_continuum_error():
    p = spectral_params(1, 6.25)
    coarse = build_model(
        LatticeSpec(z0=0.2, A=5.0, l=4.0, d=1, n_z=16, n_x=16, m2=6.25)
    )
    fine = build_model(
        LatticeSpec(z0=0.2, A=5.0, l=4.0, d=1, n_z=32, n_x=32, m2=6.25)
    )
    assert continuum_match(fine, p) < 0.6 * continuum_match(coarse, p)


def test_continuum_match_rejects_identical_sites(small_model):
    p = spectral_params(1, 6.25)
    with pytest.raises(ValidationError):
        continuum_match(small_model, p, pairs=[(3, 3)])
