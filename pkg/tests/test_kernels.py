import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as Gamma
from scipy.special import hyp2f1

from adslab.bumps import BoundaryTestFunction, fourier_moment
from adslab.errors import NumericalError, ValidationError
from adslab.geometry import BulkPoint
from adslab.kernels import (QuadConfig, boundary_double_integral, boundary_form,
                            bulk_propagator, bulk_to_boundary,
                            corr_coefficients, corr_form, equal_height_form,
                            fourier_multiplier_constant,
                            inverse_identity_residual, position_space_form,
                            propagator_points, smeared_h_plus,
                            spectral_params, splitting_residual)


def test_spectral_bound_enforced():
    with pytest.raises(ValidationError):
        spectral_params(1, -0.25)
    with pytest.raises(ValidationError):
        spectral_params(2, -1.5)


@pytest.mark.parametrize("d,m2", [(1, 6.25), (1, 0.0), (2, 1.25), (2, -0.75)])
def test_spectral_invariants(d, m2):
    p = spectral_params(d, m2)
    assert p.nu == pytest.approx(math.sqrt(d * d + 4 * m2) / 2.0, rel=1e-14)
    assert p.delta_plus + p.delta_minus == pytest.approx(d, rel=1e-14)
    assert p.c == pytest.approx(2 * p.nu, rel=1e-14)
    assert p.delta_plus >= p.delta_minus


@pytest.mark.parametrize("d,m2,branch", [(1, 6.25, "+"), (1, 6.25, "-"),
                                         (2, 1.25, "+"), (2, -0.75, "+")])
def test_propagator_solves_radial_equation(d, m2, branch):
    """u(u+2) G'' + (d+1)(u+1) G' - m2 G = 0 away from the diagonal."""
    p = spectral_params(d, m2)
    for u in (0.3, 1.0, 4.0, 20.0):
        h = 1e-4 * max(u, 1.0)
        us = u + h * np.array([-2, -1, 0, 1, 2])
        g = np.array([bulk_propagator(v, p, branch) for v in us])
        g1 = (g[0] - 8 * g[1] + 8 * g[3] - g[4]) / (12 * h)
        g2 = (-g[0] + 16 * g[1] - 30 * g[2] + 16 * g[3] - g[4]) / (12 * h * h)
        resid = u * (u + 2) * g2 + (d + 1) * (u + 1) * g1 - m2 * g[2]
        assert abs(resid) < 1e-5 * max(abs(m2 * g[2]), abs(g1), 1e-12)


def test_propagator_matches_untransformed_series():
    """Where the original hypergeometric form is regular, both agree."""
    p = spectral_params(1, 6.25)
    for branch in ("+", "-"):
        delta = p.delta(branch)
        for u in (0.5, 2.0, 10.0):
            direct = p.gamma(branch) * (2 * u) ** (-delta) * hyp2f1(
                delta, delta + (1 - p.d) / 2.0, 2 * delta + 1 - p.d, -2.0 / u
            )
            assert bulk_propagator(u, p, branch) == pytest.approx(
                direct, rel=1e-10
            )


def test_propagator_degenerate_closed_form():
    """d=2, delta=1/2 collapses to an elementary expression."""
    p = spectral_params(2, -0.75)  # nu = 1/2, delta_minus = 1/2
    for u in (0.1, 1.0, 7.0):
        # F(1/4, 3/4; 1/2; x^2) = [(1+x)^{-1/2} + (1-x)^{-1/2}] / 2
        x = 1.0 / (1.0 + u)
        elementary = ((1 + x) ** (-0.5) + (1 - x) ** (-0.5)) / 2.0
        expect = p.gamma_minus * (2.0 * (u + 1.0)) ** (-0.5) * elementary
        assert bulk_propagator(u, p, "-") == pytest.approx(expect, rel=1e-12)


def test_propagator_positive_and_decaying_plus_branch():
    p = spectral_params(2, 1.25)
    us = np.geomspace(1e-2, 1e6, 40)
    g = bulk_propagator(us, p, "+")
    assert np.all(g > 0)
    assert np.all(np.diff(g) < 0)
    # large-u falloff with exponent delta_plus
    slope = np.log(g[-1] / g[-2]) / np.log(us[-1] / us[-2])
    assert slope == pytest.approx(-p.delta_plus, rel=1e-4)


def test_on_diagonal_rejected():
    p = spectral_params(1, 1.0)
    with pytest.raises(ValidationError):
        bulk_propagator(0.0, p)
    with pytest.raises(ValidationError):
        splitting_residual(BulkPoint(1.0, (0.0,)), BulkPoint(1.0, (0.0,)), p)


@pytest.mark.parametrize("d,m2", [(1, 6.25), (1, 2.0), (2, 1.25), (2, 3.0)])
def test_scaled_propagator_approaches_boundary_kernel(d, m2):
    """z'^{-Delta} G(z,x; z',x') -> boundary kernel as z' -> 0."""
    p = spectral_params(d, m2)
    z, x = 0.8, (0.3,) + (0.0,) * (d - 1)
    xp = (1.1,) + (0.0,) * (d - 1)
    zp = 1e-4
    u = ((z - zp) ** 2 + (x[0] - xp[0]) ** 2) / (2 * z * zp)
    scaled = zp ** (-p.delta_plus) * bulk_propagator(u, p, "+")
    limit = bulk_to_boundary(z, x, xp, p, "+")
    assert abs(scaled / limit - 1.0) < 1e-3


def test_boundary_kernel_approaches_twopoint_weight():
    """z^{-Delta} H(z, x; x') -> gamma |x-x'|^{-2 Delta} as z -> 0."""
    p = spectral_params(1, 2.0)
    x, xp = 0.4, 1.6
    z = 1e-5
    scaled = z ** (-p.delta_plus) * bulk_to_boundary(z, (x,), (xp,), p, "+")
    limit = p.gamma_plus * abs(x - xp) ** (-2 * p.delta_plus)
    assert abs(scaled / limit - 1.0) < 1e-6


@pytest.mark.parametrize("d", [1, 2])
def test_smeared_kernel_matches_direct_quadrature(d):
    p = spectral_params(d, 2.0 if d == 1 else 1.25)
    f = BoundaryTestFunction.single((0.4,) + (0.0,) * (d - 1), 0.35, 1.3)
    z = 0.6
    x = (0.1,) + (0.0,) * (d - 1)
    if d == 1:
        direct, _ = integrate.quad(
            lambda y: bulk_to_boundary(z, x, (y,), p, "+") * f(y),
            -6, 6, limit=300,
        )
    else:
        direct, _ = integrate.dblquad(
            lambda y2, y1: bulk_to_boundary(z, x, (y1, y2), p, "+")
            * f(np.array([y1, y2])),
            -4, 4.8, -4.4, 4.4,
        )
    val = smeared_h_plus(np.array([z]), np.array([x]), f, p)[0]
    assert val == pytest.approx(direct, rel=1e-6)


def test_smeared_kernel_near_boundary_scaling():
    """Over a source, Hf ~ const * z^{d - Delta_+} * f(x)."""
    p = spectral_params(1, 6.25)
    f = BoundaryTestFunction.single(0.0, 0.4, 1.0)
    z1, z2 = 2e-3, 1e-3
    v1 = smeared_h_plus(np.array([z1]), np.array([0.0]), f, p)[0]
    v2 = smeared_h_plus(np.array([z2]), np.array([0.0]), f, p)[0]
    slope = math.log(v1 / v2) / math.log(z1 / z2)
    assert slope == pytest.approx(p.d - p.delta_plus, abs=2e-3)


def test_position_and_fourier_routes_agree_plus_branch():
    p = spectral_params(1, 2.0)  # nu = 3/2, away from the calibration pair
    f = BoundaryTestFunction.single(0.0, 0.1, 1.0)
    g = BoundaryTestFunction.single(2.5, 0.15, 0.8)
    assert boundary_form(f, g, p, "+") == pytest.approx(
        position_space_form(f, g, p, "+"), rel=1e-8
    )


def test_minus_branch_position_fallback():
    p = spectral_params(1, 0.39)  # 2 nu = 1.6 > d = 1: no Fourier weight
    f = BoundaryTestFunction.single(0.0, 0.1, 1.0)
    g = BoundaryTestFunction.single(2.0, 0.1, 1.0)
    assert boundary_form(f, g, p, "-") == pytest.approx(
        position_space_form(f, g, p, "-"), rel=1e-12
    )


def test_nonintegrable_overlapping_pair_rejected():
    p = spectral_params(1, 2.0)
    f = BoundaryTestFunction.single(0.0, 0.3, 1.0)
    with pytest.raises(ValidationError):
        position_space_form(f, f, p, "+")


@pytest.mark.parametrize("d,m2", [(1, -0.2), (2, -0.75), (2, -0.19)])
def test_multiplier_inverse_identity(d, m2):
    if 2 * spectral_params(d, m2).nu >= d:
        pytest.skip("minus branch has no Fourier weight here")
    p = spectral_params(d, m2)
    resid = inverse_identity_residual(p, np.geomspace(0.1, 10.0, 25))
    assert resid < 1e-6


def test_multiplier_constant_cached_and_consistent():
    a = fourier_multiplier_constant(2, -0.75, "-")
    b = fourier_multiplier_constant(2, -0.75, "-")
    assert a == b
    with pytest.raises(ValidationError):
        fourier_multiplier_constant(1, 2.0, "-")


def test_covariance_splitting_small_residual():
    p = spectral_params(2, -0.75)
    pairs = [
        (BulkPoint(0.7, (-0.3, 0.0)), BulkPoint(1.4, (0.8, 0.0))),
        (BulkPoint(0.5, (0.0, 0.5)), BulkPoint(0.9, (-0.6, 0.2))),
    ]
    for a, b in pairs:
        scale = abs(propagator_points(a, b, p, "-"))
        assert abs(splitting_residual(a, b, p)) < 1e-6 * scale


def test_corr_coefficients_match_moment_oracle():
    """a_j reduces to a closed-form Bessel moment ratio."""
    # int_0^inf J_nu(w)^2 w^{-2j-1} dw =
    #   Gamma(2j+1) Gamma(nu - j) / (2^{2j+1} Gamma(j+1)^2 Gamma(nu+j+1))
    for d, m2 in ((1, 0.0), (1, 6.25)):
        p = spectral_params(d, m2)
        co = corr_coefficients(p)
        inner = math.pi * 4.0**p.nu * Gamma(p.nu + 0.5) ** 2 / 4.0
        for j, aj in enumerate(co.a):
            moment = (
                Gamma(2 * j + 1) * Gamma(p.nu - j)
                / (2 ** (2 * j + 1) * Gamma(j + 1) ** 2 * Gamma(p.nu + j + 1))
            )
            assert aj == pytest.approx(inner * moment, rel=1e-6, abs=1e-7)


def test_corr_leading_coefficient_half_integer():
    p = spectral_params(1, 0.0)  # nu = 1/2
    co = corr_coefficients(p)
    assert len(co.a) == 1
    assert co.a[0] == pytest.approx(math.pi / 2.0, abs=1e-6)


def test_integer_nu_rejected():
    with pytest.raises(ValidationError):
        corr_coefficients(spectral_params(1, 0.75))  # nu = 1


def test_equal_height_form_minus_correction_converges():
    p = spectral_params(1, 0.0)
    f = BoundaryTestFunction.single(0.0, 0.5, 1.0)
    co = corr_coefficients(p)
    lim = boundary_form(f, f, p, "+")
    gaps = []
    for z in (1e-2, 1e-3):
        gaps.append(abs(
            (equal_height_form(z, f, p) - corr_form(z, f, co)) / lim - 1.0
        ))
    assert gaps[1] < gaps[0]
    assert gaps[1] < 0.01


def test_corr_form_positive_divergence():
    p = spectral_params(1, 0.0)
    f = BoundaryTestFunction.single(0.0, 0.5, 1.0)
    co = corr_coefficients(p)
    assert corr_form(1e-3, f, co) > corr_form(1e-2, f, co) > 0
