"""Continuum propagators on the hyperbolic half space and their boundary limits.

The family is parameterized by the boundary dimension d and the mass
parameter m2 > -d^2/4.  The two bulk Green's functions of -Laplace + m2
behave like z^{delta_plus} and z^{delta_minus} towards z = 0; their
scaling limits give the bulk-to-boundary kernel (a generalized Poisson
kernel) and the boundary two-point kernels with weights |x-x'|^{-2 delta}.

Boundary bilinear forms are evaluated in Fourier space, where the
kernels become power-law multipliers C |k|^{\pm 2 nu}.  The constants C
are not taken from Gamma-function identities: they are calibrated once
per parameter set by matching the position-space kernel on a pair of
well-separated narrow bumps, then frozen.  The operator identity
"inverse of the minus form = -c^2 times the plus form" then serves as a
joint consistency check of the calibration and of the gamma_\pm, c
constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma as Gamma
from scipy.special import hyp2f1, i0e, j0, jv, kv

from .bumps import BoundaryTestFunction, fourier_moment, weighted_form
from .errors import NumericalError, ValidationError
from .geometry import BulkPoint, chordal_u

__all__ = [
    "SpectralParams",
    "spectral_params",
    "bulk_propagator",
    "propagator_points",
    "bulk_to_boundary",
    "smeared_h_plus",
    "boundary_form",
    "position_space_form",
    "fourier_multiplier_constant",
    "inverse_identity_residual",
    "QuadConfig",
    "splitting_residual",
    "boundary_double_integral",
    "CorrCoefficients",
    "corr_coefficients",
    "corr_form",
    "equal_height_form",
]


@dataclass(frozen=True)
class SpectralParams:
    d: int
    m2: float
    nu: float
    delta_plus: float
    delta_minus: float
    gamma_plus: float
    gamma_minus: float
    c: float

    def delta(self, branch: str) -> float:
        return self.delta_plus if branch == "+" else self.delta_minus

    def gamma(self, branch: str) -> float:
        g = self.gamma_plus if branch == "+" else self.gamma_minus
        if math.isnan(g):
            raise ValidationError(
                f"gamma coefficient for branch {branch} sits on a Gamma pole "
                f"(d={self.d}, nu={self.nu})"
            )
        return g


def _gamma_coeff(delta: float, d: int) -> float:
    """Gamma(delta) / (2 pi^{d/2} Gamma(delta + 1 - d/2)); 0.0 at denominator poles."""
    arg = delta + 1 - d / 2.0
    if arg <= 0 and arg == round(arg):
        return 0.0
    if delta <= 0 and delta == round(delta):
        return float("nan")  # pole; rejected only if this branch is used
    return Gamma(delta) / (2 * np.pi ** (d / 2.0) * Gamma(arg))


def spectral_params(d: int, m2: float) -> SpectralParams:
    """All derived constants of the kernel family for given (d, m2)."""
    if d < 1:
        raise ValidationError("boundary dimension must be >= 1")
    if not m2 > -d * d / 4.0:
        raise ValidationError(
            f"m2={m2} violates the spectral bound m2 > -d^2/4 = {-d * d / 4.0}"
        )
    nu = math.sqrt(d * d + 4.0 * m2) / 2.0
    dp, dm = d / 2.0 + nu, d / 2.0 - nu
    return SpectralParams(
        d=d,
        m2=float(m2),
        nu=nu,
        delta_plus=dp,
        delta_minus=dm,
        gamma_plus=_gamma_coeff(dp, d),
        gamma_minus=_gamma_coeff(dm, d),
        c=2.0 * nu,
    )


# --- bulk-to-bulk ---------------------------------------------------------

def bulk_propagator(u, params: SpectralParams, branch: str = "+"):
    """Green's function value as a function of the chordal variable u > 0.

    gamma (2u)^{-Delta} F(Delta, Delta + (1-d)/2; 2 Delta + 1 - d; -2/u),
    evaluated through the quadratic transformation

        gamma (2(u+1))^{-Delta} F(Delta/2, (Delta+1)/2; Delta + 1 - d/2; (1+u)^{-2}),

    whose argument lies in (0, 1) for every u > 0 and whose third
    parameter avoids the 2 Delta + 1 - d = 0 degeneracy.
    """
    uu = np.asarray(u, dtype=float)
    if np.any(uu <= 0):
        raise ValidationError("on-diagonal singularity: need u > 0")
    delta = params.delta(branch)
    d = params.d
    xi2 = (1.0 + uu) ** (-2)
    val = params.gamma(branch) * (2.0 * (uu + 1.0)) ** (-delta) * hyp2f1(
        delta / 2.0, (delta + 1.0) / 2.0, delta + 1.0 - d / 2.0, xi2
    )
    if not np.all(np.isfinite(val)):
        raise NumericalError(
            f"hypergeometric evaluation failed for branch {branch} at u={uu}"
        )
    return val if np.ndim(u) else float(val)


def propagator_points(p: BulkPoint, q: BulkPoint, params: SpectralParams,
                      branch: str = "+") -> float:
    return bulk_propagator(chordal_u(p, q), params, branch)


# --- bulk-to-boundary -----------------------------------------------------

def bulk_to_boundary(z, x, xp, params: SpectralParams, branch: str = "+"):
    """Closed-form kernel gamma (z / (z^2 + |x - x'|^2))^{Delta}."""
    z = np.asarray(z, dtype=float)
    dx = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
    r2 = dx * dx if dx.ndim == 0 else np.einsum("...i,...i->...", dx, dx)
    delta = params.delta(branch)
    return params.gamma(branch) * (z / (z * z + r2)) ** delta


def _poisson_hat(k, z, params: SpectralParams):
    """Symmetric-convention Fourier transform of x -> (z^2 + |x|^2)^{-Delta_+}.

    2^{1-d/2}/Gamma(Delta) (k/(2z))^{nu} K_nu(k z); finite limit at k = 0.
    """
    d, nu, delta = params.d, params.nu, params.delta_plus
    k = np.asarray(k, dtype=float)
    out = np.empty(np.broadcast_shapes(k.shape, np.shape(z)), dtype=float)
    kz = k * z
    small = kz < 1e-12
    pref = 2 ** (1 - d / 2.0) / Gamma(delta)
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = pref * (k / (2.0 * np.asarray(z))) ** nu * kv(nu, kz)
    # k -> 0 limit: K_nu(kz) ~ Gamma(nu)/2 (2/(kz))^nu
    lim = pref * Gamma(nu) / 2.0 * np.asarray(z, dtype=float) ** (-2 * nu)
    out[...] = np.where(small, lim, vals)
    return out


def smeared_h_plus(z, x, f: BoundaryTestFunction, params: SpectralParams,
                   nk: int = 600) -> np.ndarray:
    """(H f)(z, x): the bulk-to-boundary kernel smeared with a bump sum.

    Evaluated through the Fourier side, where the Poisson-type kernel has
    a Bessel-K transform and the bump transform is Gaussian; the k
    integral is done with a fixed Gauss-Legendre rule, vectorized over
    all requested bulk points.  Supports d = 1 and d = 2.
    """
    if f.d != params.d:
        raise ValidationError("test function dimension does not match params")
    d = params.d
    if d not in (1, 2):
        raise ValidationError("smeared kernel implemented for d in {1, 2}")
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    xx = np.asarray(x, dtype=float)
    if d == 1:
        xx = np.atleast_1d(xx)
        if xx.ndim == 1:
            xx = xx[:, None]
    else:
        xx = np.atleast_2d(xx)
    if np.any(zz <= 0):
        raise ValidationError("need z > 0")

    wmin = min(b.width for b in f.bumps)
    kmax = 14.0 / wmin
    nodes, weights = np.polynomial.legendre.leggauss(nk)
    k = 0.5 * kmax * (nodes + 1.0)
    wk = 0.5 * kmax * weights

    # (npts, nk) kernel transform
    khat = _poisson_hat(k[None, :], zz[:, None], params)
    acc = np.zeros((zz.size, k.size))
    for b in f.bumps:
        disp = xx - np.asarray(b.center)
        rho = np.sqrt(np.einsum("...i,...i->...", disp, disp))
        amp = b.amplitude * b.width**d * np.exp(-b.width**2 * k**2 / 2.0)
        if d == 1:
            ang = np.cos(k[None, :] * rho[:, None])
            acc += (2.0 * amp)[None, :] * ang
        else:
            ang = j0(k[None, :] * rho[:, None])
            acc += (2.0 * np.pi * amp * k)[None, :] * ang
    conv = (khat * acc) @ wk
    out = params.gamma_plus * zz**params.delta_plus * conv
    return out if np.ndim(z) or np.ndim(x) > 1 else float(out[0])


# --- boundary quadratic forms --------------------------------------------

def _pair_correlation_terms(f: BoundaryTestFunction, g: BoundaryTestFunction):
    """For each bump pair: (amplitude, separation m, combined width W)."""
    for bf in f.bumps:
        for bg in g.bumps:
            W2 = bf.width**2 + bg.width**2
            m = float(np.linalg.norm(np.subtract(bf.center, bg.center)))
            amp = (
                bf.amplitude
                * bg.amplitude
                * (2 * np.pi * bf.width**2 * bg.width**2 / W2) ** (f.d / 2.0)
            )
            yield amp, m, math.sqrt(W2)


def position_space_form(f: BoundaryTestFunction, g: BoundaryTestFunction,
                        params: SpectralParams, branch: str) -> float:
    """Direct quadrature of the position-space kernel gamma |x-x'|^{-2 Delta}.

    Works through the pair-correlation reduction: one radial integral per
    bump pair.  For the non-locally-integrable branch the pair must be
    effectively disjoint (separation > 8 combined widths) so the
    singularity at zero separation carries no mass.
    """
    d = params.d
    if d not in (1, 2):
        raise ValidationError("position-space form implemented for d in {1, 2}")
    delta = params.delta(branch)
    gam = params.gamma(branch)
    p = -2.0 * delta  # kernel exponent
    total = 0.0
    for amp, m, W in _pair_correlation_terms(f, g):
        if p + d <= 0:  # not locally integrable at coincidence
            if m < 8.0 * W:
                raise ValidationError(
                    "kernel not locally integrable: bump pair must be separated "
                    f"by > 8 combined widths (got {m:.3g} vs W={W:.3g})"
                )
            lo, hi = m - 8.0 * W, m + 8.0 * W
        else:
            lo, hi = 0.0, m + 10.0 * W

        if d == 1:
            # fold the signed-separation correlation onto s >= 0
            def integrand(s, m=m, W=W):
                gauss = np.exp(-((s - m) ** 2) / (2 * W * W)) + np.exp(
                    -((s + m) ** 2) / (2 * W * W)
                )
                return s**p * gauss
        else:
            def integrand(s, m=m, W=W):
                # angular average of the off-center Gaussian; i0e keeps the
                # exponentials in range
                gauss = np.exp(-((s - m) ** 2) / (2 * W * W)) * i0e(s * m / (W * W))
                return 2 * np.pi * s ** (p + 1) * gauss
        marks = [t for t in (m - W, m, m + W) if lo < t < hi]
        val, err = integrate.quad(
            integrand, lo, hi, points=marks or None, limit=400,
            epsabs=1e-14, epsrel=1e-11,
        )
        if abs(err) > 1e-7 * abs(val) + 1e-13:
            raise NumericalError("position-space kernel quadrature did not converge")
        total += amp * gam * val
    return total


def _calibration_pair(d: int):
    w = 0.05
    f = BoundaryTestFunction.single((0.0,) * d, w, 1.0)
    g = BoundaryTestFunction.single((1.0,) + (0.0,) * (d - 1), w, 1.0)
    return f, g


@lru_cache(maxsize=None)
def fourier_multiplier_constant(d: int, m2: float, branch: str) -> float:
    """Calibrated constant C with form(f, g) = C int |k|^{±2nu} f̂ ĝ* dk.

    Fixed once per parameter set by matching the position-space kernel on
    a disjoint narrow-bump pair.
    """
    params = spectral_params(d, m2)
    s = 2.0 * params.nu if branch == "+" else -2.0 * params.nu
    if branch == "-" and not 2 * params.nu < d:
        raise ValidationError("branch '-' needs 2 nu < d for a Fourier weight")
    f, g = _calibration_pair(d)
    reference = position_space_form(f, g, params, branch)
    base = weighted_form(f, g, s)
    if base == 0.0:
        raise NumericalError("degenerate calibration pair")
    return reference / base


def boundary_form(f: BoundaryTestFunction, g: BoundaryTestFunction,
                  params: SpectralParams, branch: str = "+") -> float:
    """Boundary bilinear form alpha_branch(f, g) via the calibrated multiplier."""
    if f.d != params.d or g.d != params.d:
        raise ValidationError("test function dimension does not match params")
    if branch == "-" and not 2 * params.nu < params.d:
        # no integrable Fourier weight, but the position kernel grows only
        # polynomially and the direct quadrature converges absolutely
        return position_space_form(f, g, params, branch)
    s = 2.0 * params.nu if branch == "+" else -2.0 * params.nu
    C = fourier_multiplier_constant(params.d, params.m2, branch)
    return C * weighted_form(f, g, s)


def inverse_identity_residual(params: SpectralParams, kgrid) -> float:
    """max_k | M_-(k) * (-c^2) * M_+(k) - 1 | over the supplied k grid."""
    kk = np.asarray(kgrid, dtype=float)
    if np.any(kk <= 0):
        raise ValidationError("k grid must be positive")
    cm = fourier_multiplier_constant(params.d, params.m2, "-")
    cp = fourier_multiplier_constant(params.d, params.m2, "+")
    nu, c = params.nu, params.c
    prod = (cm * kk ** (-2 * nu)) * (-(c * c)) * (cp * kk ** (2 * nu))
    return float(np.max(np.abs(prod - 1.0)))


# --- covariance splitting -------------------------------------------------

@dataclass(frozen=True)
class QuadConfig:
    epsabs: float = 1e-12
    epsrel: float = 1e-10
    limit: int = 400


def boundary_double_integral(p: BulkPoint, q: BulkPoint, params: SpectralParams,
                             quad: QuadConfig = QuadConfig()) -> tuple[float, float]:
    """int int H(p, y) c^2 alpha_-(y, y') H(q, y') dy dy' and its error estimate.

    The double boundary integral collapses to a single radial Fourier
    integral because both smearing kernels and the minus-branch weight
    are diagonal in k.
    """
    d = params.d
    if not 2 * params.nu < d:
        raise ValidationError("splitting formula needs 2 nu < d")
    if d not in (1, 2):
        raise ValidationError("implemented for d in {1, 2}")
    cm = fourier_multiplier_constant(d, params.m2, "-")
    b = float(np.linalg.norm(np.subtract(p.x, q.x)))
    pref = (
        params.c**2
        * cm
        * params.gamma_plus**2
        * (p.z * q.z) ** params.delta_plus
    )
    nu = params.nu

    def radial(k):
        hats = _poisson_hat(np.asarray([k, k]), np.asarray([p.z, q.z]), params)
        core = k ** (-2 * nu) * hats[0] * hats[1]
        if d == 1:
            return 2.0 * core * math.cos(k * b)
        return 2.0 * np.pi * k * core * j0(k * b)

    kcut = 60.0 / (p.z + q.z)
    val, err = integrate.quad(
        radial, 0.0, kcut, epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit
    )
    tail, terr = integrate.quad(
        radial, kcut, np.inf, epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit
    )
    return pref * (val + tail), abs(pref) * (err + terr)


def splitting_residual(p: BulkPoint, q: BulkPoint, params: SpectralParams,
                       quad: QuadConfig = QuadConfig()) -> float:
    """G_-(p,q) - G_+(p,q) - (boundary double integral); exact value is 0."""
    if p == q:
        raise ValidationError("on-diagonal points are singular")
    gm = propagator_points(p, q, params, "-")
    gp = propagator_points(p, q, params, "+")
    ti, _ = boundary_double_integral(p, q, params, quad)
    return gm - gp - ti


# --- boundary correction term --------------------------------------------

@dataclass(frozen=True)
class CorrCoefficients:
    nu: float
    a: tuple[float, ...]
    overall_prefactor: float


def _bessel_moment(nu: float, j: int, omega_split: float = 500.0) -> float:
    """int_0^infty J_nu(w)^2 w^{-2j-1} dw, adaptive head + asymptotic tail."""
    s = 2 * j + 1

    head, err1 = integrate.quad(
        lambda w: jv(nu, w) ** 2 * w ** (-s), 0.0, 5.0, limit=200
    )
    mid, err2 = integrate.quad(
        lambda w: jv(nu, w) ** 2 * w ** (-s), 5.0, omega_split, limit=4000
    )
    # tail: J_nu(w)^2 ~ (1/pi w)[1 + sin(2w - nu pi)] - (4 nu^2 - 1)/(4 pi w^2) cos(2w - nu pi)
    O = omega_split
    phi = nu * np.pi
    mean = O ** (-s) / (np.pi * s)
    # two integration-by-parts terms of the oscillatory pieces
    osc = (
        O ** (-s - 1) * math.cos(2 * O - phi) / 2.0
        - (s + 1) * O ** (-s - 2) * math.sin(2 * O - phi) / 4.0
    ) / np.pi
    corr = -(4 * nu * nu - 1) / (4 * np.pi) * (
        -(O ** (-s - 2)) * math.sin(2 * O - phi) / 2.0
    )
    tail = mean + osc + corr
    if err1 + err2 > 1e-7 * max(abs(head + mid + tail), 1.0):
        raise NumericalError(
            f"outer oscillatory integral did not converge (nu={nu}, j={j})"
        )
    return head + mid + tail


def corr_coefficients(params: SpectralParams) -> CorrCoefficients:
    """Coefficients a_j, j = 0..floor(nu), of the short-distance correction.

    The inner cosine integral over the unit interval is rewritten in its
    Bessel closed form, leaving one oscillatory outer integral that is
    split at a matching point with an analytic asymptotic tail.
    """
    nu = params.nu
    if nu == int(nu):
        raise ValidationError("integer nu is degenerate (logarithmic term)")
    jmax = int(math.floor(nu))
    inner_pref = np.pi * 4.0**nu * Gamma(nu + 0.5) ** 2 / 4.0
    a = tuple(inner_pref * _bessel_moment(nu, j) for j in range(jmax + 1))
    if any(not (v > 0 and math.isfinite(v)) for v in a):
        raise NumericalError("correction coefficients must be finite and positive")
    # in the symmetric Fourier convention this prefactor cancels the
    # Bessel-closed-form constant exactly, so a_j * overall reduces to the
    # moment int J_nu^2 w^{-2j-1} dw; term by term this matches the
    # divergent part of z^{-2nu} I_nu(kz) K_nu(kz)
    overall = (2 ** (1 - nu) / (math.sqrt(np.pi) * Gamma(nu + 0.5))) ** 2
    return CorrCoefficients(nu=nu, a=a, overall_prefactor=overall)


def corr_form(z: float, f: BoundaryTestFunction, coeffs: CorrCoefficients) -> float:
    """(Corr(z) f, f): the divergent quadratic correction at height z."""
    if not z > 0:
        raise ValidationError("need z > 0")
    nu = coeffs.nu
    total = 0.0
    for j, aj in enumerate(coeffs.a):
        total += z ** (-2 * (nu - j)) * (-1.0) ** j * aj * fourier_moment(f, 2 * j)
    return coeffs.overall_prefactor * total


def equal_height_form(z: float, f: BoundaryTestFunction,
                      params: SpectralParams) -> float:
    """z^{-2 Delta_+} int int G_+(z, x; z, y) f(x) f(y) dx dy (d = 1 only).

    Reduced to one integral over the separation s against the closed-form
    autocorrelation of the bump sum; the logarithmic on-diagonal
    singularity of the d = 1 kernel is integrable.
    """
    if params.d != 1:
        raise ValidationError("equal-height form implemented for d = 1")
    if not z > 0:
        raise ValidationError("need z > 0")

    terms = list(_pair_correlation_terms(f, f))
    span = max(m + 10.0 * W for _, m, W in terms)

    def integrand(s):
        u = s * s / (2.0 * z * z)
        if u <= 0:
            return 0.0
        kern = bulk_propagator(u, params, "+")
        # autocorrelation of f: pairs (i, j) and (j, i) both map onto +|m|,
        # which is equivalent under the even kernel and symmetric range
        rho = sum(
            amp * math.exp(-((s - m) ** 2) / (2 * W * W)) for amp, m, W in terms
        )
        return kern * rho

    val, err = integrate.quad(
        integrand, -span, span, points=[0.0], limit=800, epsabs=1e-13, epsrel=1e-10
    )
    if err > 1e-8 * max(abs(val), 1e-30):
        raise NumericalError("equal-height quadrature did not converge")
    return z ** (-2 * params.delta_plus) * val
