"""Boundary test functions: finite sums of Gaussian bumps on R^d.

Restricting sources to Gaussian bumps keeps every Fourier-side quantity
in closed form: the transform of a single bump is again a Gaussian, and
radial integrals of |k|^s against Gaussian pairs reduce to a confluent
hypergeometric evaluation (``radial_gauss_fourier``).  That removes one
quadrature layer from all boundary quadratic forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, hyp1f1

from .errors import ValidationError


@dataclass(frozen=True)
class GaussianBump:
    center: tuple[float, ...]
    width: float
    amplitude: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValidationError("bump width must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))


@dataclass(frozen=True)
class BoundaryTestFunction:
    """f(x) = sum_b amplitude_b * exp(-|x - center_b|^2 / (2 width_b^2))."""

    bumps: tuple[GaussianBump, ...]

    def __post_init__(self):
        if len(self.bumps) == 0:
            raise ValidationError("need at least one bump")
        d = len(self.bumps[0].center)
        if any(len(b.center) != d for b in self.bumps):
            raise ValidationError("all bumps must share one dimension")

    @staticmethod
    def single(center, width: float, amplitude: float) -> "BoundaryTestFunction":
        return BoundaryTestFunction((GaussianBump(tuple(np.atleast_1d(center)), width, amplitude),))

    @property
    def d(self) -> int:
        return len(self.bumps[0].center)

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points x of shape (..., d) (or scalar-like for d=1)."""
        pts = np.asarray(x, dtype=float)
        if self.d == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        out = np.zeros(pts.shape[:-1])
        for b in self.bumps:
            dx = pts - np.asarray(b.center)
            out += b.amplitude * np.exp(-np.einsum("...i,...i->...", dx, dx) / (2 * b.width**2))
        return out

    def __add__(self, other: "BoundaryTestFunction") -> "BoundaryTestFunction":
        if other.d != self.d:
            raise ValidationError("dimension mismatch in bump sum")
        return BoundaryTestFunction(self.bumps + other.bumps)

    def __rmul__(self, s: float) -> "BoundaryTestFunction":
        return BoundaryTestFunction(
            tuple(GaussianBump(b.center, b.width, s * b.amplitude) for b in self.bumps)
        )

    def reflect(self) -> "BoundaryTestFunction":
        """Flip the sign of the first coordinate of every bump center."""
        return BoundaryTestFunction(
            tuple(
                GaussianBump((-b.center[0],) + b.center[1:], b.width, b.amplitude)
                for b in self.bumps
            )
        )

    def translate(self, a) -> "BoundaryTestFunction":
        a = tuple(np.atleast_1d(a))
        return BoundaryTestFunction(
            tuple(
                GaussianBump(tuple(np.add(b.center, a)), b.width, b.amplitude)
                for b in self.bumps
            )
        )

    def dilate(self, lam: float) -> "BoundaryTestFunction":
        """Pullback under x -> x/lam, i.e. f_u(x) = f(x/lam) for u = dilation(lam)."""
        return BoundaryTestFunction(
            tuple(
                GaussianBump(tuple(lam * c for c in b.center), lam * b.width, b.amplitude)
                for b in self.bumps
            )
        )

    def fhat(self, k) -> np.ndarray:
        """Fourier transform (2 pi)^{-d/2} int e^{i k.x} f(x) dx at k of shape (..., d)."""
        kk = np.asarray(k, dtype=float)
        if self.d == 1 and (kk.ndim == 0 or kk.shape[-1] != 1):
            kk = kk[..., None]
        out = np.zeros(kk.shape[:-1], dtype=complex)
        k2 = np.einsum("...i,...i->...", kk, kk)
        for b in self.bumps:
            phase = np.exp(1j * kk @ np.asarray(b.center))
            out += b.amplitude * b.width**self.d * phase * np.exp(-b.width**2 * k2 / 2)
        return out

    def support_radius(self, n_widths: float = 6.0) -> float:
        """Radius of a ball at the origin containing the effective support."""
        return max(
            float(np.linalg.norm(b.center)) + n_widths * b.width for b in self.bumps
        )

    def min_x1(self, n_widths: float = 4.0) -> float:
        """Lower edge of the effective support in the x_1 direction."""
        return min(b.center[0] - n_widths * b.width for b in self.bumps)


def radial_gauss_fourier(d: int, s: float, beta: float, b: float) -> float:
    """int_{R^d} |k|^s exp(-beta |k|^2) exp(i k.b) d^dk for |b| = b.

    Closed form: pi^{d/2} Gamma((s+d)/2) / (Gamma(d/2) beta^{(s+d)/2})
    * 1F1((s+d)/2; d/2; -b^2/(4 beta)).  Requires s + d > 0.
    """
    if s + d <= 0:
        raise ValidationError(f"|k|^{s} weight not integrable at k=0 in d={d}")
    a = (s + d) / 2.0
    pref = np.exp(
        0.5 * d * np.log(np.pi) + gammaln(a) - gammaln(d / 2.0) - a * np.log(beta)
    )
    return float(pref * hyp1f1(a, d / 2.0, -b * b / (4.0 * beta)))


def weighted_form(f: BoundaryTestFunction, g: BoundaryTestFunction, s: float) -> float:
    """int f̂(k) conj(ĝ(k)) |k|^s dk, closed form for bump sums."""
    if f.d != g.d:
        raise ValidationError("dimension mismatch")
    d = f.d
    total = 0.0
    for bf in f.bumps:
        for bg in g.bumps:
            beta = (bf.width**2 + bg.width**2) / 2.0
            b = float(np.linalg.norm(np.subtract(bf.center, bg.center)))
            amp = bf.amplitude * bg.amplitude * (bf.width * bg.width) ** d
            total += amp * radial_gauss_fourier(d, s, beta, b)
    return total


def fourier_moment(f: BoundaryTestFunction, s: float) -> float:
    """int |f̂(k)|^2 |k|^s dk."""
    return weighted_form(f, f, s)


def quartic_integral(f: BoundaryTestFunction) -> float:
    """int f(x)^4 dx, exact via Gaussian product formulas."""
    d = f.d
    total = 0.0
    for b1 in f.bumps:
        for b2 in f.bumps:
            for b3 in f.bumps:
                for b4 in f.bumps:
                    quad = (b1, b2, b3, b4)
                    prec = sum(1.0 / b.width**2 for b in quad)
                    centers = np.array([b.center for b in quad])
                    weights = np.array([1.0 / b.width**2 for b in quad])
                    mu = weights @ centers / prec
                    # exponent at completion of the square
                    expo = -0.5 * (
                        float(weights @ np.einsum("ij,ij->i", centers, centers))
                        - prec * float(mu @ mu)
                    )
                    amp = np.prod([b.amplitude for b in quad])
                    total += amp * np.exp(expo) * (2 * np.pi / prec) ** (d / 2.0)
    return total
