"""Half-space model of hyperbolic space.

Points are (z, x) with z > 0 and x in R^d.  The metric is
(dz^2 + dx^2)/z^2, the volume form z^{-d-1} dz dx, and the natural
distance variable between two points is the chordal quantity

    u = ((z - z')^2 + |x - x'|^2) / (2 z z').

Isometries are represented by words in three boundary generators
(translation, dilation, inversion) extended to the half space; this
generator set is enough to produce the full conformal group on the
boundary.  Maps are kept as composition lists so the inversion pole at
the origin stays visible instead of being hidden in a matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class BulkPoint:
    """A point (z, x) of the half space, z > 0."""

    z: float
    x: tuple[float, ...]

    def __post_init__(self):
        if not self.z > 0:
            raise ValidationError(f"bulk point needs z > 0, got z={self.z}")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))

    @property
    def d(self) -> int:
        return len(self.x)


def chordal_u(p: BulkPoint, q: BulkPoint) -> float:
    """Chordal distance variable u; symmetric, zero iff p == q."""
    if p.d != q.d:
        raise ValidationError("points live in different dimensions")
    dx = np.subtract(p.x, q.x)
    return ((p.z - q.z) ** 2 + float(dx @ dx)) / (2.0 * p.z * q.z)


# --- conformal maps -------------------------------------------------------

@dataclass(frozen=True)
class _Translation:
    a: tuple[float, ...]


@dataclass(frozen=True)
class _Dilation:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("dilation scale must be positive")


@dataclass(frozen=True)
class _Inversion:
    pass


@dataclass(frozen=True)
class ConformalMap:
    """A word in translation/dilation/inversion generators.

    ``factors`` apply right-to-left, as in function composition:
    ``ConformalMap([g, h])`` acts as g(h(x)).
    """

    factors: tuple = field(default_factory=tuple)

    @staticmethod
    def translation(a) -> "ConformalMap":
        return ConformalMap((_Translation(tuple(float(v) for v in a)),))

    @staticmethod
    def dilation(lam: float) -> "ConformalMap":
        return ConformalMap((_Dilation(float(lam)),))

    @staticmethod
    def inversion() -> "ConformalMap":
        return ConformalMap((_Inversion(),))

    def __matmul__(self, other: "ConformalMap") -> "ConformalMap":
        return ConformalMap(self.factors + other.factors)

    def inverse(self) -> "ConformalMap":
        inv = []
        for g in reversed(self.factors):
            if isinstance(g, _Translation):
                inv.append(_Translation(tuple(-v for v in g.a)))
            elif isinstance(g, _Dilation):
                inv.append(_Dilation(1.0 / g.lam))
            else:
                inv.append(_Inversion())
        return ConformalMap(tuple(inv))


def _apply_factor_bulk(g, z: float, x: np.ndarray):
    if isinstance(g, _Translation):
        return z, x + np.asarray(g.a)
    if isinstance(g, _Dilation):
        return g.lam * z, g.lam * x
    # inversion: (z, x) -> (z, x)/(z^2 + |x|^2)
    n2 = z * z + float(x @ x)
    return z / n2, x / n2


def apply_map_bulk(m: ConformalMap, p: BulkPoint) -> BulkPoint:
    """Act on a bulk point; chordal_u is invariant under every map."""
    z, x = p.z, np.asarray(p.x, dtype=float)
    for g in reversed(m.factors):
        z, x = _apply_factor_bulk(g, z, x)
    return BulkPoint(z, tuple(x))


def apply_map_boundary(m: ConformalMap, x) -> tuple[float, ...]:
    """The z -> 0 restriction of apply_map_bulk; inversion has a pole at 0."""
    y = np.asarray(x, dtype=float)
    for g in reversed(m.factors):
        if isinstance(g, _Translation):
            y = y + np.asarray(g.a)
        elif isinstance(g, _Dilation):
            y = g.lam * y
        else:
            n2 = float(y @ y)
            if n2 == 0.0:
                raise ValidationError("inversion pole: boundary point at the origin")
            y = y / n2
    return tuple(y)


def boundary_jacobian_det(m: ConformalMap, x) -> float:
    """det of the boundary Jacobian of m at x (signed magnitude |det|).

    Translations have unit Jacobian, a dilation by lam contributes lam^d
    and an inversion at y contributes |y|^{-2d}.
    """
    y = np.asarray(x, dtype=float)
    d = y.size
    det = 1.0
    for g in reversed(m.factors):
        if isinstance(g, _Translation):
            y = y + np.asarray(g.a)
        elif isinstance(g, _Dilation):
            det *= g.lam ** d
            y = g.lam * y
        else:
            n2 = float(y @ y)
            if n2 == 0.0:
                raise ValidationError("inversion pole: singular Jacobian at the origin")
            det *= n2 ** (-d)
            y = y / n2
    return abs(det)


def conformal_factor(m: ConformalMap, x, params) -> float:
    """|det d m(x)/dx|^{-Delta_+/d}; cocycle under composition."""
    d = len(np.atleast_1d(x))
    det = boundary_jacobian_det(m, x)
    return det ** (-params.delta_plus / d)


def volume_weight(z: float, d: int) -> float:
    """Density z^{-d-1} of the invariant volume form."""
    if not z > 0:
        raise ValidationError("volume weight needs z > 0")
    return z ** (-d - 1)
