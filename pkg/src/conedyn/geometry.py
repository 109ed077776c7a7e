"""The double-cone surface: embedding, constraint residual, and measure weight.

A circular double cone with half-opening angle ``alpha`` is parameterized by
the signed meridian coordinate ``l`` (arc length from the apex, negative on
the lower nappe) and the azimuthal angle ``phi``.  The embedding into R^3 is

    x1 = l sin(alpha) cos(phi)
    x2 = l sin(alpha) sin(phi)
    x3 = l cos(alpha)

so points satisfy x1^2 + x2^2 - tan^2(alpha) x3^2 = 0.  The induced surface
element is proportional to |l| dl dphi; ``measure_weight`` is the |l| factor
every inner product in the quantum modules uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ConeGeometry:
    """Half-opening angle of the cone and cached trigonometric constants.

    ``alpha`` must lie strictly inside (0, pi/2): alpha -> pi/2 flattens the
    cone into a plane and alpha -> 0 degenerates it into a line.
    """

    alpha: float
    sin_alpha: float = field(init=False)
    tan_alpha: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5 * math.pi):
            raise DomainError(f"alpha must lie in (0, pi/2), got {self.alpha!r}")
        object.__setattr__(self, "sin_alpha", math.sin(self.alpha))
        object.__setattr__(self, "tan_alpha", math.tan(self.alpha))

    @property
    def cos_alpha(self) -> float:
        return math.cos(self.alpha)


@dataclass(frozen=True)
class EmbeddingPoint:
    """Cartesian coordinates of a point on (or off) the cone surface."""

    x1: float
    x2: float
    x3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])


def embed(l, phi, geom: ConeGeometry) -> EmbeddingPoint:
    """Map surface coordinates (l, phi) to a Cartesian point.

    ``l < 0`` lands on the lower nappe.  Scalar or array arguments are
    accepted; arrays are broadcast into the point's components.
    """
    l = np.asarray(l, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(phi))):
        raise DomainError("embed requires finite l and phi")
    r = l * geom.sin_alpha
    x1 = r * np.cos(phi)
    x2 = r * np.sin(phi)
    x3 = l * geom.cos_alpha
    if x1.ndim == 0:
        return EmbeddingPoint(float(x1), float(x2), float(x3))
    return EmbeddingPoint(x1, x2, x3)


def embedding_array(l, phi, geom: ConeGeometry) -> np.ndarray:
    """Vectorized embedding returning an (N, 3) array of Cartesian points."""
    p = embed(l, phi, geom)
    return np.stack([np.broadcast_arrays(p.x1, p.x2, p.x3)[i] for i in range(3)], axis=-1)


def surface_residual(p: EmbeddingPoint, geom: ConeGeometry):
    """Residual of the cone constraint x1^2 + x2^2 - tan^2(alpha) x3^2.

    Zero (to rounding) for points produced by :func:`embed`.
    """
    t2 = geom.tan_alpha ** 2
    return p.x1 ** 2 + p.x2 ** 2 - t2 * p.x3 ** 2


def measure_weight(l):
    """Weight |l| of the surface measure |l| dl dphi."""
    return np.abs(l)


def reduce_angle(phi):
    """Reduce an (unnormalized) angle into [0, 2*pi).

    Integration keeps phi unreduced so winding counts survive; reduce only
    when emitting output or comparing positions on the surface.
    """
    return np.mod(phi, TWO_PI)
