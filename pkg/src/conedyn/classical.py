"""Classical dynamics on the double cone: Hamiltonians and closed-form orbits.

The configuration space is the double cone of :mod:`conedyn.geometry` with
canonical coordinates (l, phi) and momenta (p_l, p_phi).  The Hamiltonian

    H = p_l^2 / 2m + p_phi^2 / (2 m l^2 sin^2 alpha) + (m omega^2 / 2) l^2

covers both the free particle (omega = 0) and the harmonic oscillator bound
to the apex.  p_phi = J is conserved.  For J != 0 the centrifugal barrier
keeps the particle on one nappe forever; for J = 0 the motion is confined to
a meridian and crosses the apex.  That dichotomy makes the meridian solution
unstable in the Lyapunov sense: an arbitrarily small J folds the orbit at a
finite distance from the apex instead of letting it through.

Every flow here has a closed form:

* free, J != 0:       l(t) = +-sqrt((2E/m)(t+C)^2 + J^2/(2 m E sin^2 alpha))
* free, J = 0:        l(t) = l0 + (p_l0/m) t              (straight meridian)
* oscillator, J != 0: l(t) = +-sqrt((E + D sin 2w(t+C)) / (m w^2)),
                      D = sqrt(E^2 - J^2 w^2 / sin^2 alpha)
* oscillator, J = 0:  ordinary harmonic motion along the meridian

with the angle obtained by integrating dphi/dt = J / (m l(t)^2 sin^2 alpha)
in closed (arctan) form.  The J -> 0 limits of the J != 0 formulas are kept
as separate operations: they do *not* reproduce the true J = 0 motion, which
is the classical face of the instability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, InfeasibleOrbitError, SingularityError
from .geometry import ConeGeometry

__all__ = [
    "ParticleParams",
    "PhasePoint",
    "ClosedFormOrbit",
    "energy",
    "rhs",
    "fit_orbit",
    "free_radial",
    "free_bound",
    "free_angle",
    "free_momentum",
    "osc_meridian",
    "osc_radial",
    "osc_bounds",
    "osc_angle",
    "osc_momentum",
    "limit_j_to_zero",
]

FREE = "free"
OSCILLATOR = "oscillator"
MERIDIAN = "meridian-line"


@dataclass(frozen=True)
class ParticleParams:
    """Mass and oscillator frequency; omega = 0 selects free motion."""

    mass: float
    omega: float = 0.0

    def __post_init__(self):
        if not (self.mass > 0.0 and math.isfinite(self.mass)):
            raise DomainError(f"mass must be positive, got {self.mass!r}")
        if not (self.omega >= 0.0 and math.isfinite(self.omega)):
            raise DomainError(f"omega must be >= 0, got {self.omega!r}")


@dataclass(frozen=True)
class PhasePoint:
    """Canonical state (t, l, phi, p_l, p_phi); phi is kept unreduced."""

    t: float
    l: float
    phi: float
    p_l: float
    p_phi: float

    def __post_init__(self):
        for name in ("t", "l", "phi", "p_l", "p_phi"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"PhasePoint field {name} must be finite")


def energy(state: PhasePoint, params: ParticleParams, geom: ConeGeometry) -> float:
    """Total energy of a phase point (conserved along the flow)."""
    m = params.mass
    J = state.p_phi
    kinetic = state.p_l ** 2 / (2.0 * m)
    potential = 0.5 * m * params.omega ** 2 * state.l ** 2
    if J == 0.0:
        return kinetic + potential
    if state.l == 0.0:
        raise SingularityError("state with J != 0 cannot sit at the apex l = 0")
    centrifugal = J ** 2 / (2.0 * m * state.l ** 2 * geom.sin_alpha ** 2)
    return kinetic + centrifugal + potential


def _rhs_values(l, p_l, J, m, omega, sin2a):
    if J == 0.0:
        return (p_l / m, 0.0, -m * omega ** 2 * l, 0.0)
    if l == 0.0:
        raise SingularityError("rhs undefined at l = 0 with J != 0")
    dphi = J / (m * l ** 2 * sin2a)
    dpl = J ** 2 / (m * l ** 3 * sin2a) - m * omega ** 2 * l
    return (p_l / m, dphi, dpl, 0.0)


def rhs(state: PhasePoint, params: ParticleParams, geom: ConeGeometry):
    """Hamiltonian vector field (dl/dt, dphi/dt, dp_l/dt, dp_phi/dt)."""
    return _rhs_values(state.l, state.p_l, state.p_phi, params.mass,
                       params.omega, geom.sin_alpha ** 2)


@dataclass(frozen=True)
class ClosedFormOrbit:
    """A fitted analytic orbit, immutable after construction.

    ``kind`` is one of 'free', 'oscillator', or 'meridian-line'.  ``C`` is
    the time-shift integration constant of the radial closed form; the
    angle and momentum formulas are referenced to the fit time ``t0`` where
    the orbit passes through (l0, phi0, pl0).  For meridian orbits (J = 0)
    ``l0``/``pl0`` parameterize the line or the 1D harmonic motion.
    """

    kind: str
    E: float
    J: float
    C: float
    nappe: int
    phi0: float
    t0: float
    params: ParticleParams
    geom: ConeGeometry
    l0: float = 0.0
    pl0: float = 0.0

    def radial(self, t):
        if self.kind == FREE:
            return free_radial(t, self)
        if self.kind == OSCILLATOR:
            return osc_radial(t, self)
        return self._meridian(t)[0]

    def angle(self, t):
        if self.kind == FREE:
            return free_angle(t, self)
        if self.kind == OSCILLATOR:
            return osc_angle(t, self)
        return np.broadcast_to(self.phi0, np.shape(t)).copy() if np.ndim(t) else self.phi0

    def momentum(self, t):
        if self.kind == FREE:
            return free_momentum(t, self)
        if self.kind == OSCILLATOR:
            return osc_momentum(t, self)
        return self._meridian(t)[1]

    def _meridian(self, t):
        tau = np.asarray(t, dtype=float) - self.t0
        m = self.params.mass
        w = self.params.omega
        if w == 0.0:
            l = self.l0 + self.pl0 * tau / m
            p = np.broadcast_to(self.pl0, l.shape).copy() if l.ndim else self.pl0
        else:
            l, p = osc_meridian(tau, self.l0, self.pl0, m, w)
        if np.ndim(l) == 0:
            return float(l), float(p)
        return l, p

    def state(self, t: float) -> PhasePoint:
        """Phase point of the orbit at time t."""
        return PhasePoint(t=float(t), l=float(self.radial(t)),
                          phi=float(self.angle(t)), p_l=float(self.momentum(t)),
                          p_phi=self.J)


def fit_orbit(initial: PhasePoint, params: ParticleParams,
              geom: ConeGeometry) -> ClosedFormOrbit:
    """Fit the closed-form orbit through an initial phase point.

    Determines the conserved quantities (E, J), the nappe, and the time
    shift C so that the analytic formulas reproduce the initial state at
    t = t0.  J = 0 yields a meridian-line orbit; otherwise omega selects
    the free or oscillator branch.
    """
    m = params.mass
    w = params.omega
    J = initial.p_phi
    E = energy(initial, params, geom)

    if J == 0.0:
        return ClosedFormOrbit(kind=MERIDIAN, E=E, J=0.0, C=0.0,
                               nappe=int(np.sign(initial.l)) or 1,
                               phi0=initial.phi, t0=initial.t, params=params,
                               geom=geom, l0=initial.l, pl0=initial.p_l)

    if initial.l == 0.0:
        raise SingularityError("J != 0 initial data must have l != 0")
    nappe = 1 if initial.l > 0 else -1

    if w == 0.0:
        # p_l = 2E(t+C)/l fixes C algebraically (the root of the closed form).
        C = initial.p_l * initial.l / (2.0 * E) - initial.t
        orbit = ClosedFormOrbit(kind=FREE, E=E, J=J, C=C, nappe=nappe,
                                phi0=initial.phi, t0=initial.t, params=params,
                                geom=geom, l0=initial.l, pl0=initial.p_l)
    else:
        disc = E ** 2 - J ** 2 * w ** 2 / geom.sin_alpha ** 2
        if disc < -1e-12 * E ** 2:
            raise InfeasibleOrbitError(
                "oscillator orbit needs E^2 >= J^2 w^2 / sin^2 alpha; "
                "inconsistent initial data")
        D = math.sqrt(max(disc, 0.0))
        if D == 0.0:
            theta0 = 0.0  # circular orbit: any phase works
        else:
            s = (m * w ** 2 * initial.l ** 2 - E) / D
            s = min(1.0, max(-1.0, s))
            theta0 = math.asin(s)
            if initial.p_l * initial.l < 0.0:
                theta0 = math.pi - theta0
        C = theta0 / (2.0 * w) - initial.t
        orbit = ClosedFormOrbit(kind=OSCILLATOR, E=E, J=J, C=C, nappe=nappe,
                                phi0=initial.phi, t0=initial.t, params=params,
                                geom=geom, l0=initial.l, pl0=initial.p_l)

    scale = max(1.0, abs(initial.l), abs(initial.p_l))
    if (abs(orbit.radial(initial.t) - initial.l) > 1e-12 * scale
            or abs(orbit.momentum(initial.t) - initial.p_l) > 1e-12 * scale):
        raise InfeasibleOrbitError("fitted orbit does not reproduce the initial state")
    return orbit


# -- free motion (J != 0) ---------------------------------------------------

def free_radial(t, orbit: ClosedFormOrbit):
    """Radial coordinate of a free orbit: +-sqrt((2E/m)(t+C)^2 + b^2)."""
    _require(orbit, FREE)
    tau = np.asarray(t, dtype=float) + orbit.C
    m = orbit.params.mass
    E = orbit.E
    b2 = orbit.J ** 2 / (2.0 * m * E * orbit.geom.sin_alpha ** 2)
    l = orbit.nappe * np.sqrt((2.0 * E / m) * tau ** 2 + b2)
    return float(l) if l.ndim == 0 else l


def free_bound(E: float, J: float, m: float, geom: ConeGeometry) -> float:
    """Smallest |l| a free orbit with J != 0 can reach: |J|/(sqrt(2mE) sin alpha)."""
    if E <= 0.0:
        raise DomainError(f"free_bound requires E > 0, got {E}")
    return abs(J) / (math.sqrt(2.0 * m * E) * geom.sin_alpha)


def free_angle(t, orbit: ClosedFormOrbit):
    """Azimuth along a free orbit.

    For J != 0 the quadrature of dphi/dt along the radial closed form gives

        phi(t) = phi0 + (eps(J)/sin alpha) [arctan(2 E sin(alpha) (t+C)/|J|)
                                            - (same at t0)],

    monotone in t with the sign of J, sweeping a total angle pi/sin(alpha)
    over all time.  J = 0 orbits keep phi constant.
    """
    if orbit.kind == MERIDIAN:
        out = np.broadcast_to(orbit.phi0, np.shape(t)).astype(float)
        return float(out) if out.ndim == 0 else out.copy()
    _require(orbit, FREE)
    tau = np.asarray(t, dtype=float) + orbit.C
    tau0 = orbit.t0 + orbit.C
    sa = orbit.geom.sin_alpha
    k = 2.0 * orbit.E * sa / abs(orbit.J)
    eps = 1.0 if orbit.J > 0 else -1.0
    phi = orbit.phi0 + (eps / sa) * (np.arctan(k * tau) - np.arctan(k * tau0))
    return float(phi) if phi.ndim == 0 else phi


def free_momentum(t, orbit: ClosedFormOrbit):
    """Meridian momentum along a free orbit; vanishes at closest approach."""
    _require(orbit, FREE)
    tau = np.asarray(t, dtype=float) + orbit.C
    m = orbit.params.mass
    E = orbit.E
    b2 = orbit.J ** 2 / (2.0 * m * E * orbit.geom.sin_alpha ** 2)
    p = orbit.nappe * 2.0 * E * tau / np.sqrt((2.0 * E / m) * tau ** 2 + b2)
    return float(p) if p.ndim == 0 else p


# -- harmonic oscillator ----------------------------------------------------

def osc_meridian(t, l0: float, pl0: float, m: float, omega: float):
    """1D harmonic motion along a meridian (the J = 0 oscillator solution).

    Returns (l, p_l) at time t measured from the instant of the initial
    data.  Period 2*pi/omega; the particle swings through the apex.
    """
    if omega <= 0.0:
        raise DomainError("osc_meridian requires omega > 0")
    t = np.asarray(t, dtype=float)
    c, s = np.cos(omega * t), np.sin(omega * t)
    l = l0 * c + (pl0 / (m * omega)) * s
    p = pl0 * c - omega * m * l0 * s
    if l.ndim == 0:
        return float(l), float(p)
    return l, p


def osc_radial(t, orbit: ClosedFormOrbit):
    """Radial coordinate of a J != 0 oscillator orbit.

    l(t) = +-sqrt((E + D sin 2w(t+C)) / (m w^2)) with discriminant
    D = sqrt(E^2 - J^2 w^2 / sin^2 alpha); |l| has period pi/omega, half
    the period of the J = 0 meridian oscillation.
    """
    _require(orbit, OSCILLATOR)
    m, w = orbit.params.mass, orbit.params.omega
    D = _osc_disc(orbit)
    tau = np.asarray(t, dtype=float) + orbit.C
    rad = (orbit.E + D * np.sin(2.0 * w * tau)) / (m * w ** 2)
    l = orbit.nappe * np.sqrt(np.maximum(rad, 0.0))
    return float(l) if l.ndim == 0 else l


def osc_bounds(E: float, J: float, m: float, omega: float,
               geom: ConeGeometry) -> tuple[float, float]:
    """(l_min, l_max) of the finite J != 0 oscillator motion."""
    if J == 0.0:
        raise DomainError("osc_bounds requires J != 0")
    disc = E ** 2 - J ** 2 * omega ** 2 / geom.sin_alpha ** 2
    if disc < 0.0:
        raise InfeasibleOrbitError("E^2 < J^2 w^2 / sin^2 alpha: no real orbit")
    D = math.sqrt(disc)
    return (math.sqrt((E - D) / (m * omega ** 2)),
            math.sqrt((E + D) / (m * omega ** 2)))


def osc_angle(t, orbit: ClosedFormOrbit):
    """Azimuth along an oscillator orbit, continuous across tan branches.

    phi(t) = phi0 + (eps(J)/sin alpha) [A(t) - A(t0)] with

        A(t) = arctan((E tan w(t+C) + D) / (|J| w / sin alpha))
               + pi * floor(w(t+C)/pi + 1/2),

    the floor term stitching the arctan branches so phi is monotone with
    the sign of J.  The swing per radial period pi/omega is exactly
    pi/sin(alpha), independent of the orbit shape.
    """
    if orbit.kind == MERIDIAN:
        out = np.broadcast_to(orbit.phi0, np.shape(t)).astype(float)
        return float(out) if out.ndim == 0 else out.copy()
    _require(orbit, OSCILLATOR)
    sa = orbit.geom.sin_alpha
    eps = 1.0 if orbit.J > 0 else -1.0
    phi = orbit.phi0 + (eps / sa) * (_osc_angle_accum(t, orbit)
                                     - _osc_angle_accum(orbit.t0, orbit))
    out = np.asarray(phi)
    return float(out) if out.ndim == 0 else out


def _osc_angle_accum(t, orbit: ClosedFormOrbit) -> np.ndarray:
    w = orbit.params.omega
    sa = orbit.geom.sin_alpha
    D = _osc_disc(orbit)
    denom = abs(orbit.J) * w / sa
    theta = w * (np.asarray(t, dtype=float) + orbit.C)
    branch = np.floor(theta / math.pi + 0.5)
    return np.arctan((orbit.E * np.tan(theta) + D) / denom) + math.pi * branch


def osc_momentum(t, orbit: ClosedFormOrbit):
    """Meridian momentum along a J != 0 oscillator orbit.

    p_l = +-sqrt(m) D cos 2w(t+C) / sqrt(E + D sin 2w(t+C)); zero exactly
    at the radial turning points.
    """
    _require(orbit, OSCILLATOR)
    m, w = orbit.params.mass, orbit.params.omega
    D = _osc_disc(orbit)
    tau = np.asarray(t, dtype=float) + orbit.C
    denom = np.sqrt(np.maximum(orbit.E + D * np.sin(2.0 * w * tau), 0.0))
    p = orbit.nappe * math.sqrt(m) * D * np.cos(2.0 * w * tau) / denom
    return float(p) if p.ndim == 0 else p


def _osc_disc(orbit: ClosedFormOrbit) -> float:
    w = orbit.params.omega
    disc = orbit.E ** 2 - orbit.J ** 2 * w ** 2 / orbit.geom.sin_alpha ** 2
    if disc < -1e-12 * orbit.E ** 2:
        raise InfeasibleOrbitError("oscillator orbit has negative discriminant")
    return math.sqrt(max(disc, 0.0))


def _require(orbit: ClosedFormOrbit, kind: str):
    if orbit.kind != kind:
        raise DomainError(f"operation needs a {kind} orbit, got {orbit.kind}")
    if orbit.J == 0.0:
        raise DomainError("operation needs J != 0; use the meridian-line forms")


# -- J -> 0 limit family ----------------------------------------------------

def limit_j_to_zero(kind: str, t, l0: float, pl0: float, m: float,
                    omega: float = 0.0):
    """J -> 0 limit of the J != 0 closed forms, upper-nappe data (l0 > 0).

    ``kind`` selects the limited quantity: 'free_l', 'free_pl', 'osc_l' or
    'osc_pl'.  The limits fold at the apex instead of crossing it --
    'free_l' gives |l0 + p_l0 t / m| with a kink at t = -m l0 / p_l0 where
    'free_pl' jumps from -|p_l0| to +|p_l0| -- so they do not describe any
    actual motion; the distance to the true J = 0 solution after the
    crossing time is what makes the meridian motion Lyapunov-unstable.
    Lower-nappe data is covered by the l -> -l symmetry.
    """
    if l0 <= 0.0:
        raise DomainError("limit formulas are stated for upper-nappe data (l0 > 0)")
    t = np.asarray(t, dtype=float)

    if kind == "free_l":
        out = np.abs(pl0 * t / m + l0)
    elif kind == "free_pl":
        out = abs(pl0) * np.sign(t + m * l0 / pl0)
    elif kind in ("osc_l", "osc_pl"):
        if omega <= 0.0:
            raise DomainError(f"{kind} limit requires omega > 0")
        E = pl0 ** 2 / (2.0 * m) + 0.5 * m * omega ** 2 * l0 ** 2
        cs = math.sqrt(l0 ** 2 * omega ** 2 * pl0 ** 2 / E ** 2)
        cc = l0 ** 2 * m * omega ** 2 / E - 1.0
        rad = 1.0 + cs * np.sin(2.0 * omega * t) + cc * np.cos(2.0 * omega * t)
        rad = np.maximum(rad, 0.0)
        if kind == "osc_l":
            out = math.sqrt(E / (m * omega ** 2)) * np.sqrt(rad)
        else:
            num = cs * np.cos(2.0 * omega * t) - cc * np.sin(2.0 * omega * t)
            out = math.sqrt(m * E) * num / np.sqrt(rad)
    else:
        raise DomainError(f"unknown limit kind {kind!r}")
    return float(out) if out.ndim == 0 else out
