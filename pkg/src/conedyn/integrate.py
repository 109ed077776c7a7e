"""Numerical integration of the cone flows, conservation audits, and the
meridian-instability experiment.

The stepper is an explicit Dormand-Prince 5(4) embedded pair with quartic
dense output.  The flows are smooth away from the apex and every run can be
audited against a closed form, so accuracy control (not symplecticity) is
the contract here: local error per step is kept at the requested tolerance
and the conserved quantities are reported, not enforced.

Runs with J != 0 can never reach the apex -- |l| stays above the centrifugal
bound -- so the stepper carries a near-apex guard: getting within 1e-3 of
the bound means the tolerance was too loose, and the run aborts with the
last valid state instead of silently stepping through garbage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .classical import ParticleParams, PhasePoint, free_bound
from .errors import AccuracyError, DomainError, SingularityApproachError, SingularityError
from .geometry import ConeGeometry, embedding_array

__all__ = [
    "Trajectory",
    "ConservationReport",
    "DivergenceReport",
    "ClosestApproach",
    "integrate",
    "conservation_report",
    "closest_approach",
    "perturbation_divergence",
    "radial_periods",
]

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: weights of the embedded error estimate.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
# Quartic dense-output weights: y(t0 + th) = y0 + h * (K^T P) . [t, t^2, t^3, t^4].
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_MAX_STEPS = 2_000_000


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered phase samples with their 3D embedding and energy ledger."""

    t: np.ndarray
    l: np.ndarray
    phi: np.ndarray
    p_l: np.ndarray
    p_phi: np.ndarray
    embedding: np.ndarray
    energy: np.ndarray
    n_steps: int

    def __post_init__(self):
        if len(self.t) == 0:
            raise DomainError("trajectory must contain at least one sample")
        if np.any(np.diff(self.t) <= 0.0):
            raise DomainError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(t=float(self.t[i]), l=float(self.l[i]),
                          phi=float(self.phi[i]), p_l=float(self.p_l[i]),
                          p_phi=float(self.p_phi[i]))

    @property
    def samples(self) -> list[PhasePoint]:
        return [self.point(i) for i in range(len(self.t))]

    def at_times(self, times: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        """Indices of the samples matching ``times`` (which must be present)."""
        idx = np.searchsorted(self.t, times)
        idx = np.clip(idx, 0, len(self.t) - 1)
        left = np.clip(idx - 1, 0, len(self.t) - 1)
        pick_left = np.abs(self.t[left] - times) < np.abs(self.t[idx] - times)
        idx = np.where(pick_left, left, idx)
        if np.any(np.abs(self.t[idx] - times) > rtol * np.maximum(1.0, np.abs(times))):
            raise DomainError("requested times are not sampled in this trajectory")
        return idx


@dataclass(frozen=True)
class ConservationReport:
    """Worst-case drifts of the conserved quantities over a run."""

    max_rel_energy_drift: float
    max_abs_J_drift: float
    steps: int


@dataclass(frozen=True)
class DivergenceReport:
    """Outcome of one perturbed-vs-base comparison of the meridian motion."""

    eps_J: float
    sup_l_deviation: float
    crossing_detected: bool


@dataclass(frozen=True)
class ClosestApproach:
    """Minimum of |l| over a run; ``refined`` is False when the minimum sat
    on a window endpoint (or the orbit is circular) and no local refinement
    was possible."""

    t: float
    l_abs: float
    refined: bool


def _make_rhs(params: ParticleParams, geom: ConeGeometry):
    m, w, s2 = params.mass, params.omega, geom.sin_alpha ** 2
    mw2 = m * w ** 2

    def f(y):
        l, _phi, p_l, J = y
        if J == 0.0:
            return np.array([p_l / m, 0.0, -mw2 * l, 0.0])
        if l == 0.0:
            raise SingularityError("flow evaluated at the apex with J != 0")
        inv = 1.0 / (m * l * l * s2)
        return np.array([p_l / m, J * inv, J * J * inv / l - mw2 * l, 0.0])

    return f


def _initial_step(f, y0, f0, tol, span):
    scale = tol + tol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    try:
        f1 = f(y0 + h0 * f0)
    except SingularityError:
        return min(1e-6, span)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) < 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


class _DenseSteps:
    """Accepted steps with their stage values, for quartic interpolation."""

    def __init__(self):
        self.t0: list[float] = []
        self.h: list[float] = []
        self.y0: list[np.ndarray] = []
        self.Q: list[np.ndarray] = []  # (4 states, 4 powers)

    def push(self, t0, h, y0, K):
        self.t0.append(t0)
        self.h.append(h)
        self.y0.append(y0)
        self.Q.append(K.T @ _P)

    def finish(self):
        self.t1 = np.array([t + h for t, h in zip(self.t0, self.h)])

    def eval(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.t1, t, side="left"))
        i = min(i, len(self.t0) - 1)
        theta = (t - self.t0[i]) / self.h[i]
        powers = theta ** np.arange(1, 5)
        return self.y0[i] + self.h[i] * (self.Q[i] @ powers)


def integrate(initial: PhasePoint, params: ParticleParams, geom: ConeGeometry,
              t_end: float, tol: float = 1e-10,
              sample_interval: float | None = None) -> Trajectory:
    """Integrate the Hamiltonian flow from ``initial`` up to ``t_end``.

    Adaptive Dormand-Prince 5(4): the embedded local error estimate is held
    below ``tol`` (mixed absolute/relative) on every accepted step.  The
    returned trajectory samples the uniform cadence ``sample_interval``
    (default: span/1000) plus every accepted step endpoint plus refined
    event points where d|l|/dt changes sign (radial turning points and, for
    meridian runs, apex crossings).
    """
    if not (1e-14 <= tol <= 1e-3):
        raise DomainError(f"tol must lie in [1e-14, 1e-3], got {tol}")
    if not (t_end > initial.t):
        raise DomainError("t_end must exceed the initial time")
    J = initial.p_phi
    if J != 0.0 and initial.l == 0.0:
        raise SingularityError("J != 0 initial data must have l != 0")

    from .classical import energy as _energy
    E0 = _energy(initial, params, geom)
    guard = 1e-3 * free_bound(E0, J, params.mass, geom) if J != 0.0 else 0.0

    f = _make_rhs(params, geom)
    t, y = initial.t, np.array([initial.l, initial.phi, initial.p_l, initial.p_phi])
    span = t_end - initial.t
    f0 = f(y)
    h = _initial_step(f, y, f0, tol, span)

    steps = _DenseSteps()
    event_times: list[float] = []
    n_accepted = 0
    n_attempts = 0
    K = np.empty((7, 4))

    while t < t_end:
        h = min(h, t_end - t)
        if h <= 16.0 * np.finfo(float).eps * max(1.0, abs(t)):
            state = PhasePoint(t=t, l=float(y[0]), phi=float(y[1]),
                               p_l=float(y[2]), p_phi=float(y[3]))
            if J != 0.0:
                raise SingularityApproachError(
                    f"step size underflow at t={t!r} near the apex", last_state=state)
            raise AccuracyError(f"step size underflow at t={t!r}", estimate=state)
        n_attempts += 1
        if n_attempts > _MAX_STEPS:
            raise AccuracyError(f"exceeded {_MAX_STEPS} step attempts", estimate=None)

        try:
            K[0] = f0
            for s in range(1, 7):
                K[s] = f(y + h * (_A[s] @ K[:s]))
        except SingularityError:
            h *= 0.5
            continue

        y1 = y + h * (_B @ K)
        err_vec = h * (_E @ K)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y1))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))

        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue

        steps.push(t, h, y.copy(), K.copy())
        t1 = t + h
        g0 = math.copysign(1.0, y[0]) * y[2] if y[0] != 0.0 or y[2] != 0.0 else 0.0
        g1 = math.copysign(1.0, y1[0]) * y1[2]
        if g0 * g1 < 0.0:
            event_times.append(_refine_event(steps, t, t1))
        y = y1
        t = t1
        f0 = K[6] if True else f(y)  # FSAL: stage 7 is f at the new point
        n_accepted += 1
        if J != 0.0 and abs(y[0]) < guard:
            state = PhasePoint(t=t, l=float(y[0]), phi=float(y[1]),
                               p_l=float(y[2]), p_phi=float(y[3]))
            raise SingularityApproachError(
                f"|l| fell below the apex guard at t={t!r}; tolerance too loose "
                f"for this run", last_state=state)
        if err == 0.0:
            h *= 5.0
        else:
            h *= min(5.0, max(0.2, 0.9 * err ** -0.2))

    steps.finish()

    if sample_interval is None:
        sample_interval = span / 1000.0
    if sample_interval <= 0.0:
        raise DomainError("sample_interval must be positive")
    n_cad = int(math.floor(span / sample_interval + 1e-9))
    cadence = initial.t + sample_interval * np.arange(n_cad + 1)
    times = np.concatenate([cadence, [t_end], steps.t1, np.array(event_times),
                            [initial.t]])
    times = times[(times >= initial.t) & (times <= t_end)]
    times = np.sort(times)
    keep = np.concatenate([[True], np.diff(times) > 1e-12 * max(1.0, span)])
    times = times[keep]

    ys = np.empty((len(times), 4))
    ys[0] = [initial.l, initial.phi, initial.p_l, initial.p_phi]
    for i, ti in enumerate(times[1:], start=1):
        ys[i] = steps.eval(float(ti))

    return _build_trajectory(times, ys, params, geom, n_accepted)


def _refine_event(steps: _DenseSteps, ta: float, tb: float) -> float:
    """Locate the sign change of sign(l) * p_l inside one accepted step."""
    i = len(steps.t0) - 1
    t0, h, y0, Q = steps.t0[i], steps.h[i], steps.y0[i], steps.Q[i]

    def g(tt):
        theta = (tt - t0) / h
        yv = y0 + h * (Q @ (theta ** np.arange(1, 5)))
        return math.copysign(1.0, yv[0]) * yv[2]

    try:
        return float(brentq(g, ta, tb, xtol=1e-13, rtol=8.9e-16))
    except ValueError:
        return 0.5 * (ta + tb)


def _build_trajectory(times, ys, params, geom, n_steps) -> Trajectory:
    from .classical import ParticleParams as _PP  # noqa: F401  (kept for symmetry)
    l, phi, p_l, p_phi = ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3]
    m, w, s2 = params.mass, params.omega, geom.sin_alpha ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        centrifugal = np.where(p_phi == 0.0, 0.0,
                               p_phi ** 2 / (2.0 * m * l ** 2 * s2))
    energy = p_l ** 2 / (2.0 * m) + centrifugal + 0.5 * m * w ** 2 * l ** 2
    emb = embedding_array(l, phi, geom)
    return Trajectory(t=times, l=l, phi=phi, p_l=p_l, p_phi=p_phi,
                      embedding=emb, energy=energy, n_steps=n_steps)


def conservation_report(traj: Trajectory, params: ParticleParams,
                        geom: ConeGeometry) -> ConservationReport:
    """Drift of energy (relative) and p_phi (absolute) against the first sample."""
    e0 = traj.energy[0]
    denom = abs(e0) if e0 != 0.0 else 1.0
    return ConservationReport(
        max_rel_energy_drift=float(np.max(np.abs(traj.energy - e0)) / denom),
        max_abs_J_drift=float(np.max(np.abs(traj.p_phi - traj.p_phi[0]))),
        steps=traj.n_steps,
    )


def closest_approach(traj: Trajectory) -> ClosestApproach:
    """Minimum of |l| over the run, refined by a local quadratic fit of l^2.

    For the free flow l^2 is exactly quadratic in t, so the fit through the
    three samples around the discrete minimum recovers the analytic bound;
    for the oscillator it is quadratic to leading order around the turning
    point.  Falls back (flagged) to the raw sample minimum when the minimum
    sits on a window endpoint or the orbit has no radial oscillation.
    """
    labs = np.abs(traj.l)
    i = int(np.argmin(labs))
    if i == 0 or i == len(labs) - 1:
        return ClosestApproach(t=float(traj.t[i]), l_abs=float(labs[i]), refined=False)
    ts = traj.t[i - 1:i + 2]
    q = labs[i - 1:i + 2] ** 2
    # Parabola q(t) = a t^2 + b t + c through the three samples.
    denom = (ts[0] - ts[1]) * (ts[0] - ts[2]) * (ts[1] - ts[2])
    a = (ts[2] * (q[1] - q[0]) + ts[1] * (q[0] - q[2]) + ts[0] * (q[2] - q[1])) / denom
    if a <= 0.0 or not math.isfinite(a):
        return ClosestApproach(t=float(traj.t[i]), l_abs=float(labs[i]), refined=False)
    b = (ts[2] ** 2 * (q[0] - q[1]) + ts[1] ** 2 * (q[2] - q[0])
         + ts[0] ** 2 * (q[1] - q[0 + 2])) / denom
    tv = -b / (2.0 * a)
    tv = min(max(tv, float(ts[0])), float(ts[2]))
    c = q[0] - a * ts[0] ** 2 - b * ts[0]
    qv = max(a * tv ** 2 + b * tv + c, 0.0)
    return ClosestApproach(t=float(tv), l_abs=float(math.sqrt(qv)), refined=True)


def perturbation_divergence(base: PhasePoint, eps_list, params: ParticleParams,
                            geom: ConeGeometry, t_end: float, tol: float = 1e-10,
                            sample_interval: float = 0.01) -> list[DivergenceReport]:
    """Lyapunov-instability experiment for the meridian motion.

    ``base`` must have J = 0.  For each perturbation eps the J = eps flow is
    integrated alongside the base flow and the sup over the common cadence
    grid of |l_eps(t) - l_0(t)| is reported, together with whether the base
    solution crossed the apex inside the window.  Before the crossing time
    the deviation vanishes with eps; after it the perturbed orbit has folded
    back while the base solution continued to the other nappe, so the
    deviation grows to the order of 2|l| no matter how small eps is.
    """
    if base.p_phi != 0.0:
        raise DomainError("perturbation base must have J = 0")
    base_traj = integrate(base, params, geom, t_end, tol=tol,
                          sample_interval=sample_interval)
    n_cad = int(math.floor((t_end - base.t) / sample_interval + 1e-9))
    grid = base.t + sample_interval * np.arange(n_cad + 1)
    base_l = base_traj.l[base_traj.at_times(grid)]
    crossed = bool(np.any(np.sign(base_traj.l[:-1]) * np.sign(base_traj.l[1:]) < 0))

    reports = []
    for eps in eps_list:
        if eps == 0.0:
            reports.append(DivergenceReport(eps_J=0.0, sup_l_deviation=0.0,
                                            crossing_detected=crossed))
            continue
        pert = PhasePoint(t=base.t, l=base.l, phi=base.phi, p_l=base.p_l,
                          p_phi=float(eps))
        traj = integrate(pert, params, geom, t_end, tol=tol,
                         sample_interval=sample_interval)
        pert_l = traj.l[traj.at_times(grid)]
        sup = float(np.max(np.abs(pert_l - base_l)))
        reports.append(DivergenceReport(eps_J=float(eps), sup_l_deviation=sup,
                                        crossing_detected=crossed))
    return reports


def radial_periods(traj: Trajectory) -> np.ndarray:
    """Spacings between successive radial maxima of a run.

    For J != 0 the radial signal is |l| (one nappe, period pi/omega for the
    oscillator); for meridian runs it is l itself, whose maxima recur with
    the full period 2*pi/omega.  Relies on the integrator's refined event
    samples landing on the turning points.
    """
    signal = traj.l if traj.p_phi[0] == 0.0 else np.abs(traj.l)
    s_prev, s_mid, s_next = signal[:-2], signal[1:-1], signal[2:]
    is_max = (s_mid >= s_prev) & (s_mid >= s_next) & ((s_mid > s_prev) | (s_mid > s_next))
    idx = np.nonzero(is_max)[0] + 1
    if len(idx) > 1:
        # collapse plateaus of numerically equal neighbors
        keep = np.concatenate([[True], np.diff(traj.t[idx]) > 1e-6])
        idx = idx[keep]
    lo = signal.min() + 0.25 * (signal.max() - signal.min())
    idx = idx[signal[idx] > lo]
    return np.diff(traj.t[idx])
