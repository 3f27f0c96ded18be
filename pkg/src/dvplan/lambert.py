"""Two-body Lambert boundary-value problem and two-impulse rendezvous delta-V.

The solver follows the Lancaster-Blanchard / Izzo formulation: the transfer is
parametrized by a single variable x, the nondimensional time-of-flight
equation T(x) is inverted with Householder iterations, and terminal velocities
are reconstructed from the radial/tangential decomposition. Multi-revolution
transfers expose both solution branches ("left" and "right").

Delta-V values cross the module boundary in m/s; positions and velocities are
AU and AU/day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import AU_PER_DAY_MS
from .ephemeris import StateVector
from .errors import DegenerateGeometryError, LambertInfeasibleError, ValidationError

_HOUSEHOLDER_TOL = 1e-12
_HOUSEHOLDER_ITERS = 20
_PLANE_TOL = 1e-11  # |ir1 x ir2| below this: transfer plane undefined


@dataclass(frozen=True)
class TransferSolution:
    """One Lambert solution between two position vectors.

    Attributes
    ----------
    v1, v2 : np.ndarray
        Transfer-orbit velocity (AU/day) at departure and arrival.
    revolutions : int
        Complete revolutions of the transfer orbit.
    dv_total : float or None
        Rendezvous delta-V in m/s against the departure/arrival body states;
        ``None`` for bare boundary-value solutions that were never evaluated
        against body velocities.
    """

    v1: np.ndarray
    v2: np.ndarray
    revolutions: int
    dv_total: float | None = None

    def __post_init__(self):
        v1 = np.asarray(self.v1, dtype=float).reshape(3).copy()
        v2 = np.asarray(self.v2, dtype=float).reshape(3).copy()
        v1.setflags(write=False)
        v2.setflags(write=False)
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)
        if self.dv_total is not None and not self.dv_total >= 0.0:
            raise ValidationError(f"rendezvous delta-V must be >= 0, got {self.dv_total}")


# -- 3-vector helpers on plain floats (hot path) ----------------------------

def _norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _scale(a, s):
    return (a[0] * s, a[1] * s, a[2] * s)


# -- nondimensional time-of-flight machinery --------------------------------

def _hypergeometric_f(z: float, tol: float = 1e-11) -> float:
    """Gauss 2F1(3, 1; 5/2; z) by direct series summation."""
    sj = 1.0
    cj = 1.0
    j = 0
    while True:
        cj = cj * (3.0 + j) * (1.0 + j) / (2.5 + j) * z / (j + 1.0)
        sj += cj
        j += 1
        if abs(cj) < tol or j > 200:
            return sj


def _x_to_tof(x: float, lam: float, revs: int) -> float:
    """Nondimensional time of flight T(x) for the given geometry parameter."""
    battin = 0.01
    lagrange = 0.2
    dist = abs(x - 1.0)
    lam2 = lam * lam

    if battin < dist < lagrange:
        # Lagrange expression in terms of the auxiliary angles.
        a = 1.0 / (1.0 - x * x)
        if a > 0.0:
            alfa = 2.0 * math.acos(x)
            beta = 2.0 * math.asin(math.sqrt(lam2 / a))
            if lam < 0.0:
                beta = -beta
            return (
                a
                * math.sqrt(a)
                * ((alfa - math.sin(alfa)) - (beta - math.sin(beta)) + 2.0 * math.pi * revs)
            ) / 2.0
        alfa = 2.0 * math.acosh(x)
        beta = 2.0 * math.asinh(math.sqrt(-lam2 / a))
        if lam < 0.0:
            beta = -beta
        return -a * math.sqrt(-a) * ((beta - math.sinh(beta)) - (alfa - math.sinh(alfa))) / 2.0

    big_e = x * x - 1.0
    rho = abs(big_e)
    z = math.sqrt(1.0 + lam2 * big_e)
    if dist < battin:
        # Battin series, stable through the parabolic point x = 1.
        eta = z - lam * x
        s1 = 0.5 * (1.0 - lam - x * eta)
        q = 4.0 / 3.0 * _hypergeometric_f(s1)
        return (eta * eta * eta * q + 4.0 * lam * eta) / 2.0 + revs * math.pi / rho ** 1.5
    # Lancaster expression, far from the parabola.
    y = math.sqrt(rho)
    g = x * z - lam * big_e
    if big_e < 0.0:
        d = revs * math.pi + math.acos(g)
    else:
        d = math.log(y * (z - lam * x) + g)
    return (x - lam * z - d / y) / big_e


def _tof_derivatives(x: float, t: float, lam: float):
    """dT/dx, d2T/dx2, d3T/dx3 at x (Lancaster-Blanchard identities)."""
    lam2 = lam * lam
    lam3 = lam2 * lam
    umx2 = 1.0 - x * x
    y = math.sqrt(1.0 - lam2 * umx2)
    y2 = y * y
    y3 = y2 * y
    y5 = y3 * y2
    dt = (3.0 * t * x - 2.0 + 2.0 * lam3 * x / y) / umx2
    ddt = (3.0 * t + 5.0 * x * dt + 2.0 * (1.0 - lam2) * lam3 / y3) / umx2
    dddt = (7.0 * x * ddt + 8.0 * dt - 6.0 * (1.0 - lam2) * lam2 * lam3 * x / y5) / umx2
    return dt, ddt, dddt


def _householder(t_target: float, x0: float, lam: float, revs: int) -> float:
    """Invert T(x) = t_target by third-order Householder iterations."""
    x = x0
    for _ in range(_HOUSEHOLDER_ITERS):
        if abs(x - 1.0) < 1e-13:
            x = 1.0 - 1e-13 if x <= 1.0 else 1.0 + 1e-13
        tof = _x_to_tof(x, lam, revs)
        dt, ddt, dddt = _tof_derivatives(x, tof, lam)
        delta = tof - t_target
        dt2 = dt * dt
        denom = dt * (dt2 - delta * ddt) + dddt * delta * delta / 6.0
        if denom == 0.0:
            break
        x_new = x - delta * (dt2 - delta * ddt / 2.0) / denom
        err = abs(x - x_new)
        x = x_new
        if err < _HOUSEHOLDER_TOL:
            break
    return x


def _max_revolutions(t: float, lam: float) -> int:
    """Largest revolution count with a solution at nondimensional time t."""
    n_max = int(t / math.pi)
    t00 = math.acos(lam) + lam * math.sqrt(1.0 - lam * lam)
    if n_max > 0 and t < t00 + n_max * math.pi:
        # Halley iteration for the minimum of T(x) at n_max revolutions.
        t_min = t00 + n_max * math.pi
        x_old = 0.0
        for _ in range(12):
            dt, ddt, dddt = _tof_derivatives(x_old, t_min, lam)
            if dt != 0.0:
                x_new = x_old - dt * ddt / (ddt * ddt - dt * dddt / 2.0)
            else:
                break
            if abs(x_old - x_new) < 1e-13:
                break
            t_min = _x_to_tof(x_new, lam, n_max)
            x_old = x_new
        if t_min > t:
            n_max -= 1
    return n_max


class _Geometry:
    """Shared per-(r1, r2, tof) quantities for solving and reconstruction."""

    __slots__ = ("lam", "t", "gamma", "rho", "sigma", "ir1", "ir2", "it1", "it2", "r1n", "r2n")

    def __init__(self, r1, r2, tof, mu, clockwise):
        if tof <= 0.0:
            raise ValidationError(f"time of flight must be > 0, got {tof}")
        if mu <= 0.0:
            raise ValidationError(f"gravitational parameter must be > 0, got {mu}")
        chord = (r2[0] - r1[0], r2[1] - r1[1], r2[2] - r1[2])
        c = _norm(chord)
        r1n = _norm(r1)
        r2n = _norm(r2)
        if r1n == 0.0 or r2n == 0.0:
            raise DegenerateGeometryError("terminal position at the attracting body")
        if c == 0.0:
            raise DegenerateGeometryError("coincident terminal positions")
        s = (c + r1n + r2n) / 2.0
        ir1 = _scale(r1, 1.0 / r1n)
        ir2 = _scale(r2, 1.0 / r2n)
        ih = _cross(ir1, ir2)
        ihn = _norm(ih)
        if ihn < _PLANE_TOL:
            raise DegenerateGeometryError(
                "transfer plane undefined (collinear or near-180-degree geometry)"
            )
        ih = _scale(ih, 1.0 / ihn)

        lam2 = 1.0 - c / s
        lam = math.sqrt(max(lam2, 0.0))
        if ih[2] < 0.0:
            # Transfer angle greater than pi for prograde motion.
            lam = -lam
            it1 = _cross(ir1, ih)
            it2 = _cross(ir2, ih)
        else:
            it1 = _cross(ih, ir1)
            it2 = _cross(ih, ir2)
        if clockwise:
            lam = -lam
            it1 = _scale(it1, -1.0)
            it2 = _scale(it2, -1.0)

        self.lam = lam
        self.t = math.sqrt(2.0 * mu / (s * s * s)) * tof
        self.gamma = math.sqrt(mu * s / 2.0)
        self.rho = (r1n - r2n) / c
        self.sigma = math.sqrt(1.0 - self.rho * self.rho)
        self.ir1, self.ir2 = ir1, ir2
        self.it1, self.it2 = it1, it2
        self.r1n, self.r2n = r1n, r2n

    def solve_x(self, revolutions: int, branch: str) -> float:
        lam, t = self.lam, self.t
        if revolutions == 0:
            t00 = math.acos(lam) + lam * math.sqrt(1.0 - lam * lam)
            t1 = 2.0 / 3.0 * (1.0 - lam ** 3)
            if t >= t00:
                x0 = -(t - t00) / (t - t00 + 4.0)
            elif t <= t1:
                x0 = t1 * (t1 - t) / (2.0 / 5.0 * (1.0 - lam ** 5) * t) + 1.0
            else:
                x0 = (t / t00) ** (math.log(2.0) / math.log(t1 / t00)) - 1.0
            return _householder(t, x0, lam, 0)

        if revolutions > _max_revolutions(t, lam):
            raise LambertInfeasibleError(
                f"no {revolutions}-revolution solution for this time of flight"
            )
        if branch == "left":
            tmp = ((revolutions * math.pi + math.pi) / (8.0 * t)) ** (2.0 / 3.0)
        elif branch == "right":
            tmp = ((8.0 * t) / (revolutions * math.pi)) ** (2.0 / 3.0)
        else:
            raise ValidationError(f"branch must be 'left' or 'right', got {branch!r}")
        x0 = (tmp - 1.0) / (tmp + 1.0)
        return _householder(t, x0, lam, revolutions)

    def velocities(self, x: float):
        lam = self.lam
        y = math.sqrt(1.0 - lam * lam * (1.0 - x * x))
        vr1 = self.gamma * ((lam * y - x) - self.rho * (lam * y + x)) / self.r1n
        vr2 = -self.gamma * ((lam * y - x) + self.rho * (lam * y + x)) / self.r2n
        vt = self.gamma * self.sigma * (y + lam * x)
        vt1 = vt / self.r1n
        vt2 = vt / self.r2n
        v1 = tuple(vr1 * self.ir1[k] + vt1 * self.it1[k] for k in range(3))
        v2 = tuple(vr2 * self.ir2[k] + vt2 * self.it2[k] for k in range(3))
        return v1, v2


def solve_lambert(
    r1,
    r2,
    tof: float,
    mu: float,
    revolutions: int = 0,
    branch: str = "left",
    clockwise: bool = False,
) -> TransferSolution:
    """Solve the Lambert problem between position vectors ``r1`` and ``r2``.

    Parameters
    ----------
    r1, r2 : array-like, shape (3,)
        Terminal positions (AU).
    tof : float
        Time of flight (days), > 0.
    mu : float
        Gravitational parameter (AU^3/day^2).
    revolutions : int
        Complete revolutions of the transfer orbit. For ``revolutions > 0``
        both branches exist and are selected with ``branch``.
    branch : {"left", "right"}
        Multi-revolution solution branch (ignored for zero revolutions).
    clockwise : bool
        Solve for retrograde motion, i.e. take the complementary (long-way)
        transfer angle.

    Raises
    ------
    LambertInfeasibleError
        No solution for the requested (tof, revolutions).
    DegenerateGeometryError
        Transfer plane undefined (collinear / near-180-degree positions).
    """
    if revolutions < 0:
        raise ValidationError(f"revolutions must be >= 0, got {revolutions}")
    r1 = tuple(float(c) for c in np.asarray(r1, dtype=float).reshape(3))
    r2 = tuple(float(c) for c in np.asarray(r2, dtype=float).reshape(3))
    geom = _Geometry(r1, r2, float(tof), float(mu), clockwise)
    x = geom.solve_x(revolutions, branch)
    v1, v2 = geom.velocities(x)
    return TransferSolution(v1=np.array(v1), v2=np.array(v2), revolutions=revolutions)


def _min_rendezvous_dv_ms(r1, v1_body, r2, v2_body, tof, mu, max_revolutions):
    """Minimum two-impulse rendezvous delta-V in m/s over revolution counts.

    Works on plain float 3-tuples; returns +inf when every case is infeasible
    or the geometry is degenerate (infeasibility is a value, not an error).
    """
    try:
        geom = _Geometry(r1, r2, tof, mu, False)
    except DegenerateGeometryError:
        return math.inf
    best = math.inf
    for revs in range(max_revolutions + 1):
        for branch in ("left",) if revs == 0 else ("left", "right"):
            try:
                x = geom.solve_x(revs, branch)
            except LambertInfeasibleError:
                continue
            v1, v2 = geom.velocities(x)
            dv = math.sqrt(
                (v1[0] - v1_body[0]) ** 2 + (v1[1] - v1_body[1]) ** 2 + (v1[2] - v1_body[2]) ** 2
            ) + math.sqrt(
                (v2_body[0] - v2[0]) ** 2 + (v2_body[1] - v2[1]) ** 2 + (v2_body[2] - v2[2]) ** 2
            )
            if dv < best:
                best = dv
    return best * AU_PER_DAY_MS if best < math.inf else math.inf


def rendezvous_solutions(
    dep: StateVector,
    arr: StateVector,
    tof: float,
    mu: float,
    max_revolutions: int = 0,
) -> list[TransferSolution]:
    """All feasible Lambert solutions with rendezvous delta-V attached (m/s).

    Sorted by ascending ``dv_total``; empty when everything is infeasible.
    """
    if abs((arr.epoch - dep.epoch) - tof) > 1e-9 * max(1.0, abs(tof)):
        raise ValidationError(
            f"arrival epoch minus departure epoch ({arr.epoch - dep.epoch}) "
            f"must equal the time of flight ({tof})"
        )
    solutions = []
    for revs in range(max_revolutions + 1):
        for branch in ("left",) if revs == 0 else ("left", "right"):
            try:
                sol = solve_lambert(dep.r, arr.r, tof, mu, revolutions=revs, branch=branch)
            except (LambertInfeasibleError, DegenerateGeometryError):
                continue
            dv = (
                float(np.linalg.norm(sol.v1 - dep.v)) + float(np.linalg.norm(arr.v - sol.v2))
            ) * AU_PER_DAY_MS
            solutions.append(replace(sol, dv_total=dv))
    solutions.sort(key=lambda s: s.dv_total)
    return solutions


def rendezvous_dv(
    dep: StateVector,
    arr: StateVector,
    tof: float,
    mu: float,
    max_revolutions: int = 0,
) -> float:
    """Minimum rendezvous delta-V (m/s) over revolutions 0..max and both branches.

    Returns +inf when every revolution count is infeasible or the geometry is
    degenerate; infeasibility is a value under the delta-V-matrix convention,
    never an exception.
    """
    if abs((arr.epoch - dep.epoch) - tof) > 1e-9 * max(1.0, abs(tof)):
        raise ValidationError(
            f"arrival epoch minus departure epoch ({arr.epoch - dep.epoch}) "
            f"must equal the time of flight ({tof})"
        )
    return _min_rendezvous_dv_ms(
        tuple(dep.r), tuple(dep.v), tuple(arr.r), tuple(arr.v), tof, mu, max_revolutions
    )
