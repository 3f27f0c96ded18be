"""Object catalogs and two-body Keplerian propagation.

Catalogs are delimited text tables (comma or whitespace) with one object per
row: ``id, a, e, i, raan, argp, M0, epoch0``. Semi-major axes are in AU,
epochs in days MJD2000; angles are degrees or radians depending on the format
tag passed to :func:`parse_catalog`. Only bound elliptic orbits (e < 1) are
supported.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .constants import SUN_MU, TWO_PI
from .errors import (
    CatalogParseError,
    KeplerConvergenceError,
    UnsupportedOrbitError,
    ValidationError,
)


def wrap_angle(x: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    x = math.fmod(x, TWO_PI)
    return x + TWO_PI if x < 0.0 else x


@dataclass(frozen=True)
class OrbitalElements:
    """Keplerian elements of one catalog object.

    Attributes
    ----------
    id : str
        Unique object identifier.
    a : float
        Semi-major axis (AU), > 0.
    e : float
        Eccentricity, 0 <= e < 1 (elliptic orbits only).
    i : float
        Inclination (rad), in [0, pi].
    raan : float
        Right ascension of the ascending node (rad), stored in [0, 2*pi).
    argp : float
        Argument of perihelion (rad), stored in [0, 2*pi).
    m0 : float
        Mean anomaly (rad) at the reference epoch, stored in [0, 2*pi).
    epoch0 : float
        Reference epoch (days, MJD2000).
    """

    id: str
    a: float
    e: float
    i: float
    raan: float
    argp: float
    m0: float
    epoch0: float

    def __post_init__(self):
        if not self.id:
            raise ValidationError("object id must be non-empty")
        if not (self.a > 0.0):
            raise ValidationError(f"object {self.id}: semi-major axis must be > 0, got {self.a}")
        if not (0.0 <= self.e < 1.0):
            raise UnsupportedOrbitError(
                f"object {self.id}: only elliptic orbits supported (0 <= e < 1), got e={self.e}"
            )
        object.__setattr__(self, "i", wrap_angle(self.i))
        object.__setattr__(self, "raan", wrap_angle(self.raan))
        object.__setattr__(self, "argp", wrap_angle(self.argp))
        object.__setattr__(self, "m0", wrap_angle(self.m0))
        if self.i > math.pi:
            raise UnsupportedOrbitError(
                f"object {self.id}: inclination must lie in [0, pi], got {self.i}"
            )


@dataclass(frozen=True)
class StateVector:
    """Heliocentric Cartesian state: position (AU), velocity (AU/day), epoch (MJD2000)."""

    r: np.ndarray
    v: np.ndarray
    epoch: float

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3).copy()
        v = np.asarray(self.v, dtype=float).reshape(3).copy()
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)
        if not np.linalg.norm(r) > 0.0:
            raise ValidationError("state position must be non-zero")

    def specific_energy(self, mu: float) -> float:
        """v^2/2 - mu/|r|; negative for bound orbits."""
        return 0.5 * float(np.dot(self.v, self.v)) - mu / float(np.linalg.norm(self.r))


@dataclass(frozen=True)
class Catalog:
    """An ordered set of catalog objects sharing one central body."""

    objects: tuple[OrbitalElements, ...]
    mu: float = SUN_MU

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not (self.mu > 0.0):
            raise ValidationError(f"gravitational parameter must be > 0, got {self.mu}")
        seen = set()
        for el in self.objects:
            if el.id in seen:
                raise ValidationError(f"duplicate object id {el.id!r} in catalog")
            seen.add(el.id)

    def __len__(self) -> int:
        return len(self.objects)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(el.id for el in self.objects)

    def get(self, object_id: str) -> OrbitalElements:
        for el in self.objects:
            if el.id == object_id:
                return el
        raise KeyError(f"object id {object_id!r} not in catalog")

    def subset(self, ids) -> "Catalog":
        """Catalog restricted to the given ids, in the given order."""
        return Catalog(objects=tuple(self.get(i) for i in ids), mu=self.mu)


_CATALOG_FIELDS = ("id", "a", "e", "i", "raan", "argp", "M0", "epoch0")


def parse_catalog(source, angle_unit: str = "rad", mu: float = SUN_MU) -> Catalog:
    """Parse a delimited catalog table into a :class:`Catalog`.

    Parameters
    ----------
    source : str or text stream
        Catalog content. Lines starting with ``#`` are comments; an optional
        header line (second field non-numeric) is skipped. Fields may be
        separated by commas or whitespace.
    angle_unit : {"rad", "deg"}
        Unit of the four angle columns in the file.
    mu : float
        Central-body gravitational parameter (AU^3/day^2).

    Raises
    ------
    CatalogParseError
        Malformed row; the message carries the 1-based line number.
    ValidationError
        Duplicate object ids.
    UnsupportedOrbitError
        Eccentricity outside [0, 1) or inclination outside [0, pi].
    """
    if angle_unit not in ("rad", "deg"):
        raise ValidationError(f"angle_unit must be 'rad' or 'deg', got {angle_unit!r}")
    if isinstance(source, str):
        source = io.StringIO(source)
    scale = 1.0 if angle_unit == "rad" else math.pi / 180.0

    objects: list[OrbitalElements] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f for f in line.replace(",", " ").split() if f]
        if len(fields) != len(_CATALOG_FIELDS):
            # Tolerate one header line: every numeric column non-parsable.
            if objects or _looks_like_header(fields):
                if _looks_like_header(fields):
                    continue
            raise CatalogParseError(
                f"line {lineno}: expected {len(_CATALOG_FIELDS)} fields "
                f"({', '.join(_CATALOG_FIELDS)}), got {len(fields)}"
            )
        if _looks_like_header(fields):
            continue
        try:
            values = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise CatalogParseError(f"line {lineno}: {exc}") from None
        a, e, inc, raan, argp, m0, epoch0 = values
        objects.append(
            OrbitalElements(
                id=fields[0],
                a=a,
                e=e,
                i=inc * scale,
                raan=raan * scale,
                argp=argp * scale,
                m0=m0 * scale,
                epoch0=epoch0,
            )
        )
    return Catalog(objects=tuple(objects), mu=mu)


def _looks_like_header(fields) -> bool:
    if len(fields) < 2:
        return False
    try:
        float(fields[1])
    except ValueError:
        return True
    return False


def serialize_catalog(catalog: Catalog) -> str:
    """Render a catalog back to its text form (radians, full precision).

    ``parse_catalog(serialize_catalog(c), "rad")`` round-trips all element
    values bit-exactly.
    """
    lines = ["# id a e i raan argp M0 epoch0  (angles in rad, a in AU, epoch0 in MJD2000)"]
    for el in catalog.objects:
        vals = (el.a, el.e, el.i, el.raan, el.argp, el.m0, el.epoch0)
        lines.append(el.id + "," + ",".join(repr(v) for v in vals))
    return "\n".join(lines) + "\n"


def solve_kepler(mean_anomaly: float, e: float, tol: float = 1e-12, max_iter: int = 50) -> float:
    """Solve Kepler's equation E - e*sin(E) = M for the eccentric anomaly.

    Newton iteration seeded at E = M for e < 0.8 and E = pi otherwise.

    Raises
    ------
    KeplerConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` iterations.
    """
    if not (0.0 <= e < 1.0):
        raise UnsupportedOrbitError(f"eccentricity must lie in [0, 1), got {e}")
    if not math.isfinite(mean_anomaly):
        raise ValidationError(f"mean anomaly must be finite, got {mean_anomaly}")
    m = wrap_angle(mean_anomaly)
    ecc_anom = m if e < 0.8 else math.pi
    for _ in range(max_iter):
        f = ecc_anom - e * math.sin(ecc_anom) - m
        if abs(f) < tol:
            return ecc_anom
        ecc_anom -= f / (1.0 - e * math.cos(ecc_anom))
    f = ecc_anom - e * math.sin(ecc_anom) - m
    if abs(f) < tol:
        return ecc_anom
    raise KeplerConvergenceError(
        f"Kepler iteration did not converge (M={mean_anomaly}, e={e}, residual={f})"
    )


def mean_motion(a: float, mu: float) -> float:
    """Mean motion n = sqrt(mu/a^3) in rad/day."""
    return math.sqrt(mu / (a * a * a))


def period(a: float, mu: float) -> float:
    """Orbital period in days."""
    return TWO_PI / mean_motion(a, mu)


def propagate_to_epoch(el: OrbitalElements, epoch: float, mu: float = SUN_MU) -> StateVector:
    """Cartesian heliocentric state of a catalog object at ``epoch`` (MJD2000).

    Two-body propagation: advance the mean anomaly, solve Kepler's equation,
    build the perifocal state, rotate through argp/i/raan.
    """
    if not (mu > 0.0):
        raise ValidationError(f"gravitational parameter must be > 0, got {mu}")
    m = el.m0 + mean_motion(el.a, mu) * (epoch - el.epoch0)
    ecc_anom = solve_kepler(m, el.e)

    ce, se = math.cos(ecc_anom), math.sin(ecc_anom)
    b_over_a = math.sqrt(1.0 - el.e * el.e)
    # Perifocal position / velocity.
    xp = el.a * (ce - el.e)
    yp = el.a * b_over_a * se
    r_mag = el.a * (1.0 - el.e * ce)
    edot = mean_motion(el.a, mu) * el.a / r_mag  # dE/dt = n a / r
    vxp = -edot * el.a * se
    vyp = edot * el.a * b_over_a * ce

    co, so = math.cos(el.raan), math.sin(el.raan)
    cw, sw = math.cos(el.argp), math.sin(el.argp)
    ci, si = math.cos(el.i), math.sin(el.i)
    # Rotation perifocal -> inertial: R3(-raan) R1(-i) R3(-argp).
    r11 = co * cw - so * sw * ci
    r12 = -co * sw - so * cw * ci
    r21 = so * cw + co * sw * ci
    r22 = -so * sw + co * cw * ci
    r31 = sw * si
    r32 = cw * si

    r = np.array([r11 * xp + r12 * yp, r21 * xp + r22 * yp, r31 * xp + r32 * yp])
    v = np.array([r11 * vxp + r12 * vyp, r21 * vxp + r22 * vyp, r31 * vxp + r32 * vyp])
    return StateVector(r=r, v=v, epoch=epoch)
