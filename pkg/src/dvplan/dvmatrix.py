"""Delta-V matrices: grid construction, stay/wait adjustment, min-plus concatenation.

A delta-V matrix is a d x h grid of extended non-negative reals: rows are
transfer durations, columns are departure epochs, entries are minimum delta-V
in m/s or +inf for unknown/infeasible transfers. +inf is an explicit IEEE
infinity, never a large-finite sentinel.

All operation contracts in this module are 1-based, matching the algebra
(row 1 is the shortest duration, column 1 the earliest departure). The single
documented mapping to internal 0-based numpy storage is
:meth:`DvMatrix.entry`: ``entry(i, j) == values[i-1, j-1]``; every slice-based
implementation below is an equivalent of that mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ephemeris import Catalog, propagate_to_epoch
from .errors import MatrixFormatError, ValidationError
from .lambert import _min_rendezvous_dv_ms


@dataclass(frozen=True)
class GridSpec:
    """Discretization grid shared by a family of delta-V matrices.

    Attributes
    ----------
    t_start : float
        Epoch of the first departure column (days, MJD2000).
    dt_step : float
        Discretization step for both axes (days), > 0.
    d : int
        Number of duration rows, >= 1.
    h : int
        Number of departure columns, >= 1.
    dur_min : float
        Duration of the first row (days). The concatenation and
        wait-adjustment operators additionally require ``dur_min == dt_step``.
    """

    t_start: float
    dt_step: float
    d: int
    h: int
    dur_min: float

    def __post_init__(self):
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "dt_step", float(self.dt_step))
        object.__setattr__(self, "dur_min", float(self.dur_min))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "h", int(self.h))
        if not self.dt_step > 0.0:
            raise ValidationError(f"dt_step must be > 0, got {self.dt_step}")
        if self.d < 1 or self.h < 1:
            raise ValidationError(f"grid must be at least 1x1, got d={self.d}, h={self.h}")
        if not self.dur_min > 0.0:
            raise ValidationError(f"dur_min must be > 0, got {self.dur_min}")

    @property
    def unit_steps(self) -> bool:
        """True when the first-row duration equals the step (algebra precondition)."""
        return self.dur_min == self.dt_step

    def departure_epoch(self, j: int) -> float:
        """Epoch of departure column j (1-based)."""
        return self.t_start + (j - 1) * self.dt_step

    def duration(self, i: int) -> float:
        """Transfer duration of row i (1-based)."""
        return self.dur_min + (i - 1) * self.dt_step

    def arrival_epoch(self, i: int, j: int) -> float:
        return self.departure_epoch(j) + self.duration(i)


def _require_unit_steps(spec: GridSpec, op: str):
    if not spec.unit_steps:
        raise ValidationError(
            f"{op} requires dur_min == dt_step "
            f"(got dur_min={spec.dur_min}, dt_step={spec.dt_step})"
        )


@dataclass(frozen=True)
class DvMatrix:
    """A d x h delta-V grid with its discretization, leg count and object labels.

    ``labels`` is the ordered object-id sequence the matrix represents and has
    length ``leg_count + 1``; a freshly built pork-chop grid has one leg.
    Instances are immutable: ``values`` is a read-only float64 array.
    """

    spec: GridSpec
    values: np.ndarray
    labels: tuple[str, ...]
    leg_count: int = field(default=-1)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.spec.d, self.spec.h):
            raise ValidationError(
                f"values shape {vals.shape} does not match grid {self.spec.d}x{self.spec.h}"
            )
        if np.isnan(vals).any():
            raise ValidationError("matrix entries must not be NaN")
        if (vals < 0.0).any():
            raise ValidationError("matrix entries must be >= 0 or +inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

        labels = tuple(str(l) for l in self.labels)
        object.__setattr__(self, "labels", labels)
        if self.leg_count == -1:
            object.__setattr__(self, "leg_count", len(labels) - 1)
        if len(labels) != self.leg_count + 1 or self.leg_count < 1:
            raise ValidationError(
                f"labels must have length leg_count + 1 >= 2, "
                f"got {len(labels)} labels for {self.leg_count} legs"
            )
        for l in labels:
            if not l or any(c.isspace() for c in l):
                raise ValidationError(f"object label {l!r} must be non-empty without whitespace")

    def entry(self, i: int, j: int) -> float:
        """1-based entry accessor: the canonical contract-to-storage mapping."""
        if not (1 <= i <= self.spec.d and 1 <= j <= self.spec.h):
            raise IndexError(f"entry ({i}, {j}) outside 1..{self.spec.d} x 1..{self.spec.h}")
        return float(self.values[i - 1, j - 1])

    @classmethod
    def infinite(cls, spec: GridSpec, labels) -> "DvMatrix":
        """An all-infinity matrix (every transfer unknown/infeasible)."""
        return cls(spec=spec, values=np.full((spec.d, spec.h), np.inf), labels=tuple(labels))

    def with_values(self, values: np.ndarray) -> "DvMatrix":
        return DvMatrix(spec=self.spec, values=values, labels=self.labels,
                        leg_count=self.leg_count)


def build_porkchop(
    catalog: Catalog,
    from_id: str,
    to_id: str,
    spec: GridSpec,
    max_revolutions: int = 0,
) -> DvMatrix:
    """Sample the rendezvous delta-V pork-chop grid between two catalog objects.

    Entry (i, j) is the minimum two-impulse rendezvous delta-V (m/s) departing
    ``from_id`` at the column-j epoch and arriving at ``to_id`` after the
    row-i duration; +inf marks infeasible/degenerate cases.
    """
    if from_id == to_id:
        raise ValidationError(f"pork-chop endpoints must differ, got {from_id!r} twice")
    dep_el = catalog.get(from_id)
    arr_el = catalog.get(to_id)
    mu = catalog.mu

    # Departure epochs land on the column grid; arrival epochs depend on
    # i + j only, so both state sets are cached per grid index.
    dep_states = []
    for j in range(1, spec.h + 1):
        s = propagate_to_epoch(dep_el, spec.departure_epoch(j), mu)
        dep_states.append((tuple(s.r), tuple(s.v)))
    arr_states = {}
    for idx in range(2, spec.d + spec.h + 1):
        epoch = spec.t_start + (idx - 2) * spec.dt_step + spec.dur_min
        s = propagate_to_epoch(arr_el, epoch, mu)
        arr_states[idx] = (tuple(s.r), tuple(s.v))

    values = np.empty((spec.d, spec.h))
    for i in range(1, spec.d + 1):
        tof = spec.duration(i)
        row = values[i - 1]
        for j in range(1, spec.h + 1):
            r1, v1 = dep_states[j - 1]
            r2, v2 = arr_states[i + j]
            row[j - 1] = _min_rendezvous_dv_ms(r1, v1, r2, v2, tof, mu, max_revolutions)
    return DvMatrix(spec=spec, values=values, labels=(from_id, to_id))


def stay_adjust(m: DvMatrix, t_s: int) -> DvMatrix:
    """Shift a matrix for a mandatory stay of ``t_s`` steps at the departure object.

    out(i, j) = m(i - t_s, j + t_s) where defined, +inf elsewhere: a cell of
    the result nominally departs at column j but actually departs t_s steps
    later and flies t_s steps less, so recorded arrival epochs are preserved.
    """
    if t_s < 0:
        raise ValidationError(f"stay time must be >= 0 steps, got {t_s}")
    if t_s == 0:
        return m
    d, h = m.spec.d, m.spec.h
    out = np.full((d, h), np.inf)
    if t_s < d and t_s < h:
        out[t_s:, : h - t_s] = m.values[: d - t_s, t_s:]
    return m.with_values(out)


def augment_for_stay(m: DvMatrix, t_s: int) -> DvMatrix:
    """Grow a matrix by ``t_s`` steps so a subsequent stay shift loses nothing.

    Returns a (d + t_s) x (h + t_s) matrix: +inf columns on the left (the
    grid start moves t_s steps earlier) and +inf rows after the longest
    duration. ``stay_adjust(augment_for_stay(m, t_s), t_s)`` carries every
    finite entry of ``m``.
    """
    if t_s < 0:
        raise ValidationError(f"stay time must be >= 0 steps, got {t_s}")
    if t_s == 0:
        return m
    d, h = m.spec.d, m.spec.h
    out = np.full((d + t_s, h + t_s), np.inf)
    out[:d, t_s:] = m.values
    spec = GridSpec(
        t_start=m.spec.t_start - t_s * m.spec.dt_step,
        dt_step=m.spec.dt_step,
        d=d + t_s,
        h=h + t_s,
        dur_min=m.spec.dur_min,
    )
    return DvMatrix(spec=spec, values=out, labels=m.labels, leg_count=m.leg_count)


def wait_adjust(m: DvMatrix) -> DvMatrix:
    """Fold optional waiting into a matrix: each cell becomes the cheapest
    transfer with the same nominal departure and total duration.

    out(i, j) = min over t_w in [0, min(i-1, h-j)] of m(i - t_w, j + t_w):
    the running minimum along the anti-diagonal toward later departure and
    shorter flight. Single O(d*h) sweep; row i needs only row i-1 of the
    output, so the recurrence is out(i, j) = min(m(i, j), out(i-1, j+1)).
    """
    _require_unit_steps(m.spec, "wait_adjust")
    d, h = m.spec.d, m.spec.h
    out = m.values.copy()
    for i in range(1, d):
        np.minimum(out[i, : h - 1], out[i - 1, 1:], out=out[i, : h - 1])
    return m.with_values(out)


def direct_concat(a: DvMatrix, b: DvMatrix) -> DvMatrix:
    """Min-plus concatenation of two leg matrices (the structure-preserving sum).

    out(i, j) = min over k in 1..min(h-j, i-1) of a(k, j) + b(i-k, j+k);
    +inf when the range is empty. The first leg flies k steps from column j,
    the second departs at column j+k and flies the remaining i-k steps.
    Row 1 and column h of the result are therefore always +inf.
    """
    if a.spec != b.spec:
        raise ValidationError(f"grid specs differ: {a.spec} vs {b.spec}")
    _require_unit_steps(a.spec, "direct_concat")
    if a.labels[-1] != b.labels[0]:
        raise ValidationError(
            f"label chains do not connect: {a.labels[-1]!r} != {b.labels[0]!r}"
        )
    d, h = a.spec.d, a.spec.h
    av, bv = a.values, b.values
    out = np.full((d, h), np.inf)
    useful_rows = np.isfinite(av).any(axis=1)  # all-inf k rows contribute nothing
    for k in range(1, min(d - 1, h - 1) + 1):
        if not useful_rows[k - 1]:
            continue
        # k is the first-leg duration index: contributes to cells with
        # i >= k + 1 and j <= h - k.
        cand = av[k - 1, None, : h - k] + bv[: d - k, k:]
        np.minimum(out[k:, : h - k], cand, out=out[k:, : h - k])
    return DvMatrix(
        spec=a.spec,
        values=out,
        labels=a.labels + b.labels[1:],
        leg_count=a.leg_count + b.leg_count,
    )


def concat_chain(matrices) -> DvMatrix:
    """Left fold of :func:`direct_concat` over a sequence of matrices."""
    matrices = list(matrices)
    if not matrices:
        raise ValidationError("cannot concatenate an empty chain")
    acc = matrices[0]
    for m in matrices[1:]:
        acc = direct_concat(acc, m)
    return acc


def matrix_min(m: DvMatrix) -> tuple[float, int, int]:
    """Smallest entry with its 1-based indices.

    Ties break to the smallest i, then smallest j; an all-infinity matrix
    reports (+inf, 1, 1).
    """
    flat = int(np.argmin(m.values))  # row-major argmin == (min i, then min j) tie rule
    i, j = divmod(flat, m.spec.h)
    return float(m.values[i, j]), i + 1, j + 1


def check_time_adjusted(m: DvMatrix) -> bool:
    """True iff m(i, j) <= m(i-1, j+1) everywhere (the wait-adjusted property).

    Infinity compares by IEEE rules: x <= inf and inf <= inf hold,
    inf <= finite does not. Degenerate 1-row/1-column grids are vacuously
    time-adjusted.
    """
    d, h = m.spec.d, m.spec.h
    if d < 2 or h < 2:
        return True
    return bool(np.all(m.values[1:, : h - 1] <= m.values[:-1, 1:]))


# -- persistence -------------------------------------------------------------

_DOC_MAGIC = "dvmatrix 1"


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def serialize(m: DvMatrix) -> str:
    """Render a matrix to its self-describing text document.

    Metadata header (one ``key value`` pair per line) followed by a
    ``values`` marker and d rows of h space-separated entries; +inf is the
    token ``inf``, finite entries use full round-trip double precision.
    """
    lines = [
        _DOC_MAGIC,
        f"t_start {repr(m.spec.t_start)}",
        f"dt_step {repr(m.spec.dt_step)}",
        f"dur_min {repr(m.spec.dur_min)}",
        f"d {m.spec.d}",
        f"h {m.spec.h}",
        f"leg_count {m.leg_count}",
        "labels " + " ".join(m.labels),
        "values",
    ]
    for row in m.values:
        lines.append(" ".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def deserialize(document: str) -> DvMatrix:
    """Parse a matrix document produced by :func:`serialize`.

    Raises :class:`MatrixFormatError` naming the offending field on malformed
    input; a document with negative entries fails matrix validation.
    """
    lines = [ln.strip() for ln in document.splitlines() if ln.strip()]
    if not lines or lines[0] != _DOC_MAGIC:
        raise MatrixFormatError(f"missing document header {_DOC_MAGIC!r}")

    meta: dict[str, str] = {}
    idx = 1
    while idx < len(lines) and lines[idx] != "values":
        key, _, rest = lines[idx].partition(" ")
        if not rest:
            raise MatrixFormatError(f"malformed metadata line {lines[idx]!r}")
        meta[key] = rest
        idx += 1
    if idx >= len(lines):
        raise MatrixFormatError("missing 'values' section")

    def need(key: str) -> str:
        if key not in meta:
            raise MatrixFormatError(f"missing field {key!r}")
        return meta[key]

    def need_float(key: str) -> float:
        try:
            return float(need(key))
        except ValueError:
            raise MatrixFormatError(f"field {key!r} is not a number: {meta[key]!r}") from None

    def need_int(key: str) -> int:
        try:
            return int(need(key))
        except ValueError:
            raise MatrixFormatError(f"field {key!r} is not an integer: {meta[key]!r}") from None

    spec = GridSpec(
        t_start=need_float("t_start"),
        dt_step=need_float("dt_step"),
        d=need_int("d"),
        h=need_int("h"),
        dur_min=need_float("dur_min"),
    )
    leg_count = need_int("leg_count")
    labels = tuple(need("labels").split())

    rows = lines[idx + 1:]
    if len(rows) != spec.d:
        raise MatrixFormatError(f"field 'values' has {len(rows)} rows, expected {spec.d}")
    values = np.empty((spec.d, spec.h))
    for r, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != spec.h:
            raise MatrixFormatError(
                f"field 'values' row {r + 1} has {len(tokens)} entries, expected {spec.h}"
            )
        try:
            values[r] = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise MatrixFormatError(f"field 'values' row {r + 1}: {exc}") from None
    return DvMatrix(spec=spec, values=values, labels=labels, leg_count=leg_count)


# -- exports ----------------------------------------------------------------

def export_csv(m: DvMatrix) -> str:
    """CSV of (departure epoch MJD2000, duration days, delta-V m/s) triples,
    departure-major; +inf is written as ``inf``."""
    lines = ["departure_epoch_mjd2000,duration_days,dv_ms"]
    for j in range(1, m.spec.h + 1):
        epoch = m.spec.departure_epoch(j)
        for i in range(1, m.spec.d + 1):
            lines.append(f"{epoch!r},{m.spec.duration(i)!r},{_fmt(m.values[i - 1, j - 1])}")
    return "\n".join(lines) + "\n"


def export_pgm(m: DvMatrix, cap_ms: float | None = None) -> str:
    """8-bit ASCII PGM (P2) with log-scaled intensity.

    Intensity = round(255 * log1p(dv) / log1p(cap)): 0 (black) for free
    transfers, 255 (white) at or above the saturation cap and for +inf.
    The cap defaults to the largest finite entry and is recorded in a PGM
    comment. Rows are written longest-duration first so the image is oriented
    like a pork-chop plot (duration increasing upward).
    """
    finite = m.values[np.isfinite(m.values)]
    if cap_ms is None:
        cap_ms = float(finite.max()) if finite.size else 1.0
    if not cap_ms > 0.0:
        raise ValidationError(f"saturation cap must be > 0, got {cap_ms}")
    scale = 255.0 / math.log1p(cap_ms)
    with np.errstate(invalid="ignore"):
        gray = np.where(
            np.isfinite(m.values),
            np.clip(np.round(np.log1p(np.clip(m.values, 0.0, cap_ms)) * scale), 0, 255),
            255.0,
        ).astype(int)
    lines = [
        "P2",
        f"# dv porkchop, cap_ms={cap_ms!r}, black=0 m/s, white>=cap or infeasible",
        f"{m.spec.h} {m.spec.d}",
        "255",
    ]
    for row in gray[::-1]:
        lines.append(" ".join(str(v) for v in row))
    return "\n".join(lines) + "\n"
