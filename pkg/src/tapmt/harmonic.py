"""
Harmonic tidal model.

The sea level is modelled as an intercept, an optional linear trend and a sum
of cosines at fixed constituent frequencies::

    y(t) = a0 + a1 t + sum_k A_k cos(sigma_k t + phi_k)
         = a0 + a1 t + sum_k B_k cos(sigma_k t) + C_k sin(sigma_k t)

Analysis solves the real (B, C) form by ordinary least squares and converts
each pair to amplitude/phase. Prediction evaluates the amplitude/phase form.

Units: time in hours, elevation in metres, frequency in radians per hour,
phase in degrees in [0, 360).

``TapEngine`` carries the whole analysis/prediction pipeline. It accepts an
optional ``fault`` id that activates exactly one seeded defect (see
:mod:`tapmt.mutants`); with ``fault=None`` every fault point is inert and the
module-level functions below delegate to a reference instance.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    CatalogMissError,
    IllConditionedError,
    InvalidInputError,
    UnderDeterminedError,
)

TWO_PI = 2.0 * math.pi

# Periods in hours. M2 is pinned at 12 h 25.2 min; the remaining entries are
# derived from the standard angular speeds (degrees per hour).
_SPEEDS_DEG_PER_HOUR = {
    "N2": 28.4397295,
    "K2": 30.0821373,
    "K1": 15.0410686,
    "O1": 13.9430356,
    "P1": 14.9589314,
    "Q1": 13.3986609,
    "M4": 57.9682084,
    "MS4": 58.9841042,
    "M6": 86.9523127,
}
PERIODS_HOURS = {
    "M2": 12.0 + 25.2 / 60.0,
    "S2": 12.0,
    **{name: 360.0 / speed for name, speed in _SPEEDS_DEG_PER_HOUR.items()},
}


class RayleighWarning(UserWarning):
    """Two constituents are not separable over the record length."""


# -----------------------------------------------------------------------------
# Domain types
# -----------------------------------------------------------------------------

def _as_float_array(values, name):
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Paired (time, elevation) samples.

    Times are not required to be sorted: permuted series are legitimate
    engine inputs. Monotonicity is enforced only when parsing CSV files.
    """

    times: np.ndarray
    elevations: np.ndarray

    def __post_init__(self):
        t = _as_float_array(self.times, "times")
        y = _as_float_array(self.elevations, "elevations")
        if t.size == 0:
            raise InvalidInputError("time series must contain at least one sample")
        if t.size != y.size:
            raise InvalidInputError(
                f"times ({t.size}) and elevations ({y.size}) differ in length"
            )
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "elevations", y)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.elevations, other.elevations
        )

    def __repr__(self):
        return f"TimeSeries(M={len(self)}, t=[{self.times[0]:g}..{self.times[-1]:g}])"


@dataclass(frozen=True)
class Constituent:
    name: str
    frequency: float  # rad/h

    def __post_init__(self):
        f = float(self.frequency)
        if not (math.isfinite(f) and f > 0):
            raise InvalidInputError(
                f"constituent {self.name!r}: frequency must be positive, got {f}"
            )
        object.__setattr__(self, "frequency", f)

    @property
    def period(self) -> float:
        return TWO_PI / self.frequency


@dataclass(frozen=True)
class ConstituentSet:
    members: tuple[Constituent, ...] = ()

    def __post_init__(self):
        members = tuple(self.members)
        names = [c.name for c in members]
        if len(set(names)) != len(names):
            raise InvalidInputError(f"duplicate constituent names in {names}")
        freqs = [c.frequency for c in members]
        if len(set(freqs)) != len(freqs):
            raise InvalidInputError(f"duplicate constituent frequencies in {names}")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "ConstituentSet":
        return cls(tuple(constituent_frequency(n) for n in names))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.members)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([c.frequency for c in self.members], dtype=float)


@dataclass(frozen=True)
class FitConfig:
    include_trend: bool = True
    min_conditioning: float = 1e-10
    rayleigh_check: bool = True

    def __post_init__(self):
        if not (0.0 < self.min_conditioning < 1.0):
            raise InvalidInputError(
                f"min_conditioning must lie in (0, 1), got {self.min_conditioning}"
            )


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Observation-per-row regression matrix ``[1, t, cos, sin, ...]``."""

    values: np.ndarray
    include_trend: bool
    constituents: ConstituentSet

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def offset(self) -> int:
        """Column index of the first cosine column."""
        return 2 if self.include_trend else 1


@dataclass(frozen=True, eq=False)
class RawCoefficients:
    """Least-squares coefficients of the (B, C) form."""

    beta: np.ndarray
    a0: float
    a1: float | None
    B: np.ndarray
    C: np.ndarray
    rcond: float = float("nan")


@dataclass(frozen=True, eq=False)
class TidalSolution:
    """Fitted intercept, trend and per-constituent amplitude/phase.

    ``epoch`` is the time origin the phases refer to. The reference engine
    always reports phases relative to t = 0.
    """

    a0: float
    a1: float
    constituents: ConstituentSet
    amplitudes: np.ndarray
    phases: np.ndarray
    epoch: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float).reshape(-1)
        phs = np.array(self.phases, dtype=float).reshape(-1)
        if amps.size != len(self.constituents) or phs.size != len(self.constituents):
            raise InvalidInputError("amplitude/phase count must match constituents")
        amps.setflags(write=False)
        phs.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phs)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a1", float(self.a1))
        object.__setattr__(self, "epoch", float(self.epoch))

    def __eq__(self, other):
        if not isinstance(other, TidalSolution):
            return NotImplemented
        return (
            self.a0 == other.a0
            and self.a1 == other.a1
            and self.epoch == other.epoch
            and self.constituents == other.constituents
            and np.array_equal(self.amplitudes, other.amplitudes)
            and np.array_equal(self.phases, other.phases)
        )

    __hash__ = None

    def amplitude(self, name: str) -> float:
        return float(self.amplitudes[self.constituents.names.index(name)])

    def phase(self, name: str) -> float:
        return float(self.phases[self.constituents.names.index(name)])

    def replace(self, **changes) -> "TidalSolution":
        fields = dict(
            a0=self.a0,
            a1=self.a1,
            constituents=self.constituents,
            amplitudes=self.amplitudes,
            phases=self.phases,
            epoch=self.epoch,
        )
        fields.update(changes)
        return TidalSolution(**fields)

    def to_dict(self) -> dict:
        return {
            "a0": self.a0,
            "a1": self.a1,
            "epoch_h": self.epoch,
            "constituents": [
                {
                    "name": c.name,
                    "frequency": c.frequency,
                    "amplitude": float(a),
                    "phase_deg": float(p),
                }
                for c, a, p in zip(self.constituents, self.amplitudes, self.phases)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TidalSolution":
        try:
            entries = doc["constituents"]
            members = []
            for e in entries:
                if "frequency" in e:
                    members.append(Constituent(e["name"], float(e["frequency"])))
                else:
                    members.append(constituent_frequency(e["name"]))
            return cls(
                a0=float(doc["a0"]),
                a1=float(doc.get("a1", 0.0)),
                constituents=ConstituentSet(tuple(members)),
                amplitudes=[float(e["amplitude"]) for e in entries],
                phases=[float(e["phase_deg"]) for e in entries],
                epoch=float(doc.get("epoch_h", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed solution document: {exc}") from exc

    def __repr__(self):
        parts = ", ".join(
            f"{n}: A={a:.6g} phi={p:.6g}"
            for n, a, p in zip(self.constituents.names, self.amplitudes, self.phases)
        )
        return f"TidalSolution(a0={self.a0:.6g}, a1={self.a1:.6g}, {parts})"


# -----------------------------------------------------------------------------
# Catalog
# -----------------------------------------------------------------------------

def constituent_frequency(name: str) -> Constituent:
    """Look up a constituent in the built-in catalog."""
    try:
        period = PERIODS_HOURS[name]
    except KeyError:
        raise CatalogMissError("constituent", name) from None
    return Constituent(name, TWO_PI / period)


def normalize_degrees(phi):
    """Map angles in degrees onto [0, 360)."""
    out = np.mod(phi, 360.0)
    # np.mod(-1e-17, 360) rounds to 360.0
    return np.where(out >= 360.0, 0.0, out)


def circular_distance(a, b):
    """Smallest absolute difference between two angles in degrees."""
    d = np.abs(np.mod(np.asarray(a, dtype=float) - b, 360.0))
    return np.minimum(d, 360.0 - d)


# -----------------------------------------------------------------------------
# Engine
# -----------------------------------------------------------------------------

class TapEngine:
    """Tidal analysis and prediction engine.

    Parameters
    ----------
    fault : str, optional
        Id of a seeded fault to activate. ``None`` gives the reference
        behaviour. Unknown ids are accepted here and simply never match a
        fault point; use :func:`tapmt.mutants.with_mutant` for validated
        construction.
    """

    def __init__(self, fault: str | None = None):
        self.fault = fault

    def __repr__(self):
        return f"TapEngine(fault={self.fault!r})"

    def _on(self, site: str) -> bool:
        return self.fault == site

    # -- design matrix ------------------------------------------------------
    def design_matrix(
        self, times, constituents: ConstituentSet, include_trend: bool
    ) -> DesignMatrix:
        t = _as_float_array(times, "times")
        if t.size == 0:
            raise InvalidInputError("times must be non-empty")
        cols = [np.ones_like(t)]
        if include_trend or self._on("trend_always_on"):
            if self._on("trend_column_squared"):
                cols.append(t * t)
            elif self._on("time_roll"):
                cols.append(np.roll(t, 1))
            else:
                cols.append(t)
        freqs = constituents.frequencies
        for k, sigma in enumerate(freqs):
            if self._on("frequency_index"):
                sigma = freqs[(k + 1) % len(freqs)]
            if self._on("sum_for_product"):
                arg = sigma + t
            else:
                arg = sigma * t
            cols.append(np.cos(arg))
            cols.append(np.sin(arg))
        return DesignMatrix(np.column_stack(cols), bool(include_trend), constituents)

    # -- least squares ------------------------------------------------------
    def fit(
        self, X: DesignMatrix, y, min_conditioning: float = 1e-10
    ) -> RawCoefficients:
        A = X.values
        y = _as_float_array(y, "elevations")
        if A.shape[0] != y.size:
            raise InvalidInputError(
                f"design matrix has {A.shape[0]} rows but y has {y.size} values"
            )
        if self._on("last_sample_dropped"):
            A, y = A[:-1], y[:-1]
        m, p = A.shape
        too_few = m <= p if self._on("underdetermined_cmp") else m < p
        if too_few:
            raise UnderDeterminedError(m, p)

        rcond = reciprocal_condition(A)
        if not self._on("conditioning_if_none"):
            bad = rcond > min_conditioning if self._on("rcond_cmp") else rcond < min_conditioning
            if bad or not np.isfinite(rcond):
                raise IllConditionedError(rcond, min_conditioning)

        # Scaling y keeps the triangular solve in O(1) range; it is undone below.
        scale = float(np.max(np.abs(y)))
        if scale == 0.0 or self._on("scale_disabled"):
            scale = 1.0
        Q, R = np.linalg.qr(A, mode="reduced")
        beta = solve_triangular(R, Q.T @ (y / scale))
        beta = beta / scale if self._on("unscale_divide") else beta * scale

        off = X.offset
        if X.include_trend:
            a0 = beta[1] if self._on("intercept_index") else beta[0]
            a1 = beta[0] if self._on("trend_index") else beta[1]
        else:
            a0, a1 = beta[0], None
        n = len(X.constituents)
        if self._on("bc_index_swap"):
            B, C = beta[off + 1 : off + 2 * n : 2], beta[off : off + 2 * n : 2]
        else:
            B, C = beta[off : off + 2 * n : 2], beta[off + 1 : off + 2 * n : 2]
        if self._on("a1_sign") and a1 is not None:
            a1 = -a1
        return RawCoefficients(
            beta=beta, a0=float(a0), a1=None if a1 is None else float(a1),
            B=np.array(B), C=np.array(C), rcond=rcond,
        )

    # -- polar form ---------------------------------------------------------
    def to_polar(self, B, C):
        B = np.asarray(B, dtype=float)
        C = np.asarray(C, dtype=float)
        if self._on("amp_sum_not_squares"):
            with np.errstate(invalid="ignore"):
                amp = np.sqrt(B + C)
        else:
            amp = np.hypot(B, C)
        if self._on("amplitude_times_2"):
            amp = amp * 2.0

        if self._on("phase_sign"):
            phi = np.degrees(np.arctan2(C, B))
        elif self._on("quadrant_cmp"):
            with np.errstate(divide="ignore", invalid="ignore"):
                phi = np.degrees(np.arctan(-C / B)) + np.where(B > 0, 180.0, 0.0)
        elif self._on("phase_in_radians"):
            phi = np.arctan2(-C, B)
        else:
            phi = np.degrees(np.arctan2(-C, B))

        if self._on("phase_zero_branch"):
            amp = np.zeros_like(amp)
            phi = np.zeros_like(phi)
        elif self._on("zero_amp_cmp"):
            phi = np.where(amp != 0.0, 0.0, phi)
        else:
            phi = np.where(amp == 0.0, 0.0, phi)

        if self._on("normalize_if_false"):
            pass
        elif self._on("wrap_cmp"):
            phi = np.where(phi > 0, phi + 360.0, phi)
        else:
            phi = normalize_degrees(phi)
        return amp, phi

    # -- analysis -----------------------------------------------------------
    def analyze(
        self,
        series: TimeSeries,
        constituents: ConstituentSet,
        config: FitConfig = FitConfig(),
    ) -> TidalSolution:
        if len(constituents) == 0:
            raise InvalidInputError("constituent set is empty")
        trend = config.include_trend
        if self._on("trend_never"):
            trend = False
        elif self._on("trend_flag_negated"):
            trend = not trend
        t = series.times
        n_params = (2 if trend else 1) + 2 * len(constituents)
        if len(series) < n_params:
            raise UnderDeterminedError(len(series), n_params)

        if config.rayleigh_check:
            _rayleigh_check(t, constituents, inverted=self._on("rayleigh_cmp"))

        X = self.design_matrix(t, constituents, trend)
        raw = self.fit(X, series.elevations, config.min_conditioning)
        amp, phi = self.to_polar(raw.B, raw.C)

        epoch = 0.0
        if self._on("phase_ref_defect"):
            # phases referenced to the end of the record
            epoch = float(np.max(t))
            phi = normalize_degrees(phi + np.degrees(constituents.frequencies * epoch))
        return TidalSolution(
            a0=raw.a0,
            a1=raw.a1 if raw.a1 is not None else 0.0,
            constituents=constituents,
            amplitudes=amp,
            phases=phi,
            epoch=epoch,
        )

    # -- prediction ---------------------------------------------------------
    def predict(self, solution: TidalSolution, times) -> TimeSeries:
        t = _as_float_array(times, "times")
        y = solution.a0 + solution.a1 * t
        sign = -1.0 if self._on("predict_phase_sign") else 1.0
        for c, amp, phi in zip(solution.constituents, solution.amplitudes, solution.phases):
            y = y + amp * np.cos(c.frequency * (t - solution.epoch) + sign * np.radians(phi))
        return TimeSeries(t, y)


def _rayleigh_check(t, constituents, inverted=False):
    span = float(np.max(t) - np.min(t))
    freqs = constituents.frequencies
    names = constituents.names
    for i in range(len(freqs)):
        for j in range(i + 1, len(freqs)):
            close = abs(freqs[i] - freqs[j]) * span < TWO_PI
            if close != inverted:
                warnings.warn(
                    f"{names[i]} and {names[j]} are not resolvable over a "
                    f"{span:g} h record (Rayleigh criterion)",
                    RayleighWarning,
                    stacklevel=3,
                )


def reciprocal_condition(A) -> float:
    """Reciprocal 2-norm condition number of ``A`` after unit-norm column
    equilibration, so that a long time axis alone does not look singular."""
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        return 0.0
    s = np.linalg.svd(A / norms, compute_uv=False)
    return float(s[-1] / s[0])


REFERENCE = TapEngine()


def build_design_matrix(times, constituents: ConstituentSet, include_trend: bool = True) -> DesignMatrix:
    """Rows ``[1, t_j, cos s1 t_j, sin s1 t_j, ...]``; no t column without trend."""
    return REFERENCE.design_matrix(times, constituents, include_trend)


def ols_fit(X: DesignMatrix, y, min_conditioning: float = 1e-10) -> RawCoefficients:
    """Least-squares coefficients via Householder QR.

    Raises
    ------
    UnderDeterminedError
        Fewer rows than columns.
    IllConditionedError
        Equilibrated reciprocal condition number below ``min_conditioning``.
    """
    return REFERENCE.fit(X, y, min_conditioning)


def raw_to_polar(B, C):
    """Convert ``B cos + C sin`` to ``A cos(. + phi)``; phi in degrees.

    Works on scalars or arrays. ``(0, 0)`` maps to ``(0, 0)``.
    """
    amp, phi = REFERENCE.to_polar(B, C)
    if np.ndim(amp) == 0:
        return float(amp), float(phi)
    return amp, phi


def analyze(series: TimeSeries, constituents: ConstituentSet, config: FitConfig = FitConfig()) -> TidalSolution:
    return REFERENCE.analyze(series, constituents, config)


def predict(solution: TidalSolution, times) -> TimeSeries:
    return REFERENCE.predict(solution, times)


# -----------------------------------------------------------------------------
# File formats
# -----------------------------------------------------------------------------

CSV_HEADER = ("time_hours", "elevation_m")


def write_csv(series: TimeSeries, path_or_buf) -> None:
    def _write(fh):
        fh.write(",".join(CSV_HEADER) + "\n")
        for t, y in zip(series.times, series.elevations):
            fh.write(f"{float(t)!r},{float(y)!r}\n")

    if hasattr(path_or_buf, "write"):
        _write(path_or_buf)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="\n") as fh:
            _write(fh)


def read_csv(path_or_buf) -> TimeSeries:
    """Parse the ``time_hours,elevation_m`` CSV format.

    Errors name the offending line (1-based, header is line 1).
    """
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InvalidInputError("line 1: empty file, expected header") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise InvalidInputError(
            f"line 1: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
        )
    times, elevations = [], []
    for row in reader:
        line_no = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise InvalidInputError(f"line {line_no}: expected 2 fields, got {len(row)}")
        try:
            t, y = float(row[0]), float(row[1])
        except ValueError:
            raise InvalidInputError(f"line {line_no}: non-numeric field in {row!r}") from None
        if not (math.isfinite(t) and math.isfinite(y)):
            raise InvalidInputError(f"line {line_no}: non-finite value")
        if times and t < times[-1]:
            raise InvalidInputError(
                f"line {line_no}: time {t!r} precedes previous time {times[-1]!r}"
            )
        times.append(t)
        elevations.append(y)
    if not times:
        raise InvalidInputError("no samples after header")
    return TimeSeries(times, elevations)


def write_solution(solution: TidalSolution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(solution.to_dict(), fh, indent=2)
        fh.write("\n")


def read_solution(path) -> TidalSolution:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    return TidalSolution.from_dict(doc)
