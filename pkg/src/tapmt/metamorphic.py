"""
Metamorphic relations for tidal analysis engines.

Each relation builds a follow-up input from a source input (and, where
needed, the engine's own source output) and states what the follow-up
output must look like:

===== ============================== =========================================
MR    follow-up input                 expected follow-up output
===== ============================== =========================================
MR1   append a predicted point        identical solution
MR2   negate elevations               a0, a1 negated; amplitude kept (N = 1)
MR3   add h to elevations             a0 + h; everything else identical
MR4   scale elevations by gamma > 0   a0, a1, amplitudes scaled; phases kept
MR5   swap two samples                identical solution
MR6   subtract the fitted wave        amplitude 0 (single wave, no trend)
MR7   shift times by one period       a0 - 2 pi a1 / sigma; rest identical
===== ============================== =========================================

Verdicts are decided in two stages: the follow-up must report the same
constituent names as the source, then every constrained quantity must match
within an absolute tolerance in its own unit.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EngineError, PreconditionError, TapError
from .harmonic import (
    REFERENCE,
    ConstituentSet,
    FitConfig,
    TidalSolution,
    TimeSeries,
    circular_distance,
    constituent_frequency,
)
from .signals import derive_seed, generate, make_rng, random_campaign_spec


class MRId(str, enum.Enum):
    MR1 = "MR1"
    MR2 = "MR2"
    MR3 = "MR3"
    MR4 = "MR4"
    MR5 = "MR5"
    MR6 = "MR6"
    MR7 = "MR7"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> list["MRId"]:
        """Parse ``"MR1,MR4"`` (or ``"all"``) into relation ids."""
        if text.strip().lower() == "all":
            return list(cls)
        out = []
        for part in text.split(","):
            part = part.strip().upper()
            if not part:
                continue
            try:
                out.append(cls(part))
            except ValueError:
                raise PreconditionError(f"unknown metamorphic relation {part!r}") from None
        if not out:
            raise PreconditionError("no metamorphic relations selected")
        return out


ALL_MRS = tuple(MRId)

TREND_CONFIG = FitConfig(include_trend=True)
NO_TREND_CONFIG = FitConfig(include_trend=False)


def source_config(mr: MRId) -> FitConfig:
    """Fit configuration the source case of ``mr`` is run with."""
    return NO_TREND_CONFIG if MRId(mr) is MRId.MR6 else TREND_CONFIG


@dataclass(frozen=True)
class Tolerance:
    """Absolute tolerances per quantity class, in native units."""

    intercept: float = 0.01  # m
    trend: float = 0.01  # m/h
    amplitude: float = 0.01  # m
    phase: float = 0.01  # degrees

    def __post_init__(self):
        for name in ("intercept", "trend", "amplitude", "phase"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"tolerance {name} must be positive")

    @classmethod
    def uniform(cls, value: float) -> "Tolerance":
        return cls(value, value, value, value)

    def scaled(self, factor: float) -> "Tolerance":
        return Tolerance(
            self.intercept * factor, self.trend * factor,
            self.amplitude * factor, self.phase * factor,
        )

    def to_dict(self):
        return {
            "intercept": self.intercept, "trend": self.trend,
            "amplitude": self.amplitude, "phase": self.phase,
        }


@dataclass(frozen=True, eq=False)
class CaseInput:
    series: TimeSeries
    constituents: ConstituentSet
    config: FitConfig = TREND_CONFIG


@dataclass(frozen=True)
class MRParams:
    """Transformation parameters shared by all relations of one case."""

    h: float = 1.0
    gamma: float = 2.0
    swap: tuple[int, int] = (0, 1)
    append_time: float | None = None  # None: last time + step


APPEND_MODES = ("next", "random_in", "random_out")


def draw_params(rng: np.random.Generator, series: TimeSeries, append_mode: str = "next") -> MRParams:
    """Sample h in [-5, 5] m, gamma in [0.1, 10], two distinct swap indices
    and the MR1 insertion time."""
    if append_mode not in APPEND_MODES:
        raise PreconditionError(f"append_mode must be one of {APPEND_MODES}")
    h = float(rng.uniform(-5.0, 5.0))
    gamma = float(rng.uniform(0.1, 10.0))
    m = len(series)
    if m >= 2:
        i, j = (int(v) for v in rng.choice(m, size=2, replace=False))
    else:
        i = j = 0
    t = series.times
    t_lo, t_hi = float(t.min()), float(t.max())
    u = float(rng.uniform())
    if append_mode == "random_in":
        append_time = t_lo + u * (t_hi - t_lo)
    elif append_mode == "random_out":
        append_time = t_hi + u * max(t_hi - t_lo, 1.0)
    else:
        append_time = None
    return MRParams(h=h, gamma=gamma, swap=(i, j), append_time=append_time)


def _default_append_time(series: TimeSeries) -> float:
    t = series.times
    step = float(t[-1] - t[-2]) if t.size >= 2 else 1.0
    if step <= 0:
        step = 1.0
    return float(t[-1]) + step


def _require_single(mr, source_input: CaseInput, trend: bool):
    if len(source_input.constituents) != 1:
        raise PreconditionError(f"{mr} requires exactly one constituent")
    if source_input.config.include_trend != trend:
        state = "with" if trend else "without"
        raise PreconditionError(f"{mr} requires a fit {state} a trend")


def mr_followup(
    mr: MRId,
    source_input: CaseInput,
    source_output: TidalSolution,
    params: MRParams = MRParams(),
    engine=REFERENCE,
) -> CaseInput:
    """Build the follow-up input of ``mr``.

    MR1 and MR6 need a prediction; it is taken from ``engine.predict`` so the
    system under test is exercised in both of its modes.
    """
    mr = MRId(mr)
    s = source_input.series
    t, y = s.times, s.elevations
    if mr is MRId.MR1:
        t_new = params.append_time
        if t_new is None:
            t_new = _default_append_time(s)
        y_new = engine.predict(source_output, [t_new]).elevations[0]
        series = TimeSeries(np.append(t, t_new), np.append(y, y_new))
    elif mr is MRId.MR2:
        series = TimeSeries(t, -y)
    elif mr is MRId.MR3:
        series = TimeSeries(t, y + params.h)
    elif mr is MRId.MR4:
        if not params.gamma > 0:
            raise PreconditionError("MR4 requires gamma > 0")
        series = TimeSeries(t, params.gamma * y)
    elif mr is MRId.MR5:
        i, j = params.swap
        order = np.arange(len(s))
        order[[i, j]] = order[[j, i]]
        series = TimeSeries(t[order], y[order])
    elif mr is MRId.MR6:
        _require_single(mr, source_input, trend=False)
        wave = source_output.replace(a0=0.0, a1=0.0)
        series = TimeSeries(t, y - engine.predict(wave, t).elevations)
    elif mr is MRId.MR7:
        _require_single(mr, source_input, trend=True)
        sigma = source_input.constituents[0].frequency
        series = TimeSeries(t + 2.0 * math.pi / sigma, y)
    return CaseInput(series, source_input.constituents, source_input.config)


@dataclass(frozen=True)
class Expectation:
    """Constraints on a follow-up output. ``None`` leaves a quantity free."""

    mr: MRId
    constituents: tuple[str, ...]
    a0: float | None = None
    a1: float | None = None
    amplitudes: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)


def mr_expected_relation(
    mr: MRId,
    source_output: TidalSolution,
    params: MRParams = MRParams(),
    strict_mr2: bool = False,
) -> Expectation:
    """Constraints the follow-up output must satisfy under ``mr``.

    ``strict_mr2`` adds the implied phase relation phi + 180 to MR2, which
    only constrains amplitudes (and only for a single constituent) by default.
    """
    mr = MRId(mr)
    so = source_output
    names = so.constituents.names
    amps = dict(zip(names, (float(a) for a in so.amplitudes)))
    phs = dict(zip(names, (float(p) for p in so.phases)))
    if mr in (MRId.MR1, MRId.MR5):
        return Expectation(mr, names, so.a0, so.a1, amps, phs)
    if mr is MRId.MR2:
        exp_amps = amps if len(names) == 1 else {}
        exp_phs = {}
        if strict_mr2 and len(names) == 1:
            exp_amps = amps
            exp_phs = {n: (p + 180.0) % 360.0 for n, p in phs.items()}
        return Expectation(mr, names, -so.a0, -so.a1, exp_amps, exp_phs)
    if mr is MRId.MR3:
        return Expectation(mr, names, so.a0 + params.h, so.a1, amps, phs)
    if mr is MRId.MR4:
        g = params.gamma
        return Expectation(
            mr, names, g * so.a0, g * so.a1, {n: g * a for n, a in amps.items()}, phs
        )
    if mr is MRId.MR6:
        return Expectation(mr, names, amplitudes={names[0]: 0.0})
    if mr is MRId.MR7:
        sigma = so.constituents[0].frequency
        return Expectation(
            mr, names, so.a0 - 2.0 * math.pi * so.a1 / sigma, so.a1, amps, phs
        )
    raise PreconditionError(f"unknown relation {mr!r}")


SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"
STAGE_NONE = "none"
STAGE_CONSTITUENTS = "constituent-set"
STAGE_RELATION = "relation"


@dataclass(frozen=True)
class MRVerdict:
    status: str
    stage: str = STAGE_NONE
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == VIOLATED and self.stage == STAGE_NONE:
            raise ValueError("a violated verdict must name the failing stage")

    def to_dict(self):
        return {"status": self.status, "stage": self.stage, "details": _clean(self.details)}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["status"], doc["stage"], dict(doc.get("details", {})))


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def assess(expected: Expectation, followup_output: TidalSolution, tol: Tolerance = Tolerance()) -> MRVerdict:
    """Two-stage verdict for one follow-up output."""
    got_names = tuple(followup_output.constituents.names)
    if set(got_names) != set(expected.constituents):
        return MRVerdict(
            VIOLATED,
            STAGE_CONSTITUENTS,
            {"expected": list(expected.constituents), "got": list(got_names)},
        )
    details = {}
    ok = True

    def check(key, delta, limit):
        nonlocal ok
        details[key] = delta
        if not abs(delta) <= limit:  # NaN fails
            ok = False

    if expected.a0 is not None:
        check("a0", followup_output.a0 - expected.a0, tol.intercept)
    if expected.a1 is not None:
        check("a1", followup_output.a1 - expected.a1, tol.trend)
    for name, amp in expected.amplitudes.items():
        check(f"amplitude:{name}", followup_output.amplitude(name) - amp, tol.amplitude)
    for name, phi in expected.phases.items():
        got_amp = followup_output.amplitude(name)
        ref_amp = expected.amplitudes.get(name, got_amp)
        if abs(ref_amp) < tol.amplitude and abs(got_amp) < tol.amplitude:
            continue  # phase is unidentifiable at zero amplitude
        got_phi = followup_output.phase(name)
        if math.isfinite(got_phi) and math.isfinite(phi):
            d = float(circular_distance(got_phi, phi))
        else:
            d = float("nan")
        check(f"phase:{name}", d, tol.phase)
    if ok:
        return MRVerdict(SATISFIED, STAGE_NONE, details)
    return MRVerdict(VIOLATED, STAGE_RELATION, details)


@dataclass(frozen=True, eq=False)
class MRCase:
    mr: MRId
    source_input: CaseInput
    params: MRParams
    followup_input: CaseInput


def check_relation(
    engine,
    mr: MRId,
    source_input: CaseInput,
    source_output: TidalSolution,
    params: MRParams = MRParams(),
    tol: Tolerance = Tolerance(),
    strict_mr2: bool = False,
) -> MRVerdict:
    """Build the follow-up, run ``engine`` on it and assess.

    Any exception raised by the engine while predicting or analysing the
    follow-up yields an inconclusive verdict.
    """
    mr = MRId(mr)
    try:
        followup = mr_followup(mr, source_input, source_output, params, engine)
        out = engine.analyze(followup.series, followup.constituents, followup.config)
    except PreconditionError:
        raise
    except Exception as exc:  # the engine under test may fail in any way
        return MRVerdict(INCONCLUSIVE, STAGE_NONE, {"error": f"{type(exc).__name__}: {exc}"})
    expected = mr_expected_relation(mr, source_output, params, strict_mr2)
    return assess(expected, out, tol)


# -----------------------------------------------------------------------------
# Campaigns
# -----------------------------------------------------------------------------

@dataclass
class CaseRecord:
    case: int
    seed: int
    status: str  # "ok" or "skipped"
    spec: dict
    verdicts: dict = field(default_factory=dict)  # MRId value -> MRVerdict
    error: str | None = None

    def to_dict(self):
        doc = {"case": self.case, "seed": self.seed, "status": self.status, "spec": _clean(self.spec)}
        if self.error is not None:
            doc["error"] = self.error
        doc["verdicts"] = {k: v.to_dict() for k, v in self.verdicts.items()}
        return doc

    @classmethod
    def from_dict(cls, doc):
        return cls(
            case=doc["case"], seed=doc["seed"], status=doc["status"], spec=doc["spec"],
            verdicts={k: MRVerdict.from_dict(v) for k, v in doc.get("verdicts", {}).items()},
            error=doc.get("error"),
        )


@dataclass
class CampaignReport:
    master_seed: int
    n_cases: int
    mrs: list
    tolerance: Tolerance
    cases: list
    engine: str = ""

    def totals(self) -> dict:
        out = {str(mr): {SATISFIED: 0, VIOLATED: 0, INCONCLUSIVE: 0} for mr in self.mrs}
        for rec in self.cases:
            for mr, v in rec.verdicts.items():
                out[mr][v.status] += 1
        return out

    @property
    def skipped(self) -> int:
        return sum(1 for rec in self.cases if rec.status != "ok")

    @property
    def violations(self) -> int:
        return sum(t[VIOLATED] for t in self.totals().values())

    def violated_cases(self, mr) -> list[int]:
        mr = str(mr)
        return [
            rec.case for rec in self.cases
            if mr in rec.verdicts and rec.verdicts[mr].status == VIOLATED
        ]

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "n_cases": self.n_cases,
            "mrs": [str(m) for m in self.mrs],
            "tolerance": self.tolerance.to_dict(),
            "engine": self.engine,
            "totals": self.totals(),
            "skipped_cases": self.skipped,
            "cases": [rec.to_dict() for rec in self.cases],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc) -> "CampaignReport":
        return cls(
            master_seed=doc["master_seed"],
            n_cases=doc["n_cases"],
            mrs=[MRId(m) for m in doc["mrs"]],
            tolerance=Tolerance(**doc["tolerance"]),
            cases=[CaseRecord.from_dict(c) for c in doc["cases"]],
            engine=doc.get("engine", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "CampaignReport":
        return cls.from_dict(json.loads(text))

    def to_table(self) -> str:
        totals = self.totals()
        cols = [str(m) for m in self.mrs]
        width = max(8, *(len(c) + 2 for c in cols))
        lines = [
            f"metamorphic campaign: {self.n_cases} cases, seed {self.master_seed}, "
            f"skipped {self.skipped}",
            "".ljust(14) + "".join(c.rjust(width) for c in cols),
        ]
        for status in (SATISFIED, VIOLATED, INCONCLUSIVE):
            lines.append(status.ljust(14) + "".join(str(totals[c][status]).rjust(width) for c in cols))
        ran = [sum(totals[c].values()) for c in cols]
        rate = [
            f"{100.0 * totals[c][VIOLATED] / n:.0f}%" if n else "-" for c, n in zip(cols, ran)
        ]
        lines.append("violation rate".ljust(14) + "".join(r.rjust(width) for r in rate))
        return "\n".join(lines)


def run_case(
    engine,
    case: int,
    master_seed: int,
    mrs: Sequence[MRId] = ALL_MRS,
    tol: Tolerance = Tolerance(),
    append_mode: str = "next",
    strict_mr2: bool = False,
) -> CaseRecord:
    """Run one campaign case: draw data, run sources, check every relation."""
    case_seed = derive_seed(master_seed, case)
    spec = random_campaign_spec(derive_seed(case_seed, 0))
    series = generate(spec, derive_seed(case_seed, 1))
    params = draw_params(make_rng(case_seed, 2), series, append_mode)
    constituents = ConstituentSet((constituent_frequency("M2"),))
    record = CaseRecord(case, case_seed, "ok", spec.to_dict())

    sources = {}
    for mr in mrs:
        cfg = source_config(mr)
        if cfg in sources:
            continue
        inp = CaseInput(series, constituents, cfg)
        try:
            sources[cfg] = (inp, engine.analyze(series, constituents, cfg))
        except Exception as exc:
            record.status = "skipped"
            record.error = f"source failed: {type(exc).__name__}: {exc}"
            return record

    for mr in mrs:
        inp, out = sources[source_config(mr)]
        record.verdicts[str(mr)] = check_relation(engine, mr, inp, out, params, tol, strict_mr2)
    return record


def run_campaign(
    engine=REFERENCE,
    mrs: Sequence[MRId] = ALL_MRS,
    n_cases: int = 100,
    master_seed: int = 0,
    tol: Tolerance = Tolerance(),
    workers: int = 1,
    append_mode: str = "next",
    strict_mr2: bool = False,
) -> CampaignReport:
    """Run every relation in ``mrs`` over ``n_cases`` random M2 cases.

    Case ``i`` draws all of its randomness from a seed derived from
    ``(master_seed, i)``, so the report does not depend on ``workers``.
    """
    if int(n_cases) < 1:
        raise PreconditionError("n_cases must be >= 1")
    mrs = [MRId(m) for m in mrs]
    if not mrs:
        raise PreconditionError("no metamorphic relations selected")

    def one(i):
        return run_case(engine, i, master_seed, mrs, tol, append_mode, strict_mr2)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(one, range(n_cases)))
    else:
        cases = [one(i) for i in range(n_cases)]
    return CampaignReport(master_seed, int(n_cases), mrs, tol, cases, engine=repr(engine))
