"""
Fault-injection lab.

Every mutant is a named fault point inside :class:`tapmt.harmonic.TapEngine`;
``with_mutant`` returns an engine instance with exactly that point active.
Mutants are grouped into the five mutation-operator categories
(array_index, condition_if, logic_comparison, logic_value, math_operator).
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CatalogMissError, PreconditionError
from .harmonic import ConstituentSet, FitConfig, TapEngine, constituent_frequency
from .metamorphic import (
    ALL_MRS,
    INCONCLUSIVE,
    VIOLATED,
    MRId,
    Tolerance,
    run_campaign,
)
from .signals import derive_seed, generate, random_campaign_spec

CATEGORIES = ("array_index", "condition_if", "logic_comparison", "logic_value", "math_operator")


@dataclass(frozen=True)
class MutantRecord:
    id: str
    category: str
    site: str
    description: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown mutation category {self.category!r}")

    def to_dict(self):
        return {"id": self.id, "category": self.category, "site": self.site,
                "description": self.description}


_CATALOG = (
    # array_index
    MutantRecord("bc_index_swap", "array_index", "fit.unpack",
                 "B_k, C_k = beta[off+2k], beta[off+2k+1]  ->  beta[off+2k+1], beta[off+2k]"),
    MutantRecord("trend_index", "array_index", "fit.unpack",
                 "a1 = beta[1]  ->  beta[0]"),
    MutantRecord("intercept_index", "array_index", "fit.unpack",
                 "a0 = beta[0]  ->  beta[1]"),
    MutantRecord("time_roll", "array_index", "design_matrix.trend",
                 "trend column t[j]  ->  t[j-1] (cyclic)"),
    MutantRecord("last_sample_dropped", "array_index", "fit.rows",
                 "X, y  ->  X[:-1], y[:-1]"),
    MutantRecord("frequency_index", "array_index", "design_matrix.harmonics",
                 "sigma[k]  ->  sigma[(k+1) % N]"),
    # condition_if
    MutantRecord("trend_always_on", "condition_if", "design_matrix.trend",
                 "if include_trend:  ->  if True:  (column added, unpacking unchanged)"),
    MutantRecord("trend_never", "condition_if", "analyze.config",
                 "if config.include_trend:  ->  if False:"),
    MutantRecord("phase_zero_branch", "condition_if", "to_polar.zero_amplitude",
                 "if A == 0: A, phi = 0, 0  ->  if True:"),
    MutantRecord("normalize_if_false", "condition_if", "to_polar.normalize",
                 "phase wrap onto [0, 360)  ->  if False: skipped"),
    MutantRecord("conditioning_if_none", "condition_if", "fit.conditioning",
                 "if rcond < floor: raise  ->  if None:"),
    # logic_comparison
    MutantRecord("rcond_cmp", "logic_comparison", "fit.conditioning",
                 "rcond < floor  ->  rcond > floor"),
    MutantRecord("underdetermined_cmp", "logic_comparison", "fit.dof",
                 "M < P  ->  M <= P"),
    MutantRecord("quadrant_cmp", "logic_comparison", "to_polar.phase",
                 "arctan quadrant fix on B < 0  ->  B > 0"),
    MutantRecord("zero_amp_cmp", "logic_comparison", "to_polar.zero_amplitude",
                 "phi = 0 where A == 0  ->  A != 0"),
    MutantRecord("wrap_cmp", "logic_comparison", "to_polar.normalize",
                 "phi += 360 where phi < 0  ->  phi > 0"),
    MutantRecord("rayleigh_cmp", "logic_comparison", "analyze.rayleigh",
                 "|ds| T < 2 pi  ->  |ds| T >= 2 pi"),
    # logic_value
    MutantRecord("trend_flag_negated", "logic_value", "analyze.config",
                 "trend = config.include_trend  ->  not config.include_trend"),
    MutantRecord("phase_in_radians", "logic_value", "to_polar.phase",
                 "degrees=True  ->  degrees=False"),
    MutantRecord("scale_disabled", "logic_value", "fit.scaling",
                 "rescale=True  ->  rescale=False"),
    # math_operator
    MutantRecord("phase_ref_defect", "math_operator", "analyze.phase_reference",
                 "phi  ->  phi + sigma * max(t) (phase referenced to the record end)"),
    MutantRecord("amp_sum_not_squares", "math_operator", "to_polar.amplitude",
                 "sqrt(B**2 + C**2)  ->  sqrt(B + C)"),
    MutantRecord("amplitude_times_2", "math_operator", "to_polar.amplitude",
                 "A  ->  A * 2"),
    MutantRecord("phase_sign", "math_operator", "to_polar.phase",
                 "atan2(-C, B)  ->  atan2(C, B)"),
    MutantRecord("unscale_divide", "math_operator", "fit.scaling",
                 "beta * scale  ->  beta / scale"),
    MutantRecord("trend_column_squared", "math_operator", "design_matrix.trend",
                 "t  ->  t * t"),
    MutantRecord("sum_for_product", "math_operator", "design_matrix.harmonics",
                 "sigma * t  ->  sigma + t"),
    MutantRecord("a1_sign", "math_operator", "fit.unpack",
                 "a1  ->  -a1"),
    MutantRecord("predict_phase_sign", "math_operator", "predict",
                 "cos(sigma t + phi)  ->  cos(sigma t - phi)"),
)

_BY_ID = {m.id: m for m in _CATALOG}
assert len(_BY_ID) == len(_CATALOG)


def list_mutants() -> list[MutantRecord]:
    return list(_CATALOG)


def get_mutant(mutant_id: str) -> MutantRecord:
    try:
        return _BY_ID[mutant_id]
    except KeyError:
        raise CatalogMissError("mutant", mutant_id) from None


def with_mutant(mutant_id: str) -> TapEngine:
    """Engine with the single fault ``mutant_id`` active."""
    return TapEngine(fault=get_mutant(mutant_id).id)


# -----------------------------------------------------------------------------
# Equivalence filter
# -----------------------------------------------------------------------------

_M2 = ConstituentSet((constituent_frequency("M2"),))
_PROBE_CONFIGS = (FitConfig(include_trend=True), FitConfig(include_trend=False))
# stream label for probe data, distinct from campaign case indices
_PROBE_STREAM = 0x70726F6265


def probe_outputs(engine, seed: int, index: int):
    """Everything an engine reports on probe ``index``: solutions for both
    trend configurations and predictions over the record and beyond."""
    case_seed = derive_seed(seed, _PROBE_STREAM, index)
    spec = random_campaign_spec(derive_seed(case_seed, 0))
    series = generate(spec, derive_seed(case_seed, 1))
    t_pred = np.linspace(series.times[0], series.times[-1] + 48.0, 97)
    out = []
    for cfg in _PROBE_CONFIGS:
        sol = engine.analyze(series, _M2, cfg)
        pred = engine.predict(sol, t_pred).elevations
        out.append((sol, pred))
    return out


def _same(a, b, atol=1e-12):
    (sa, pa), (sb, pb) = a, b
    if sa.constituents.names != sb.constituents.names:
        return False
    scalars = np.array([sa.a0 - sb.a0, sa.a1 - sb.a1])
    if not np.all(np.abs(scalars) <= atol):
        return False
    if not np.all(np.abs(sa.amplitudes - sb.amplitudes) <= atol):
        return False
    # literal comparison: a different phase convention is a different output
    if not np.all(np.abs(sa.phases - sb.phases) <= atol):
        return False
    return pa.shape == pb.shape and bool(np.all(np.abs(pa - pb) <= atol))


def differs_from_reference(mutant_id: str, n_probes: int, seed: int, reference=None) -> bool:
    reference = reference or TapEngine()
    engine = with_mutant(mutant_id)
    for k in range(n_probes):
        ref = probe_outputs(reference, seed, k)
        try:
            got = probe_outputs(engine, seed, k)
        except Exception:
            return True  # a crash is observable behaviour
        if not all(_same(r, g) for r, g in zip(ref, got)):
            return True
    return False


def filter_equivalents(mutants: Sequence[MutantRecord] | None = None, n_probes: int = 20, seed: int = 0) -> list[MutantRecord]:
    """Drop mutants whose outputs match the reference on every random probe."""
    if int(n_probes) < 1:
        raise PreconditionError("n_probes must be >= 1")
    mutants = list_mutants() if mutants is None else list(mutants)
    return [m for m in mutants if differs_from_reference(m.id, n_probes, seed)]


# -----------------------------------------------------------------------------
# Mutation campaign
# -----------------------------------------------------------------------------

@dataclass
class KillMatrix:
    mutants: list  # MutantRecord, row order
    mrs: list  # MRId, column order
    n_cases: int
    counts: dict  # mutant id -> {mr: violated-case count}
    crashes: dict = field(default_factory=dict)  # mutant id -> {mr: inconclusive count}
    count_crash_as_kill: bool = False

    def kill_count(self, mutant_id, mr) -> int:
        n = self.counts[mutant_id][str(mr)]
        if self.count_crash_as_kill:
            n += self.crashes.get(mutant_id, {}).get(str(mr), 0)
        return n

    def killed(self, mutant_id, mr) -> bool:
        return self.kill_count(mutant_id, mr) > 0

    def killed_by(self, mr) -> set[str]:
        return {m.id for m in self.mutants if self.killed(m.id, mr)}

    def killed_by_any(self, mrs=None) -> set[str]:
        out = set()
        for mr in (self.mrs if mrs is None else mrs):
            out |= self.killed_by(mr)
        return out

    def to_dict(self):
        return {
            "n_cases": self.n_cases,
            "mrs": [str(m) for m in self.mrs],
            "count_crash_as_kill": self.count_crash_as_kill,
            "rows": [
                {
                    **m.to_dict(),
                    "kills": {str(mr): self.counts[m.id][str(mr)] for mr in self.mrs},
                    "crashes": {str(mr): self.crashes.get(m.id, {}).get(str(mr), 0) for mr in self.mrs},
                    "killed": {str(mr): self.killed(m.id, mr) for mr in self.mrs},
                }
                for m in self.mutants
            ],
        }


@dataclass
class MutationScore:
    n_mutants: int  # M_N
    killed: dict  # mr -> M_K
    union_killed: int

    def score(self, mr) -> float:
        return mutation_score(self.killed[str(mr)], self.n_mutants)

    @property
    def union_score(self) -> float:
        return mutation_score(self.union_killed, self.n_mutants)

    def to_dict(self):
        return {
            "non_equivalent": self.n_mutants,
            "killed": dict(self.killed),
            "score_percent": {mr: self.score(mr) for mr in self.killed},
            "union_killed": self.union_killed,
            "union_score_percent": self.union_score,
        }


def mutation_score(n_killed: int, n_non_equivalent: int) -> float:
    """MS = M_K / M_N * 100."""
    if n_non_equivalent <= 0:
        raise PreconditionError("mutation score needs at least one non-equivalent mutant")
    if not 0 <= n_killed <= n_non_equivalent:
        raise PreconditionError("killed count must lie in [0, M_N]")
    return 100.0 * n_killed / n_non_equivalent


@dataclass
class MutationResult:
    matrix: KillMatrix
    score: MutationScore
    equivalent: list  # MutantRecord removed by the filter
    master_seed: int = 0

    def to_dict(self):
        return {
            "master_seed": self.master_seed,
            "equivalent": [m.id for m in self.equivalent],
            "kill_matrix": self.matrix.to_dict(),
            "mutation_score": self.score.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    def to_table(self) -> str:
        mx = self.matrix
        cols = [str(m) for m in mx.mrs]
        idw = max(len("mutant"), *(len(m.id) for m in mx.mutants)) + 2
        catw = max(len(c) for c in CATEGORIES) + 2
        lines = [
            f"mutation analysis: {len(mx.mutants)} non-equivalent mutants "
            f"({len(self.equivalent)} equivalent removed), {mx.n_cases} cases",
            "mutant".ljust(idw) + "category".ljust(catw) + "".join(c.rjust(6) for c in cols),
        ]
        for m in mx.mutants:
            cells = "".join(str(mx.kill_count(m.id, mr)).rjust(6) for mr in mx.mrs)
            lines.append(m.id.ljust(idw) + m.category.ljust(catw) + cells)
        sc = self.score
        lines.append(
            "MS".ljust(idw + catw) + "".join(f"{sc.score(c):.0f}%".rjust(6) for c in cols)
        )
        lines.append(f"all relations together: {sc.union_killed}/{sc.n_mutants} killed ({sc.union_score:.0f}%)")
        return "\n".join(lines)


def mutation_campaign(
    mutants: Sequence[MutantRecord] | None = None,
    mrs: Sequence[MRId] = ALL_MRS,
    n_cases: int = 100,
    master_seed: int = 0,
    tol: Tolerance = Tolerance(),
    n_probes: int | None = 20,
    workers: int = 1,
    count_crash_as_kill: bool = False,
) -> MutationResult:
    """Score each metamorphic relation by the mutants it kills.

    Mutants are first passed through :func:`filter_equivalents` (skipped when
    ``n_probes`` is None). Each survivor then serves as the system under test
    for a full campaign; a relation kills the mutant when any case violates it.
    """
    mutants = list_mutants() if mutants is None else list(mutants)
    if not mutants:
        raise PreconditionError("no mutants given")
    mrs = [MRId(m) for m in mrs]
    if n_probes is None:
        survivors = mutants
    else:
        survivors = filter_equivalents(mutants, n_probes, master_seed)
    equivalent = [m for m in mutants if m not in survivors]
    if not survivors:
        raise PreconditionError("every mutant was filtered as equivalent")

    def one(m):
        return run_campaign(with_mutant(m.id), mrs, n_cases, master_seed, tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, survivors))
    else:
        reports = [one(m) for m in survivors]

    counts, crashes = {}, {}
    for m, rep in zip(survivors, reports):
        totals = rep.totals()
        counts[m.id] = {str(mr): totals[str(mr)][VIOLATED] for mr in mrs}
        crashes[m.id] = {
            str(mr): totals[str(mr)][INCONCLUSIVE] + rep.skipped for mr in mrs
        }
    matrix = KillMatrix(survivors, mrs, int(n_cases), counts, crashes, count_crash_as_kill)
    killed = {str(mr): len(matrix.killed_by(mr)) for mr in mrs}
    score = MutationScore(len(survivors), killed, len(matrix.killed_by_any()))
    return MutationResult(matrix, score, equivalent, master_seed)
