"""Synthetic tidal series and random campaign specifications."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError
from .harmonic import (
    Constituent,
    ConstituentSet,
    TidalSolution,
    TimeSeries,
    constituent_frequency,
    predict,
)

MAX_SEED = 2**64 - 1

# Record length bounds in hours: one week to one (30-day) month.
MIN_COUNT = 168
MAX_COUNT = 720
AMPLITUDE_RANGE = (0.1, 3.0)
INTERCEPT_RANGE = (-1.0, 1.0)
TREND_RANGE = (-0.001, 0.001)
NOISE_RANGE = (0.0, 0.05)


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def derive_seed(seed: int, *path: int) -> int:
    """Derive an independent 64-bit seed from ``seed`` and an index path.

    Uses numpy's SeedSequence hashing with ``path`` as the spawn key, so the
    result depends only on the arguments, never on call order.
    """
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(p) for p in path))
    )


@dataclass(frozen=True)
class ConstituentSpec:
    name: str
    amplitude: float
    phase: float
    frequency: float | None = None

    def constituent(self) -> Constituent:
        if self.frequency is None:
            return constituent_frequency(self.name)
        return Constituent(self.name, self.frequency)


@dataclass(frozen=True)
class SyntheticSpec:
    constituents: tuple[ConstituentSpec, ...]
    a0: float = 0.0
    a1: float = 0.0
    noise_std: float = 0.0
    start: float = 0.0
    step: float = 1.0
    count: int = MIN_COUNT

    def __post_init__(self):
        object.__setattr__(self, "constituents", tuple(self.constituents))
        for c in self.constituents:
            if not c.amplitude >= 0:
                raise InvalidInputError(f"{c.name}: amplitude must be >= 0")
            if not 0.0 <= c.phase < 360.0:
                raise InvalidInputError(f"{c.name}: phase must lie in [0, 360)")
        if not self.noise_std >= 0:
            raise InvalidInputError("noise_std must be >= 0")
        if not self.step > 0:
            raise InvalidInputError("step must be > 0")
        if int(self.count) != self.count or self.count < 1:
            raise InvalidInputError("count must be an integer >= 1")
        values = [self.a0, self.a1, self.noise_std, self.start, self.step]
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("spec contains non-finite values")
        object.__setattr__(self, "count", int(self.count))

    @property
    def constituent_set(self) -> ConstituentSet:
        return ConstituentSet(tuple(c.constituent() for c in self.constituents))

    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count, dtype=float)

    def solution(self) -> TidalSolution:
        """The noise-free generating model as a solution."""
        return TidalSolution(
            a0=self.a0,
            a1=self.a1,
            constituents=self.constituent_set,
            amplitudes=[c.amplitude for c in self.constituents],
            phases=[c.phase for c in self.constituents],
        )

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["constituents"] = [
            {k: v for k, v in asdict(c).items() if not (k == "frequency" and v is None)}
            for c in self.constituents
        ]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        try:
            cons = tuple(
                ConstituentSpec(
                    name=c["name"],
                    amplitude=float(c["amplitude"]),
                    phase=float(c["phase"]),
                    frequency=None if c.get("frequency") is None else float(c["frequency"]),
                )
                for c in doc["constituents"]
            )
            fields = {k: doc[k] for k in ("a0", "a1", "noise_std", "start", "step", "count") if k in doc}
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed spec document: {exc!r}") from exc
        unknown = set(doc) - {"constituents", "a0", "a1", "noise_std", "start", "step", "count"}
        if unknown:
            raise InvalidInputError(f"unknown spec fields: {sorted(unknown)}")
        return cls(constituents=cons, **fields)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
        return cls.from_dict(doc)


def generate(spec: SyntheticSpec, seed: int = 0, *, noise: bool = True) -> TimeSeries:
    """Evaluate the spec's model on its time grid and add Gaussian noise.

    ``noise=False`` returns the noise-free signal (the same deterministic part
    the noisy series is built on).
    """
    if not isinstance(spec, SyntheticSpec):
        raise InvalidInputError("spec must be a SyntheticSpec")
    t = spec.times()
    clean = predict(spec.solution(), t).elevations
    if not noise or spec.noise_std == 0.0:
        return TimeSeries(t, clean)
    rng = make_rng(seed)
    return TimeSeries(t, clean + rng.normal(0.0, spec.noise_std, size=t.size))


def random_campaign_spec(seed: int) -> SyntheticSpec:
    """Draw a single-M2 hourly spec in the campaign parameter ranges."""
    rng = make_rng(seed)
    count = int(rng.integers(MIN_COUNT, MAX_COUNT, endpoint=True))
    amplitude = float(rng.uniform(*AMPLITUDE_RANGE))
    phase = float(rng.uniform(0.0, 360.0))
    a0 = float(rng.uniform(*INTERCEPT_RANGE))
    a1 = float(rng.uniform(*TREND_RANGE))
    noise_std = float(rng.uniform(*NOISE_RANGE))
    return SyntheticSpec(
        constituents=(ConstituentSpec("M2", amplitude, phase),),
        a0=a0,
        a1=a1,
        noise_std=noise_std,
        start=0.0,
        step=1.0,
        count=count,
    )
