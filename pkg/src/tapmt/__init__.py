"""Tidal harmonic analysis and prediction, tested with metamorphic relations
and a fault-injection mutation lab."""

from .errors import (
    CatalogMissError,
    EngineError,
    EngineFailure,
    EngineTimeout,
    IllConditionedError,
    InvalidInputError,
    PreconditionError,
    ProtocolError,
    TapError,
    UnderDeterminedError,
)
from .harmonic import (
    Constituent,
    ConstituentSet,
    DesignMatrix,
    FitConfig,
    RawCoefficients,
    RayleighWarning,
    TapEngine,
    TidalSolution,
    TimeSeries,
    analyze,
    build_design_matrix,
    constituent_frequency,
    ols_fit,
    predict,
    raw_to_polar,
)
from .metamorphic import MRId, MRVerdict, Tolerance, assess, mr_expected_relation, mr_followup, run_campaign
from .mutants import filter_equivalents, list_mutants, mutation_campaign, with_mutant
from .signals import SyntheticSpec, ConstituentSpec, generate, random_campaign_spec

__version__ = "0.1.0"
