import itertools

import numpy as np
import pytest

from tapmt.errors import CatalogMissError, PreconditionError
from tapmt.harmonic import REFERENCE, ConstituentSet, FitConfig, TapEngine
from tapmt.metamorphic import MRId
from tapmt.mutants import (
    CATEGORIES,
    MutationResult,
    _same,
    differs_from_reference,
    filter_equivalents,
    get_mutant,
    list_mutants,
    mutation_campaign,
    mutation_score,
    probe_outputs,
    with_mutant,
)
from tapmt.signals import generate, random_campaign_spec


@pytest.fixture(scope="module")
def survivors():
    return filter_equivalents(n_probes=5)


def test_catalog_shape():
    cat = list_mutants()
    assert len(cat) >= 20
    assert len({m.id for m in cat}) == len(cat)
    for c in CATEGORIES:
        assert sum(m.category == c for m in cat) >= 2, c
    assert get_mutant("phase_ref_defect").category == "math_operator"


def test_unknown_mutant():
    with pytest.raises(CatalogMissError, match="unknown mutant"):
        get_mutant("no_such_fault")
    with pytest.raises(CatalogMissError):
        with_mutant("no_such_fault")


def test_inert_engine_is_reference():
    for k in range(3):
        ref = probe_outputs(REFERENCE, 11, k)
        got = probe_outputs(TapEngine(None), 11, k)
        for (sa, pa), (sb, pb) in zip(ref, got):
            assert sa == sb
            assert pa.tobytes() == pb.tobytes()


def test_mutated_engine_leaves_reference_alone():
    spec = random_campaign_spec(3)
    series = generate(spec, 3)
    before = REFERENCE.analyze(series, spec.constituent_set, FitConfig())
    with_mutant("amplitude_times_2").analyze(series, spec.constituent_set, FitConfig())
    assert REFERENCE.analyze(series, spec.constituent_set, FitConfig()) == before


def test_phase_ref_defect_keeps_amplitude_moves_phase():
    spec = random_campaign_spec(21)
    series = generate(spec, 21)
    cs = spec.constituent_set
    ref = REFERENCE.analyze(series, cs, FitConfig())
    bad = with_mutant("phase_ref_defect").analyze(series, cs, FitConfig())
    assert bad.amplitudes[0] == pytest.approx(ref.amplitudes[0], abs=1e-12)
    assert bad.a0 == pytest.approx(ref.a0, abs=1e-12)
    assert abs(bad.phases[0] - ref.phases[0]) > 1.0
    # its own predictions stay consistent
    t = series.times
    np.testing.assert_allclose(
        with_mutant("phase_ref_defect").predict(bad, t).elevations,
        REFERENCE.predict(ref, t).elevations, atol=1e-9,
    )


def test_dead_code_mutant_is_filtered():
    assert not differs_from_reference("frequency_index", 5, 0)
    kept = filter_equivalents([get_mutant("frequency_index"), get_mutant("phase_ref_defect")], n_probes=10)
    assert [m.id for m in kept] == ["phase_ref_defect"]


def test_filter_needs_probes():
    with pytest.raises(PreconditionError):
        filter_equivalents(n_probes=0)


def test_survivors_cover_categories(survivors):
    assert len(survivors) >= 20
    assert {m.category for m in survivors} == set(CATEGORIES)


def test_survivors_pairwise_distinct(survivors):
    outputs = {}
    for m in survivors:
        try:
            outputs[m.id] = [probe_outputs(with_mutant(m.id), 0, k) for k in range(3)]
        except Exception as exc:  # crash signature
            outputs[m.id] = type(exc).__name__
    for a, b in itertools.combinations(survivors, 2):
        oa, ob = outputs[a.id], outputs[b.id]
        if isinstance(oa, str) or isinstance(ob, str):
            assert oa != ob, (a.id, b.id)
            continue
        same = all(_same(x, y) for pa, pb in zip(oa, ob) for x, y in zip(pa, pb))
        assert not same, (a.id, b.id)


def test_score_formula():
    assert mutation_score(9, 38) == pytest.approx(23.684, abs=1e-3)
    assert f"{mutation_score(9, 38):.0f}%" == "24%"
    assert mutation_score(38, 38) == 100.0
    assert mutation_score(0, 5) == 0.0
    with pytest.raises(PreconditionError):
        mutation_score(1, 0)
    with pytest.raises(PreconditionError):
        mutation_score(6, 5)


def test_small_campaign():
    ids = ["phase_ref_defect", "amplitude_times_2", "trend_never"]
    res = mutation_campaign([get_mutant(i) for i in ids], n_cases=5, n_probes=3, master_seed=2)
    mx = res.matrix
    assert mx.killed_by(MRId.MR1) >= {"phase_ref_defect"}
    for mr in ["MR2", "MR3", "MR4", "MR5", "MR6", "MR7"]:
        assert not mx.killed("phase_ref_defect", mr)
    assert "amplitude_times_2" in mx.killed_by(MRId.MR6)
    assert not mx.killed_by_any() & {"trend_never"}
    assert 0 <= res.score.union_score <= 100
    assert "phase_ref_defect" in res.to_table()
    doc = res.to_dict()
    assert doc["mutation_score"]["non_equivalent"] == 3
    assert MutationResult is type(res)
