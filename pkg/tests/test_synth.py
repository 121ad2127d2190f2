"""
    Synthetic cohort generator
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import timedelta

import pytest

from csm.codes import EventCode
from csm.cohort import StudyDefinition, age_at_event
from csm.errors import ValidationError
from csm.ingest import RawTables, load_cohort
from synth.generator import ConfounderFactor, GeneratorConfig, PlantedFactor, generate, write_fixture

PLANTED = EventCode("R01..")
CONFOUNDER = EventCode("CF65.")


@pytest.fixture(scope="module")
def config():
    return GeneratorConfig(n_patients=400, random_seed=17, background_codes=12,
                           planted_factors=(PlantedFactor(PLANTED, 0.3, 0.2, math.log(4)),),
                           confounder_factors=(ConfounderFactor(CONFOUNDER, 65),))


@pytest.fixture(scope="module")
def cohort(config):
    return generate(config)


def carriers(cohort, code):
    return [p for p in cohort if code in p.codes()]


def test_same_seed_same_cohort(config, cohort, tmp_path):
    assert generate(config) == cohort
    first = write_fixture(cohort, str(tmp_path / "first"))
    second = write_fixture(generate(config), str(tmp_path / "second"))
    for name in ("patients_path", "events_path", "prescriptions_path"):
        with open(getattr(first, name), "rb") as a, open(getattr(second, name), "rb") as b:
            assert a.read() == b.read()


def test_different_seed_differs(config, cohort):
    assert generate(replace(config, random_seed=18)) != cohort


def test_parallel_generation_is_deterministic(config, cohort):
    with ThreadPoolExecutor(max_workers=4) as executor:
        assert generate(config, executor) == cohort


def test_fixture_round_trip(tmp_path):
    small = generate(GeneratorConfig(n_patients=100, random_seed=3))
    tables = write_fixture(small, str(tmp_path))
    with open(tables.patients_path, encoding="utf-8") as handle:
        assert len(handle.read().splitlines()) == 101
    with open(tables.events_path, encoding="utf-8") as handle:
        assert len(handle.read().splitlines()) == 1 + small.event_count()
    assert load_cohort(RawTables.in_directory(str(tmp_path))) == small


def test_outcome_follows_exposure_within_window(config, cohort):
    study = StudyDefinition(config.exposure_code, config.outcome_code)
    for patient in cohort:
        exposures = study.exposure_dates(patient)
        outcomes = study.outcome_dates(patient)
        if exposures and outcomes:
            gap = (outcomes[0] - exposures[0]).days
            assert 1 <= gap <= config.outcome_window_days


def test_planted_codes_precede_exposure(config, cohort):
    study = StudyDefinition(config.exposure_code, config.outcome_code)
    for patient in carriers(cohort, PLANTED):
        planted = patient.first_seen()[PLANTED]
        assert planted >= patient.registration_date
        for exposed in study.exposure_dates(patient):
            assert planted < exposed


def test_confounder_tracks_age(cohort):
    tagged = carriers(cohort, CONFOUNDER)
    assert tagged
    for patient in tagged:
        assert age_at_event(patient, patient.first_seen()[CONFOUNDER]) > 65


def test_prevalence_within_three_sigma(config, cohort):
    n = len(cohort)
    for code, p in ((PLANTED, 0.3), (config.exposure_code, config.exposure_prevalence)):
        observed = sum(1 for patient in cohort if code in patient.codes())
        assert abs(observed - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_first_year_has_entries_to_exclude(cohort):
    assert any(e.date < p.registration_date + timedelta(days=365) for p in cohort for e in p.events)


def test_null_model_outcome_rate():
    config = GeneratorConfig(n_patients=10000, random_seed=2, background_codes=0, baseline_outcome_logit=0.0,
                             age_coefficient=0.0, gender_coefficient=0.0)
    cohort = generate(config)
    rate = sum(1 for p in cohort if any(e.code == config.outcome_code for e in p.events)) / len(cohort)
    assert rate == pytest.approx(0.5, abs=0.02)


def test_planted_interaction_odds_ratio():
    config = GeneratorConfig(n_patients=10000, random_seed=5, background_codes=0, exposure_prevalence=0.5,
                             baseline_outcome_logit=-1.0, age_coefficient=0.0, gender_coefficient=0.0,
                             planted_factors=(PlantedFactor(PLANTED, 0.3, 0.0, math.log(4)),))
    counts = {True: [0, 0], False: [0, 0]}
    for patient in generate(config):
        if not patient.prescriptions:
            continue
        codes = patient.codes()
        counts[PLANTED in codes][config.outcome_code in codes] += 1
    odds_carriers = counts[True][1] / counts[True][0]
    odds_others = counts[False][1] / counts[False][0]
    assert odds_carriers / odds_others == pytest.approx(4.0, rel=0.3)


@pytest.mark.parametrize("changes", [{"n_patients": 0}, {"exposure_prevalence": 1.5},
                                     {"background_prevalence_min": 0.3, "background_prevalence_max": 0.2},
                                     {"planted_factors": (PlantedFactor(PLANTED, -0.1),)},
                                     {"age_min": 50, "age_max": 40}])
def test_invalid_configurations(changes):
    with pytest.raises(ValidationError):
        GeneratorConfig(**changes)
