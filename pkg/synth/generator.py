"""
    Seeded synthetic longitudinal cohorts with a known outcome model
"""
import logging
import os
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Tuple

import numpy as np
from scipy.special import expit

import csm.constants as constants
from csm.codes import Cohort, CodedEntry, EventCode, PatientRecord
from csm.cohort import add_years, completed_years, turns_age
from csm.errors import ValidationError
from csm.ingest import RawTables, save_cohort, sorted_entries

# Planted factor codes are recorded within this many days after the first-year window,
# ahead of any exposure
FACTOR_WINDOW_DAYS = 180
MAX_BACKGROUND_CODES = 1000
REPEAT_PRESCRIPTION_DAYS = 28


@dataclass(frozen=True)
class PlantedFactor(object):
    code: EventCode
    prevalence: float
    main_effect_logit: float = 0.0
    interaction_logit: float = 0.0


@dataclass(frozen=True)
class ConfounderFactor(object):
    """
        Code recorded for every patient older than age_threshold at their anchor date;
        no direct effect on the outcome
    """
    code: EventCode
    age_threshold: int


@dataclass(frozen=True)
class GeneratorConfig(object):
    """
        Size, seed and generative model of a synthetic cohort.
        Outcome log-odds = baseline + age_coefficient * (age - age_center)
                           + gender_coefficient * [gender == 2] + exposure_logit * exposed
                           + sum over carried factors of (main + interaction * exposed)
    """
    n_patients: int = 1000
    random_seed: int = 0
    background_codes: int = 40
    background_prevalence_min: float = 0.01
    background_prevalence_max: float = 0.2
    exposure_prevalence: float = 0.2
    baseline_outcome_logit: float = -3.5
    age_coefficient: float = 0.03
    gender_coefficient: float = 0.2
    exposure_logit: float = 0.0
    planted_factors: Tuple[PlantedFactor, ...] = ()
    confounder_factors: Tuple[ConfounderFactor, ...] = ()
    exposure_code: EventCode = EventCode("C11..", is_drug=True)
    outcome_code: EventCode = EventCode("K05..")
    outcome_window_days: int = constants.OUTCOME_WINDOW_DAYS
    first_year_days: int = constants.FIRST_YEAR_DAYS
    observation_years: int = 10
    start_year: int = 2000
    registration_span_years: int = 5
    age_min: int = 30
    age_max: int = 80
    age_center: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "planted_factors", tuple(self.planted_factors))
        object.__setattr__(self, "confounder_factors", tuple(self.confounder_factors))
        if self.n_patients < 1:
            raise ValidationError("n_patients must be at least 1, got {}".format(self.n_patients))
        if not 0 <= self.background_codes <= MAX_BACKGROUND_CODES:
            raise ValidationError("background_codes must lie in [0, {}]".format(MAX_BACKGROUND_CODES))
        probabilities = [("exposure_prevalence", self.exposure_prevalence),
                         ("background_prevalence_min", self.background_prevalence_min),
                         ("background_prevalence_max", self.background_prevalence_max)]
        probabilities += [("prevalence of {}".format(f.code), f.prevalence) for f in self.planted_factors]
        for name, value in probabilities:
            if not 0.0 <= value <= 1.0:
                raise ValidationError("{0} must lie in [0, 1], got {1}".format(name, value))
        if self.background_prevalence_min > self.background_prevalence_max:
            raise ValidationError("background_prevalence_min exceeds background_prevalence_max")
        if not 0 <= self.age_min <= self.age_max:
            raise ValidationError("Age range [{0}, {1}] is empty".format(self.age_min, self.age_max))
        if self.observation_years < 1 or self.outcome_window_days < 1:
            raise ValidationError("observation_years and outcome_window_days must be positive")

    def background_code(self, index):
        return EventCode("N{:03d}.".format(index))


class CohortGenerator(object):
    """
        Draws patients independently, each from its own child of the master seed
    """

    def __init__(self, config):
        self.config = config
        self.logger = logging.getLogger("synth")
        master = np.random.default_rng(np.random.SeedSequence(config.random_seed, spawn_key=(0,)))
        self.background_prevalence = master.uniform(config.background_prevalence_min,
                                                    config.background_prevalence_max,
                                                    size=config.background_codes)
        self.start = date(config.start_year, 1, 1)

    def _uniform_date(self, rng, first, last):
        return first + timedelta(days=int(rng.integers(0, (last - first).days + 1)))

    def patient(self, index):
        """
            Generates patient number index (0-based)
        """
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence(cfg.random_seed, spawn_key=(index + 1,)))

        gender = int(rng.integers(1, 3))
        registration = self.start + timedelta(days=int(rng.integers(0, 365 * cfg.registration_span_years)))
        age_at_registration = int(rng.integers(cfg.age_min, cfg.age_max + 1))
        birth = add_years(registration, -age_at_registration) - timedelta(days=int(rng.integers(0, 365)))
        if birth > registration:
            birth = registration

        washout_end = registration + timedelta(days=cfg.first_year_days)
        factor_end = washout_end + timedelta(days=FACTOR_WINDOW_DAYS - 1)
        observation_end = add_years(washout_end, cfg.observation_years)
        anchor = self._uniform_date(rng, factor_end + timedelta(days=1),
                                    observation_end - timedelta(days=cfg.outcome_window_days))
        age = completed_years(birth, anchor)

        events, prescriptions = [], []
        exposed = bool(rng.random() < cfg.exposure_prevalence)
        if exposed:
            repeats = int(rng.integers(1, 4))
            for k in range(repeats):
                when = anchor + timedelta(days=k * REPEAT_PRESCRIPTION_DAYS)
                if when <= observation_end:
                    prescriptions.append(CodedEntry(cfg.exposure_code, when))

        log_odds = cfg.baseline_outcome_logit + cfg.age_coefficient * (age - cfg.age_center) \
            + cfg.gender_coefficient * (gender == constants.GENDER_FEMALE) + cfg.exposure_logit * exposed
        for factor in cfg.planted_factors:
            if rng.random() < factor.prevalence:
                events.append(CodedEntry(factor.code, self._uniform_date(rng, washout_end, factor_end)))
                log_odds += factor.main_effect_logit + factor.interaction_logit * exposed

        for factor in cfg.confounder_factors:
            if age > factor.age_threshold:
                turned = turns_age(birth, factor.age_threshold + 1)
                events.append(CodedEntry(factor.code, max(turned, washout_end)))

        draws = rng.random(cfg.background_codes)
        for j in np.flatnonzero(draws < self.background_prevalence):
            events.append(CodedEntry(cfg.background_code(int(j)),
                                     self._uniform_date(rng, registration, observation_end)))

        if rng.random() < expit(log_odds):
            onset = anchor + timedelta(days=int(rng.integers(1, cfg.outcome_window_days + 1)))
            events.append(CodedEntry(cfg.outcome_code, onset))

        return PatientRecord("P{:06d}".format(index + 1), gender, birth, registration,
                             sorted_entries(events), sorted_entries(prescriptions))

    def generate(self, executor=None):
        indices = range(self.config.n_patients)
        if executor is not None:
            patients = list(executor.map(self.patient, indices))
        else:
            patients = [self.patient(i) for i in indices]
        cohort = Cohort(patients)
        self.logger.info("Generated %d patients, %d events, %d prescriptions",
                         len(cohort), cohort.event_count(), cohort.prescription_count())
        return cohort


def generate(config, executor=None):
    """
        Seed-deterministic cohort for the given generator configuration
    """
    return CohortGenerator(config).generate(executor)


def write_fixture(cohort, directory, delimiter=","):
    """
        Writes the cohort as patients/events/prescriptions files in directory
    """
    os.makedirs(directory, exist_ok=True)
    tables = RawTables.in_directory(directory, delimiter)
    save_cohort(cohort, tables)
    return tables
