"""
    Study partitioning (D1/D2) and matched case-control selection
"""
import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from functools import cached_property
from typing import FrozenSet, Optional, Tuple

import numpy as np

import csm.constants as constants
from csm.codes import EventCode, PatientRecord, matches_prefix
from csm.errors import EmptyStudyError, MatchingError, ValidationError

logger = logging.getLogger("cohort")


@dataclass(frozen=True)
class StudyDefinition(object):
    """
        Exposure, outcome and matching parameters of one study
    """
    exposure_code_prefix: EventCode
    outcome_code_prefix: EventCode
    outcome_window_days: int = constants.OUTCOME_WINDOW_DAYS
    controls_per_case: int = constants.CONTROLS_PER_CASE
    random_seed: int = 0
    age_band_years: int = constants.AGE_BAND_YEARS
    first_year_days: int = constants.FIRST_YEAR_DAYS
    resample_per_candidate: bool = False

    def __post_init__(self):
        if self.outcome_window_days <= 0:
            raise ValidationError("outcome_window_days must be positive, got {}"
                                  .format(self.outcome_window_days))
        if self.controls_per_case < 1:
            raise ValidationError("controls_per_case must be at least 1, got {}"
                                  .format(self.controls_per_case))
        if self.age_band_years < 1:
            raise ValidationError("age_band_years must be at least 1, got {}"
                                  .format(self.age_band_years))
        if not 0 <= self.random_seed < 2 ** 64:
            raise ValidationError("random_seed must be an unsigned 64-bit integer")

    def exposure_dates(self, patient):
        return sorted(p.date for p in patient.prescriptions
                      if matches_prefix(self.exposure_code_prefix, p.code))

    def outcome_dates(self, patient):
        return sorted(e.date for e in patient.events
                      if matches_prefix(self.outcome_code_prefix, e.code))

    def is_study_code(self, code):
        """
            Codes that define the study itself rather than a candidate factor
        """
        return matches_prefix(self.exposure_code_prefix, code) \
            or matches_prefix(self.outcome_code_prefix, code)


class TransactionDB(object):
    """
        One itemset per patient
    """

    def __init__(self, transactions, patient_ids=None):
        self.transactions: Tuple[FrozenSet[EventCode], ...] = tuple(frozenset(t) for t in transactions)
        self.patient_ids = tuple(patient_ids) if patient_ids is not None else None
        if self.patient_ids is not None and len(self.patient_ids) != len(self.transactions):
            raise ValueError("patient_ids and transactions differ in length")

    @property
    def m(self):
        return len(self.transactions)

    def __len__(self):
        return len(self.transactions)

    def __iter__(self):
        return iter(self.transactions)

    def items(self):
        """
            Sorted item universe
        """
        return sorted(frozenset().union(*self.transactions))


def _has_outcome_within_window(exposures, outcomes, window_days):
    for exposed in exposures:
        for outcome in outcomes:
            if 0 <= (outcome - exposed).days <= window_days:
                return True
    return False


def partition(cohort, study):
    """
        Splits exposed patients into D1 (no outcome within the window after an
        exposure) and D2 (outcome within the window, boundary day included)
    """
    d1, d1_ids, d2, d2_ids = [], [], [], []
    for patient in cohort:
        exposures = study.exposure_dates(patient)
        if not exposures:
            continue
        transaction = frozenset(code for code in patient.codes() if not study.is_study_code(code))
        if _has_outcome_within_window(exposures, study.outcome_dates(patient), study.outcome_window_days):
            d2.append(transaction)
            d2_ids.append(patient.patient_id)
        else:
            d1.append(transaction)
            d1_ids.append(patient.patient_id)
    if not d1 and not d2:
        raise EmptyStudyError("No patient in the cohort was prescribed a '{}' code"
                              .format(study.exposure_code_prefix))
    logger.info("Partitioned %d exposed patients: |D1|=%d |D2|=%d", len(d1) + len(d2), len(d1), len(d2))
    return TransactionDB(d1, d1_ids), TransactionDB(d2, d2_ids)


def add_years(when, years):
    """
        Same calendar day `years` later; 29 February maps to 28 February
    """
    try:
        return when.replace(year=when.year + years)
    except ValueError:
        return when.replace(year=when.year + years, day=28)


def completed_years(birth, when):
    return when.year - birth.year - ((when.month, when.day) < (birth.month, birth.day))


def turns_age(birth, age):
    """
        First day on which completed_years reaches age; 29 February births
        turn on 1 March in common years
    """
    try:
        return birth.replace(year=birth.year + age)
    except ValueError:
        return date(birth.year + age, 3, 1)


def age_at_event(patient, when):
    """
        Completed years between birth_date and when
    """
    if when < patient.birth_date:
        raise ValueError("Date {0} precedes birth of patient '{1}' on {2}"
                         .format(when, patient.patient_id, patient.birth_date))
    return completed_years(patient.birth_date, when)


@dataclass(frozen=True)
class SelectedPatient(object):
    """
        A case or matched control with its index date
    """
    patient: PatientRecord
    index_date: date
    is_case: bool

    @cached_property
    def first_seen(self):
        return self.patient.first_seen()


@dataclass(frozen=True)
class RegressionRow(object):
    """
        One patient's covariates for the interaction model
    """
    patient_id: str
    age: int
    gender: int
    x_present: bool
    exposure_present: bool
    outcome: bool

    def __post_init__(self):
        if self.age < 0:
            raise ValidationError("Negative age for patient '{}'".format(self.patient_id))


@dataclass
class _ControlPool(object):
    """
        Outcome-free patients with the date span each one spends in every age band
    """
    patients: list
    gender: np.ndarray
    band_start: np.ndarray
    band_end: np.ndarray
    used: np.ndarray = field(default=None)

    def __post_init__(self):
        self.used = np.zeros(len(self.patients), dtype=bool)


def _build_pool(controls, study, data_cut, max_band):
    band_years = study.age_band_years
    n = len(controls)
    band_start = np.zeros((n, max_band + 1), dtype=np.int64)
    band_end = np.full((n, max_band + 1), -1, dtype=np.int64)
    for i, patient in enumerate(controls):
        active_start = (patient.registration_date + timedelta(days=study.first_year_days)).toordinal()
        active_end = data_cut.toordinal()
        for band in range(max_band + 1):
            entering = turns_age(patient.birth_date, band * band_years).toordinal()
            leaving = turns_age(patient.birth_date, (band + 1) * band_years).toordinal() - 1
            band_start[i, band] = max(entering, active_start)
            band_end[i, band] = min(leaving, active_end)
    gender = np.array([patient.gender for patient in controls], dtype=np.int64)
    return _ControlPool(list(controls), gender, band_start, band_end)


def _eligible(pool, gender, band):
    return np.flatnonzero((pool.gender == gender) & ~pool.used
                          & (pool.band_start[:, band] <= pool.band_end[:, band]))


def select_cases_and_controls(cohort, study, seed=None):
    """
        Every patient with the outcome is a case indexed at the first outcome.
        Each case gets controls_per_case outcome-free controls of the same gender
        drawn without replacement, with an index date inside the case's age band
        and the control's active observation period.

        Strata (gender, age band) are filled one at a time, the one with the
        fewest spare eligible controls first.
    """
    seed = study.random_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    cases, controls = [], []
    for patient in cohort:
        outcomes = study.outcome_dates(patient)
        if outcomes:
            cases.append((outcomes[0], patient))
        else:
            controls.append(patient)
    if not cases:
        logger.info("No cases in cohort")
        return []
    cases.sort(key=lambda case: (case[0], case[1].patient_id))
    controls.sort(key=lambda patient: patient.patient_id)

    data_cut = cohort.data_cut()
    band_years = study.age_band_years
    k = study.controls_per_case
    case_bands = [age_at_event(patient, index) // band_years for index, patient in cases]
    pool = _build_pool(controls, study, data_cut, max(case_bands))

    pending = {}
    for position, ((_, patient), band) in enumerate(zip(cases, case_bands)):
        pending.setdefault((patient.gender, band), []).append(position)

    matched = {}
    while pending:
        stratum = min(pending, key=lambda key: (len(_eligible(pool, *key)) - k * len(pending[key]), key))
        gender, band = stratum
        for position in pending.pop(stratum):
            eligible = _eligible(pool, gender, band)
            if len(eligible) < k:
                raise MatchingError((gender, band * band_years, (band + 1) * band_years - 1),
                                    k - len(eligible))
            chosen = np.sort(rng.choice(eligible, size=k, replace=False))
            pool.used[chosen] = True
            matched[position] = [
                SelectedPatient(pool.patients[i],
                                date.fromordinal(int(rng.integers(pool.band_start[i, band],
                                                                  pool.band_end[i, band] + 1))),
                                False)
                for i in chosen]

    selection = []
    for position, (index, patient) in enumerate(cases):
        selection.append(SelectedPatient(patient, index, True))
        selection.extend(matched[position])
    logger.info("Selected %d cases and %d controls", len(cases), len(selection) - len(cases))
    return selection


def assemble_rows(selection, itemset, study):
    """
        One regression row per selected patient; codes and exposures count only
        when recorded strictly before the index date
    """
    rows = []
    for selected in selection:
        seen = selected.first_seen
        index = selected.index_date
        x_present = all(code in seen and seen[code] < index for code in itemset.codes)
        exposure_present = any(when < index for when in study.exposure_dates(selected.patient))
        rows.append(RegressionRow(selected.patient.patient_id,
                                  age_at_event(selected.patient, index),
                                  selected.patient.gender,
                                  x_present,
                                  exposure_present,
                                  selected.is_case))
    return rows


def seed_for_candidate(study, candidate_index) -> Optional[int]:
    """
        Per-candidate child seed when controls are resampled for every candidate
    """
    if not study.resample_per_candidate:
        return None
    child = np.random.SeedSequence(study.random_seed, spawn_key=(candidate_index,))
    return int(child.generate_state(1, dtype=np.uint64)[0])
