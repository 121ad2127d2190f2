"""
    Loading, preprocessing and saving of the patient, event and prescription tables
"""
import logging
import os
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, timedelta

import pandas as pd

import csm.constants as constants
from csm.codes import Cohort, CodedEntry, EventCode, PatientRecord, code_level, truncate_to_level
from csm.errors import IngestError, ValidationError

logger = logging.getLogger("ingest")


@dataclass(frozen=True)
class RawTables(object):
    """
        Locations of the three input tables
    """
    patients_path: str
    events_path: str
    prescriptions_path: str
    delimiter: str = ","

    @classmethod
    def in_directory(cls, directory, delimiter=","):
        return cls(os.path.join(directory, constants.PATIENTS_FILE),
                   os.path.join(directory, constants.EVENTS_FILE),
                   os.path.join(directory, constants.PRESCRIPTIONS_FILE),
                   delimiter)


def _read_table(path, columns, delimiter):
    logger.info("Reading '%s'", path)
    try:
        frame = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False,
                            encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise IngestError("'{}' is empty, a header row is required".format(path))
    except pd.errors.ParserError as error:
        raise IngestError("'{0}' cannot be parsed: {1}".format(path, error))
    if tuple(frame.columns) != tuple(columns):
        raise IngestError("'{0}' has header {1}, expected {2}"
                          .format(path, list(frame.columns), list(columns)))
    return frame


def _parse_date(text, path, row):
    try:
        if len(text) != 10:
            raise ValueError(text)
        return date.fromisoformat(text)
    except ValueError:
        raise IngestError("{0} row {1}: malformed date '{2}', expected YYYY-MM-DD"
                          .format(path, row, text))


def _parse_code(text, is_drug, path, row):
    if len(text) > constants.CODE_LENGTH:
        logger.warning("%s row %d: truncating code '%s' to %d characters",
                       path, row, text, constants.CODE_LENGTH)
        text = text[:constants.CODE_LENGTH]
    try:
        return EventCode(text, is_drug=is_drug)
    except ValidationError as error:
        raise IngestError("{0} row {1}: {2}".format(path, row, error))


def _read_entries(path, delimiter, is_drug, known_ids):
    entries = defaultdict(list)
    frame = _read_table(path, constants.ENTRY_COLUMNS, delimiter)
    # Row numbers count the header as line 1
    for row, (patient_id, code, when) in enumerate(frame.itertuples(index=False, name=None), start=2):
        if patient_id not in known_ids:
            raise IngestError("{0} row {1}: unknown patient_id '{2}'".format(path, row, patient_id))
        entries[patient_id].append(CodedEntry(_parse_code(code, is_drug, path, row),
                                              _parse_date(when, path, row)))
    logger.info("Read %d rows from '%s'", len(frame), path)
    return entries


def sorted_entries(entries):
    return tuple(sorted(entries, key=lambda entry: (entry.date, entry.code)))


def load_cohort(tables):
    """
        Builds one PatientRecord per patients-file row with date-sorted histories attached
    """
    frame = _read_table(tables.patients_path, constants.PATIENTS_COLUMNS, tables.delimiter)
    demographics = []
    seen = set()
    for row, (patient_id, gender, birth, registration) in enumerate(
            frame.itertuples(index=False, name=None), start=2):
        if patient_id in seen:
            raise IngestError("{0} row {1}: duplicate patient_id '{2}'"
                              .format(tables.patients_path, row, patient_id))
        if gender not in ("1", "2"):
            raise IngestError("{0} row {1}: gender '{2}' is not 1 or 2"
                              .format(tables.patients_path, row, gender))
        seen.add(patient_id)
        demographics.append((row, patient_id, int(gender),
                             _parse_date(birth, tables.patients_path, row),
                             _parse_date(registration, tables.patients_path, row)))

    events = _read_entries(tables.events_path, tables.delimiter, False, seen)
    prescriptions = _read_entries(tables.prescriptions_path, tables.delimiter, True, seen)

    patients = []
    for row, patient_id, gender, birth, registration in demographics:
        try:
            patients.append(PatientRecord(patient_id, gender, birth, registration,
                                          sorted_entries(events[patient_id]),
                                          sorted_entries(prescriptions[patient_id])))
        except ValidationError as error:
            raise IngestError("{0} row {1}: {2}".format(tables.patients_path, row, error))
    cohort = Cohort(patients)
    logger.info("Loaded %d patients, %d events, %d prescriptions",
                len(cohort), cohort.event_count(), cohort.prescription_count())
    return cohort


def apply_first_year_exclusion(cohort, days=constants.FIRST_YEAR_DAYS):
    """
        Drops every entry dated strictly before registration_date + days.
        An entry on exactly that day is kept.
    """
    patients = []
    removed = 0
    for patient in cohort:
        cutoff = patient.registration_date + timedelta(days=days)
        events = tuple(e for e in patient.events if e.date >= cutoff)
        prescriptions = tuple(p for p in patient.prescriptions if p.date >= cutoff)
        removed += len(patient.events) - len(events) + len(patient.prescriptions) - len(prescriptions)
        patients.append(patient.replace_history(events, prescriptions))
    logger.info("First-year exclusion removed %d entries", removed)
    return Cohort(patients)


def roll_up(cohort, level):
    """
        Generalises every code deeper than level to that level
    """
    def generalise(entry):
        if code_level(entry.code) > level:
            return CodedEntry(truncate_to_level(entry.code, level), entry.date)
        return entry

    logger.info("Rolling codes up to level %d", level)
    return Cohort(patient.replace_history(sorted_entries(generalise(e) for e in patient.events),
                                          sorted_entries(generalise(p) for p in patient.prescriptions))
                  for patient in cohort)


def _write_table(frame, path, delimiter):
    frame.to_csv(path, sep=delimiter, index=False, encoding="utf-8", lineterminator="\n")


def save_cohort(cohort, tables):
    """
        Writes the cohort in the same layout load_cohort reads
    """
    patients = pd.DataFrame(
        [(p.patient_id, str(p.gender), p.birth_date.isoformat(), p.registration_date.isoformat())
         for p in cohort],
        columns=list(constants.PATIENTS_COLUMNS))
    events = pd.DataFrame(
        [(p.patient_id, e.code.text, e.date.isoformat()) for p in cohort for e in p.events],
        columns=list(constants.ENTRY_COLUMNS))
    prescriptions = pd.DataFrame(
        [(p.patient_id, e.code.text, e.date.isoformat()) for p in cohort for e in p.prescriptions],
        columns=list(constants.ENTRY_COLUMNS))
    _write_table(patients, tables.patients_path, tables.delimiter)
    _write_table(events, tables.events_path, tables.delimiter)
    _write_table(prescriptions, tables.prescriptions_path, tables.delimiter)
    logger.info("Wrote %d patients to '%s'", len(cohort), tables.patients_path)


def load_dictionary(path, delimiter=","):
    """
        Reads a code,description table; drug codes are written 'rx:XXXXX'
    """
    frame = _read_table(path, constants.DICTIONARY_COLUMNS, delimiter)
    descriptions = {}
    for row, (code, description) in enumerate(frame.itertuples(index=False, name=None), start=2):
        try:
            descriptions[EventCode.parse(code)] = description
        except ValidationError as error:
            raise IngestError("{0} row {1}: {2}".format(path, row, error))
    return descriptions
