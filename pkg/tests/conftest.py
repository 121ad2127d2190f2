"""
    Shared builders for the test suite
"""
from datetime import date

import pytest

from csm.codes import Cohort, CodedEntry, EventCode, PatientRecord
from csm.cohort import StudyDefinition, TransactionDB
from csm.ingest import sorted_entries

EXPOSURE = EventCode.drug("C11..")
OUTCOME = EventCode("K05..")


def day(text):
    return date.fromisoformat(text)


def entries(pairs, is_drug=False):
    return sorted_entries(CodedEntry(EventCode(code, is_drug=is_drug), day(when)) for code, when in pairs)


def make_patient(patient_id, gender=1, birth="1950-01-01", registration="2000-01-01",
                 events=(), prescriptions=()):
    """
        events and prescriptions are (code, 'YYYY-MM-DD') pairs
    """
    return PatientRecord(patient_id, gender, day(birth), day(registration),
                         entries(events), entries(prescriptions, is_drug=True))


def make_db(transactions):
    """
        Transaction database from lists of code strings
    """
    return TransactionDB([{EventCode.parse(code) for code in t} for t in transactions])


def write_ini(path, sections):
    """
        Writes {section: {key: value}} as a config file
    """
    lines = []
    for section, options in sections.items():
        lines.append("[{}]".format(section))
        lines.extend("{0} = {1}".format(key, value) for key, value in options.items())
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


@pytest.fixture
def study():
    return StudyDefinition(EXPOSURE, OUTCOME, random_seed=7)


@pytest.fixture
def small_cohort():
    """
        Two exposed patients (one with the outcome 10 days after exposure),
        one unexposed patient
    """
    return Cohort([
        make_patient("A", events=[("681..", "2002-01-01"), ("8CB..", "2002-03-01"), ("9R8..", "2003-01-01"),
                                  ("246..", "2003-05-01"), ("H33..", "2004-01-01"), ("K05..", "2005-01-11")],
                     prescriptions=[("C11..", "2005-01-01")]),
        make_patient("B", gender=2, events=[("681..", "2002-01-01"), ("G2...", "2003-01-01")],
                     prescriptions=[("C11..", "2004-06-01")]),
        make_patient("C", events=[("G2...", "2003-01-01")]),
    ])
