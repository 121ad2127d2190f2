"""
    Patients, dated events and hierarchical event codes
"""
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, Iterator, Optional, Tuple

import csm.constants as constants
from csm.errors import ValidationError

_CODE_PATTERN = re.compile(r"[A-Za-z0-9]+\.*")


@dataclass(frozen=True, order=True)
class EventCode(object):
    """
        A 5-character hierarchical code; trailing dots pad shallower levels.
        Drug codes share the shape and live in their own namespace.
    """
    text: str
    is_drug: bool = False

    def __post_init__(self):
        if not isinstance(self.text, str) or len(self.text) != constants.CODE_LENGTH \
                or not _CODE_PATTERN.fullmatch(self.text):
            raise ValidationError("Malformed event code '{}'".format(self.text))

    @classmethod
    def parse(cls, text):
        """
            Reads the serialized form, where drug codes carry the 'rx:' prefix
        """
        if text.startswith(constants.DRUG_PREFIX):
            return cls(text[len(constants.DRUG_PREFIX):], is_drug=True)
        return cls(text)

    @classmethod
    def drug(cls, text):
        return cls(text, is_drug=True)

    def __str__(self):
        if self.is_drug:
            return constants.DRUG_PREFIX + self.text
        return self.text


def code_level(code):
    """
        Number of non-dot characters
    """
    return len(code.text.rstrip(constants.CODE_PAD))


def is_parent(parent, child):
    if parent.is_drug != child.is_drug:
        return False
    level = code_level(parent)
    return code_level(child) == level + 1 and parent.text[:level] == child.text[:level]


def is_ancestor(anc, desc):
    if anc.is_drug != desc.is_drug:
        return False
    level = code_level(anc)
    return level < code_level(desc) and anc.text[:level] == desc.text[:level]


def matches_prefix(prefix, code):
    """
        True when code is the prefix code itself or lies in its subtree
    """
    return prefix == code or is_ancestor(prefix, code)


def truncate_to_level(code, n):
    """
        Generalises a code to level n by padding everything after position n
    """
    level = code_level(code)
    if not 1 <= n <= level:
        raise ValueError("Cannot truncate '{0}' (level {1}) to level {2}".format(code, level, n))
    text = code.text[:n] + constants.CODE_PAD * (constants.CODE_LENGTH - n)
    return EventCode(text, is_drug=code.is_drug)


@dataclass(frozen=True)
class CodedEntry(object):
    """
        One dated event or prescription
    """
    code: EventCode
    date: date


@dataclass(frozen=True)
class PatientRecord(object):
    """
        Demographics plus the dated event and prescription history of one patient
    """
    patient_id: str
    gender: int
    birth_date: date
    registration_date: date
    events: Tuple[CodedEntry, ...] = ()
    prescriptions: Tuple[CodedEntry, ...] = ()

    def __post_init__(self):
        if self.gender not in constants.GENDERS:
            raise ValidationError("Patient '{0}' has gender {1!r}, expected 1 or 2"
                                  .format(self.patient_id, self.gender))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "prescriptions", tuple(self.prescriptions))
        for entry in self.events + self.prescriptions:
            if entry.date < self.birth_date:
                raise ValidationError("Patient '{0}' has {1} dated {2}, before birth on {3}"
                                      .format(self.patient_id, entry.code, entry.date, self.birth_date))

    def entries(self):
        """
            All events and prescriptions
        """
        return self.events + self.prescriptions

    def codes(self):
        return frozenset(entry.code for entry in self.entries())

    def first_seen(self):
        """
            Earliest date of every code in the history
        """
        seen: Dict[EventCode, date] = {}
        for entry in self.entries():
            if entry.code not in seen or entry.date < seen[entry.code]:
                seen[entry.code] = entry.date
        return seen

    def last_entry_date(self) -> Optional[date]:
        dates = [entry.date for entry in self.entries()]
        return max(dates) if dates else None

    def replace_history(self, events, prescriptions):
        return PatientRecord(self.patient_id, self.gender, self.birth_date, self.registration_date,
                             tuple(events), tuple(prescriptions))


@dataclass(frozen=True)
class Cohort(object):
    """
        An immutable collection of patients keyed by patient_id
    """
    patients: Tuple[PatientRecord, ...] = ()
    _index: Dict[str, PatientRecord] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "patients", tuple(self.patients))
        index = {}
        for patient in self.patients:
            if patient.patient_id in index:
                raise ValidationError("Duplicate patient_id '{}' in cohort".format(patient.patient_id))
            index[patient.patient_id] = patient
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.patients)

    def __iter__(self) -> Iterator[PatientRecord]:
        return iter(self.patients)

    def __contains__(self, patient_id):
        return patient_id in self._index

    def get(self, patient_id):
        return self._index[patient_id]

    def event_count(self):
        return sum(len(patient.events) for patient in self.patients)

    def prescription_count(self):
        return sum(len(patient.prescriptions) for patient in self.patients)

    def data_cut(self) -> Optional[date]:
        """
            Latest dated entry anywhere in the cohort
        """
        dates = [d for d in (patient.last_entry_date() for patient in self.patients) if d is not None]
        return max(dates) if dates else None
