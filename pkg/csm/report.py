"""
    Ranked candidate risk factor report
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import FrozenSet

import pandas as pd

import csm.constants as constants
from csm.miner import Itemset

logger = logging.getLogger("report")


@dataclass(frozen=True)
class ReportRow(object):
    itemset: Itemset
    supp_d2: float
    supp_d1: float
    supp_ratio: float
    p_age: float
    p_gender: float
    p_exposure: float
    p_x: float
    p_interaction: float
    flags: FrozenSet[str] = frozenset()
    rank: int = 0

    @classmethod
    def from_fit(cls, candidate, result):
        return cls(candidate.itemset, candidate.supp_d2, candidate.supp_d1, candidate.supp_ratio,
                   result.p_value(constants.COLUMN_AGE),
                   result.p_value(constants.COLUMN_GENDER),
                   result.p_value(constants.COLUMN_EXPOSURE),
                   result.p_value(constants.COLUMN_X),
                   result.p_value(constants.COLUMN_INTERACTION),
                   result.flags)


def _order(row):
    # NaN p-values (collinear fits) sort last
    p_value = math.inf if math.isnan(row.p_interaction) else row.p_interaction
    return (p_value, -row.supp_ratio, row.itemset)


def rank(candidates):
    """
        Orders (CandidateItemset, FitResult) pairs by interaction p-value,
        then support ratio (descending), then itemset; flagged fits go last
    """
    rows = [ReportRow.from_fit(candidate, result) for candidate, result in candidates]
    clean = sorted((row for row in rows if not row.flags), key=_order)
    flagged = sorted((row for row in rows if row.flags), key=_order)
    ranked = [replace(row, rank=position)
              for position, row in enumerate(clean + flagged, start=1)]
    logger.info("Ranked %d candidates (%d flagged)", len(ranked), len(flagged))
    return ranked


def _describe(itemset, descriptions):
    return " & ".join(descriptions.get(code, str(code)) for code in itemset.codes)


def emit(rows, destination, descriptions=None, delimiter=","):
    """
        Writes the report; byte-identical output for identical rows
    """
    columns = list(constants.REPORT_COLUMNS)
    records = []
    for row in rows:
        record = [str(row.itemset)]
        record += [constants.SUPPORT_FORMAT.format(value)
                   for value in (row.supp_d2, row.supp_d1, row.supp_ratio)]
        record += [constants.P_VALUE_FORMAT.format(value)
                   for value in (row.p_age, row.p_gender, row.p_exposure, row.p_x, row.p_interaction)]
        record += [constants.FLAG_SEPARATOR.join(sorted(row.flags)), str(row.rank)]
        if descriptions is not None:
            record.append(_describe(row.itemset, descriptions))
        records.append(record)
    if descriptions is not None:
        columns.append(constants.DESCRIPTION_COLUMN)
    frame = pd.DataFrame(records, columns=columns)
    frame.to_csv(destination, sep=delimiter, index=False, encoding="utf-8", lineterminator="\n")
    logger.info("Wrote %d report rows to '%s'", len(rows), destination)


def read_report(source, delimiter=","):
    """
        Parses a report written by emit
    """
    frame = pd.read_csv(source, sep=delimiter, dtype=str, keep_default_na=False, encoding="utf-8")
    rows = []
    for record in frame.to_dict("records"):
        flags = record["flags"]
        rows.append(ReportRow(Itemset.parse(record["itemset"]),
                              float(record["supp_d2"]), float(record["supp_d1"]),
                              float(record["supp_ratio"]),
                              float(record["p_age"]), float(record["p_gender"]),
                              float(record["p_exposure"]), float(record["p_x"]),
                              float(record["p_interaction"]),
                              frozenset(flags.split(constants.FLAG_SEPARATOR)) if flags else frozenset(),
                              int(record["rank"])))
    return rows
