"""
    Error classes raised by the contrast mining stack
"""


class CsmError(Exception):
    """
        Base class for all pipeline failures
    """


class ValidationError(CsmError, ValueError):
    """
        A value (code, record, setting) breaks its invariants
    """


class IngestError(CsmError):
    """
        Input tables are inconsistent or unreadable
    """


class ConfigError(CsmError):
    """
        Configuration file cannot be parsed or holds an invalid value
    """


class EmptyStudyError(CsmError):
    """
        No exposed patient (or no exposed patient with the outcome) in the cohort
    """


class MatchingError(CsmError):
    """
        A matching stratum ran out of eligible controls
    """

    def __init__(self, stratum, shortfall):
        self.stratum = stratum
        self.shortfall = shortfall
        gender, band_start, band_end = stratum
        super().__init__("Matching stratum (gender={0}, age {1}-{2}) is short of {3} control(s)"
                         .format(gender, band_start, band_end, shortfall))


class UndefinedConfidenceError(CsmError, ValueError):
    """
        Confidence of a rule whose antecedent never occurs
    """


class DegenerateDataError(CsmError):
    """
        Regression rows carry only one outcome class
    """


class CollinearityError(CsmError):
    """
        Design matrix is rank deficient
    """

    def __init__(self, column):
        self.column = column
        super().__init__("Design matrix is rank deficient at column '{}'".format(column))
