"""
    Run configuration read from a sectioned key-value file
"""
import configparser
import logging
import os
import re
from dataclasses import dataclass, replace
from typing import Optional

import csm.constants as constants
from csm.codes import EventCode
from csm.cohort import StudyDefinition
from csm.errors import ConfigError, ValidationError
from csm.ingest import RawTables
from csm.miner import MinerConfig
from synth.generator import ConfounderFactor, GeneratorConfig, PlantedFactor

logger = logging.getLogger("config")

SECTIONS = ("data", "study", "miner", "generator", "output")
_SECTION_PATTERN = re.compile(r"^\s*\[([^\]]+)\]")


@dataclass(frozen=True)
class RunConfig(object):
    """
        Everything one pipeline run needs
    """
    path: str
    tables: RawTables
    study: StudyDefinition
    miner: MinerConfig
    generator: GeneratorConfig
    report_path: str
    candidates_path: str
    fixtures_path: str
    first_year_days: int = constants.FIRST_YEAR_DAYS
    rollup_level: Optional[int] = None
    dictionary_path: Optional[str] = None
    workers: int = 1

    def check_inputs(self):
        """
            The data files must exist before mining
        """
        paths = [self.tables.patients_path, self.tables.events_path, self.tables.prescriptions_path]
        if self.dictionary_path:
            paths.append(self.dictionary_path)
        for path in paths:
            if not os.path.isfile(path):
                raise ConfigError("{0}: input file '{1}' does not exist".format(self.path, path))

    def with_seed(self, seed):
        try:
            return replace(self, study=replace(self.study, random_seed=seed),
                           generator=replace(self.generator, random_seed=seed))
        except ValidationError as error:
            raise ConfigError("--seed {0}: {1}".format(seed, error))

    def with_workers(self, workers):
        if workers < 1:
            raise ConfigError("--workers must be at least 1, got {}".format(workers))
        return replace(self, workers=workers)


class _SectionReader(object):
    """
        Typed access to parsed options, reporting the line of any bad value
    """

    def __init__(self, path, parser, lines):
        self.path = path
        self.parser = parser
        self.lines = lines
        self.base = os.path.dirname(os.path.abspath(path))

    def line_of(self, section, option=None):
        current = None
        option_pattern = re.compile(r"^\s*{}\s*[=:]".format(re.escape(option or "")), re.IGNORECASE)
        for number, line in enumerate(self.lines, start=1):
            header = _SECTION_PATTERN.match(line)
            if header:
                current = header.group(1).strip()
                if option is None and current == section:
                    return number
                continue
            if option is not None and current == section and option_pattern.match(line):
                return number
        return None

    def error(self, section, option, message):
        line = self.line_of(section, option)
        where = "{0} line {1}".format(self.path, line) if line else self.path
        key = "[{0}] {1}".format(section, option) if option else "[{}]".format(section)
        return ConfigError("{0}: {1}: {2}".format(where, key, message))

    def get(self, section, option, convert=str, default=None, required=False):
        raw = self.parser.get(section, option, fallback=None) if self.parser.has_section(section) else None
        if raw is None or not raw.strip():
            if required:
                raise self.error(section, option, "value is required")
            return default
        try:
            return convert(raw.strip())
        except (ValueError, ValidationError) as error:
            raise self.error(section, option, "invalid value '{0}' ({1})".format(raw.strip(), error))

    def path_value(self, section, option, default=None, required=False):
        value = self.get(section, option, default=default, required=required)
        if value is None:
            return None
        return os.path.normpath(os.path.join(self.base, value))

    def build(self, section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ValidationError as error:
            raise self.error(section, None, str(error))


def _boolean(text):
    lowered = text.lower()
    if lowered in ("1", "yes", "true", "on"):
        return True
    if lowered in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected true or false")


def _delimiter(text):
    if text.lower() == "tab":
        return "\t"
    if len(text) != 1:
        raise ValueError("delimiter must be one character or 'tab'")
    return text


def _drug_code(text):
    if text.startswith(constants.DRUG_PREFIX):
        text = text[len(constants.DRUG_PREFIX):]
    return EventCode(text, is_drug=True)


def _planted(text):
    """
        Comma list of 'code prevalence [main_logit [interaction_logit]]'
    """
    factors = []
    for entry in filter(None, (part.strip() for part in text.split(","))):
        fields = entry.split()
        if not 2 <= len(fields) <= 4:
            raise ValueError("'{}' should read 'code prevalence [main_logit [interaction_logit]]'".format(entry))
        factors.append(PlantedFactor(EventCode.parse(fields[0]), *(float(f) for f in fields[1:])))
    return tuple(factors)


def _confounders(text):
    """
        Comma list of 'code age_threshold'
    """
    factors = []
    for entry in filter(None, (part.strip() for part in text.split(","))):
        fields = entry.split()
        if len(fields) != 2:
            raise ValueError("'{}' should read 'code age_threshold'".format(entry))
        factors.append(ConfounderFactor(EventCode.parse(fields[0]), int(fields[1])))
    return tuple(factors)


def load_config(path):
    """
        Parses and validates a run configuration file
    """
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as error:
        raise ConfigError("Cannot read config '{0}': {1}".format(path, error.strerror or error))

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as error:
        raise ConfigError("{0}: {1}".format(path, error))

    reader = _SectionReader(path, parser, text.splitlines())
    for section in parser.sections():
        if section not in SECTIONS:
            raise reader.error(section, None, "unknown section, expected one of {}".format(", ".join(SECTIONS)))

    delimiter = reader.get("data", "delimiter", _delimiter, ",")
    tables = RawTables(reader.path_value("data", "patients", constants.PATIENTS_FILE),
                       reader.path_value("data", "events", constants.EVENTS_FILE),
                       reader.path_value("data", "prescriptions", constants.PRESCRIPTIONS_FILE),
                       delimiter)
    first_year_days = reader.get("data", "first_year_days", int, constants.FIRST_YEAR_DAYS)
    if first_year_days < 0:
        raise reader.error("data", "first_year_days", "must not be negative")
    rollup_level = reader.get("data", "rollup_level", int)
    if rollup_level is not None and not 1 <= rollup_level <= constants.CODE_LENGTH:
        raise reader.error("data", "rollup_level", "must lie in 1..{}".format(constants.CODE_LENGTH))

    seed = reader.get("study", "seed", int, 0)
    exposure = reader.get("study", "exposure_code", _drug_code, required=True)
    outcome = reader.get("study", "outcome_code", EventCode, required=True)
    study = reader.build(
        "study", StudyDefinition,
        exposure_code_prefix=exposure,
        outcome_code_prefix=outcome,
        outcome_window_days=reader.get("study", "outcome_window_days", int, constants.OUTCOME_WINDOW_DAYS),
        controls_per_case=reader.get("study", "controls_per_case", int, constants.CONTROLS_PER_CASE),
        random_seed=seed,
        age_band_years=reader.get("study", "age_band_years", int, constants.AGE_BAND_YEARS),
        first_year_days=first_year_days,
        resample_per_candidate=reader.get("study", "resample_per_candidate", _boolean, False))

    miner = reader.build(
        "miner", MinerConfig,
        min_support=reader.get("miner", "min_support", str, constants.MIN_SUPPORT),
        max_itemset_size=reader.get("miner", "max_itemset_size", int, constants.MAX_ITEMSET_SIZE))

    defaults = GeneratorConfig()
    generator = reader.build(
        "generator", GeneratorConfig,
        n_patients=reader.get("generator", "n_patients", int, defaults.n_patients),
        random_seed=seed,
        background_codes=reader.get("generator", "background_codes", int, defaults.background_codes),
        background_prevalence_min=reader.get("generator", "background_prevalence_min", float,
                                             defaults.background_prevalence_min),
        background_prevalence_max=reader.get("generator", "background_prevalence_max", float,
                                             defaults.background_prevalence_max),
        exposure_prevalence=reader.get("generator", "exposure_prevalence", float,
                                       defaults.exposure_prevalence),
        baseline_outcome_logit=reader.get("generator", "baseline_outcome_logit", float,
                                          defaults.baseline_outcome_logit),
        age_coefficient=reader.get("generator", "age_coefficient", float, defaults.age_coefficient),
        gender_coefficient=reader.get("generator", "gender_coefficient", float, defaults.gender_coefficient),
        exposure_logit=reader.get("generator", "exposure_logit", float, defaults.exposure_logit),
        planted_factors=reader.get("generator", "planted", _planted, ()),
        confounder_factors=reader.get("generator", "confounders", _confounders, ()),
        exposure_code=reader.get("generator", "exposure_code", _drug_code, exposure),
        outcome_code=reader.get("generator", "outcome_code", EventCode, outcome),
        outcome_window_days=study.outcome_window_days,
        first_year_days=first_year_days,
        observation_years=reader.get("generator", "observation_years", int, defaults.observation_years),
        start_year=reader.get("generator", "start_year", int, defaults.start_year),
        age_min=reader.get("generator", "age_min", int, defaults.age_min),
        age_max=reader.get("generator", "age_max", int, defaults.age_max),
        age_center=reader.get("generator", "age_center", float, defaults.age_center))

    workers = reader.get("output", "workers", int, 1)
    if workers < 1:
        raise reader.error("output", "workers", "must be at least 1")

    config = RunConfig(path=path,
                       tables=tables,
                       study=study,
                       miner=miner,
                       generator=generator,
                       report_path=reader.path_value("output", "report", "report.csv"),
                       candidates_path=reader.path_value("output", "candidates", "candidates.csv"),
                       fixtures_path=reader.path_value("output", "fixtures", "fixtures"),
                       first_year_days=first_year_days,
                       rollup_level=rollup_level,
                       dictionary_path=reader.path_value("data", "dictionary"),
                       workers=workers)
    logger.info("Loaded configuration '%s'", path)
    return config
