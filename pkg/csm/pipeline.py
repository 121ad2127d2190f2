"""
    Four-step candidate risk factor pipeline
"""
import logging

from csm.cohort import partition, seed_for_candidate, select_cases_and_controls
from csm.errors import EmptyStudyError
from csm.ingest import apply_first_year_exclusion, load_cohort, load_dictionary, roll_up
from csm.logit import evaluate_candidate
from csm.miner import filter_candidates, mine_frequent, support_ratio
from csm.report import rank


class ContrastPipeline(object):
    """
        Runs one configured study: partition, mine, regress, rank
    """

    def __init__(self, config, executor=None):
        self.config = config
        self.executor = executor
        self.cohort = None
        self.logger = logging.getLogger("pipeline")

    def load(self):
        """
            Reads the tables and applies the preprocessing
        """
        cohort = load_cohort(self.config.tables)
        cohort = apply_first_year_exclusion(cohort, self.config.first_year_days)
        if self.config.rollup_level is not None:
            cohort = roll_up(cohort, self.config.rollup_level)
        self.cohort = cohort
        return cohort

    def descriptions(self):
        if not self.config.dictionary_path:
            return None
        return load_dictionary(self.config.dictionary_path, self.config.tables.delimiter)

    def mine(self):
        """
            Steps 1 and 2: D2-frequent itemsets with a support ratio above 1
        """
        if self.cohort is None:
            self.load()
        study = self.config.study
        d1, d2 = partition(self.cohort, study)
        if d2.m == 0:
            raise EmptyStudyError("No patient had a '{0}' outcome within {1} days of a '{2}' prescription"
                                  .format(study.outcome_code_prefix, study.outcome_window_days,
                                          study.exposure_code_prefix))
        frequent = mine_frequent(d2, self.config.miner, self.executor, self.config.workers)
        candidates = filter_candidates([support_ratio(f.itemset, d1, d2) for f in frequent])
        self.logger.info("%d of %d frequent itemsets have a support ratio above 1",
                         len(candidates), len(frequent))
        return candidates

    def evaluate(self, candidates):
        """
            Step 3: one interaction model per candidate
        """
        study = self.config.study
        if not candidates:
            return []
        shared = None
        if not study.resample_per_candidate:
            shared = select_cases_and_controls(self.cohort, study)

        def evaluate_one(indexed):
            index, candidate = indexed
            selection = shared
            if selection is None:
                selection = select_cases_and_controls(self.cohort, study, seed_for_candidate(study, index))
            return evaluate_candidate(candidate.itemset, selection, study)

        if self.executor is not None:
            results = list(self.executor.map(evaluate_one, enumerate(candidates)))
        else:
            results = [evaluate_one(indexed) for indexed in enumerate(candidates)]
        self.logger.info("Fitted %d interaction models", len(results))
        return list(zip(candidates, results))

    def run(self):
        """
            Steps 1 to 4; returns the candidates and the ranked report rows
        """
        candidates = self.mine()
        return candidates, rank(self.evaluate(candidates))
