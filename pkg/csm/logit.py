"""
    Logistic regression by iteratively reweighted least squares, with Wald tests
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit, ndtr

import csm.constants as constants
from csm.cohort import assemble_rows
from csm.errors import CollinearityError, DegenerateDataError

logger = logging.getLogger("logit")


@dataclass(frozen=True)
class DesignSpec(object):
    """
        Column layout of the design matrix:
            intercept, age (mean-centred when center_age), gender (1 if gender == 2),
            x, exposure, interaction = x * exposure
    """
    columns: Tuple[str, ...] = constants.DESIGN_COLUMNS
    center_age: bool = True

    def __post_init__(self):
        unknown = set(self.columns) - set(constants.DESIGN_COLUMNS)
        if unknown:
            raise ValueError("Unknown design columns {}".format(sorted(unknown)))

    def matrix(self, rows):
        """
            Builds (X, y) from regression rows
        """
        age = np.array([row.age for row in rows], dtype=float)
        if self.center_age and len(rows):
            age = age - age.mean()
        x = np.array([row.x_present for row in rows], dtype=float)
        exposure = np.array([row.exposure_present for row in rows], dtype=float)
        values = {
            constants.COLUMN_INTERCEPT: np.ones(len(rows)),
            constants.COLUMN_AGE: age,
            constants.COLUMN_GENDER: np.array([row.gender == constants.GENDER_FEMALE for row in rows],
                                              dtype=float),
            constants.COLUMN_X: x,
            constants.COLUMN_EXPOSURE: exposure,
            constants.COLUMN_INTERACTION: x * exposure,
        }
        design = np.column_stack([values[name] for name in self.columns]) if rows \
            else np.zeros((0, len(self.columns)))
        outcome = np.array([row.outcome for row in rows], dtype=float)
        return design, outcome


@dataclass(frozen=True, eq=False)
class FitResult(object):
    """
        Coefficients and Wald statistics of one fit, in design column order
    """
    columns: Tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    separated: bool = False
    collinear: bool = False
    dependent_column: str = field(default=None)
    trace: Tuple[float, ...] = ()
    stalled: bool = False

    @classmethod
    def collinear_result(cls, columns, dependent_column):
        nan = np.full(len(columns), np.nan)
        return cls(tuple(columns), nan, nan.copy(), nan.copy(), nan.copy(), False, 0, np.nan,
                   collinear=True, dependent_column=dependent_column)

    @property
    def flags(self):
        flags = set()
        if self.separated:
            flags.add(constants.FLAG_SEPARATION)
        if self.collinear:
            flags.add(constants.FLAG_COLLINEAR)
        return frozenset(flags)

    def p_value(self, column):
        """
            p-value of a named column, NaN when the column is not in the model
        """
        if column not in self.columns:
            return np.nan
        return float(self.p_values[self.columns.index(column)])

    def coefficient(self, column):
        return float(self.coefficients[self.columns.index(column)])


def standard_normal_cdf(z):
    return float(ndtr(z))


def wald_p_value(coefficient, standard_error):
    """
        Two-sided normal tail of coefficient / standard_error
    """
    if not standard_error > 0:
        raise ValueError("Standard error must be positive, got {}".format(standard_error))
    # 2 * Phi(-|z|) equals 2 * (1 - Phi(|z|)) without cancellation in the far tail
    return min(1.0, 2.0 * float(ndtr(-abs(coefficient / standard_error))))


def log_likelihood(design, outcome, weights):
    eta = design @ weights
    return float(np.sum(outcome * eta - np.logaddexp(0.0, eta)))


def score(design, outcome, weights):
    """
        Gradient of the log-likelihood
    """
    return design.T @ (outcome - expit(design @ weights))


def check_rank(design, columns):
    """
        Raises CollinearityError naming the first column that adds no rank
    """
    if np.linalg.matrix_rank(design) == design.shape[1]:
        return
    for j in range(design.shape[1]):
        if np.linalg.matrix_rank(design[:, :j + 1]) < j + 1:
            raise CollinearityError(columns[j])


def fit_matrix(design, outcome, columns=None,
               max_iterations=constants.IRLS_MAX_ITERATIONS,
               tolerance=constants.IRLS_TOLERANCE):
    """
        Maximum likelihood fit of P(y=1|x) = sigmoid(w.x) by IRLS with step-halving
    """
    design = np.asarray(design, dtype=float)
    outcome = np.asarray(outcome, dtype=float)
    n, k = design.shape
    columns = tuple(columns) if columns is not None else tuple("w{}".format(j) for j in range(k))
    if n < 2:
        raise DegenerateDataError("Need at least 2 rows, got {}".format(n))
    positives = outcome.sum()
    if positives == 0 or positives == n:
        raise DegenerateDataError("All {0} outcomes are {1}".format(n, int(outcome[0])))
    check_rank(design, columns)

    weights = np.zeros(k)
    current = log_likelihood(design, outcome, weights)
    trace = [current]
    converged = stalled = False
    iterations = 0
    ridge = constants.IRLS_RIDGE * np.eye(k)
    for iterations in range(1, max_iterations + 1):
        fitted = expit(design @ weights)
        w = fitted * (1.0 - fitted)
        information = design.T @ (design * w[:, None]) + ridge
        step = np.linalg.solve(information, design.T @ (outcome - fitted))

        for _ in range(constants.IRLS_MAX_HALVINGS):
            candidate = weights + step
            updated = log_likelihood(design, outcome, candidate)
            # accept within rounding of the current likelihood
            if updated >= current - 1e-12 * max(1.0, abs(current)):
                break
            step = step / 2.0
        else:
            stalled = True
            break

        change = np.max(np.abs(candidate - weights))
        weights, current = candidate, updated
        trace.append(current)
        if change < tolerance:
            converged = True
            break

    separated = not converged and bool(np.any(np.abs(weights) > constants.SEPARATION_LIMIT))
    if separated:
        logger.warning("Separation detected after %d iterations", iterations)
    elif stalled:
        logger.warning("Step-halving found no improvement at iteration %d", iterations)
    elif not converged:
        logger.warning("IRLS did not converge in %d iterations", iterations)

    fitted = expit(design @ weights)
    information = design.T @ (design * (fitted * (1.0 - fitted))[:, None])
    try:
        covariance = np.linalg.inv(information)
    except np.linalg.LinAlgError:
        covariance = np.linalg.pinv(information)
    standard_errors = np.sqrt(np.clip(np.diag(covariance), np.finfo(float).tiny, None))
    z_scores = weights / standard_errors
    p_values = np.array([wald_p_value(c, s) for c, s in zip(weights, standard_errors)])
    return FitResult(columns, weights, standard_errors, z_scores, p_values,
                     converged, iterations, current, separated=separated, trace=tuple(trace),
                     stalled=stalled)


def fit(rows, spec=None):
    """
        Fits the design described by spec to regression rows
    """
    spec = spec or DesignSpec()
    design, outcome = spec.matrix(rows)
    return fit_matrix(design, outcome, spec.columns)


def predict_probability(result, features):
    features = np.asarray(features, dtype=float)
    if features.shape != result.coefficients.shape:
        raise ValueError("Expected {0} features, got {1}".format(len(result.coefficients), features.size))
    return float(expit(features @ result.coefficients))


def evaluate_candidate(itemset, selection, study, spec=None):
    """
        Interaction model for one candidate itemset; rank deficiency becomes a flag
    """
    spec = spec or DesignSpec()
    rows = assemble_rows(selection, itemset, study)
    try:
        result = fit(rows, spec)
    except CollinearityError as error:
        logger.warning("Candidate '%s': %s", itemset, error)
        return FitResult.collinear_result(spec.columns, error.column)
    logger.debug("Candidate '%s': interaction p=%.3g after %d iterations",
                 itemset, result.p_value(constants.COLUMN_INTERACTION), result.iterations)
    return result
