"""
    IRLS fits against a finite-difference Newton oracle, Wald machinery and candidate models
"""
import logging
import math
from dataclasses import replace
from datetime import date

import numpy as np
import pytest
from scipy.integrate import quad

import csm.constants as constants
from csm.cohort import RegressionRow, SelectedPatient, StudyDefinition
from csm.errors import CollinearityError, DegenerateDataError
from csm.logit import (DesignSpec, evaluate_candidate, fit, fit_matrix, log_likelihood, predict_probability,
                       score, standard_normal_cdf, wald_p_value)
from csm.miner import Itemset

from conftest import EXPOSURE, OUTCOME, make_patient


def oracle_log_likelihood(design, outcome, weights):
    eta = design @ weights
    softplus = np.where(eta > 0, eta + np.log1p(np.exp(-np.abs(eta))), np.log1p(np.exp(-np.abs(eta))))
    return float(np.sum(outcome * eta - softplus))


def numeric_gradient(func, weights, h):
    gradient = np.zeros(len(weights))
    for j in range(len(weights)):
        step = np.zeros(len(weights))
        step[j] = h
        gradient[j] = (func(weights + step) - func(weights - step)) / (2 * h)
    return gradient


def newton_oracle(design, outcome, iterations=100):
    """
        Newton's method on the log-likelihood with central-difference derivatives
    """
    def loglik(weights):
        return oracle_log_likelihood(design, outcome, weights)

    def gradient(weights):
        return numeric_gradient(loglik, weights, 1e-5)

    weights = np.zeros(design.shape[1])
    for _ in range(iterations):
        hessian = np.column_stack([
            (gradient(weights + h) - gradient(weights - h)) / 2e-4
            for h in np.eye(len(weights)) * 1e-4])
        step = np.linalg.solve(hessian, -gradient(weights))
        weights = weights + step
        if np.max(np.abs(step)) < 1e-9:
            break
    return weights


def synthetic_design(rng, n):
    age = rng.normal(0.0, 10.0, n)
    gender = rng.integers(0, 2, n).astype(float)
    x = rng.integers(0, 2, n).astype(float)
    exposure = rng.integers(0, 2, n).astype(float)
    design = np.column_stack([np.ones(n), age, gender, x, exposure, x * exposure])
    truth = np.array([rng.uniform(-1.5, 0.0), rng.uniform(-0.05, 0.05), rng.uniform(-0.5, 0.5),
                      rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
    outcome = (rng.random(n) < 1.0 / (1.0 + np.exp(-design @ truth))).astype(float)
    return design, outcome


@pytest.fixture(scope="module")
def datasets():
    rng = np.random.default_rng(2024)
    return [synthetic_design(rng, int(n)) for n in rng.integers(100, 2001, size=50)]


def test_fit_matches_newton_oracle(datasets):
    for design, outcome in datasets:
        result = fit_matrix(design, outcome, constants.DESIGN_COLUMNS)
        assert result.converged and not result.flags
        np.testing.assert_allclose(result.coefficients, newton_oracle(design, outcome), rtol=0, atol=1e-6)


def test_score_vanishes_at_optimum(datasets):
    for design, outcome in datasets:
        result = fit_matrix(design, outcome, constants.DESIGN_COLUMNS)
        assert result.converged
        assert np.max(np.abs(score(design, outcome, result.coefficients))) < 1e-6
        fitted = 1.0 / (1.0 + np.exp(-design @ result.coefficients))
        assert fitted.mean() == pytest.approx(outcome.mean(), abs=1e-8)


def test_likelihood_never_decreases(datasets):
    for design, outcome in datasets:
        trace = fit_matrix(design, outcome).trace
        for before, after in zip(trace, trace[1:]):
            assert after >= before - 1e-12 * max(1.0, abs(before))


def test_score_matches_finite_differences(datasets):
    rng = np.random.default_rng(5)
    for design, outcome in datasets[:10]:
        weights = rng.normal(0.0, 0.3, design.shape[1]) * np.array([1, 0.05, 1, 1, 1, 1])
        numeric = numeric_gradient(lambda w: log_likelihood(design, outcome, w), weights, 1e-6)
        np.testing.assert_allclose(score(design, outcome, weights), numeric, rtol=1e-6, atol=1e-4)


def test_log_likelihood_agrees_with_oracle(datasets):
    design, outcome = datasets[0]
    weights = np.linspace(-0.5, 0.5, design.shape[1])
    assert log_likelihood(design, outcome, weights) == pytest.approx(
        oracle_log_likelihood(design, outcome, weights), rel=1e-12)


@pytest.mark.parametrize("positives, expected", [(50, 0.0), (25, math.log(25 / 75)), (90, math.log(9))])
def test_intercept_only_closed_form(positives, expected):
    outcome = np.array([1.0] * positives + [0.0] * (100 - positives))
    result = fit_matrix(np.ones((100, 1)), outcome, ("intercept",))
    assert result.coefficients[0] == pytest.approx(expected, abs=1e-10 if positives == 50 else 1e-6)
    assert result.standard_errors[0] == pytest.approx(math.sqrt(100 / (positives * (100 - positives))), rel=1e-6)


def test_single_outcome_class():
    with pytest.raises(DegenerateDataError):
        fit_matrix(np.ones((10, 1)), np.ones(10))
    with pytest.raises(DegenerateDataError):
        fit_matrix(np.ones((1, 1)), np.ones(1))


def test_rank_deficiency_names_column(datasets):
    design, outcome = datasets[0]
    design = design.copy()
    design[:, 3] = 0.0
    with pytest.raises(CollinearityError) as error:
        fit_matrix(design, outcome, constants.DESIGN_COLUMNS)
    assert error.value.column == constants.COLUMN_X


def test_duplicate_column_is_collinear(datasets):
    design, outcome = datasets[1]
    design = design.copy()
    design[:, 5] = design[:, 4]
    with pytest.raises(CollinearityError, match="interaction"):
        fit_matrix(design, outcome, constants.DESIGN_COLUMNS)


def test_separation_is_flagged_not_fatal():
    x = np.array([0.0] * 20 + [1.0] * 20)
    design = np.column_stack([np.ones(40), x])
    result = fit_matrix(design, x, ("intercept", "x"))
    assert result.separated and not result.converged
    assert result.flags == frozenset({constants.FLAG_SEPARATION})
    assert np.all((result.p_values >= 0) & (result.p_values <= 1))


def test_failed_step_halving_is_not_convergence(monkeypatch, caplog):
    design = np.column_stack([np.ones(12), np.arange(12) % 3])
    outcome = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 1.0] * 2)
    # every move away from zero looks worse
    monkeypatch.setattr("csm.logit.log_likelihood",
                        lambda design, outcome, weights: 0.0 if not np.any(weights) else -1.0)
    with caplog.at_level(logging.WARNING, logger="logit"):
        result = fit_matrix(design, outcome, ("intercept", "x"))
    assert result.stalled and not result.converged
    assert result.iterations == 1
    assert np.all(result.coefficients == 0)
    assert "no improvement" in caplog.text


def test_row_order_does_not_matter(datasets):
    design, outcome = datasets[2]
    order = np.random.default_rng(1).permutation(len(outcome))
    first = fit_matrix(design, outcome)
    second = fit_matrix(design[order], outcome[order])
    np.testing.assert_allclose(first.coefficients, second.coefficients, rtol=0, atol=1e-10)
    np.testing.assert_allclose(first.p_values, second.p_values, rtol=1e-9, atol=1e-10)


def regression_rows(n=600, seed=3):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        age = int(rng.integers(30, 90))
        gender = int(rng.integers(1, 3))
        x, exposure = bool(rng.random() < 0.4), bool(rng.random() < 0.3)
        eta = -1.0 + 0.03 * (age - 60) + 0.3 * (gender == 2) + 0.5 * x + 0.4 * exposure \
            + 0.8 * (x and exposure)
        outcome = bool(rng.random() < 1 / (1 + math.exp(-eta)))
        rows.append(RegressionRow("P{}".format(i), age, gender, x, exposure, outcome))
    return rows


def test_age_shift_changes_nothing_when_centred():
    rows = regression_rows()
    shifted = [replace(row, age=row.age + 17) for row in rows]
    first, second = fit(rows), fit(shifted)
    np.testing.assert_allclose(first.coefficients[1:], second.coefficients[1:], rtol=0, atol=1e-8)
    np.testing.assert_allclose(first.p_values, second.p_values, rtol=0, atol=1e-8)


def test_uncentred_age_moves_intercept():
    rows = regression_rows()
    centred, raw = fit(rows), fit(rows, DesignSpec(center_age=False))
    assert centred.coefficient(constants.COLUMN_AGE) == pytest.approx(raw.coefficient(constants.COLUMN_AGE), abs=1e-8)
    assert centred.coefficient(constants.COLUMN_INTERCEPT) != pytest.approx(raw.coefficient(constants.COLUMN_INTERCEPT))


def test_design_matrix_layout():
    rows = [RegressionRow("A", 50, 2, True, True, True), RegressionRow("B", 70, 1, False, True, False)]
    design, outcome = DesignSpec().matrix(rows)
    np.testing.assert_array_equal(design, [[1, -10, 1, 1, 1, 1], [1, 10, 0, 0, 1, 0]])
    np.testing.assert_array_equal(outcome, [1, 0])
    with pytest.raises(ValueError):
        DesignSpec(columns=("intercept", "bmi"))


def test_predict_probability(datasets):
    design, outcome = datasets[0]
    result = fit_matrix(design, outcome, constants.DESIGN_COLUMNS)
    oracle = newton_oracle(design, outcome)
    row = design[0]
    assert predict_probability(result, row) == pytest.approx(1 / (1 + math.exp(-row @ oracle)), abs=1e-8)
    zero = replace(result, coefficients=np.zeros(6))
    assert predict_probability(zero, row) == 0.5
    scaled = [predict_probability(replace(result, coefficients=np.full(6, k)), np.ones(6)) for k in (0.5, 1, 2, 4)]
    assert scaled == sorted(scaled) and scaled[-1] > 0.99999
    with pytest.raises(ValueError):
        predict_probability(result, np.ones(5))


def normal_cdf_oracle(z):
    value, _ = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), -np.inf, z,
                    epsabs=1e-13, epsrel=1e-13)
    return value


def test_standard_normal_cdf():
    assert standard_normal_cdf(0.0) == 0.5
    assert standard_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    for z in np.random.default_rng(0).uniform(-6, 6, 25):
        assert standard_normal_cdf(z) == pytest.approx(normal_cdf_oracle(z), abs=1e-9)
        assert standard_normal_cdf(z) + standard_normal_cdf(-z) == pytest.approx(1.0, abs=1e-12)


def test_wald_p_value():
    assert wald_p_value(0.0, 0.7) == 1.0
    assert wald_p_value(1.959964, 1.0) == pytest.approx(0.05, abs=1e-4)
    assert wald_p_value(-3.0, 1.0) == pytest.approx(0.00270, abs=1e-5)
    assert wald_p_value(6.0, 2.0) == pytest.approx(2 * (1 - normal_cdf_oracle(3.0)), abs=1e-9)
    for standard_error in (0.0, -1.0):
        with pytest.raises(ValueError):
            wald_p_value(1.0, standard_error)


def test_fit_result_p_values_are_wald(datasets):
    design, outcome = datasets[3]
    result = fit_matrix(design, outcome, constants.DESIGN_COLUMNS)
    for coefficient, error, p_value in zip(result.coefficients, result.standard_errors, result.p_values):
        assert p_value == pytest.approx(wald_p_value(coefficient, error))
    assert math.isnan(result.p_value("bmi"))


def selection_from_rows(rows):
    """
        Patients whose histories reproduce the given rows at a 2010-01-01 index date
    """
    index = date(2010, 1, 1)
    selection = []
    for row in rows:
        events = [("H33..", "2005-06-01")] if row.x_present else []
        prescriptions = [("C11..", "2009-06-01")] if row.exposure_present else []
        birth = date(index.year - row.age, 1, 1)
        patient = make_patient(row.patient_id, gender=row.gender, birth=birth.isoformat(),
                               registration="1990-01-01", events=events, prescriptions=prescriptions)
        selection.append(SelectedPatient(patient, index, row.outcome))
    return selection


def test_evaluate_candidate_fits_interaction_model():
    rows = regression_rows()
    study = StudyDefinition(EXPOSURE, OUTCOME)
    result = evaluate_candidate(Itemset.of("H33.."), selection_from_rows(rows), study)
    expected = fit(rows)
    np.testing.assert_allclose(result.coefficients, expected.coefficients, rtol=0, atol=1e-10)
    assert result.columns == constants.DESIGN_COLUMNS
    assert 0 <= result.p_value(constants.COLUMN_INTERACTION) <= 1


def test_evaluate_candidate_flags_absent_itemset():
    study = StudyDefinition(EXPOSURE, OUTCOME)
    result = evaluate_candidate(Itemset.of("Z99.."), selection_from_rows(regression_rows(200)), study)
    assert result.flags == frozenset({constants.FLAG_COLLINEAR})
    assert result.dependent_column == constants.COLUMN_X
    assert math.isnan(result.p_value(constants.COLUMN_INTERACTION))
