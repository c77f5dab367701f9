import numpy as np
import pytest
from scipy.special import expit

from fragma.averaging import fit_averaged, predict
from fragma.baselines import (
    fit_cc,
    fit_glasso,
    fit_group_lasso_at,
    fit_imp,
    fit_smoothed_ic,
    group_lasso_kkt_residual,
    lambda_max_group_lasso,
    smoothed_ic_weights,
)
from fragma.datasets import random_fragmentary, table1_toy
from fragma.errors import RankDeficientError
from fragma.glm import BINOMIAL, GAUSSIAN, fit_candidate, fit_glm
from fragma.patterns import FragmentaryDataset, build_pattern_index

from oracles import (
    logistic_group_lasso_objective,
    slow_logistic_group_lasso,
    softmax_ic_weights,
)


def grouped_logistic_data(rng, n=60, p=6, n_groups=2):
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    beta = np.zeros(p + 1)
    beta[1:4] = [1.0, -0.8, 0.6]
    y = (rng.random(n) < expit(X @ beta)).astype(float)
    step = p // n_groups
    groups = [np.arange(1 + s * step, 1 + (s + 1) * step) for s in range(n_groups)]
    return X, y, groups


# ---------------------------------------------------------------------------
# CC
# ---------------------------------------------------------------------------

def test_cc_equals_first_candidate_exactly(rng):
    data = random_fragmentary(rng, 80, 4, family="binomial", ensure_full=True)
    index = build_pattern_index(data)
    res = fit_cc(data, BINOMIAL, index=index)
    cand = fit_candidate(data, index, 1, BINOMIAL)
    assert np.array_equal(res.beta_effective[list(cand.pattern.indices)], cand.beta)
    assert res.support == list(cand.pattern.indices)


def test_cc_on_fully_observed_equals_plain_glm(rng):
    n, p = 50, 3
    x = rng.standard_normal((n, p))
    y = (rng.random(n) < expit(x @ np.array([0.5, -0.5, 0.2]))).astype(float)
    data = FragmentaryDataset(y, x, np.ones((n, p), bool), [f"c{j}" for j in range(p)])
    res = fit_cc(data, BINOMIAL)
    direct, _ = fit_glm(x, y, BINOMIAL)
    assert np.max(np.abs(res.beta_effective - direct)) < 1e-12


def test_cc_rejects_underdetermined_toy():
    data = table1_toy(family="gaussian")
    with pytest.raises(RankDeficientError):
        fit_cc(data, GAUSSIAN)


# ---------------------------------------------------------------------------
# smoothed AIC / BIC
# ---------------------------------------------------------------------------

def test_ic_weights_examples():
    assert smoothed_ic_weights(np.array([7.3])).tolist() == [1.0]
    assert np.allclose(smoothed_ic_weights(np.array([4.0, 4.0])), [0.5, 0.5])
    w = smoothed_ic_weights(np.array([10.0, 12.0, 14.0]))
    assert np.allclose(w, softmax_ic_weights([10.0, 12.0, 14.0]), atol=1e-12)
    assert np.allclose(w, [0.6652, 0.2447, 0.0900], atol=5e-5)


def test_ic_weights_invariant_to_constant_shift(rng):
    ic = rng.uniform(0, 50, size=6)
    w1 = smoothed_ic_weights(ic)
    w2 = smoothed_ic_weights(ic + 123.4)
    assert np.allclose(w1, w2, atol=1e-12)
    assert abs(w1.sum() - 1.0) < 1e-12
    assert np.all(w1 >= 0)
    # large spreads must not overflow
    w3 = smoothed_ic_weights(np.array([0.0, 5000.0]))
    assert np.allclose(w3, [1.0, 0.0])


def test_smoothed_ic_single_candidate(rng):
    data = random_fragmentary(rng, 30, 3, family="binomial", obs_prob=1.0)
    res = fit_smoothed_ic(data, BINOMIAL, "aic")
    assert np.asarray(res.weights).tolist() == [1.0]


def test_smoothed_ic_weights_on_simplex_both_conventions(rng):
    data = random_fragmentary(rng, 120, 4, family="binomial", ensure_full=True)
    for flavor in ("aic", "bic"):
        for sample in ("own", "cc"):
            res = fit_smoothed_ic(data, BINOMIAL, flavor, ic_sample=sample)
            w = np.asarray(res.weights)
            assert np.all(w >= 0)
            assert abs(w.sum() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# zero-imputation averaging
# ---------------------------------------------------------------------------

def test_imp_equals_opt_when_fully_observed(rng):
    n, p = 70, 3
    x = rng.standard_normal((n, p))
    x[:, 0] = 1.0
    y = (rng.random(n) < expit(x @ np.array([0.2, 0.7, -0.4]))).astype(float)
    data = FragmentaryDataset(y, x, np.ones((n, p), bool), ["intercept", "a", "b"])
    opt = fit_averaged(data, BINOMIAL, "opt1")
    imp = fit_imp(data, BINOMIAL, "opt1")
    assert np.max(np.abs(np.asarray(opt.weights) - np.asarray(imp.weights))) < 1e-10
    assert np.max(np.abs(opt.beta_combined - imp.beta_effective)) < 1e-10
    for _ in range(5):
        xq = rng.standard_normal(p)
        t_opt, _ = predict(opt, xq)
        assert np.isclose(t_opt, imp.linear_predictor(xq), atol=1e-10)


def test_imp_candidate_fits_equal_zero_filled_irls(rng):
    n = 60
    mask = np.ones((n, 2), dtype=bool)
    mask[: n // 2, 1] = False
    x = np.column_stack([np.ones(n), rng.standard_normal(n)])
    y = (rng.random(n) < expit(0.3 + 0.8 * np.where(mask[:, 1], x[:, 1], 0.0))).astype(float)
    data = FragmentaryDataset(y, np.where(mask, x, np.nan), mask, ["intercept", "z"])
    res = fit_imp(data, BINOMIAL, "opt1")
    x0 = np.where(mask, x, 0.0)
    direct, _ = fit_glm(x0, y, BINOMIAL)
    index = build_pattern_index(data)
    k_full = [i for i, p_ in enumerate(index.patterns) if p_.indices == (0, 1)][0]
    # recompute the imp candidate for the two-column pattern
    beta_imp, _ = fit_glm(x0[:, [0, 1]], y, BINOMIAL)
    assert np.max(np.abs(beta_imp - direct)) < 1e-12
    assert res.metadata["zero_impute"]
    # prediction path zero-fills unobserved entries
    t = res.linear_predictor(np.array([1.0, np.nan]))
    assert np.isfinite(t)


def test_imp_single_pattern_reduces_to_one_glm(rng):
    n = 40
    x = np.column_stack([np.ones(n), rng.standard_normal(n)])
    y = (rng.random(n) < 0.5).astype(float)
    data = FragmentaryDataset(y, x, np.ones((n, 2), bool), ["intercept", "z"])
    res = fit_imp(data, BINOMIAL, "opt2")
    direct, _ = fit_glm(x, y, BINOMIAL)
    assert np.asarray(res.weights).tolist() == [1.0]
    assert np.max(np.abs(res.beta_effective - direct)) < 1e-12


def test_imp_lambda_mode_uses_full_sample_size(rng):
    data = random_fragmentary(rng, 50, 3, family="binomial", ensure_full=True)
    res = fit_imp(data, BINOMIAL, "opt2")
    assert np.isclose(res.metadata["lambda_n"], np.log(data.n))


# ---------------------------------------------------------------------------
# group lasso
# ---------------------------------------------------------------------------

def test_group_lasso_zeroes_everything_at_lambda_max(rng):
    X, y, groups = grouped_logistic_data(rng)
    lam_max = lambda_max_group_lasso(X, y, BINOMIAL, groups, np.array([0]))
    beta = fit_group_lasso_at(X, y, BINOMIAL, lam_max * 1.0001, groups)
    for g in groups:
        assert np.allclose(beta[g], 0.0, atol=1e-8)


def test_group_lasso_unpenalized_equals_mle(rng):
    X, y, groups = grouped_logistic_data(rng)
    beta = fit_group_lasso_at(X, y, BINOMIAL, 0.0, groups, tol=1e-13, max_iter=100000)
    mle, _ = fit_glm(X, y, BINOMIAL)
    assert np.max(np.abs(beta - mle)) < 1e-5


def test_group_lasso_matches_slow_oracle_objective(rng):
    X, y, groups = grouped_logistic_data(rng, n=60)
    lam_max = lambda_max_group_lasso(X, y, BINOMIAL, groups, np.array([0]))
    lam = 0.3 * lam_max
    beta = fit_group_lasso_at(X, y, BINOMIAL, lam, groups, tol=1e-13, max_iter=100000)
    oracle = slow_logistic_group_lasso(X, y, lam, groups)
    f_fast = logistic_group_lasso_objective(X, y, beta, lam, groups)
    f_slow = logistic_group_lasso_objective(X, y, oracle, lam, groups)
    assert f_fast <= f_slow + 1e-6


def test_group_lasso_kkt_conditions(rng):
    X, y, groups = grouped_logistic_data(rng, n=80)
    lam_max = lambda_max_group_lasso(X, y, BINOMIAL, groups, np.array([0]))
    for frac in (0.7, 0.3, 0.1):
        lam = frac * lam_max
        beta = fit_group_lasso_at(X, y, BINOMIAL, lam, groups, tol=1e-14, max_iter=200000)
        assert group_lasso_kkt_residual(X, y, BINOMIAL, beta, lam, groups) <= 1e-6


def test_fit_glasso_end_to_end(rng):
    n, p = 240, 7
    x = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    beta_true = np.array([0.3, 1.2, -1.0, 0.8, 0.0, 0.0, 0.0])
    y = (rng.random(n) < expit(x @ beta_true)).astype(float)
    mask = np.ones((n, p), dtype=bool)
    # one block occasionally missing so the refit set differs from CC
    missing = rng.random(n) < 0.25
    mask[missing, 4:7] = False
    data = FragmentaryDataset(
        y, np.where(mask, x, np.nan), mask, ["intercept"] + [f"v{j}" for j in range(1, p)]
    )
    groups = {"signal": [1, 2, 3], "noise": [4, 5, 6]}
    res = fit_glasso(data, BINOMIAL, groups, seed=3)
    assert "signal" in res.metadata["selected_groups"]
    assert 0 in res.support
    # refit uses every subject observing the selected columns
    expected_rows = int(data.mask[:, res.support].all(axis=1).sum())
    assert res.metadata["n_refit"] == expected_rows
    if "noise" not in res.metadata["selected_groups"]:
        assert res.metadata["n_refit"] == n


def test_fit_glasso_respects_group_restriction_to_observed_columns(rng):
    data = random_fragmentary(rng, 150, 5, family="binomial", ensure_full=True)
    # column 0 intentionally outside every group: it stays unpenalized
    groups = {"g1": [1, 2], "g2": [3, 4]}
    res = fit_glasso(data, BINOMIAL, groups, seed=1)
    assert set(res.support) <= set(range(5))
    assert 0 in res.support
