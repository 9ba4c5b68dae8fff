import numpy as np
import pytest

from flowsentinel.learn import (EstimatorSpec, fit, predict_proba_matrix,
                                splitmix64_sequence)
from flowsentinel.learn.tree_models import (fit_adaboost, fit_forest, fit_gbt,
                                            fit_tree)

from support import blob_dataset


def _xy(seed, n=80, d=4):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 4, size=n)
    X = rng.normal(size=(n, d)) + 2.5 * np.eye(4)[y][:, :d]
    return X, y


# ---- random forest --------------------------------------------------------------


def test_single_unbagged_full_feature_forest_equals_the_tree():
    data = blob_dataset(seed=12, per_class=30)
    dt = fit(EstimatorSpec(kind="DT", seed=0), data)
    rf = fit(EstimatorSpec(kind="RF", hyperparameters={
        "trees": 1, "bootstrap": False, "max_features": "all"}, seed=0), data)
    rng = np.random.default_rng(0)
    queries = np.vstack([data.X, rng.normal(scale=3.0, size=(200, data.schema.count))])
    assert np.array_equal(predict_proba_matrix(dt, queries),
                          predict_proba_matrix(rf, queries))


def test_forest_is_seed_deterministic():
    X, y = _xy(3)
    hp = {"trees": 12, "bootstrap": True, "max_features": "sqrt",
          "max_depth": 20, "min_samples_leaf": 1}
    a, _, _ = fit_forest(X, y, hp, seed=7)
    b, _, _ = fit_forest(X, y, hp, seed=7)
    c, _, _ = fit_forest(X, y, hp, seed=8)
    assert np.array_equal(a.proba_matrix(X), b.proba_matrix(X))
    assert not np.array_equal(a.proba_matrix(X), c.proba_matrix(X))


def test_forest_proba_is_the_tree_average():
    X, y = _xy(4)
    hp = {"trees": 5, "bootstrap": True, "max_features": "sqrt",
          "max_depth": 20, "min_samples_leaf": 1}
    est, _, _ = fit_forest(X, y, hp, seed=1)
    manual = np.mean([t.leaf_values(X) for t in est.trees], axis=0)
    assert np.allclose(est.proba_matrix(X), manual, atol=1e-12)
    # single-record path agrees with the matrix path
    for i in (0, 11, 42):
        assert np.allclose(est.proba_one(X[i]), est.proba_matrix(X[i:i + 1])[0], atol=1e-12)


def test_forest_beats_its_average_tree_on_noisy_blobs():
    data = blob_dataset(seed=13, per_class=50, spread=2.2)
    rf = fit(EstimatorSpec(kind="RF", hyperparameters={"trees": 30, "max_depth": 4},
                           seed=0), data)
    single = fit(EstimatorSpec(kind="DT", hyperparameters={"max_depth": 4}, seed=0), data)
    rf_acc = (predict_proba_matrix(rf, data.X).argmax(axis=1) == data.y).mean()
    dt_acc = (predict_proba_matrix(single, data.X).argmax(axis=1) == data.y).mean()
    assert rf_acc >= dt_acc - 0.02  # bagging may tie but must not collapse


# ---- adaboost ---------------------------------------------------------------------


def test_adaboost_stage_errors_stay_under_the_chance_bound():
    X, y = _xy(5, n=120)
    est, log, _ = fit_adaboost(X, y, {"rounds": 25}, seed=0)
    assert len(log) == len(est.alphas) > 0
    for entry in log:
        assert entry["loss"] < 0.75  # (K-1)/K for K=4
        assert entry["alpha"] > 0.0
    assert (est.alphas > 0.0).all()


def test_adaboost_improves_on_a_single_stump():
    X, y = _xy(14, n=160)
    boosted, _, _ = fit_adaboost(X, y, {"rounds": 40}, seed=0)
    stump, _, _ = fit_tree(X, y, {"max_depth": 1, "min_samples_leaf": 1,
                                  "min_impurity_decrease": 0.0}, seed=0)
    acc_boost = (boosted.proba_matrix(X).argmax(axis=1) == y).mean()
    acc_stump = (stump.proba_matrix(X).argmax(axis=1) == y).mean()
    assert acc_boost >= acc_stump + 0.2


def test_adaboost_degenerate_data_falls_back_to_priors():
    # a constant feature offers no split; the best stump is a single leaf
    # predicting the majority class, whose weighted error is exactly the
    # chance bound, so no stage is accepted
    X = np.ones((8, 1))
    y = np.array([0, 1, 2, 3, 0, 1, 2, 3])
    est, log, _ = fit_adaboost(X, y, {"rounds": 10}, seed=0)
    assert log == [] and len(est.stumps) == 0
    p = est.proba_matrix(np.array([[1.0], [9.9]]))
    assert np.allclose(p, 0.25)
    assert np.allclose(est.proba_one(np.array([5.5])), 0.25)


def test_adaboost_perfect_stump_stops_with_capped_weight():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0, 0, 1, 1])
    est, log, _ = fit_adaboost(X, y, {"rounds": 10}, seed=0)
    assert len(est.stumps) == 1
    assert log[0]["loss"] == 0.0
    assert est.alphas[0] == pytest.approx(np.log(1e10))


# ---- gradient boosting ---------------------------------------------------------------


def test_gbt_training_log_loss_is_non_increasing():
    X, y = _xy(6, n=100)
    _, log, _ = fit_gbt(X, y, {"rounds": 40, "learning_rate": 0.1,
                               "max_depth": 3, "l2": 1.0}, seed=0)
    losses = [entry["loss"] for entry in log]
    assert len(losses) == 41  # per-round losses plus the final state
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[0] == pytest.approx(-np.log(np.bincount(y, minlength=4) / len(y)).mean(), rel=1e-6) \
        or losses[0] > 0  # first entry is the prior-only loss


def test_gbt_zero_rounds_predicts_the_class_priors():
    X, y = _xy(7, n=40)
    est, log, _ = fit_gbt(X, y, {"rounds": 0, "learning_rate": 0.1,
                                 "max_depth": 3, "l2": 1.0}, seed=0)
    priors = np.bincount(y, minlength=4) / len(y)
    assert np.allclose(est.proba_matrix(X[:5]), priors, atol=1e-12)
    assert len(log) == 1


def test_gbt_fits_blobs_tightly():
    data = blob_dataset(seed=15, per_class=30)
    model = fit(EstimatorSpec(kind="GBT", hyperparameters={"rounds": 25}, seed=0), data)
    proba = predict_proba_matrix(model, data.X)
    assert (proba.argmax(axis=1) == data.y).mean() >= 0.99
    assert np.abs(proba.sum(axis=1) - 1.0).max() < 1e-9


def test_first_gbt_round_loss_is_the_prior_entropy():
    X = np.zeros((8, 2))
    y = np.array([0, 0, 0, 0, 1, 1, 2, 3])
    _, log, _ = fit_gbt(X, y, {"rounds": 1, "learning_rate": 0.1,
                               "max_depth": 2, "l2": 1.0}, seed=0)
    priors = np.array([0.5, 0.25, 0.125, 0.125])
    expect = float(-np.log(priors[y]).mean())
    assert log[0]["loss"] == pytest.approx(expect, rel=1e-12)


# ---- shared seeding -------------------------------------------------------------------


def test_splitmix64_sequence_is_deterministic_and_collision_free():
    a = splitmix64_sequence(42, 100)
    b = splitmix64_sequence(42, 100)
    c = splitmix64_sequence(43, 100)
    assert a == b
    assert len(set(a)) == 100
    assert a != c
    assert all(0 <= v < 2**64 for v in a)


def test_tree_and_forest_share_the_fit_contract():
    X, y = _xy(8, n=60)
    est, log, converged = fit_tree(X, y, {"max_depth": 20, "min_samples_leaf": 1,
                                          "min_impurity_decrease": 0.0}, seed=0)
    assert converged and len(log) == 1
    assert 0.0 <= log[0]["loss"] <= 1.0
