import numpy as np
import pytest

from flowsentinel.learn import EstimatorSpec, fit, predict_proba_matrix
from flowsentinel.learn.bayes import fit_gaussian_nb

from support import blob_dataset


def _fit(X, y, smoothing=1e-9):
    est, log, converged = fit_gaussian_nb(np.asarray(X, dtype=float),
                                          np.asarray(y), {"var_smoothing": smoothing}, 0)
    assert converged
    return est


def test_posterior_matches_closed_form_two_gaussians():
    # class 0: mean 0, var 1; class 2: mean 4, var 1; equal priors
    est = _fit([[-1.0], [1.0], [3.0], [5.0]], [0, 0, 2, 2])
    x = np.array([[1.0]])
    p = est.proba_matrix(x)[0]
    # likelihood ratio exp(-0.5*1) / exp(-0.5*9) = exp(4)
    expect0 = 1.0 / (1.0 + np.exp(-4.0))
    assert p[0] == pytest.approx(expect0, rel=1e-12)
    assert p[2] == pytest.approx(1.0 - expect0, rel=1e-9)
    assert p[1] == 0.0 and p[3] == 0.0
    # midpoint: symmetric, so the posterior splits evenly
    mid = est.proba_matrix(np.array([[2.0]]))[0]
    assert mid[0] == pytest.approx(0.5) and mid[2] == pytest.approx(0.5)


def test_unequal_priors_shift_the_posterior():
    # same Gaussians as above but class 0 has three times the records
    est = _fit([[-1.0], [1.0], [-1.0], [1.0], [-1.0], [1.0], [3.0], [5.0]],
               [0, 0, 0, 0, 0, 0, 2, 2])
    mid = est.proba_matrix(np.array([[2.0]]))[0]
    assert mid[0] == pytest.approx(0.75, rel=1e-12)
    assert mid[2] == pytest.approx(0.25, rel=1e-12)


def test_variance_floor_keeps_constant_features_finite():
    # second feature is constant within and across classes
    est = _fit([[0.0, 5.0], [1.0, 5.0], [10.0, 5.0], [11.0, 5.0]], [0, 0, 1, 1],
               smoothing=1e-9)
    assert np.isfinite(est.variances).all()
    assert (est.variances > 0.0).all()
    p = est.proba_matrix(np.array([[0.5, 5.0]]))
    assert np.isfinite(p).all()
    assert p[0, 0] > 0.99


def test_absent_class_has_exactly_zero_posterior():
    est = _fit([[0.0], [1.0], [4.0], [5.0]], [0, 0, 1, 1])
    assert est.log_priors[2] == -np.inf
    p = est.proba_matrix(np.array([[0.0], [4.5], [100.0]]))
    assert (p[:, 2] == 0.0).all() and (p[:, 3] == 0.0).all()
    assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-12


def test_nb_on_blobs_through_the_shared_contract():
    data = blob_dataset(seed=8, per_class=40)
    model = fit(EstimatorSpec(kind="NB", seed=0), data)
    proba = predict_proba_matrix(model, data.X)
    assert np.abs(proba.sum(axis=1) - 1.0).max() < 1e-9
    assert (proba >= 0.0).all()
    assert (proba.argmax(axis=1) == data.y).mean() >= 0.97


def test_fit_is_deterministic_and_seed_free():
    data = blob_dataset(seed=9, per_class=25)
    a = fit(EstimatorSpec(kind="NB", seed=0), data)
    b = fit(EstimatorSpec(kind="NB", seed=999), data)  # seed is irrelevant to NB
    assert np.array_equal(a.estimator.means, b.estimator.means)
    assert np.array_equal(a.estimator.variances, b.estimator.variances)
