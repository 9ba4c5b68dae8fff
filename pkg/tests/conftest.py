import numpy as np
import pytest

from flowsentinel.features import fit_pca
from flowsentinel.learn import EstimatorSpec, fit, save_model
from flowsentinel.preprocess import apply_standardizer, fit_standardizer
from flowsentinel.traffic import GeneratorSpec, generate_dataset

from support import blob_dataset


@pytest.fixture(scope="session")
def small_corpus():
    """A scaled-down generator corpus: same class mix, 970 rows."""
    return generate_dataset(GeneratorSpec(counts=(160, 300, 160, 350), seed=42))


@pytest.fixture(scope="session")
def blobs():
    return blob_dataset(seed=1, per_class=40)


@pytest.fixture(scope="session")
def service_model_path(tmp_path_factory):
    """A small RF model over generator-shaped flows, saved to disk once.

    Trained on real feature profiles so service tests can replay generated
    flows against it and get sensible decisions.
    """
    data = generate_dataset(GeneratorSpec(counts=(200, 375, 200, 435), seed=42))
    standardizer = fit_standardizer(data)
    pca = fit_pca(apply_standardizer(data, standardizer), 10)
    model = fit(EstimatorSpec(kind="RF", hyperparameters={"trees": 30}, seed=3),
                data, standardizer=standardizer, pca=pca)
    model = model.with_stored_metrics(0.97, 0.5)
    path = tmp_path_factory.mktemp("models") / "rf_small.fsm"
    save_model(model, str(path))
    return str(path)


@pytest.fixture(scope="session")
def dt_model_path(tmp_path_factory):
    data = generate_dataset(GeneratorSpec(counts=(200, 375, 200, 435), seed=42))
    model = fit(EstimatorSpec(kind="DT", seed=3), data)
    model = model.with_stored_metrics(0.95, 0.25)
    path = tmp_path_factory.mktemp("models") / "dt_small.fsm"
    save_model(model, str(path))
    return str(path)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
