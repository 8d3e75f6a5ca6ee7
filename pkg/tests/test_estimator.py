import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from attnvgg import synth_dataset
from attnvgg.estimator import AttentionVggClassifier


@pytest.fixture(scope="module")
def synth_arrays():
    samples = synth_dataset(12, 16, seed=7)
    X = np.stack([s.image[:, :, 0] for s in samples])
    y = np.array([s.label for s in samples])
    return X, y


@pytest.fixture(scope="module")
def fitted(synth_arrays):
    X, y = synth_arrays
    clf = AttentionVggClassifier(epochs=25, batch_size=8, lr0=1e-3, seed=3)
    return clf.fit(X, y)


class TestSklearnContract:
    def test_get_set_params_round_trip(self):
        clf = AttentionVggClassifier(loss="logcosh", epochs=5)
        params = clf.get_params()
        assert params["loss"] == "logcosh" and params["epochs"] == 5
        other = AttentionVggClassifier().set_params(**params)
        assert other.get_params() == params

    def test_clone(self):
        clf = AttentionVggClassifier(attention=False, seed=9)
        copy = clone(clf)
        assert copy.get_params() == clf.get_params()

    def test_not_fitted_error(self, synth_arrays):
        X, _ = synth_arrays
        with pytest.raises(NotFittedError):
            AttentionVggClassifier().predict(X)


class TestFitPredict:
    def test_learns_synth_data(self, fitted, synth_arrays):
        X, y = synth_arrays
        assert fitted.score(X, y) >= 0.9

    def test_classes_attribute(self, fitted):
        np.testing.assert_array_equal(fitted.classes_, [0, 1])

    def test_predict_proba_rows_sum_to_one(self, fitted, synth_arrays):
        X, _ = synth_arrays
        proba = fitted.predict_proba(X)
        assert proba.shape == (len(X), 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((proba >= 0.0) & (proba <= 1.0))

    def test_predict_matches_thresholded_proba(self, fitted, synth_arrays):
        X, _ = synth_arrays
        proba = fitted.predict_proba(X)[:, 1]
        np.testing.assert_array_equal(fitted.predict(X), (proba >= fitted.threshold).astype(int))

    def test_history_is_recorded(self, fitted):
        assert len(fitted.history_) == 25


class TestValidation:
    def test_rejects_bad_image_rank(self):
        with pytest.raises(ValueError, match="shape"):
            AttentionVggClassifier().fit(np.zeros((4, 16)), np.zeros(4))

    def test_rejects_non_binary_labels(self):
        with pytest.raises(ValueError, match="binary"):
            AttentionVggClassifier().fit(np.zeros((4, 16, 16)), np.array([0, 1, 2, 1]))

    def test_rejects_non_finite_pixels(self):
        X = np.zeros((2, 16, 16))
        X[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            AttentionVggClassifier().fit(X, np.array([0, 1]))

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(ValueError):
            AttentionVggClassifier().fit(np.zeros((4, 16, 16)), np.zeros(3))

    def test_rejects_unknown_arch_or_loss(self):
        with pytest.raises(ValueError):
            AttentionVggClassifier(arch="resnet").fit(np.zeros((2, 16, 16)), np.array([0, 1]))
        with pytest.raises(ValueError):
            AttentionVggClassifier(loss="hinge").fit(np.zeros((2, 16, 16)), np.array([0, 1]))
