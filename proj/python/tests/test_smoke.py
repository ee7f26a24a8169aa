import math

import numpy as np
import pytest

import nmf

TINY = {
    "model": {
        "hidden_visual": 8,
        "hidden_label": 6,
        "mem_visual": {"slots": 4, "slot_dim": 8},
        "mem_label": {"slots": 4, "slot_dim": 6},
        "decoder_hidden": 8,
    },
    "train": {"epochs": 3, "batch_size": 2},
}


@pytest.fixture(scope="module")
def corpus():
    return nmf.generate_corpus("cycle", length=40, num_train=6, num_test=4, feature_dim=8, seed=1)


def test_windows_and_accuracy():
    assert nmf.windows(100, 0.2, 0.5) == (20, 50)
    assert nmf.windows(100, 0.3, 0.1) == (30, 10)
    with pytest.raises(nmf.ProtocolError):
        nmf.windows(7, 0.3, 0.1)
    assert nmf.frame_accuracy([1, 1, 2], [1, 2, 2]) == pytest.approx(2 / 3)


def test_corpus_is_deterministic(corpus):
    train, test, num_classes = corpus
    again = nmf.generate_corpus("cycle", length=40, num_train=6, num_test=4, feature_dim=8, seed=1)
    assert num_classes == 3
    assert len(train) == 6 and len(test) == 4
    assert train[0].features.shape == (40, 8)
    assert train[0].labels == again[0][0].labels
    assert np.array_equal(train[0].features, again[0][0].features)


def test_fresh_model_is_uniform(corpus):
    train, test, num_classes = corpus
    model = nmf.Forecaster("full", num_classes, 8, TINY, seed=0)
    rows = model.evaluate(test)
    assert len(rows) == 8
    assert all(0.0 <= r["accuracy"] <= 1.0 for r in rows)
    assert model.parameter_count > nmf.Forecaster("a", num_classes, 8, TINY).parameter_count


def test_fit_predict_and_checkpoint(corpus, tmp_path):
    train, test, num_classes = corpus
    model = nmf.Forecaster("full", num_classes, 8, TINY, seed=0)
    losses = model.fit(train, seed=0)
    assert len(losses) == 3
    assert losses[0] == pytest.approx(math.log(3), rel=0.05)
    sample = test[0]
    prediction = model.predict(sample.features[:12], sample.labels[:12], 5)
    assert len(prediction) == 5 and all(0 <= c < 3 for c in prediction)

    model.save(tmp_path / "model.json")
    restored = nmf.Forecaster("full", num_classes, 8, TINY, seed=99)
    restored.load(tmp_path / "model.json")
    assert restored.predict(sample.features[:12], sample.labels[:12], 5) == prediction
    assert restored.evaluate(test) == model.evaluate(test)


def test_file_round_trip_and_format_errors(tmp_path):
    features = np.arange(12, dtype=np.float64).reshape(3, 4) / 8
    nmf.write_features(tmp_path / "x.feat", features)
    assert np.array_equal(nmf.read_features(tmp_path / "x.feat"), features)
    nmf.write_labels(tmp_path / "x.labels", [0, 2, 1])
    assert nmf.read_labels(tmp_path / "x.labels") == [0, 2, 1]
    (tmp_path / "bad.feat").write_bytes(b"junk")
    with pytest.raises(nmf.FormatError):
        nmf.read_features(tmp_path / "bad.feat")
    assert issubclass(nmf.FormatError, nmf.Error)


def test_bad_config_is_rejected():
    with pytest.raises(nmf.ConfigError):
        nmf.Forecaster("full", 3, 8, {"model": {"hiden": 3}})
    with pytest.raises(nmf.ConfigError):
        nmf.Forecaster("z", 3, 8, TINY)


def test_corrupt_labels_identity():
    labels = [0, 0, 1, 1, 2]
    assert nmf.corrupt_labels(labels, 3, 0.0) == labels


def test_gradcheck_reports_every_parameter():
    result = nmf.gradcheck(seed=0)
    assert "head.bias" in result["params"]
    assert result["params"]["head.bias"] < 1e-6
    assert result["pass"] == (result["max_relative_error"] < 1e-4)
