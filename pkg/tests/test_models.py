import json

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import FIXTURES
from oracles import auc_pairs
from vaxnet.community import ANTIVAXX, OTHER
from vaxnet.corpus import build_documents
from vaxnet.features import BOW, SEQ, balanced_sample, build_vocabulary, train_test_split, vectorize_set
from vaxnet.ingest import SynthConfig, generate_synthetic
from vaxnet.models import (
    MODEL_NAMES, Forest, ForestConfig, TrainConfig, TrainingDiverged, default_config, predict_score,
    predict_scores, train_feedforward, train_linear_hinge, train_logreg, train_model, train_multinomial_nb,
    train_random_forest, train_recurrent,
)
from vaxnet.models.io import load_model, model_from_dict, model_to_dict, save_model

GOLDEN = FIXTURES / "fixture_small.golden_scores.json"


def csr(rows):
    return sp.csr_matrix(np.asarray(rows, dtype=np.float64))


@pytest.fixture(scope="module")
def synth_split():
    d = generate_synthetic(SynthConfig(n_users=240), 5)
    labels = {a: (ANTIVAXX if c == 0 else OTHER) for a, c in d.planted.items()}
    data = balanced_sample(build_documents(d), labels, seed=1)
    train, test = train_test_split(data, 0.8, seed=2)
    vocab = build_vocabulary(train.samples, min_df=2)
    return {rep: (vectorize_set(train, vocab, rep, 64), vectorize_set(test, vocab, rep, 64)) for rep in (BOW, SEQ)}


def alpha_task(rng, n, length=10, vocab=12):
    X = rng.integers(3, vocab, (n, length))
    for i in np.flatnonzero(rng.integers(0, 2, n)):
        X[i, rng.integers(0, length)] = 2
    for i, cut in enumerate(rng.integers(4, length + 1, n)):
        X[i, cut:] = 0
    return X, (X == 2).any(axis=1).astype(int)


SEPARABLE = (csr([[2, 0], [3, 1], [0, 2], [1, 3]]), np.array([1, 1, 0, 0]))


# linear models

@pytest.mark.parametrize("trainer", [train_logreg, train_linear_hinge])
def test_separable_training_accuracy(trainer):
    X, y = SEPARABLE
    m = trainer(X, TrainConfig(epochs=200, batch_size=2, l2_penalty=0.0), y=y)
    assert np.array_equal(predict_scores(m, X) >= 0.5, y == 1)


@pytest.mark.parametrize("trainer", [train_logreg, train_linear_hinge])
def test_identical_features_half(trainer):
    X = csr([[1, 1]] * 8)
    y = np.array([1, 0] * 4)
    s = predict_scores(trainer(X, TrainConfig(epochs=30), y=y), X)
    assert np.all(np.abs(s - 0.5) <= 0.05)


@pytest.mark.parametrize("name", ["logreg", "hinge", "dnn-bow"])
def test_synthetic_bow_auc(synth_split, name):
    train, test = synth_split[BOW]
    assert auc_pairs(predict_scores(train_model(name, train, seed=3), test), test.labels) >= 0.95


def test_logreg_label_swap():
    rng = np.random.default_rng(0)
    X = csr(rng.integers(0, 3, (40, 6)))
    y = rng.integers(0, 2, 40)
    cfg = TrainConfig(epochs=10, seed=4)
    a = predict_scores(train_logreg(X, cfg, y=y), X)
    b = predict_scores(train_logreg(X, cfg, y=1 - y), X)
    assert np.allclose(b, 1 - a, atol=1e-6)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_epoch():
    X = csr([[1e150, 0], [0, 1e150]])
    with pytest.raises(TrainingDiverged) as err:
        train_logreg(X, TrainConfig(learning_rate=1e10, epochs=3, l2_penalty=1.0), y=np.array([1, 0]))
    assert err.value.epoch == 1


def test_history_finite(synth_split):
    m = train_model("logreg", synth_split[BOW][0], seed=0)
    assert len(m.history) == m.config.epochs and np.all(np.isfinite(m.history))


# naive Bayes

def test_nb_bayes_arithmetic():
    m = train_multinomial_nb(csr([[1, 0], [0, 1]]), 1.0, y=np.array([1, 0]))
    assert np.exp(m.feature_log_prob[1, 0]) == pytest.approx(2 / 3)
    assert np.exp(m.feature_log_prob[0, 0]) == pytest.approx(1 / 3)
    assert predict_scores(m, csr([[1, 0]]))[0] == pytest.approx(2 / 3)


def test_nb_large_alpha_half():
    m = train_multinomial_nb(csr([[3, 0], [0, 3]]), 1e9, y=np.array([1, 0]))
    assert predict_scores(m, csr([[2, 0]]))[0] == pytest.approx(0.5, abs=1e-6)


def test_nb_empty_doc_is_prior():
    m = train_multinomial_nb(csr([[1, 0], [0, 1], [0, 2]]), 1.0, y=np.array([1, 0, 0]))
    assert predict_score(m, {}) == pytest.approx(1 / 3)


def test_nb_distributions_sum_to_one(synth_split):
    m = train_model("nb", synth_split[BOW][0])
    assert np.allclose(np.exp(m.feature_log_prob).sum(axis=1), 1.0, atol=1e-9)


def test_nb_errors():
    with pytest.raises(ValueError):
        train_multinomial_nb(csr([[1]]), 0.0, y=np.array([1]))
    with pytest.raises(ValueError):
        train_multinomial_nb(csr([[1], [2]]), 1.0, y=np.array([1, 1]))


def test_nb_synthetic(synth_split):
    train, test = synth_split[BOW]
    assert auc_pairs(predict_scores(train_model("nb", train), test), test.labels) >= 0.85


# random forest

def test_single_tree_memorizes():
    rng = np.random.default_rng(1)
    X = csr(rng.integers(0, 4, (60, 8)))
    y = rng.integers(0, 2, 60)
    cfg = ForestConfig(n_trees=1, max_depth=None, bootstrap=False, max_features=8)
    m = train_random_forest(X, cfg, y=y)
    keys = [tuple(r) for r in X.toarray()]
    consistent = [len({y[j] for j in range(60) if keys[j] == k}) == 1 for k in keys]
    pred = predict_scores(m, X) >= 0.5
    assert np.array_equal(pred[consistent], (y == 1)[consistent])


def test_single_class_forest():
    X = csr([[1, 0], [0, 1], [2, 2]])
    m = train_random_forest(X, ForestConfig(n_trees=3), y=np.array([1, 1, 1]))
    assert np.all(predict_scores(m, X) == 1.0)


def test_forest_is_mean_of_trees(synth_split):
    train, test = synth_split[BOW]
    m = train_model("rf", train, {"n_trees": 7})
    X = test.matrix()
    assert np.allclose(predict_scores(m, X), np.mean([t.predict(X) for t in m.trees], axis=0), atol=1e-15)


def test_forest_structure(synth_split):
    m = train_model("rf", synth_split[BOW][0], {"n_trees": 5})
    for t in m.trees:
        internal = np.flatnonzero(t.feature >= 0)
        assert np.all(t.left[internal] > 0) and np.all(t.right[internal] > 0)
        assert np.all((t.value >= 0) & (t.value <= 1))


def test_forest_synthetic(synth_split):
    train, test = synth_split[BOW]
    m = train_model("rf", train, {"n_trees": 50}, seed=2)
    assert auc_pairs(predict_scores(m, test), test.labels) >= 0.9


def test_forest_config_bounds():
    with pytest.raises(ValueError):
        ForestConfig(n_trees=0)
    with pytest.raises(ValueError):
        ForestConfig.from_dict({"trees": 3})


# neural models

def test_xor():
    X = csr([[0, 0], [0, 1], [1, 0], [1, 1]] * 8)
    y = np.array([0, 1, 1, 0] * 8)
    cfg = TrainConfig(learning_rate=0.1, epochs=300, batch_size=4, hidden_dims=(4,), momentum=0.9,
                      l2_penalty=0.0, seed=2)
    m = train_feedforward(X, cfg, y=y, representation=BOW)
    # dnn-bow normalizes rows; the all-zero row stays zero, the others keep their direction
    assert np.array_equal(predict_scores(m, X) >= 0.5, y == 1)


def test_zero_epochs_near_chance():
    rng = np.random.default_rng(3)
    X = csr(rng.integers(0, 3, (200, 10)))
    y = rng.integers(0, 2, 200)
    m = train_feedforward(X, TrainConfig(epochs=0, seed=1), y=y, representation=BOW)
    assert abs(auc_pairs(predict_scores(m, X), y) - 0.5) <= 0.1


def test_dnn_seq_synthetic(synth_split):
    train, test = synth_split[SEQ]
    m = train_model("dnn-seq", train, seed=3)
    assert auc_pairs(predict_scores(m, test), test.labels) >= 0.95


@pytest.mark.parametrize("kind", ["gru", "lstm"])
def test_alpha_task(kind):
    rng = np.random.default_rng(0)
    Xtr, ytr = alpha_task(rng, 400)
    Xte, yte = alpha_task(rng, 200)
    cfg = TrainConfig(learning_rate=0.05, epochs=15, batch_size=16, hidden_dims=(16,), embedding_dim=8,
                      momentum=0.9, max_grad_norm=5.0, seed=1)
    m = train_recurrent(Xtr, kind, cfg, y=ytr, vocab_size=12)
    assert np.mean((predict_scores(m, Xte) >= 0.5) == yte) >= 0.95


@pytest.mark.parametrize("kind", ["gru", "lstm"])
def test_recurrent_deterministic(kind):
    X, y = alpha_task(np.random.default_rng(5), 40)
    cfg = TrainConfig(epochs=2, hidden_dims=(4,), embedding_dim=3, seed=9)
    a = train_recurrent(X, kind, cfg, y=y, vocab_size=12)
    b = train_recurrent(X, kind, cfg, y=y, vocab_size=12)
    assert a.params.keys() == b.params.keys()
    assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)


def test_recurrent_empty_sequences():
    with pytest.raises(ValueError):
        train_recurrent(np.zeros((4, 5), dtype=np.int64), "gru", TrainConfig(), y=np.array([0, 1, 0, 1]))


def test_recurrent_rejects_bow(synth_split):
    with pytest.raises(ValueError):
        train_recurrent(synth_split[BOW][0], "lstm", TrainConfig())


# uniform contract

@pytest.mark.parametrize("name", MODEL_NAMES)
def test_scores_in_unit_interval(synth_split, name):
    train, test = synth_split[BOW if name in BOW_MODELS else SEQ]
    cfg = {"n_trees": 3} if name == "rf" else ({} if name == "nb" else {"epochs": 1})
    m = train_model(name, train, cfg)
    s = predict_scores(m, test)
    assert s.shape == (len(test),) and np.all((s >= 0) & (s <= 1))


BOW_MODELS = ("logreg", "rf", "hinge", "nb", "dnn-bow")


def test_representation_mismatch(synth_split):
    bow_train, bow_test = synth_split[BOW]
    m = train_model("logreg", bow_train, {"epochs": 1})
    with pytest.raises(ValueError):
        predict_scores(m, synth_split[SEQ][1])
    with pytest.raises(ValueError):
        predict_score(m, [2, 3, 0])
    with pytest.raises(ValueError):
        train_model("gru", bow_train)


def test_unknown_model(synth_split):
    with pytest.raises(ValueError):
        train_model("svm", synth_split[BOW][0])


def test_train_config_bounds():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"lr": 0.1})


def test_default_config_groups():
    assert default_config("logreg").learning_rate == 0.1
    assert default_config("lstm").learning_rate == 0.01
    assert default_config("rf").n_trees == 100
    assert default_config("nb") == {"alpha": 1.0}


# persistence

@pytest.mark.parametrize("name", MODEL_NAMES)
def test_model_file_round_trip(synth_split, tmp_path, name):
    train, test = synth_split[BOW if name in BOW_MODELS else SEQ]
    cfg = {"n_trees": 3} if name == "rf" else ({} if name == "nb" else {"epochs": 1})
    m = train_model(name, train, cfg)
    path = tmp_path / "m" / "model.json"
    save_model(m, path, meta={"model": name})
    back, vocab, meta = load_model(path)
    assert meta == {"model": name} and vocab is None
    assert np.array_equal(predict_scores(back, test), predict_scores(m, test))


def test_model_file_rejects_other_format(synth_split):
    d = model_to_dict(train_model("nb", synth_split[BOW][0]))
    d["format"] = "other"
    with pytest.raises(ValueError):
        model_from_dict(d)


def test_golden_fixture_scores(fixture_filtered):
    golden = json.loads(GOLDEN.read_text())
    docs = build_documents(fixture_filtered)
    labels = {d.author_id: (ANTIVAXX if d.author_id in "DEF" else OTHER) for d in docs}
    data = balanced_sample(docs, labels, seed=0)
    vocab = build_vocabulary(data.samples, min_df=1)
    bow = vectorize_set(data, vocab, BOW)
    for name, want in golden["scores"].items():
        m = train_model(name, bow, golden["config"].get(name, {}), seed=golden["seed"])
        assert predict_scores(m, bow).tolist() == pytest.approx(want, abs=1e-9), name
