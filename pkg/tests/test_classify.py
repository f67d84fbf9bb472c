import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from topicrefine.classify import (
    LinearSVM,
    accuracy_score,
    document_features,
    embed_document,
    evaluate_features,
    load_vector_rows,
    macro_f1,
    run_classification,
    stratified_split,
    topic_distribution,
)
from topicrefine.corpus import PreprocessConfig, preprocess_corpus
from topicrefine.embeddings import EmbeddingStore
from topicrefine.errors import FormatError, TopicRefineError, UnembeddableError, ZeroVectorError
from topicrefine.synthetic import THEMES, NOISE_WORDS, clustered_store, themed_corpus
from topicrefine.topics import TopicSet


def confusion_macro_f1(y_true, y_pred):
    """Macro-F1 read off an explicit confusion matrix."""
    labels = sorted(set(y_true) | set(y_pred))
    idx = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[idx[t], idx[p]] += 1
    f1s = []
    for i in range(len(labels)):
        tp = cm[i, i]
        precision_den = cm[:, i].sum()
        recall_den = cm[i, :].sum()
        if tp == 0:
            f1s.append(0.0)
            continue
        precision, recall = tp / precision_den, tp / recall_den
        f1s.append(2 * precision * recall / (precision + recall))
    return float(np.mean(f1s))


# -- topic distributions ---------------------------------------------------------------------------


def test_equal_similarities_give_uniform():
    topics = np.array([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(topic_distribution([1.0, 1.0], topics), [0.5, 0.5], atol=1e-15)


def test_clamp_and_normalize_example():
    # unit topic vectors chosen so the cosines are exactly 0.8, 0.2 and -0.5
    doc = np.array([1.0, 0.0, 0.0])
    topics = np.array([[0.8, 0.6, 0.0], [0.2, 0.0, np.sqrt(0.96)], [-0.5, np.sqrt(0.75), 0.0]])
    np.testing.assert_allclose(topic_distribution(doc, topics), [0.8, 0.2, 0.0], atol=1e-12)


def test_all_negative_falls_back_to_uniform():
    np.testing.assert_allclose(topic_distribution([1.0, 0.0], [[-1.0, 0.0], [-1.0, 0.1]]), [0.5, 0.5])


def test_zero_doc_embedding():
    with pytest.raises(ZeroVectorError):
        topic_distribution([0.0, 0.0], [[1.0, 0.0]])


@pytest.mark.parametrize("seed", range(5))
def test_random_five_topic_instance_matches_recomputation(seed):
    rng = np.random.default_rng(seed)
    doc, topics = rng.normal(size=7), rng.normal(size=(5, 7))
    raw = [float(doc @ t / np.linalg.norm(doc) / np.linalg.norm(t)) for t in topics]
    clamped = [max(0.0, r) for r in raw]
    expected = [c / sum(clamped) for c in clamped] if sum(clamped) else [0.2] * 5
    np.testing.assert_allclose(topic_distribution(doc, topics), expected, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4),
       st.lists(st.lists(st.floats(-5, 5), min_size=4, max_size=4), min_size=1, max_size=6),
       st.floats(0.01, 100))
def test_distribution_is_simplex_and_scale_free(doc, topics, k):
    assume(np.linalg.norm(doc) > 1e-3 and all(np.linalg.norm(t) > 1e-3 for t in topics))
    p = topic_distribution(doc, topics)
    assert (p >= 0).all() and abs(p.sum() - 1.0) <= 1e-12
    q = topic_distribution(np.multiply(doc, k), np.multiply(topics, k))
    np.testing.assert_allclose(p, q, atol=1e-12)


def test_embed_document():
    store = EmbeddingStore.from_dict({"a": [1.0, 2.0], "b": [3.0, 0.0]})
    np.testing.assert_array_equal(embed_document(["a"], store), [1.0, 2.0])
    np.testing.assert_array_equal(embed_document(["a", "b", "zz"], store), [2.0, 1.0])
    with pytest.raises(UnembeddableError):
        embed_document(["zz"], store)


# -- classifier and metrics -------------------------------------------------------------------------------


def test_stratified_split_is_seeded_and_balanced():
    labels = ["a"] * 10 + ["b"] * 10
    train, test = stratified_split(labels, seed=3)
    assert stratified_split(labels, seed=3) == (train, test)
    assert sorted(train + test) == list(range(20))
    assert sum(labels[i] == "a" for i in test) == 2 == sum(labels[i] == "b" for i in test)
    with pytest.raises(TopicRefineError):
        stratified_split(["a", "a", "b"], seed=0)


def test_macro_f1_examples():
    assert macro_f1(["a", "a", "b"], ["a", "a", "b"]) == 1.0
    # class a: tp=1 fp=0 fn=1 -> 2/3; class b: tp=1 fp=1 fn=0 -> 2/3
    assert macro_f1(["a", "a", "b"], ["a", "b", "b"]) == pytest.approx(2 / 3, abs=1e-15)
    assert accuracy_score(["a", "b"], ["a", "a"]) == 0.5


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("wxyz"), st.sampled_from("wxyz")), min_size=1, max_size=60))
def test_macro_f1_matches_confusion_matrix_oracle(pairs):
    y_true, y_pred = zip(*pairs)
    assert abs(macro_f1(y_true, y_pred) - confusion_macro_f1(y_true, y_pred)) <= 1e-12


def test_svm_separates_disjoint_supports():
    rng = np.random.default_rng(0)
    a = rng.dirichlet([1, 1], size=50)
    b = rng.dirichlet([1, 1], size=50)
    X = np.vstack([np.hstack([a, np.zeros((50, 2))]), np.hstack([np.zeros((50, 2)), b])])
    y = ["a"] * 50 + ["b"] * 50
    model = LinearSVM().fit(X, y)
    assert model.predict(X) == y
    again = LinearSVM().fit(X, y)
    assert np.array_equal(model.coef_, again.coef_)


def test_single_label_is_error():
    with pytest.raises(TopicRefineError):
        evaluate_features(np.eye(4), ["a"] * 4)


# -- end to end on the synthetic corpus ---------------------------------------------------------------------


def themed_setup(noise_rate=0.15):
    lines, labels = themed_corpus(200, noise_rate=noise_rate)
    corpus = preprocess_corpus(list(zip(lines, labels)),
                               PreprocessConfig(min_doc_freq=1, max_doc_freq_ratio=1.0))
    store = clustered_store({k: v.split() for k, v in THEMES.items()}, dim=50, extra_words=NOISE_WORDS)
    topics = TopicSet.from_lists([v.split()[:10] for v in THEMES.values()])
    return corpus, store, topics


def test_run_classification_on_themed_corpus():
    corpus, store, topics = themed_setup()
    out = run_classification(corpus, topics, store, split_seed=42)
    assert out.accuracy == 1.0 and out.f1 == 1.0
    assert (out.n_train, out.n_test) == (160, 40)
    assert run_classification(corpus, topics, store, split_seed=42) == out


def test_distributions_unchanged_by_embedding_scale():
    corpus, store, topics = themed_setup()
    f1, kept1 = document_features(corpus, topics, store)
    f2, kept2 = document_features(corpus, topics, store.scaled(3.5))
    assert kept1 == kept2
    np.testing.assert_allclose(f1, f2, atol=1e-12)
    assert (f1 >= 0).all() and np.allclose(f1.sum(axis=1), 1.0, atol=1e-12)


def test_precomputed_document_embeddings(tmp_path):
    corpus, store, topics = themed_setup()
    rows = np.array([store[t] for t in (d.tokens[0] for d in corpus.documents)])
    ids = [int(d.id) for d in corpus.documents]
    table = np.zeros((max(ids) + 1, store.dim))
    table[ids] = rows
    path = tmp_path / "docs.txt"
    path.write_text("".join(" ".join(repr(float(v)) for v in r) + "\n" for r in table), encoding="utf-8")
    loaded = load_vector_rows(path)
    np.testing.assert_array_equal(loaded, table)
    out = run_classification(corpus, topics, store, doc_embeddings=loaded)
    assert 0.0 <= out.accuracy <= 1.0
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n3\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_vector_rows(bad)
