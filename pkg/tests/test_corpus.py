import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topicrefine.corpus import (
    PreprocessConfig,
    load_vocabulary,
    preprocess_corpus,
    read_corpus_file,
    save_vocabulary,
    tokenize,
)
from topicrefine.errors import CorpusDegenerateError, FormatError
from topicrefine.topics import (
    TopicSet,
    format_topic_set,
    load_topic_set,
    parse_topic_set,
    save_topic_set,
)

# Keeps every token of a tiny corpus: no length or max-frequency pruning.
PERMISSIVE = dict(min_token_length=1, max_doc_freq_ratio=1.0)

FINANCE_LINE = "wealth billion fund private repay yuan lcd mutual shareholder refund"


def test_tokenize_strips_edge_punctuation_and_lowercases():
    assert tokenize("Hello, World! (don't) --") == ["hello", "world", "don't"]


def test_tokenize_drops_short_tokens_and_stopwords():
    assert tokenize("a an the cat", min_token_length=2, stopwords={"the"}) == ["an", "cat"]


def test_three_document_example():
    docs = [("a b", None), ("a c", None), ("a b c", None)]
    corpus = preprocess_corpus(docs, PreprocessConfig(min_doc_freq=2, **PERMISSIVE))
    assert corpus.vocabulary.words == ("a", "b", "c")
    assert corpus.vocabulary.doc_freq == {"a": 3, "b": 2, "c": 2}
    # hand count: token lengths 2, 2, 3
    assert corpus.stats.avg_length == pytest.approx((2 + 2 + 3) / 3, abs=1e-15)
    assert corpus.stats.doc_count == 3


def test_empty_input_is_degenerate():
    with pytest.raises(CorpusDegenerateError, match="corpus degenerate"):
        preprocess_corpus([("", None)])


def test_min_doc_freq_filter_drops_rare_words_and_short_docs():
    docs = [("x y", "p"), ("x y", "p"), ("x z", "q")]
    corpus = preprocess_corpus(docs, PreprocessConfig(min_doc_freq=2, **PERMISSIVE))
    # z is rare; dropping it leaves doc 2 with one token, so the doc goes too,
    # which in turn pushes x and y to df=2 (still kept).
    assert corpus.vocabulary.words == ("x", "y")
    assert [d.id for d in corpus.documents] == ["0", "1"]
    assert corpus.stats.label_count == 1


def test_max_doc_freq_ratio_prunes_ubiquitous_words():
    docs = [("the cat sat", None), ("the dog ran", None), ("the cat ran", None), ("dog sat", None)]
    corpus = preprocess_corpus(docs, PreprocessConfig(min_doc_freq=1, min_token_length=1,
                                                      max_doc_freq_ratio=0.5))
    assert "the" not in corpus.vocabulary
    assert "cat" in corpus.vocabulary


def test_unreadable_stopword_file_is_io_error(tmp_path):
    cfg = PreprocessConfig(stopwords_path=str(tmp_path / "missing.txt"))
    with pytest.raises(OSError):
        preprocess_corpus([("a b", None)], cfg)


def test_stopword_file(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("The\nof\n", encoding="utf-8")
    cfg = PreprocessConfig(stopwords_path=str(path), min_doc_freq=1, **PERMISSIVE)
    corpus = preprocess_corpus([("the end of days", None), ("end days", None)], cfg)
    assert corpus.vocabulary.words == ("days", "end")


words_st = st.lists(st.sampled_from("ab bc cd de ef fg gh hi".split()), min_size=0, max_size=8)


@settings(max_examples=60, deadline=None)
@given(st.lists(words_st, min_size=1, max_size=25), st.integers(1, 4), st.floats(0.3, 1.0))
def test_preprocessing_is_idempotent(token_lists, min_df, max_ratio):
    cfg = PreprocessConfig(min_doc_freq=min_df, max_doc_freq_ratio=max_ratio, min_token_length=1)
    try:
        first = preprocess_corpus([(" ".join(t), None) for t in token_lists], cfg)
    except CorpusDegenerateError:
        return
    second = preprocess_corpus([(" ".join(d.tokens), d.label) for d in first.documents], cfg)
    assert [d.tokens for d in second.documents] == [d.tokens for d in first.documents]
    assert second.vocabulary.words == first.vocabulary.words
    for d in first.documents:
        assert all(t in first.vocabulary.index for t in d.tokens)


def test_read_corpus_file_with_labels(tmp_path):
    (tmp_path / "c.txt").write_text("a b\nc d\n", encoding="utf-8")
    (tmp_path / "l.txt").write_text("x\ny\n", encoding="utf-8")
    assert read_corpus_file(tmp_path / "c.txt", tmp_path / "l.txt") == [("a b", "x"), ("c d", "y")]
    (tmp_path / "bad.txt").write_text("x\n", encoding="utf-8")
    with pytest.raises(FormatError):
        read_corpus_file(tmp_path / "c.txt", tmp_path / "bad.txt")


def test_vocabulary_round_trip(tmp_path):
    corpus = preprocess_corpus([("a b", None), ("b c", None)], PreprocessConfig(min_doc_freq=1, **PERMISSIVE))
    path = tmp_path / "vocab.txt"
    path.write_text(save_vocabulary(corpus.vocabulary), encoding="utf-8")
    assert load_vocabulary(path).words == corpus.vocabulary.words


# -- topic-set files --------------------------------------------------------------


def test_two_lines_of_ten_words():
    text = FINANCE_LINE + "\n" + " ".join(f"w{i}" for i in range(10)) + "\n"
    ts = parse_topic_set(text)
    assert (ts.K, ts.N) == (2, 10)


def test_finance_topic_line_parses_in_order():
    ts = parse_topic_set(FINANCE_LINE + "\n")
    assert list(ts[0]) == FINANCE_LINE.split()


def test_ragged_line_names_the_line():
    text = "a b c\nd e f\ng h\n"
    with pytest.raises(FormatError) as err:
        parse_topic_set(text, source="topics.txt")
    assert err.value.line == 3
    assert str(err.value).startswith("topics.txt:3:")


def test_duplicate_word_in_topic_is_rejected():
    with pytest.raises(FormatError):
        parse_topic_set("a b a\n")


def test_empty_topic_file_is_rejected():
    with pytest.raises(FormatError):
        parse_topic_set("\n\n")


@settings(max_examples=50, deadline=None)
@given(K=st.integers(1, 5), N=st.integers(1, 6), rnd=st.randoms(use_true_random=False))
def test_topic_file_round_trip_is_byte_identical(K, N, rnd, tmp_path_factory):
    pool = [f"w{i}" for i in range(40)]
    lines = [" ".join(rnd.sample(pool, N)) for _ in range(K)]
    canonical = "\n".join(lines) + "\n"
    path = tmp_path_factory.mktemp("ts") / "topics.txt"
    path.write_text(canonical, encoding="utf-8")
    out = path.with_name("again.txt")
    save_topic_set(load_topic_set(path), out)
    assert out.read_bytes() == canonical.encode("utf-8")


def test_topic_set_rejects_mixed_lengths_directly():
    with pytest.raises(FormatError):
        TopicSet.from_lists([["a", "b"], ["c"]])
    assert format_topic_set(TopicSet.from_lists([["a", "b"]])) == "a b\n"
