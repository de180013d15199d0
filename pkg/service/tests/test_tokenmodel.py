import numpy as np
import pytest

from classifier_service.tokenmodel import (
    STOP_TOKEN,
    BigramModel,
    load_default_model,
    tokenize,
    top_k_truncate,
)


@pytest.fixture(scope="module")
def model():
    return load_default_model()


def test_tokenize_casefolds_and_splits_punctuation():
    assert tokenize("The boats slide out.") == ["the", "boats", "slide", "out", "."]
    assert tokenize("Salt-stained walls, again!") == ["salt-stained", "walls", ",", "again", "!"]
    assert tokenize("") == []


def test_vocabulary_sorted_unique_with_stop_last(model):
    assert model.tokens[-1] == STOP_TOKEN
    body = model.tokens[:-1]
    assert body == sorted(body)
    assert len(set(model.tokens)) == len(model.tokens)
    assert model.stop_id == len(model.tokens) - 1
    assert model.vocab_size == len(model.tokens)


def test_every_row_is_a_strictly_positive_distribution(model):
    rows = model._rows
    assert rows.shape == (model.vocab_size, model.vocab_size)
    assert float(rows.min()) > 0.0
    deviations = np.abs(rows.sum(axis=1) - 1.0)
    assert float(deviations.max()) < 1e-12


def test_only_last_context_token_conditions(model):
    a = model.next_distribution([3, 1, 5])
    b = model.next_distribution([5])
    assert np.array_equal(a, b)
    empty = model.next_distribution([])
    stop = model.next_distribution([model.stop_id])
    assert np.array_equal(empty, stop)


def test_determinism(model):
    one = model.next_distribution([7])
    two = model.next_distribution([7])
    assert np.array_equal(one, two)


def test_corpus_words_have_observed_transitions():
    docs = [tokenize("the cat sat"), tokenize("the cat ran")]
    m = BigramModel(docs)
    cat = m.tokens.index("cat")
    the = m.tokens.index("the")
    row = m.next_distribution([the])
    assert row[cat] == max(row)


def test_top_k_ordering_and_residual():
    probs = np.array([0.25, 0.25, 0.5])
    ids, kept, residual = top_k_truncate(probs, 2)
    assert ids == [2, 0]
    assert kept == [0.5, 0.25]
    assert residual == pytest.approx(0.25, abs=1e-15)


def test_top_k_covers_everything_when_k_large(model):
    row = model.next_distribution([])
    ids, kept, residual = top_k_truncate(row, model.vocab_size + 100)
    assert sorted(ids) == list(range(model.vocab_size))
    assert abs(residual) < 1e-9
    assert abs(sum(kept) + residual - 1.0) < 1e-9


def test_top_k_single_and_errors(model):
    row = model.next_distribution([])
    ids, kept, residual = top_k_truncate(row, 1)
    assert len(ids) == len(kept) == 1
    assert kept[0] == float(row.max())
    assert abs(kept[0] + residual - 1.0) < 1e-12
    with pytest.raises(ValueError):
        top_k_truncate(row, 0)


def test_top_k_sum_plus_residual_for_real_rows(model):
    for context in ([], [0], [5], [model.stop_id]):
        row = model.next_distribution(list(context))
        for k in (1, 3, 64, model.vocab_size):
            ids, kept, residual = top_k_truncate(row, k)
            assert len(ids) == min(k, model.vocab_size)
            assert abs(sum(kept) + residual - 1.0) < 1e-9
            assert all(0 <= i < model.vocab_size for i in ids)
            assert kept == sorted(kept, reverse=True)
