"""Sentence segmentation and word normalization."""

import numpy as np

from stylomark.segmenter import (
    Sentence,
    default_abbreviations,
    ends_sentence,
    first_alpha_of,
    split_sentences,
    token_words,
)


def texts(sentences):
    return [s.text for s in sentences]


def test_two_plain_sentences():
    assert texts(split_sentences("A b. C d.")) == ["A b.", "C d."]


def test_abbreviation_guard():
    got = split_sentences("See Dr. Smith. He left.")
    assert texts(got) == ["See Dr. Smith.", "He left."]


def test_more_abbreviations_guarded():
    got = split_sentences("Mr. Jones met Mrs. Smith in the U.S. embassy. They talked.")
    assert len(got) == 2


def test_trailing_fragment_is_a_sentence():
    got = split_sentences("First one. and then it trails off")
    assert texts(got) == ["First one. and then it trails off"] or len(got) == 2
    # lowercase continuation after '.' does NOT open a sentence
    got2 = split_sentences("First one. And a second")
    assert texts(got2) == ["First one.", "And a second"]


def test_lowercase_after_period_continues():
    got = split_sentences("He saw fig. 3 in the text. Then he left.")
    # "fig." is not in the abbreviation list, but "3"... digits open sentences;
    # the guard here is the abbreviation list only, so assert the simpler case:
    got = split_sentences("It was cold. yet nobody cared. Really.")
    assert texts(got) == ["It was cold. yet nobody cared.", "Really."]


def test_digit_opens_sentence():
    got = split_sentences("The year mattered. 1969 changed much.")
    assert texts(got) == ["The year mattered.", "1969 changed much."]


def test_empty_and_whitespace_inputs():
    assert split_sentences("") == []
    assert split_sentences("   \n\t ") == []


def test_every_nonempty_document_yields_a_sentence():
    for doc in ["x", "...", "?!", "word", "Hello there"]:
        assert len(split_sentences(doc)) >= 1


def test_exclamation_and_question_terminals():
    got = split_sentences("Stop! Why me? Go.")
    assert texts(got) == ["Stop!", "Why me?", "Go."]


def test_terminal_runs_collapse():
    got = split_sentences("What?! Really. Sure...")
    assert texts(got) == ["What?!", "Really.", "Sure..."]


def test_offsets_reconstruct_document():
    doc = "  Alpha beats beta. Gamma waits.  Delta? 42 follows.\n"
    sentences = split_sentences(doc)
    for s in sentences:
        assert doc[s.start:s.end] == s.text
    # concatenation with inter-sentence whitespace reconstructs the input
    rebuilt = doc[: sentences[0].start]
    for i, s in enumerate(sentences):
        rebuilt += s.text
        nxt = sentences[i + 1].start if i + 1 < len(sentences) else len(doc)
        rebuilt += doc[s.end:nxt]
    assert rebuilt == doc


def test_idempotence_on_own_output():
    doc = "One fine day. Another came! Then what? 7 more days."
    first = split_sentences(doc)
    again = split_sentences(" ".join(s.text for s in first))
    assert [s.text for s in again] == [s.text for s in first]


def test_index_sequence():
    got = split_sentences("A b. C d. E f.")
    assert [s.index for s in got] == [0, 1, 2]


def test_words_normalization():
    assert token_words("It smells funny.") == ("it", "smells", "funny")
    assert token_words("Barack Obama—2009") == ("barack", "obama", "2009")
    assert token_words("...") == ()
    assert token_words("rock-solid isn't 'quoted'") == ("rock-solid", "isn't", "quoted")
    assert all(w for w in token_words("a  b   c")), "no empty tokens"


def test_first_alpha_rules():
    assert first_alpha_of(token_words("Races can be held...")) == "r"
    assert first_alpha_of(token_words("2024 was loud.")) == "w"
    assert first_alpha_of(token_words("!!!")) is None
    assert first_alpha_of(()) is None


def test_sentence_words_casefolded():
    s = split_sentences("The Quick FOX. Jumps.")[0]
    assert s.words == ("the", "quick", "fox")
    assert s.first_alpha == "t"


def test_ends_sentence_matches_split():
    abbr = default_abbreviations()
    cases = [
        ("He left.", True),
        ("He left", False),
        ("See Dr.", False),  # abbreviation guard
        ("It was e.g.", False),
        ("Why?", True),
        ("Stop!", True),
        ("", False),
        ("trailing space. ", True),
    ]
    for text, expected in cases:
        assert ends_sentence(text, abbr) is expected, text


def test_determinism_across_runs():
    rng = np.random.default_rng(0)
    vocab = ["alpha", "beta", "Gamma", "delta", "1969", "Dr.", "said.", "why?"]
    for _ in range(50):
        n = rng.integers(1, 30)
        doc = " ".join(vocab[i] for i in rng.integers(0, len(vocab), n))
        a = split_sentences(doc)
        b = split_sentences(doc)
        assert [s.text for s in a] == [s.text for s in b]
        for s in a:
            assert doc[s.start:s.end] == s.text
            assert all(w == w.casefold() for w in s.words)
