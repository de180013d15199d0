"""Classification, key derivation, and the builtin classifier's contracts."""

import math

import numpy as np
import pytest

from stylomark.errors import (
    IngestError,
    KeyDerivationError,
    ProtocolError,
    TransportError,
)
from stylomark.datafiles import data_path
from stylomark.keygen import (
    ClassifierBinding,
    LabelTable,
    argmax_lowest,
    builtin_classify,
    classify,
    derive_key,
    load_label_table,
    load_seed_table,
)
from stylomark.lexicon import SensorCategory
from stylomark.segmenter import split_sentences, token_words


# -- argmax and tie rule ----------------------------------------------------

def test_argmax_basic():
    assert argmax_lowest([0.2, 0.5, 0.3]) == 1


def test_argmax_tie_lowest_index():
    assert argmax_lowest([0.4, 0.4, 0.2]) == 0
    assert argmax_lowest([1.0, 1.0, 1.0]) == 0


def test_argmax_empty_rejected():
    with pytest.raises(ValueError):
        argmax_lowest([])


def test_argmax_matches_numpy_on_random(seed=3):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        scores = rng.random(rng.integers(1, 30)).tolist()
        assert argmax_lowest(scores) == int(np.argmax(scores))


# -- label table ------------------------------------------------------------

def test_label_table_shape(tables):
    assert len(tables.acrostic_labels) == 26
    assert len(tables.sensor_labels) == len(tables.sensor_targets) == 11
    assert sorted(tables.sensor_targets) == sorted(SensorCategory)


def test_letter_mapping_is_alphabet(tables):
    letters = [tables.acrostic_letter(i) for i in range(26)]
    assert letters == [chr(ord("a") + i) for i in range(26)]


def test_label_table_errors():
    with pytest.raises(IngestError):
        LabelTable(
            version="x",
            acrostic_labels=("only", "two"),
            sensor_labels=("a",),
            sensor_targets=(SensorCategory.VISUAL,),
        )


# -- builtin classification -------------------------------------------------

def test_seed_terms_win_their_label(tables, binding):
    seeds = binding.seeds
    label = tables.sensor_labels[4]
    text = " ".join(seeds[label][:6]) + "."
    index, scores = builtin_classify(text, tables.sensor_labels, seeds)
    assert index == 4
    assert scores[4] == max(scores)


def test_no_overlap_ties_to_zero(tables, binding):
    # token_words of this text shares nothing with any seed list
    index, scores = builtin_classify(
        "zzqx1 zzqx2 zzqx3", tables.sensor_labels, binding.seeds
    )
    assert index == 0
    assert all(math.isclose(s, scores[0], rel_tol=1e-12) for s in scores)


def test_word_order_invariance(tables, binding):
    a = builtin_classify(
        "the telescope gathers light from stars", tables.acrostic_labels, binding.seeds
    )
    b = builtin_classify(
        "stars from light gathers telescope the", tables.acrostic_labels, binding.seeds
    )
    assert a == b


def test_builtin_deterministic(tables, binding):
    text = "rivers carve valleys through stone."
    runs = {
        tuple(builtin_classify(text, tables.acrostic_labels, binding.seeds)[1])
        for _ in range(3)
    }
    assert len(runs) == 1


def test_scores_finite_and_aligned(tables, binding):
    index, scores = classify(binding, "a curious tale.", tables.acrostic_labels)
    assert len(scores) == 26
    assert all(math.isfinite(s) for s in scores)
    assert index == argmax_lowest(scores)


def test_classify_empty_labels_rejected(binding):
    with pytest.raises(ValueError):
        classify(binding, "text", [])


# -- key derivation ---------------------------------------------------------

def test_derive_key_maps_indices(tables, binding):
    sentence = split_sentences("the violin and the drum fill the hall with sound.")[0]
    key = derive_key(sentence, tables, binding)
    a_idx, _ = classify(binding, sentence.text, tables.acrostic_labels)
    s_idx, _ = classify(binding, sentence.text, tables.sensor_labels)
    assert key.acrostic_letter == tables.acrostic_letter(a_idx)
    assert key.category == tables.sensor_category(s_idx)
    assert key.source_sentence_index == 0


def test_same_text_different_index_same_key(tables, binding):
    doc = "Echoes fill the canyon. Echoes fill the canyon."
    s0, s1 = split_sentences(doc)
    k0, k1 = derive_key(s0, tables, binding), derive_key(s1, tables, binding)
    assert (k0.acrostic_letter, k0.category) == (k1.acrostic_letter, k1.category)
    assert (k0.source_sentence_index, k1.source_sentence_index) == (0, 1)


def test_wordless_sentence_rejected(tables, binding):
    wordless = split_sentences("...")[0] if split_sentences("...") else None
    if wordless is None:
        pytest.skip("segmenter drops bare punctuation")
    assert wordless.words == ()
    with pytest.raises(KeyDerivationError):
        derive_key(wordless, tables, binding)


def test_key_function_of_source_only(tables, binding):
    a = split_sentences("the ship sails at dawn. The crew is ready.")
    b = split_sentences("the ship sails at dawn. Nobody slept at all.")
    ka = derive_key(a[0], tables, binding)
    kb = derive_key(b[0], tables, binding)
    assert (ka.acrostic_letter, ka.category) == (kb.acrostic_letter, kb.category)


def test_key_chain_count(tables, binding):
    doc = "the oven warms the bread. The baker waits. Crumbs fall to the floor."
    sentences = split_sentences(doc)
    keys = [derive_key(s, tables, binding) for s in sentences[:-1]]
    assert len(keys) == len(sentences) - 1


# -- corpus-level derived properties ---------------------------------------

def test_key_diversity_over_prompt_corpus(tables, binding, prompts):
    letters, categories = set(), set()
    for prompt in prompts:
        a, _ = classify(binding, prompt, tables.acrostic_labels)
        s, _ = classify(binding, prompt, tables.sensor_labels)
        letters.add(tables.acrostic_letter(a))
        categories.add(tables.sensor_category(s))
    assert len(letters) >= 10
    assert len(categories) >= 6


def test_fuzziness_oov_replacement(tables, binding, prompts):
    """Replacing <= 20% of a sentence's words with out-of-vocabulary
    tokens flips the winning label in <= 30% of corpus sentences."""
    rng = np.random.default_rng(42)
    tested = flips_acrostic = flips_sensor = 0
    for prompt in prompts:
        words = list(token_words(prompt))
        n_replace = int(0.2 * len(words))
        if n_replace == 0:
            continue
        tested += 1
        mutated = list(words)
        for j in rng.choice(len(words), size=n_replace, replace=False):
            mutated[j] = f"qzxv{rng.integers(0, 10**6)}"
        mutated_text = " ".join(mutated)
        for labels, bucket in (
            (tables.acrostic_labels, "a"),
            (tables.sensor_labels, "s"),
        ):
            before, _ = classify(binding, prompt, labels)
            after, _ = classify(binding, mutated_text, labels)
            if before != after:
                if bucket == "a":
                    flips_acrostic += 1
                else:
                    flips_sensor += 1
    assert tested >= 100
    assert flips_acrostic / tested <= 0.30
    assert flips_sensor / tested <= 0.30


# -- seed and label file loading ---------------------------------------------

def test_seed_table_covers_all_labels(tables, binding):
    for label in tables.acrostic_labels + tables.sensor_labels:
        assert label in binding.seeds
        assert len(binding.seeds[label]) > 0


def test_missing_seed_label_fails(tables):
    with pytest.raises(KeyDerivationError):
        builtin_classify("text", ["no-such-label"], {})


def test_label_table_version_loaded(tables):
    assert tables.version == "1"


def test_binding_descriptions(binding):
    d = binding.describe()
    assert d["kind"] == "builtin"
    remote = ClassifierBinding.remote("http://localhost:9")
    assert remote.describe()["endpoint"] == "http://localhost:9"


# -- remote classification against a stub service ---------------------------

def test_remote_classify_roundtrip(tables, stub_server):
    def classify_route(body):
        assert set(body) == {"text", "labels"}
        scores = [float(i == 2) for i in range(len(body["labels"]))]
        return {"index": 2, "scores": scores}

    server = stub_server({("POST", "/classify"): classify_route})
    binding = ClassifierBinding.remote(server.url)
    index, scores = classify(binding, "anything", tables.sensor_labels)
    assert index == 2
    assert scores[2] == 1.0


def test_remote_classify_bad_shape(tables, stub_server):
    server = stub_server(
        {("POST", "/classify"): {"index": 0, "scores": [1.0]}}  # wrong length
    )
    binding = ClassifierBinding.remote(server.url)
    with pytest.raises(ProtocolError):
        classify(binding, "anything", tables.sensor_labels)


def test_remote_classify_tie_rule_enforced(tables, stub_server):
    def bad_index(body):
        return {"index": 1, "scores": [1.0] * len(body["labels"])}  # tie -> must be 0

    server = stub_server({("POST", "/classify"): bad_index})
    binding = ClassifierBinding.remote(server.url)
    with pytest.raises(ProtocolError):
        classify(binding, "anything", tables.sensor_labels)


def test_remote_unreachable_is_transport_error(tables):
    binding = ClassifierBinding.remote("http://127.0.0.1:1")
    with pytest.raises(TransportError):
        classify(binding, "anything", tables.sensor_labels)
