"""Shared conformance vectors: winner rule and label-order alignment.

The vector file at the repository root is consumed by both this suite and
the classifier service's suite; neither component imports the other.
This side runs the vectors against ``argmax_lowest`` and the builtin
classifier binding.
"""

import json
from pathlib import Path

import pytest

from stylomark.keygen import argmax_lowest, classify

CONFORMANCE_PATH = (
    Path(__file__).resolve().parents[1] / "conformance" / "classifier_conformance.json"
)


@pytest.fixture(scope="module")
def conformance() -> dict:
    with CONFORMANCE_PATH.open(encoding="utf-8") as fh:
        return json.load(fh)


def test_conformance_file_sane(conformance):
    assert conformance["version"] == 1
    assert conformance["argmax_cases"]
    assert conformance["permutation_cases"]
    for case in conformance["permutation_cases"]:
        assert sorted(case["permutation"]) == list(range(len(case["labels"])))


def test_argmax_vectors(conformance):
    for case in conformance["argmax_cases"]:
        assert argmax_lowest(case["scores"]) == case["index"], case


def test_permutation_alignment(conformance, binding):
    for case in conformance["permutation_cases"]:
        labels = case["labels"]
        permutation = case["permutation"]
        permuted_labels = [labels[p] for p in permutation]
        index1, scores1 = classify(binding, case["text"], labels)
        index2, scores2 = classify(binding, case["text"], permuted_labels)
        for j, p in enumerate(permutation):
            assert scores2[j] == scores1[p], case
        assert index1 == argmax_lowest(scores1)
        assert index2 == argmax_lowest(scores2)
        if scores1.count(max(scores1)) == 1:
            assert permuted_labels[index2] == labels[index1], case
