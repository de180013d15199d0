"""Classifier backend construction.

A backend spec is either ``"lexical"`` (the bundled deterministic scorer)
or ``"hf:<model-id>"`` for a zero-shot NLI pipeline loaded through the
``transformers`` library.  Backend construction happens at application
startup; a spec that cannot be satisfied (unknown name, missing library,
missing model assets) raises :class:`BackendError` so the service fails
to start rather than serving a half-configured classifier.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from .scoring import LexicalClassifier, pick_index


class BackendError(Exception):
    """A classifier backend could not be constructed."""


class Classifier(Protocol):
    model_id: str

    def classify(self, text: str, labels: Sequence[str]) -> tuple[int, list[float]]: ...


class HFZeroShotClassifier:
    """Zero-shot NLI classifier served through a transformers pipeline.

    Scores are realigned to the request's label order (the pipeline
    returns them sorted by score), so the alignment contract holds here
    exactly as it does for the lexical backend.
    """

    def __init__(self, model_name: str):
        try:
            from transformers import pipeline
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise BackendError(
                f"backend 'hf:{model_name}' needs the transformers library: {exc}"
            ) from exc
        try:
            self._pipe = pipeline("zero-shot-classification", model=model_name)
        except Exception as exc:  # pragma: no cover - environment dependent
            raise BackendError(f"could not load model {model_name!r}: {exc}") from exc
        self.model_id = f"hf:{model_name}"

    def classify(self, text: str, labels: Sequence[str]) -> tuple[int, list[float]]:
        result = self._pipe(text, candidate_labels=list(labels))
        by_label = dict(zip(result["labels"], result["scores"]))
        values = [float(by_label[label]) for label in labels]
        return pick_index(values), values


def build_classifier(spec: str) -> Classifier:
    if spec == "lexical":
        return LexicalClassifier()
    if spec.startswith("hf:"):
        model_name = spec[3:]
        if not model_name:
            raise BackendError("backend spec 'hf:' is missing a model id")
        return HFZeroShotClassifier(model_name)
    raise BackendError(f"unknown classifier backend {spec!r}")
