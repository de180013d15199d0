import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from classifier_service.app import Settings, create_app

CONFORMANCE_PATH = (
    Path(__file__).resolve().parents[2] / "conformance" / "classifier_conformance.json"
)


@pytest.fixture(scope="session")
def app():
    return create_app()


@pytest.fixture(scope="session")
def client(app):
    return TestClient(app)


@pytest.fixture(scope="session")
def conformance() -> dict:
    with CONFORMANCE_PATH.open(encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def vocab_size(client) -> int:
    return len(client.get("/v1/vocab").json()["tokens"])


@pytest.fixture()
def make_client():
    def _make(**settings_kwargs) -> TestClient:
        return TestClient(create_app(Settings(**settings_kwargs)))

    return _make
