"""Shared fixtures: bundled data loaded once per session."""

import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from stylomark.datafiles import data_path
from stylomark.embedder import default_mock_lm
from stylomark.evalharness import load_prompts
from stylomark.keygen import default_binding, default_label_table
from stylomark.lexicon import default_lexicon


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def lm():
    return default_mock_lm()


@pytest.fixture(scope="session")
def tables():
    return default_label_table()


@pytest.fixture(scope="session")
def binding():
    return default_binding()


@pytest.fixture(scope="session")
def prompts():
    return load_prompts(data_path("prompts.txt"))


class StubHTTPServer:
    """A tiny local HTTP server serving canned JSON routes.

    ``routes`` maps (method, path) to a callable(body_dict) -> response
    object, or to a raw bytes/str payload served as-is.
    """

    def __init__(self, routes):
        self.routes = routes
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def _serve(self, method):
                import json

                key = (method, self.path)
                if key not in outer.routes:
                    self.send_error(404)
                    return
                target = outer.routes[key]
                body = {}
                length = int(self.headers.get("Content-Length") or 0)
                if length:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                payload = target(body) if callable(target) else target
                if isinstance(payload, (dict, list)):
                    payload = json.dumps(payload)
                if isinstance(payload, str):
                    payload = payload.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self._serve("GET")

            def do_POST(self):
                self._serve("POST")

            def log_message(self, *args):
                pass

        self._server = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self._server.server_port}"
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def make(routes):
        server = StubHTTPServer(routes)
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.close()
