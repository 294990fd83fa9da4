"""Round-trip check: responses parse under the engine's own backend clients.

The engine package is consumed only through its documented wire protocol;
these tests bridge its HTTP clients onto the in-process sidecar app.
"""

import pytest
from fastapi.testclient import TestClient

from clarisidecar.app import create_app

clarisearch = pytest.importorskip("clarisearch")

from clarisearch.clarification import RemoteEmbedScorer  # noqa: E402
from clarisearch.conversation import ConversationHistory  # noqa: E402
from clarisearch.rerank import RemotePairwiseScorer, RemotePointwiseScorer  # noqa: E402
from clarisearch.rewrite import RemoteRewriteBackend  # noqa: E402
from clarisearch.usefulness import RemoteClassifyBackend  # noqa: E402

from test_protocol import training_file  # noqa: E402


@pytest.fixture()
def bridged_requests(tmp_path, monkeypatch):
    """Route the engine clients' requests.post to the in-process app."""
    annotations = training_file(tmp_path / "annotations.tsv")
    client = TestClient(create_app(annotations_path=annotations))

    class BridgedResponse:
        def __init__(self, response):
            self._response = response

        def raise_for_status(self):
            if self._response.status_code >= 400:
                raise requests.HTTPError(f"status {self._response.status_code}")

        def json(self):
            return self._response.json()

    import requests

    def fake_post(url, json=None, timeout=None):
        return BridgedResponse(client.post("/", json=json))

    monkeypatch.setattr(requests, "post", fake_post)
    return client


def test_rewrite_client_round_trip(bridged_requests):
    backend = RemoteRewriteBackend("http://sidecar/")
    out = backend.expand("map of usa", "do you want territories?", None)
    assert out.startswith("map of usa")


def test_embed_client_round_trip(bridged_requests):
    scorer = RemoteEmbedScorer("http://sidecar/")
    assert scorer.score("solar panels", "solar panels") == pytest.approx(1.0)
    assert scorer.score("solar panels", "solar panel pricing") >= -1.0


def test_classify_client_round_trip(bridged_requests):
    backend = RemoteClassifyBackend("http://sidecar/")
    label = backend.classify(
        "Find me map of USA.", "Do you want to see a map of US territories?", "Yes."
    )
    assert int(label) == 1


def test_rerank_clients_round_trip(bridged_requests):
    pointwise = RemotePointwiseScorer("http://sidecar/")
    scores = pointwise.score_many("solar", [("p1", "solar roof"), ("p2", "river dam")])
    assert len(scores) == 2
    pairwise = RemotePairwiseScorer("http://sidecar/")
    probs = pairwise.prefer_many("solar", [(("p1", "solar roof"), ("p2", "river dam"))])
    assert 0.0 <= probs[0] <= 1.0
