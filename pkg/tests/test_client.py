import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import numpy as np
import pytest
from starlette.testclient import TestClient

from paintaug.backends.app import create_backend_app
from paintaug.backends.client import HttpBackendClient, HttpBackends
from paintaug.backends.mock import MockBackends, mock_inpaint
from paintaug.backends.protocol import (
    BackendConfig,
    EmbedRequest,
    InpaintRequest,
    SegmentRequest,
    image_to_b64,
)
from paintaug.errors import ProtocolError, RemoteBackendError, TransportError
from paintaug.imaging import Rect

from conftest import blob_mask, random_image, random_mask


def cfg(**kw) -> BackendConfig:
    defaults = dict(endpoint="http://backend.test", timeout_ms=2000, max_retries=2, max_in_flight=4)
    defaults.update(kw)
    return BackendConfig(**defaults)


@pytest.fixture
def app_transport():
    """Routes client requests through the real FastAPI backend app."""
    test_client = TestClient(create_backend_app(MockBackends()))

    def handler(request: httpx.Request) -> httpx.Response:
        r = test_client.request(
            request.method, request.url.path, content=request.content,
            headers={"content-type": "application/json"},
        )
        return httpx.Response(r.status_code, content=r.content)

    return httpx.MockTransport(handler)


def make_backends(transport, **kw) -> HttpBackends:
    return HttpBackends(cfg(**kw), cfg(**kw), cfg(**kw), transport=transport)


class TestWireConformance:
    def test_inpaint_over_http_equals_local_mock(self, app_transport, rng):
        backends = make_backends(app_transport)
        req = InpaintRequest(
            base_crop=random_image(rng, 20, 20),
            mask=blob_mask(20, 20, [(4, 4, 8, 8)]),
            reference=random_image(rng, 6, 6),
            seed=5,
        )
        remote = backends.inpaint(req)
        local = mock_inpaint(req)
        assert remote.image == local.image
        assert remote.backend_id == "mock-stamp"
        assert remote.latency_ms >= 0.0

    def test_embed_and_segment_over_http(self, app_transport, rng):
        backends = make_backends(app_transport)
        vec = backends.embed(EmbedRequest(image=random_image(rng, 8, 8))).vector
        assert len(vec) == 64
        img = random_image(rng, 16, 16)
        resp = backends.segment(SegmentRequest(image=img, prompt_box=Rect(2, 2, 10, 10)))
        assert (resp.mask.width, resp.mask.height) == (16, 16)

    def test_embed_dimension_change_is_protocol_error(self):
        vectors = iter([[1.0, 0.0], [1.0, 0.0, 0.0]])

        def handler(request):
            return httpx.Response(200, json={"vector": next(vectors)})

        backends = make_backends(httpx.MockTransport(handler))
        backends.embed(EmbedRequest(image=random_image(np.random.default_rng(0), 4, 4)))
        with pytest.raises(ProtocolError, match="dimension"):
            backends.embed(EmbedRequest(image=random_image(np.random.default_rng(1), 4, 4)))


class TestFailureHandling:
    def test_timeout_then_success_is_idempotent(self, rng):
        req = InpaintRequest(
            base_crop=random_image(rng, 12, 12),
            mask=blob_mask(12, 12, [(2, 2, 6, 6)]),
            reference=random_image(rng, 4, 4),
            seed=1,
        )
        direct = mock_inpaint(req)
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                raise httpx.ConnectTimeout("first attempt times out")
            resp = mock_inpaint(req)
            return httpx.Response(
                200, json={"image_png": image_to_b64(resp.image), "backend_id": resp.backend_id}
            )

        backends = make_backends(httpx.MockTransport(handler))
        retried = backends.inpaint(req)
        assert retried.image == direct.image
        assert calls["n"] == 2

    def test_timeout_after_retries_is_transport_error(self, rng):
        def handler(request):
            raise httpx.ConnectTimeout("always down")

        client = HttpBackendClient(cfg(max_retries=2), transport=httpx.MockTransport(handler))
        with pytest.raises(TransportError, match="3 attempts"):
            client.post("/v1/embed", {})

    def test_error_envelope_surfaces_server_message(self):
        def handler(request):
            return httpx.Response(503, json={"code": "overloaded", "message": "gpu busy"})

        client = HttpBackendClient(cfg(), transport=httpx.MockTransport(handler))
        with pytest.raises(RemoteBackendError, match="gpu busy") as err:
            client.post("/v1/inpaint", {})
        assert err.value.code == "overloaded"

    def test_wrong_size_response_is_protocol_error(self, rng):
        small = random_image(rng, 10, 10)

        def handler(request):
            return httpx.Response(200, json={"image_png": image_to_b64(small), "backend_id": "x"})

        backends = make_backends(httpx.MockTransport(handler))
        req = InpaintRequest(
            base_crop=random_image(rng, 16, 16),
            mask=blob_mask(16, 16, [(2, 2, 6, 6)]),
            reference=random_image(rng, 4, 4),
            seed=1,
        )
        with pytest.raises(ProtocolError, match="10x10"):
            backends.inpaint(req)

    def test_bearer_token_passthrough(self):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"vector": [1.0]})

        client = HttpBackendClient(
            cfg(bearer_token="sekrit"), transport=httpx.MockTransport(handler)
        )
        client.post("/v1/embed", {})
        assert seen["auth"] == "Bearer sekrit"


class TestInFlightBound:
    def test_concurrency_never_exceeds_max_in_flight(self):
        lock = threading.Lock()
        live = {"now": 0, "peak": 0}

        def handler(request):
            with lock:
                live["now"] += 1
                live["peak"] = max(live["peak"], live["now"])
            time.sleep(0.02)
            with lock:
                live["now"] -= 1
            return httpx.Response(200, json={"vector": [1.0, 2.0]})

        client = HttpBackendClient(
            cfg(max_in_flight=2), transport=httpx.MockTransport(handler)
        )
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(lambda _: client.post("/v1/embed", {}), range(16)))
        assert live["peak"] <= 2
        assert live["peak"] >= 1


def test_env_endpoint_override(monkeypatch):
    from paintaug.backends.client import config_from_env

    monkeypatch.setenv("INPAINT_URL", "http://gpu-box:9000")
    assert config_from_env("inpaint").endpoint == "http://gpu-box:9000"
    monkeypatch.delenv("EMBED_URL", raising=False)
    assert config_from_env("embed").endpoint == "http://127.0.0.1:8600"
