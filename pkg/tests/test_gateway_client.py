"""Gateway protocol client: transport, retries, and schema validation."""

from __future__ import annotations

import base64

import pytest

from semcom import (
    RasterImage,
    SegmentationArray,
    rle_encode,
    transmit,
    validate_payload,
)
from semcom.gateway import (
    GatewayEndpoint,
    ProtocolError,
    TransportError,
    endpoint_from_env,
    gateway_backends,
    remote_caption,
    remote_generate,
    remote_segment,
    remote_similarity,
)

from gateway_stub import StubGateway


@pytest.fixture(scope="module")
def _shared_stub():
    gateway = StubGateway()
    yield gateway
    gateway.close()


@pytest.fixture
def stub(_shared_stub):
    _shared_stub.reset()
    return _shared_stub


@pytest.fixture
def endpoint(stub):
    return GatewayEndpoint(base_url=stub.url, timeout=5.0, retries=2)


def tiny_image() -> RasterImage:
    return RasterImage.from_flat(2, 2, [(255, 0, 0)] * 4)


class TestEndpoint:
    def test_invalid_timeout_rejected(self):
        with pytest.raises(ValueError, match="timeout"):
            GatewayEndpoint(base_url="http://x", timeout=0)

    def test_negative_retries_rejected(self):
        with pytest.raises(ValueError, match="retries"):
            GatewayEndpoint(base_url="http://x", retries=-1)

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("SEMCOM_GATEWAY_URL", "http://example:9")
        monkeypatch.setenv("SEMCOM_GATEWAY_TIMEOUT", "7.5")
        monkeypatch.setenv("SEMCOM_GATEWAY_TOKEN", "tok")
        ep = endpoint_from_env()
        assert ep.base_url == "http://example:9"
        assert ep.timeout == 7.5
        assert ep.token == "tok"

    def test_from_env_requires_url(self, monkeypatch):
        monkeypatch.delenv("SEMCOM_GATEWAY_URL", raising=False)
        with pytest.raises(ValueError, match="SEMCOM_GATEWAY_URL"):
            endpoint_from_env()

    def test_explicit_url_wins_over_env(self, monkeypatch):
        monkeypatch.setenv("SEMCOM_GATEWAY_URL", "http://env")
        assert endpoint_from_env("http://flag").base_url == "http://flag"


class TestRemoteCaption:
    def test_returns_stub_caption(self, endpoint):
        assert remote_caption(endpoint, tiny_image()) == "a photography of a dog"

    def test_5xx_retried_then_transport_error(self, stub, endpoint):
        for _ in range(3):
            stub.enqueue("/v1/caption", 503, {"error": {"code": "busy", "message": "later"}})
        with pytest.raises(TransportError, match="3 attempts"):
            remote_caption(endpoint, tiny_image())
        assert len(stub.requests_for("/v1/caption")) == 3

    def test_request_id_constant_across_retries(self, stub, endpoint):
        for _ in range(2):
            stub.enqueue("/v1/caption", 503, {"error": {"code": "busy", "message": "later"}})
        remote_caption(endpoint, tiny_image())
        ids = {headers["X-Request-Id"] for _, _, headers in stub.requests_for("/v1/caption")}
        assert len(stub.requests_for("/v1/caption")) == 3
        assert len(ids) == 1

    def test_4xx_not_retried(self, stub, endpoint):
        stub.enqueue("/v1/caption", 404, {"error": {"code": "no_model", "message": "gone"}})
        with pytest.raises(ProtocolError, match="no_model"):
            remote_caption(endpoint, tiny_image())
        assert len(stub.requests_for("/v1/caption")) == 1

    def test_missing_caption_field(self, stub, endpoint):
        stub.enqueue("/v1/caption", 200, {"text": "nope"})
        with pytest.raises(ProtocolError, match="missing field 'caption'"):
            remote_caption(endpoint, tiny_image())

    def test_empty_caption_rejected(self, stub, endpoint):
        stub.enqueue("/v1/caption", 200, {"caption": "   "})
        with pytest.raises(ProtocolError, match="empty caption"):
            remote_caption(endpoint, tiny_image())

    def test_non_json_body_rejected(self, stub, endpoint):
        stub.enqueue("/v1/caption", 200, "this is not json")
        with pytest.raises(ProtocolError, match="not JSON"):
            remote_caption(endpoint, tiny_image())

    def test_bearer_token_sent(self, stub):
        ep = GatewayEndpoint(base_url=stub.url, timeout=5.0, token="sekret")
        remote_caption(ep, tiny_image())
        _, _, headers = stub.requests_for("/v1/caption")[0]
        assert headers["Authorization"] == "Bearer sekret"

    def test_image_travels_as_png_b64(self, stub, endpoint):
        img = tiny_image()
        remote_caption(endpoint, img)
        _, body, _ = stub.requests_for("/v1/caption")[0]
        from semcom import load_image

        round_tripped = load_image(base64.b64decode(body["image_png_b64"]), format="png")
        assert round_tripped == img


class TestRemoteSegment:
    def test_decodes_fixture_rle(self, stub, endpoint):
        img = tiny_image()
        labels = SegmentationArray.from_flat(2, 2, [0, 7, 7, 0])
        stub.enqueue("/v1/segment", 200, {
            "width": 2, "height": 2,
            "rle_b64": base64.b64encode(rle_encode(labels)).decode(),
        })
        assert remote_segment(endpoint, img) == labels

    def test_default_stub_returns_background(self, endpoint):
        seg = remote_segment(endpoint, tiny_image())
        assert (seg.width, seg.height) == (2, 2)
        assert seg.labels == [0, 0, 0, 0]

    def test_dimension_mismatch_rejected(self, stub, endpoint):
        wrong = SegmentationArray.from_flat(3, 1, [0, 0, 0])
        stub.enqueue("/v1/segment", 200, {
            "width": 3, "height": 1,
            "rle_b64": base64.b64encode(rle_encode(wrong)).decode(),
        })
        with pytest.raises(ProtocolError, match="segmentation dimension mismatch"):
            remote_segment(endpoint, tiny_image())

    def test_invalid_base64_rejected(self, stub, endpoint):
        stub.enqueue("/v1/segment", 200, {"width": 2, "height": 2, "rle_b64": "@@@"})
        with pytest.raises(ProtocolError, match="invalid base64"):
            remote_segment(endpoint, tiny_image())

    def test_bad_rle_rejected(self, stub, endpoint):
        stub.enqueue("/v1/segment", 200, {
            "width": 2, "height": 2,
            "rle_b64": base64.b64encode(b"\x00\x01\x00").decode(),  # covers 1 of 4 px
        })
        with pytest.raises(ProtocolError, match="length-sum mismatch"):
            remote_segment(endpoint, tiny_image())


class TestRemoteGenerate:
    def test_echo_stub_returns_k_images(self, endpoint):
        img = tiny_image()
        images = remote_generate(endpoint, img, "caption", 3, "neg", seed=1)
        assert len(images) == 3
        assert all(candidate == img for candidate in images)

    def test_k_zero_rejected_client_side(self, stub, endpoint):
        with pytest.raises(ValueError):
            remote_generate(endpoint, tiny_image(), "c", 0, "", seed=0)
        assert stub.requests_for("/v1/generate") == []

    def test_count_mismatch_rejected(self, stub, endpoint):
        from gateway_stub import png_b64

        stub.enqueue("/v1/generate", 200, {"images_png_b64": [png_b64(tiny_image())] * 2})
        with pytest.raises(ProtocolError, match="candidate count mismatch"):
            remote_generate(endpoint, tiny_image(), "c", 3, "", seed=0)

    def test_wrong_dimension_candidate_rejected(self, stub, endpoint):
        from gateway_stub import png_b64

        small = RasterImage.from_flat(1, 1, [(0, 0, 0)])
        stub.enqueue("/v1/generate", 200, {"images_png_b64": [png_b64(small)]})
        with pytest.raises(ProtocolError, match="candidate 0: dimension mismatch"):
            remote_generate(endpoint, tiny_image(), "c", 1, "", seed=0)

    def test_request_carries_protocol_fields(self, stub, endpoint):
        remote_generate(endpoint, tiny_image(), "a cat", 2, "blurry", seed=77)
        _, body, _ = stub.requests_for("/v1/generate")[0]
        assert body["caption"] == "a cat"
        assert body["k"] == 2
        assert body["negative_prompt"] == "blurry"
        assert body["seed"] == 77
        assert "strength" not in body

    def test_optional_strength_forwarded(self, stub, endpoint):
        remote_generate(endpoint, tiny_image(), "c", 1, "", seed=0, strength=0.7)
        _, body, _ = stub.requests_for("/v1/generate")[0]
        assert body["strength"] == 0.7


class TestRemoteSimilarity:
    def test_identical_strings_score_one(self, endpoint):
        assert remote_similarity(endpoint, "same words", "same words") == 1.0

    def test_f1_above_one_clamped(self, stub, endpoint):
        stub.enqueue("/v1/similarity", 200, {"precision": 1.0, "recall": 1.0, "f1": 1.03})
        assert remote_similarity(endpoint, "a", "b") == 1.0

    def test_missing_f1_rejected(self, stub, endpoint):
        stub.enqueue("/v1/similarity", 200, {"precision": 0.5, "recall": 0.5})
        with pytest.raises(ProtocolError, match="missing field 'f1'"):
            remote_similarity(endpoint, "a", "b")

    def test_non_numeric_f1_rejected(self, stub, endpoint):
        stub.enqueue("/v1/similarity", 200, {"f1": "high"})
        with pytest.raises(ProtocolError, match="not a number"):
            remote_similarity(endpoint, "a", "b")


class TestGatewayBackends:
    def test_transmit_through_stub(self, endpoint):
        payload = transmit(tiny_image(), gateway_backends(endpoint))
        assert payload.caption == "a photography of a dog"
        assert validate_payload(payload) == []
        assert payload.segmentation.labels == [0, 0, 0, 0]
