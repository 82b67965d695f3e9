from .client import HttpBackendClient, HttpBackends, config_from_env, http_backends_from_env
from .mock import MockBackends, mock_embed, mock_inpaint, mock_segment
from .protocol import (
    BackendConfig,
    Backends,
    EmbedRequest,
    EmbedResponse,
    InpaintRequest,
    InpaintResponse,
    SegmentRequest,
    SegmentResponse,
    cosine,
)

__all__ = [
    "BackendConfig",
    "Backends",
    "EmbedRequest",
    "EmbedResponse",
    "HttpBackendClient",
    "HttpBackends",
    "InpaintRequest",
    "InpaintResponse",
    "MockBackends",
    "SegmentRequest",
    "SegmentResponse",
    "config_from_env",
    "cosine",
    "http_backends_from_env",
    "mock_embed",
    "mock_inpaint",
    "mock_segment",
]
