"""Summarizer, captioner and embedder gateways: interfaces, mocks, adapters."""

from .base import (
    CaptionerBackend,
    EmbedderBackend,
    SummarizerBackend,
    attention_signal,
    caption_clip,
    embed_text,
    score_frames,
    summarize_texts,
)
from .mocks import (
    ConstantSummarizer,
    HashedBagEmbedder,
    MockCaptioner,
    PlantedSummarizer,
    default_mock_embedders,
)
from .adapter import (
    REGISTERED_BACKENDS,
    AdapterCaptioner,
    AdapterClient,
    AdapterEmbedder,
    AdapterEndpoint,
    AdapterSummarizer,
    make_transport,
)

__all__ = [
    "SummarizerBackend",
    "CaptionerBackend",
    "EmbedderBackend",
    "score_frames",
    "attention_signal",
    "caption_clip",
    "summarize_texts",
    "embed_text",
    "PlantedSummarizer",
    "ConstantSummarizer",
    "MockCaptioner",
    "HashedBagEmbedder",
    "default_mock_embedders",
    "REGISTERED_BACKENDS",
    "AdapterEndpoint",
    "AdapterClient",
    "AdapterSummarizer",
    "AdapterCaptioner",
    "AdapterEmbedder",
    "make_transport",
]
