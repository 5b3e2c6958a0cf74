"""Fragment-level explanation of video summarizers, textual rendering of the
explanations, and faithfulness/plausibility evaluation."""

from .model import (
    EvaluationRecord,
    ExplanationScores,
    FeatureBundle,
    ImportanceScores,
    PerturbationMask,
    SummarySelection,
    TextArtifact,
    validate_bundle,
)
from .explain import (
    ExplainerConfig,
    apply_replacement,
    explain_attention,
    explain_lime,
    sample_masks,
    top_k_fragments,
)
from .faithfulness import DiscResult, TauResult, disc_plus, kendall_tau, mask_top_k
from .plausibility import PlausibilityResult, cosine_similarity, plausibility_score
from .textual import (
    DESCRIBE_PROMPT,
    MERGE_PROMPT,
    PromptRegistry,
    concat_fragments,
    describe_approach1,
    describe_approach2,
    describe_summary,
)
from .pipeline import (
    DatasetSpec,
    RunConfig,
    RunReport,
    VideoSetFilter,
    build_context,
    run_dataset,
    run_video,
    select_summary,
)
from .containers import list_videos, load_bundle
from .cache import CacheStore, cache_get, cache_put
from .clips import ClipExtractor, ClipHandle, SyntheticFrameStore

__version__ = "0.1.0"

__all__ = [
    "FeatureBundle",
    "ImportanceScores",
    "SummarySelection",
    "ExplanationScores",
    "PerturbationMask",
    "TextArtifact",
    "EvaluationRecord",
    "validate_bundle",
    "ExplainerConfig",
    "sample_masks",
    "apply_replacement",
    "explain_lime",
    "explain_attention",
    "top_k_fragments",
    "TauResult",
    "DiscResult",
    "kendall_tau",
    "mask_top_k",
    "disc_plus",
    "cosine_similarity",
    "PlausibilityResult",
    "plausibility_score",
    "DESCRIBE_PROMPT",
    "MERGE_PROMPT",
    "PromptRegistry",
    "concat_fragments",
    "describe_approach1",
    "describe_approach2",
    "describe_summary",
    "DatasetSpec",
    "RunConfig",
    "RunReport",
    "VideoSetFilter",
    "build_context",
    "run_dataset",
    "run_video",
    "select_summary",
    "list_videos",
    "load_bundle",
    "CacheStore",
    "cache_get",
    "cache_put",
    "ClipExtractor",
    "ClipHandle",
    "SyntheticFrameStore",
]
