"""End-to-end orchestration: summarize, explain, evaluate faithfulness,
textualize, evaluate plausibility, and aggregate per-dataset reports.

Per-video failures are quarantined and never abort a dataset run; failures
of a single (explainer, k, approach) combination are recorded and the other
combinations proceed. With mock backends and a fixed seed every output byte
is deterministic.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import yaml

from ._digest import digest_json, seed_from
from ._masking import REPLACEMENT_MODES, ZEROS
from .backends import base as backends
from .backends.adapter import (
    REGISTERED_BACKENDS,
    AdapterCaptioner,
    AdapterClient,
    AdapterEmbedder,
    AdapterEndpoint,
    AdapterSummarizer,
    make_transport,
)
from .backends.mocks import (
    ConstantSummarizer,
    HashedBagEmbedder,
    MockCaptioner,
    PlantedSummarizer,
)
from .cache import CachedCaptioner, CachedEmbedder, CachedSummarizer, CacheStore
from .clips import ClipExtractor, DirectoryFrameStore, SyntheticFrameStore
from .containers import list_videos, load_bundle
from .errors import InvalidInputError, PipelineError, ValidationError
from .explain import ExplainerConfig, explain_attention, explain_lime
from .faithfulness import DiscResult, disc_plus
from .model import (
    APPROACH_IDS,
    PIPELINE_EXPLAINER_IDS,
    EvaluationRecord,
    ExplanationScores,
    FeatureBundle,
    ImportanceScores,
    SummarySelection,
    TextArtifact,
    rank_fragments_by_influence,
)
from .plausibility import PlausibilityResult, plausibility_score
from .textual import (
    Approach2Result,
    PromptRegistry,
    describe_approach1,
    describe_approach2,
    describe_summary,
)

STAGES = ("summarize", "explain", "faithfulness", "textualize", "plausibility", "run")

SUMMARY_K = 3


@dataclass(frozen=True)
class DatasetSpec:
    dataset_id: str
    container: Path
    videos_dir: Path | None = None

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "container": str(self.container),
            "videos_dir": str(self.videos_dir) if self.videos_dir else None,
        }


@dataclass(frozen=True)
class VideoSetFilter:
    """Keeps videos with at least this many fragments available."""

    min_topk_fragments: int = 1

    def __post_init__(self):
        if self.min_topk_fragments < 1:
            raise ValidationError("min_topk_fragments must be >= 1")

    @classmethod
    def for_video_set(cls, video_set: int) -> "VideoSetFilter":
        if video_set == 1:
            return cls(1)
        if video_set == 2:
            return cls(3)
        raise InvalidInputError(f"unknown video set {video_set}; expected 1 or 2")

    def admits(self, bundle: FeatureBundle) -> bool:
        return bundle.n_fragments >= self.min_topk_fragments


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; the digest covers all result-affecting fields."""

    datasets: tuple[DatasetSpec, ...]
    output_dir: Path
    summarizer_id: str = "mock-planted"
    captioner_id: str = "mock-captioner"
    embedder_ids: tuple[str, ...] = ("mock-bow-a", "mock-bow-b")
    explainers: tuple[str, ...] = PIPELINE_EXPLAINER_IDS
    ks: tuple[int, ...] = (1, 3)
    approaches: tuple[str, ...] = ("approach1", "approach2")
    explainer: ExplainerConfig = ExplainerConfig()
    seed: int = 0
    replacement: str = ZEROS
    clip_policy: str | None = None
    frame_store: str | None = "synthetic"
    adapter_endpoints: dict = field(default_factory=dict)
    default_fps: float = 30.0

    def __post_init__(self):
        if not self.datasets:
            raise ValidationError("at least one dataset is required")
        for explainer in self.explainers:
            if explainer not in PIPELINE_EXPLAINER_IDS:
                raise ValidationError(f"unknown explainer {explainer!r}")
        for approach in self.approaches:
            if approach not in ("approach1", "approach2"):
                raise ValidationError(f"unknown approach {approach!r}")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValidationError("ks must be positive")
        if self.replacement not in REPLACEMENT_MODES:
            raise ValidationError(f"unknown replacement {self.replacement!r}")

    def to_dict(self) -> dict:
        return {
            "datasets": [d.to_dict() for d in self.datasets],
            "output_dir": str(self.output_dir),
            "summarizer_id": self.summarizer_id,
            "captioner_id": self.captioner_id,
            "embedder_ids": list(self.embedder_ids),
            "explainers": list(self.explainers),
            "ks": list(self.ks),
            "approaches": list(self.approaches),
            "explainer": self.explainer.to_dict(),
            "seed": self.seed,
            "replacement": self.replacement,
            "clip_policy": self.clip_policy,
            "frame_store": self.frame_store,
            "adapter_endpoints": {
                k: dict(v) for k, v in sorted(self.adapter_endpoints.items())
            },
            "default_fps": self.default_fps,
        }

    @property
    def config_digest(self) -> str:
        # output_dir is excluded: where results land must not change them
        semantic = self.to_dict()
        semantic.pop("output_dir")
        return digest_json(semantic)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        data = dict(raw)
        datasets = tuple(
            DatasetSpec(
                dataset_id=d["dataset_id"],
                container=Path(d["container"]),
                videos_dir=Path(d["videos_dir"]) if d.get("videos_dir") else None,
            )
            for d in data.pop("datasets")
        )
        explainer = ExplainerConfig(**data.pop("explainer", {}))
        kwargs = {}
        for key in (
            "summarizer_id",
            "captioner_id",
            "seed",
            "replacement",
            "clip_policy",
            "frame_store",
            "default_fps",
        ):
            if key in data:
                kwargs[key] = data.pop(key)
        for key in ("embedder_ids", "explainers", "ks", "approaches"):
            if key in data:
                kwargs[key] = tuple(data.pop(key))
        endpoints = data.pop("adapter_endpoints", {})
        output_dir = Path(data.pop("output_dir"))
        if data:
            raise ValidationError(f"unknown config keys: {sorted(data)}")
        return cls(
            datasets=datasets,
            output_dir=output_dir,
            explainer=explainer,
            adapter_endpoints=dict(endpoints),
            **kwargs,
        )

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValidationError(f"config {path} must be a mapping")
        return cls.from_dict(raw)


class SummarizerProvider(Protocol):
    def for_bundle(self, bundle: FeatureBundle): ...


class PlantedProvider:
    """One planted summarizer per bundle; the planted fragment is either
    fixed or derived from the bundle digest."""

    def __init__(self, fixed_index: int | None = None):
        self.fixed_index = fixed_index
        self.created: list[PlantedSummarizer] = []

    def planted_index(self, bundle: FeatureBundle) -> int:
        if self.fixed_index is not None:
            if self.fixed_index >= bundle.n_fragments:
                raise InvalidInputError(
                    f"planted index {self.fixed_index} out of range for "
                    f"{bundle.video_id} ({bundle.n_fragments} fragments)"
                )
            return self.fixed_index
        return int(bundle.content_digest[:8], 16) % bundle.n_fragments

    def for_bundle(self, bundle: FeatureBundle) -> PlantedSummarizer:
        backend = PlantedSummarizer(bundle.fragments, self.planted_index(bundle))
        self.created.append(backend)
        return backend


class StaticSummarizerProvider:
    def __init__(self, backend):
        self.backend = backend
        self.created = [backend]

    def for_bundle(self, bundle: FeatureBundle):
        return self.backend


def _endpoint_from_config(raw: dict) -> AdapterEndpoint:
    return AdapterEndpoint(
        transport=raw["transport"],
        command=raw.get("command"),
        url=raw.get("url"),
        timeout=float(raw.get("timeout", 60.0)),
    )


def _adapter_client(config: RunConfig, backend_id: str) -> AdapterClient:
    raw = config.adapter_endpoints.get(backend_id)
    if raw is None:
        raise InvalidInputError(
            f"backend {backend_id!r} needs an adapter endpoint in the config"
        )
    return AdapterClient(backend_id, make_transport(_endpoint_from_config(raw)))


def build_summarizer_provider(config: RunConfig) -> SummarizerProvider:
    sid = config.summarizer_id
    if sid.startswith("mock-planted"):
        fixed = int(sid.split(":", 1)[1]) if ":" in sid else None
        return PlantedProvider(fixed)
    if sid.startswith("mock-constant"):
        value = float(sid.split(":", 1)[1]) if ":" in sid else 0.5
        return StaticSummarizerProvider(ConstantSummarizer(value))
    spec = REGISTERED_BACKENDS.get(sid)
    if spec is None or spec.role != "summarizer":
        raise InvalidInputError(f"unknown summarizer backend {sid!r}")
    backend = AdapterSummarizer(
        sid,
        _adapter_client(config, sid),
        payload_dir=Path(config.output_dir) / "cache" / "payloads",
        provides_attention=spec.provides_attention,
    )
    return StaticSummarizerProvider(backend)


def build_captioner(config: RunConfig):
    cid = config.captioner_id
    if cid == "mock-captioner":
        return MockCaptioner()
    spec = REGISTERED_BACKENDS.get(cid)
    if spec is None or spec.role != "captioner":
        raise InvalidInputError(f"unknown captioner backend {cid!r}")
    return AdapterCaptioner(cid, _adapter_client(config, cid))


def build_embedders(config: RunConfig) -> tuple:
    out = []
    for eid in config.embedder_ids:
        if eid == "mock-bow-a":
            out.append(HashedBagEmbedder("mock-bow-a", dim=384, salt="a"))
        elif eid == "mock-bow-b":
            out.append(HashedBagEmbedder("mock-bow-b", dim=512, salt="b"))
        else:
            spec = REGISTERED_BACKENDS.get(eid)
            if spec is None or spec.role != "embedder":
                raise InvalidInputError(f"unknown embedder backend {eid!r}")
            out.append(AdapterEmbedder(eid, _adapter_client(config, eid), dim=spec.dim))
    return tuple(out)


def _build_frame_store(config: RunConfig):
    if config.frame_store is None:
        return None
    if config.frame_store == "synthetic":
        return SyntheticFrameStore()
    return DirectoryFrameStore(Path(config.frame_store))


@dataclass
class PipelineContext:
    config: RunConfig
    store: CacheStore
    summarizer_provider: SummarizerProvider
    captioner: object
    embedders: tuple
    extractor: ClipExtractor
    registry: PromptRegistry

    def close(self) -> None:
        """Shut down any adapter transports owned by this context."""
        backends = [self.captioner, *self.embedders]
        provider = getattr(self.summarizer_provider, "inner", self.summarizer_provider)
        backends.extend(getattr(provider, "created", []))
        for backend in backends:
            inner = getattr(backend, "inner", backend)
            client = getattr(inner, "client", None)
            if client is not None and hasattr(client, "close"):
                client.close()


def build_context(
    config: RunConfig,
    *,
    summarizer_provider: SummarizerProvider | None = None,
    captioner=None,
    embedders: Sequence | None = None,
) -> PipelineContext:
    """Wire backends (cache-proxied) and output directories for one run."""
    out = Path(config.output_dir)
    store = CacheStore(out / "cache")
    provider = summarizer_provider or build_summarizer_provider(config)
    captioner = captioner if captioner is not None else build_captioner(config)
    embedders = tuple(embedders) if embedders is not None else build_embedders(config)

    class _CachedProvider:
        def __init__(self, inner):
            self.inner = inner

        def for_bundle(self, bundle):
            return CachedSummarizer(self.inner.for_bundle(bundle), store)

    extractor = ClipExtractor(out / "clips", frame_store=_build_frame_store(config))
    return PipelineContext(
        config=config,
        store=store,
        summarizer_provider=_CachedProvider(provider),
        captioner=CachedCaptioner(captioner, store),
        embedders=tuple(CachedEmbedder(e, store) for e in embedders),
        extractor=extractor,
        registry=PromptRegistry(),
    )


def select_summary(
    bundle: FeatureBundle, importance: ImportanceScores, k: int = SUMMARY_K
) -> SummarySelection:
    """Top-k fragments by mean frame score, presented in temporal order.

    Mean rather than sum, so long fragments carry no length bias.
    """
    k_eff = min(k, bundle.n_fragments)
    means = np.array(
        [importance.scores[s:e].mean() for s, e in bundle.fragments], dtype=np.float64
    )
    ranking = rank_fragments_by_influence(means)
    return SummarySelection(tuple(sorted(ranking[:k_eff])), k=k_eff)


@dataclass(frozen=True)
class CombinationError:
    video_id: str
    dataset_id: str
    stage: str
    message: str
    explainer_id: str | None = None
    k: int | None = None
    approach_id: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class VideoResult:
    video_id: str
    dataset_id: str
    n_fragments: int
    planted_hint: str | None = None
    importance: ImportanceScores | None = None
    summary: SummarySelection | None = None
    summary_text: TextArtifact | None = None
    explanations: dict = field(default_factory=dict)
    disc: dict = field(default_factory=dict)
    texts: dict = field(default_factory=dict)
    fragment_texts: dict = field(default_factory=dict)
    plausibility: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def _record_flags(
    scores: ExplanationScores,
    disc: DiscResult | None,
    lower_fidelity_clip: bool,
    embedder_errors: dict | None,
) -> tuple[str, ...]:
    flags = list(scores.flags)
    if disc is not None and disc.degenerate:
        flags.append("degenerate-tau")
    if lower_fidelity_clip:
        flags.append("slideshow-clip")
    for emb in sorted(embedder_errors or {}):
        flags.append(f"embedder-error:{emb}")
    seen = set()
    ordered = [f for f in flags if not (f in seen or seen.add(f))]
    return tuple(ordered)


def run_video(
    ctx: PipelineContext,
    bundle: FeatureBundle,
    dataset_id: str,
    upto: str = "run",
) -> VideoResult:
    """All (explainer, k, approach) combinations for one video.

    Combination failures are recorded in ``result.errors``; everything else
    proceeds. Raises only when even the summarizer baseline is unavailable.
    """
    if upto not in STAGES:
        raise InvalidInputError(f"unknown stage {upto!r}")
    config = ctx.config
    do_explain = upto != "summarize"
    do_disc = upto in ("faithfulness", "run")
    do_texts = upto in ("textualize", "plausibility", "run") and bool(config.approaches)
    do_plaus = upto in ("plausibility", "run") and bool(config.approaches)
    do_records = upto == "run"

    summarizer = ctx.summarizer_provider.for_bundle(bundle)
    result = VideoResult(
        video_id=bundle.video_id,
        dataset_id=dataset_id,
        n_fragments=bundle.n_fragments,
        planted_hint=getattr(summarizer, "id", None),
    )
    importance = backends.score_frames(
        summarizer, bundle.features, video_id=bundle.video_id
    )
    result.importance = importance
    result.summary = select_summary(bundle, importance, SUMMARY_K)
    if not do_explain:
        return result

    summary_text: TextArtifact | None = None
    lower_fidelity = False
    if do_texts:
        try:
            summary_text = describe_summary(
                ctx.captioner,
                bundle,
                result.summary,
                ctx.extractor,
                ctx.registry,
                policy=config.clip_policy,
            )
            result.summary_text = summary_text
            summary_clip = ctx.extractor.extract(
                bundle, result.summary.fragment_indices, policy=config.clip_policy
            )
            lower_fidelity = summary_clip.lower_fidelity
        except PipelineError as exc:
            result.errors.append(
                CombinationError(
                    video_id=bundle.video_id,
                    dataset_id=dataset_id,
                    stage="textualize",
                    message=f"summary description failed: {exc}",
                )
            )
            summary_text = None

    for explainer_id in config.explainers:
        try:
            if explainer_id == "lime":
                lime_config = dataclasses.replace(
                    config.explainer,
                    seed=seed_from(config.seed, bundle.video_id, "lime"),
                    replacement=config.replacement,
                )
                scores = explain_lime(summarizer, bundle, lime_config)
            else:
                scores = explain_attention(summarizer, bundle)
        except PipelineError as exc:
            result.errors.append(
                CombinationError(
                    video_id=bundle.video_id,
                    dataset_id=dataset_id,
                    stage="explain",
                    message=str(exc),
                    explainer_id=explainer_id,
                )
            )
            continue
        result.explanations[explainer_id] = scores

        for k in config.ks:
            if k > bundle.n_fragments:
                result.errors.append(
                    CombinationError(
                        video_id=bundle.video_id,
                        dataset_id=dataset_id,
                        stage="explain",
                        message=f"k={k} exceeds {bundle.n_fragments} fragments",
                        explainer_id=explainer_id,
                        k=k,
                    )
                )
                continue
            disc: DiscResult | None = None
            if do_disc:
                try:
                    disc = disc_plus(
                        summarizer,
                        bundle,
                        scores,
                        k,
                        config.replacement,
                        baseline=importance,
                    )
                except PipelineError as exc:
                    result.errors.append(
                        CombinationError(
                            video_id=bundle.video_id,
                            dataset_id=dataset_id,
                            stage="faithfulness",
                            message=str(exc),
                            explainer_id=explainer_id,
                            k=k,
                        )
                    )
                    continue
                result.disc[(explainer_id, k)] = disc

            expl_indices = scores.top_k[:k]
            overlap = (
                len(set(expl_indices) & set(result.summary.fragment_indices)) / k
            )

            if not (do_texts or do_records):
                continue
            if not config.approaches or summary_text is None:
                if do_records and disc is not None:
                    flags = _record_flags(scores, disc, lower_fidelity, None)
                    if summary_text is None and config.approaches:
                        flags = flags + ("summary-text-unavailable",)
                    result.records.append(
                        EvaluationRecord(
                            video_id=bundle.video_id,
                            dataset_id=dataset_id,
                            explainer_id=explainer_id,
                            k=k,
                            approach_id="not_applicable",
                            disc_plus=disc.delta_e,
                            plausibility={},
                            seed=config.seed,
                            config_digest=config.config_digest,
                            flags=flags,
                            explanation_summary_overlap=overlap,
                        )
                    )
                continue

            for approach_id in config.approaches:
                try:
                    if approach_id == "approach1":
                        text = describe_approach1(
                            ctx.captioner,
                            bundle,
                            expl_indices,
                            ctx.extractor,
                            ctx.registry,
                            policy=config.clip_policy,
                        )
                    else:
                        two: Approach2Result = describe_approach2(
                            ctx.captioner,
                            bundle,
                            expl_indices,
                            ctx.extractor,
                            ctx.registry,
                            policy=config.clip_policy,
                        )
                        text = two.merged
                        result.fragment_texts[(explainer_id, k, approach_id)] = (
                            two.fragment_descriptions
                        )
                except PipelineError as exc:
                    result.errors.append(
                        CombinationError(
                            video_id=bundle.video_id,
                            dataset_id=dataset_id,
                            stage="textualize",
                            message=str(exc),
                            explainer_id=explainer_id,
                            k=k,
                            approach_id=approach_id,
                        )
                    )
                    continue
                result.texts[(explainer_id, k, approach_id)] = text

                plaus: PlausibilityResult | None = None
                if do_plaus:
                    try:
                        plaus = plausibility_score(
                            ctx.embedders,
                            text,
                            summary_text,
                            video_id=bundle.video_id,
                            explainer_id=explainer_id,
                            approach_id=approach_id,
                        )
                    except PipelineError as exc:
                        result.errors.append(
                            CombinationError(
                                video_id=bundle.video_id,
                                dataset_id=dataset_id,
                                stage="plausibility",
                                message=str(exc),
                                explainer_id=explainer_id,
                                k=k,
                                approach_id=approach_id,
                            )
                        )
                        continue
                    result.plausibility[(explainer_id, k, approach_id)] = plaus

                if do_records and disc is not None:
                    flags = _record_flags(
                        scores,
                        disc,
                        lower_fidelity,
                        plaus.errors if plaus else None,
                    )
                    result.records.append(
                        EvaluationRecord(
                            video_id=bundle.video_id,
                            dataset_id=dataset_id,
                            explainer_id=explainer_id,
                            k=k,
                            approach_id=approach_id,
                            disc_plus=disc.delta_e,
                            plausibility=plaus.reported_map() if plaus else {},
                            seed=config.seed,
                            config_digest=config.config_digest,
                            flags=flags,
                            explanation_summary_overlap=overlap,
                        )
                    )
    return result


@dataclass
class RunReport:
    records: list
    results: list
    combination_errors: list
    quarantined: list
    excluded: list
    metadata: dict


def run_dataset(
    config: RunConfig,
    video_filter: VideoSetFilter | None = None,
    *,
    summarizer_provider: SummarizerProvider | None = None,
    captioner=None,
    embedders: Sequence | None = None,
    upto: str = "run",
    ctx: PipelineContext | None = None,
) -> RunReport:
    """Run every admitted video of every configured dataset."""
    video_filter = video_filter or VideoSetFilter(1)
    owns_ctx = ctx is None
    if ctx is None:
        ctx = build_context(
            config,
            summarizer_provider=summarizer_provider,
            captioner=captioner,
            embedders=embedders,
        )
    try:
        return _run_dataset(config, video_filter, ctx, upto)
    finally:
        if owns_ctx:
            ctx.close()


def _run_dataset(
    config: RunConfig,
    video_filter: VideoSetFilter,
    ctx: PipelineContext,
    upto: str,
) -> RunReport:
    records: list[EvaluationRecord] = []
    results: list[VideoResult] = []
    combination_errors: list[CombinationError] = []
    quarantined: list[dict] = []
    excluded: list[dict] = []
    for dataset in config.datasets:
        try:
            keys = list_videos(dataset.container)
        except Exception as exc:
            quarantined.append(
                {
                    "dataset_id": dataset.dataset_id,
                    "video_id": None,
                    "error": f"container unreadable: {exc}",
                }
            )
            continue
        for key in keys:
            try:
                bundle = load_bundle(
                    dataset.container,
                    key,
                    videos_dir=dataset.videos_dir,
                    default_fps=config.default_fps,
                )
            except PipelineError as exc:
                quarantined.append(
                    {"dataset_id": dataset.dataset_id, "video_id": key, "error": str(exc)}
                )
                continue
            if not video_filter.admits(bundle):
                excluded.append(
                    {
                        "dataset_id": dataset.dataset_id,
                        "video_id": key,
                        "n_fragments": bundle.n_fragments,
                        "min_required": video_filter.min_topk_fragments,
                    }
                )
                continue
            try:
                result = run_video(ctx, bundle, dataset.dataset_id, upto=upto)
            except PipelineError as exc:
                quarantined.append(
                    {"dataset_id": dataset.dataset_id, "video_id": key, "error": str(exc)}
                )
                continue
            results.append(result)
            records.extend(result.records)
            combination_errors.extend(result.errors)
    metadata = {
        "config_digest": config.config_digest,
        "seed": config.seed,
        "min_topk_fragments": video_filter.min_topk_fragments,
        "aggregation": "mean",
        "stage": upto,
        "datasets": [d.dataset_id for d in config.datasets],
    }
    return RunReport(
        records=records,
        results=results,
        combination_errors=combination_errors,
        quarantined=quarantined,
        excluded=excluded,
        metadata=metadata,
    )
