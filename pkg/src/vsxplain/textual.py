"""Natural-language descriptions of summaries and visual explanations.

Two routes exist for multi-fragment explanations: describe the concatenated
clip in one shot (approach 1), or describe each fragment separately and
merge the descriptions with a second prompt (approach 2). Text depends only
on clip digests, prompts and the captioner id — never on explanation scores.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import NamedTuple, Sequence

from .backends import base as backends
from .clips import ClipExtractor, ClipHandle
from .errors import InvalidInputError
from .model import FeatureBundle, SummarySelection, TextArtifact

DESCRIBE_PROMPT = (
    "Describe the most prominent objects and events in the video, in 3 "
    "sentences. Don't mention background details."
)

MERGE_PROMPT_TEMPLATE = (
    "Write a brief summary that covers all {count} descriptions equally. "
    "Avoid assumptions and background details."
)

MERGE_PROMPT = MERGE_PROMPT_TEMPLATE.format(count=3)

DESCRIBE_PROMPT_ID = "describe_v1"
MERGE_PROMPT_ID = "merge_v1"


class PromptRegistry:
    """id -> exact prompt string; the two stock prompts are always present."""

    def __init__(self, prompts: dict[str, str] | None = None):
        self._prompts: dict[str, str] = {
            DESCRIBE_PROMPT_ID: DESCRIBE_PROMPT,
            MERGE_PROMPT_ID: MERGE_PROMPT,
        }
        if prompts:
            self._prompts.update(prompts)

    def get(self, prompt_id: str) -> str:
        try:
            return self._prompts[prompt_id]
        except KeyError:
            raise InvalidInputError(f"prompt {prompt_id!r} is not registered") from None

    def register(self, prompt_id: str, text: str) -> None:
        if not text:
            raise InvalidInputError("prompt text must be non-empty")
        self._prompts[prompt_id] = text

    def contains(self, prompt_id: str) -> bool:
        return prompt_id in self._prompts

    def merge_prompt(self, count: int) -> tuple[str, str]:
        """Merge prompt for ``count`` descriptions; count 3 is the stock one."""
        if count < 1:
            raise InvalidInputError("merge needs at least one description")
        if count == 3:
            return MERGE_PROMPT_ID, self._prompts[MERGE_PROMPT_ID]
        prompt_id = f"{MERGE_PROMPT_ID}#count={count}"
        text = MERGE_PROMPT_TEMPLATE.format(count=count)
        self._prompts.setdefault(prompt_id, text)
        return prompt_id, text

    def to_file(self, path: Path) -> None:
        Path(path).write_text(
            json.dumps(self._prompts, indent=2, sort_keys=True, ensure_ascii=False),
            encoding="utf-8",
        )

    @classmethod
    def from_file(cls, path: Path) -> "PromptRegistry":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in data.items()
        ):
            raise InvalidInputError(f"{path} is not an id -> prompt mapping")
        return cls(data)


class Approach2Result(NamedTuple):
    merged: TextArtifact
    fragment_descriptions: tuple[TextArtifact, ...]


def concat_fragments(
    bundle: FeatureBundle,
    fragment_indices: Sequence[int],
    extractor: ClipExtractor,
    policy: str | None = None,
) -> ClipHandle:
    """Clip of the given fragments concatenated in temporal order."""
    return extractor.extract(bundle, fragment_indices, policy=policy)


def describe_approach1(
    captioner,
    bundle: FeatureBundle,
    fragment_indices: Sequence[int],
    extractor: ClipExtractor,
    registry: PromptRegistry | None = None,
    *,
    kind: str = "explanation_description",
    policy: str | None = None,
) -> TextArtifact:
    """One description of the whole concatenated clip."""
    registry = registry or PromptRegistry()
    clip = concat_fragments(bundle, fragment_indices, extractor, policy=policy)
    return backends.caption_clip(
        captioner,
        clip,
        registry.get(DESCRIBE_PROMPT_ID),
        prompt_id=DESCRIBE_PROMPT_ID,
        kind=kind,
    )


def describe_summary(
    captioner,
    bundle: FeatureBundle,
    summary: SummarySelection,
    extractor: ClipExtractor,
    registry: PromptRegistry | None = None,
    *,
    policy: str | None = None,
) -> TextArtifact:
    return describe_approach1(
        captioner,
        bundle,
        summary.fragment_indices,
        extractor,
        registry,
        kind="summary_description",
        policy=policy,
    )


def describe_approach2(
    captioner,
    bundle: FeatureBundle,
    fragment_indices: Sequence[int],
    extractor: ClipExtractor,
    registry: PromptRegistry | None = None,
    *,
    policy: str | None = None,
) -> Approach2Result:
    """Describe each fragment separately, then merge the descriptions.

    Fragment captions may run concurrently; the merge input order is the
    fragments' temporal order regardless of completion order. Any failing
    fragment fails the whole operation (no partial merges).
    """
    registry = registry or PromptRegistry()
    indices = sorted(int(i) for i in fragment_indices)
    if not indices:
        raise InvalidInputError("need at least one fragment")
    describe_prompt = registry.get(DESCRIBE_PROMPT_ID)

    def describe_one(index: int) -> TextArtifact:
        clip = extractor.extract(bundle, [index], policy=policy)
        return backends.caption_clip(
            captioner,
            clip,
            describe_prompt,
            prompt_id=DESCRIBE_PROMPT_ID,
            kind="fragment_description",
        )

    workers = captioner.max_concurrency or len(indices)
    if workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(indices))) as pool:
            parts = tuple(pool.map(describe_one, indices))
    else:
        parts = tuple(describe_one(i) for i in indices)

    merge_id, merge_text = registry.merge_prompt(len(parts))
    merged = backends.summarize_texts(
        captioner,
        [p.text for p in parts],
        merge_text,
        prompt_id=merge_id,
        kind="merged_description",
    )
    return Approach2Result(merged=merged, fragment_descriptions=parts)
