from __future__ import annotations

import re

import pytest

from vsxplain.backends.mocks import MockCaptioner
from vsxplain.clips import ClipExtractor, SyntheticFrameStore
from vsxplain.errors import BackendError, InvalidInputError
from vsxplain.fixtures import make_bundle
from vsxplain.model import SummarySelection
from vsxplain.textual import (
    DESCRIBE_PROMPT,
    DESCRIBE_PROMPT_ID,
    MERGE_PROMPT,
    MERGE_PROMPT_ID,
    MERGE_PROMPT_TEMPLATE,
    PromptRegistry,
    concat_fragments,
    describe_approach1,
    describe_approach2,
    describe_summary,
)

EXPECTED_DESCRIBE = (
    "Describe the most prominent objects and events in the video, in 3 "
    "sentences. Don't mention background details."
)
EXPECTED_MERGE = (
    "Write a brief summary that covers all 3 descriptions equally. "
    "Avoid assumptions and background details."
)


@pytest.fixture
def bundle():
    return make_bundle("vid-t", fragment_lengths=(4, 5, 3, 4, 6), seed=21)


@pytest.fixture
def extractor(tmp_path):
    return ClipExtractor(tmp_path / "clips", frame_store=SyntheticFrameStore())


@pytest.fixture
def captioner():
    return MockCaptioner()


class TestPrompts:
    def test_describe_prompt_bytes(self):
        assert DESCRIBE_PROMPT == EXPECTED_DESCRIBE
        assert DESCRIBE_PROMPT.encode("utf-8") == EXPECTED_DESCRIBE.encode("utf-8")

    def test_merge_prompt_bytes(self):
        assert MERGE_PROMPT == EXPECTED_MERGE

    def test_registry_holds_stock_prompts(self):
        registry = PromptRegistry()
        assert registry.get(DESCRIBE_PROMPT_ID) == EXPECTED_DESCRIBE
        assert registry.get(MERGE_PROMPT_ID) == EXPECTED_MERGE

    def test_merge_prompt_count_three_is_stock(self):
        registry = PromptRegistry()
        prompt_id, text = registry.merge_prompt(3)
        assert prompt_id == MERGE_PROMPT_ID
        assert text == EXPECTED_MERGE

    def test_merge_prompt_count_substitution(self):
        registry = PromptRegistry()
        prompt_id, text = registry.merge_prompt(1)
        assert prompt_id == "merge_v1#count=1"
        assert "all 1 descriptions" in text
        assert registry.get(prompt_id) == text
        assert text == MERGE_PROMPT_TEMPLATE.format(count=1)

    def test_unknown_prompt_errors(self):
        with pytest.raises(InvalidInputError, match="not registered"):
            PromptRegistry().get("describe_v99")

    def test_registry_file_roundtrip(self, tmp_path):
        registry = PromptRegistry({"extra": "Say hi."})
        path = tmp_path / "prompts.json"
        registry.to_file(path)
        loaded = PromptRegistry.from_file(path)
        assert loaded.get("extra") == "Say hi."
        assert loaded.get(DESCRIBE_PROMPT_ID) == EXPECTED_DESCRIBE


class TestConcatFragments:
    def test_unsorted_indices_concatenate_in_temporal_order(self, bundle, extractor):
        clip = concat_fragments(bundle, [4, 0, 2], extractor)
        assert clip.fragment_indices == (0, 2, 4)

    def test_single_fragment(self, bundle, extractor):
        clip = concat_fragments(bundle, [3], extractor)
        start, end = bundle.fragments[3]
        assert clip.frame_count == end - start

    def test_frame_count_matches_fragment_spans(self, bundle, extractor):
        clip = concat_fragments(bundle, [0, 2, 4], extractor)
        expected = sum(
            bundle.fragments[i][1] - bundle.fragments[i][0] for i in (0, 2, 4)
        )
        assert clip.frame_count == expected


class TestDescribeApproach1:
    def test_deterministic_mock_text(self, bundle, extractor, captioner):
        a = describe_approach1(captioner, bundle, [1, 3], extractor)
        b = describe_approach1(captioner, bundle, [1, 3], extractor)
        assert a.text == b.text
        assert a.kind == "explanation_description"
        assert a.prompt_id == DESCRIBE_PROMPT_ID
        assert re.fullmatch(r"MOCK\([0-9a-f]{8},[0-9a-f]{4}\): objects .*", a.text)

    def test_text_keyed_to_clip_digest(self, bundle, extractor, captioner):
        a = describe_approach1(captioner, bundle, [0], extractor)
        b = describe_approach1(captioner, bundle, [1], extractor)
        assert a.text != b.text
        assert a.source_clip_digest != b.source_clip_digest


class TestDescribeSummary:
    def test_same_indices_same_text_as_explanation(self, bundle, extractor, captioner):
        summary = SummarySelection((0, 2, 4), k=3)
        summary_artifact = describe_summary(captioner, bundle, summary, extractor)
        explanation_artifact = describe_approach1(
            captioner, bundle, [0, 2, 4], extractor
        )
        assert summary_artifact.text == explanation_artifact.text
        assert summary_artifact.kind == "summary_description"
        assert (
            summary_artifact.source_clip_digest
            == explanation_artifact.source_clip_digest
        )


class TestDescribeApproach2:
    def test_merge_is_union_of_fragment_ids(self, bundle, extractor, captioner):
        result = describe_approach2(captioner, bundle, [0, 2, 4], extractor)
        assert result.merged.kind == "merged_description"
        assert result.merged.prompt_id == MERGE_PROMPT_ID
        assert len(result.fragment_descriptions) == 3
        ids = set()
        for part in result.fragment_descriptions:
            assert part.kind == "fragment_description"
            ids.update(int(m) for m in re.findall(r"\bo(\d+)\b", part.text))
        expected = ",".join(f"o{i}" for i in sorted(ids))
        assert result.merged.text.endswith(f"objects {expected}")

    def test_single_fragment_uses_count_one_prompt(self, bundle, extractor, captioner):
        result = describe_approach2(captioner, bundle, [2], extractor)
        assert result.merged.prompt_id == "merge_v1#count=1"
        assert len(result.fragment_descriptions) == 1

    def test_merge_inputs_in_temporal_order(self, bundle, extractor, captioner):
        shuffled = describe_approach2(captioner, bundle, [4, 0, 2], extractor)
        ordered = describe_approach2(captioner, bundle, [0, 2, 4], extractor)
        assert shuffled.merged.text == ordered.merged.text

    def test_threaded_equals_sequential(self, bundle, extractor):
        concurrent = MockCaptioner()  # max_concurrency None -> thread pool
        serial = MockCaptioner()
        serial.max_concurrency = 1
        a = describe_approach2(concurrent, bundle, [0, 1, 2], extractor)
        b = describe_approach2(serial, bundle, [0, 1, 2], extractor)
        assert a.merged.text == b.merged.text

    def test_no_partial_merge_on_fragment_failure(self, bundle, extractor):
        class FlakyCaptioner(MockCaptioner):
            def caption_clip(self, clip, prompt):
                text = super().caption_clip(clip, prompt)
                if self.n_caption_calls == 2:
                    raise BackendError(self.id, "boom")
                return text

        flaky = FlakyCaptioner()
        flaky.max_concurrency = 1
        with pytest.raises(BackendError, match="boom"):
            describe_approach2(flaky, bundle, [0, 1, 2], extractor)
        assert flaky.n_merge_calls == 0

    def test_empty_indices_rejected(self, bundle, extractor, captioner):
        with pytest.raises(InvalidInputError, match="at least one"):
            describe_approach2(captioner, bundle, [], extractor)
