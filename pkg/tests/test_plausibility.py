from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsxplain.backends.mocks import HashedBagEmbedder, default_mock_embedders
from vsxplain.errors import BackendError, InvalidInputError, UndefinedSimilarityError
from vsxplain.model import TextArtifact
from vsxplain.plausibility import (
    EmbedderScore,
    PlausibilityResult,
    cosine_similarity,
    plausibility_score,
)


def _artifact(text, kind="explanation_description"):
    return TextArtifact(kind=kind, text=text, prompt_id="describe_v1", source_clip_digest="d")


class TestCosineSimilarity:
    def test_identical_vectors_exactly_one(self, rng):
        v = rng.normal(size=17)
        assert cosine_similarity(v, v.copy()) == 1.0

    def test_orthogonal_unit_vectors_zero(self):
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([0.0, 1.0, 0.0])
        assert cosine_similarity(a, b) == 0.0

    def test_scale_invariance(self, rng):
        v = rng.normal(size=9)
        assert cosine_similarity(v, 3.0 * v) == pytest.approx(1.0, abs=1e-12)

    def test_opposite_vectors(self, rng):
        v = rng.normal(size=9)
        assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(UndefinedSimilarityError):
            cosine_similarity(np.zeros(4), np.ones(4))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            cosine_similarity(np.ones(3), np.ones(4))

    def test_always_in_range(self, rng):
        for _ in range(200):
            a = rng.normal(size=8)
            b = rng.normal(size=8)
            value = cosine_similarity(a, b)
            assert -1.0 <= value <= 1.0


class TestPlausibilityResult:
    def test_reported_must_be_clamped_raw(self):
        with pytest.raises(Exception, match="max"):
            PlausibilityResult(
                "v", "lime", "approach1", {"e": EmbedderScore(-0.5, 0.5)}
            )

    def test_reported_map(self):
        result = PlausibilityResult(
            "v", "lime", "approach1", {"e": EmbedderScore(-0.5, 0.0)}
        )
        assert result.reported_map() == {"e": 0.0}


class TestPlausibilityScore:
    def test_identical_texts_report_one_for_every_embedder(self):
        artifact = _artifact("the cook assembles a sandwich")
        result = plausibility_score(
            default_mock_embedders(), artifact, _artifact("the cook assembles a sandwich")
        )
        assert set(result.per_embedder) == {"mock-bow-a", "mock-bow-b"}
        for score in result.per_embedder.values():
            assert score.reported == 1.0
            assert score.raw_cosine == 1.0

    def test_disjoint_vocabulary_reports_zero(self):
        result = plausibility_score(
            default_mock_embedders(),
            _artifact("alpha beta gamma"),
            _artifact("delta epsilon zeta"),
        )
        for score in result.per_embedder.values():
            assert score.reported == 0.0

    def test_symmetric_in_texts(self):
        a = _artifact("a beekeeper opens the hive")
        b = _artifact("bees swarm around the beekeeper")
        forward = plausibility_score(default_mock_embedders(), a, b)
        backward = plausibility_score(default_mock_embedders(), b, a)
        assert forward.reported_map() == backward.reported_map()

    def test_negative_raw_is_clamped_but_preserved(self):
        class OppositeEmbedder:
            id = "opp"
            dim = 3
            max_concurrency = None

            def embed(self, text):
                return np.array([1.0, 0.0, 0.0]) if "first" in text else np.array([-1.0, 0.0, 0.0])

        result = plausibility_score(
            [OppositeEmbedder()], _artifact("first text"), _artifact("second text")
        )
        score = result.per_embedder["opp"]
        assert score.raw_cosine == -1.0
        assert score.reported == 0.0

    def test_one_failing_embedder_does_not_void_others(self):
        class BrokenEmbedder:
            id = "broken"
            dim = 4
            max_concurrency = None

            def embed(self, text):
                raise BackendError(self.id, "offline")

        good_a, good_b = default_mock_embedders()
        result = plausibility_score(
            [good_a, BrokenEmbedder(), good_b],
            _artifact("shared words here"),
            _artifact("shared words there"),
        )
        assert set(result.per_embedder) == {"mock-bow-a", "mock-bow-b"}
        assert "broken" in result.errors
        assert "offline" in result.errors["broken"]

    def test_requires_embedders(self):
        with pytest.raises(InvalidInputError):
            plausibility_score([], _artifact("a"), _artifact("b"))

    @settings(max_examples=60, deadline=None)
    @given(
        base_a=st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=6),
        base_b=st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=6),
        shared=st.lists(st.sampled_from("pqrstuvw"), min_size=1, max_size=4),
    )
    def test_adding_shared_tokens_never_decreases_reported(
        self, base_a, base_b, shared
    ):
        embedder = HashedBagEmbedder(dim=512)
        text_a = " ".join(base_a)
        text_b = " ".join(base_b)
        extended_a = text_a + " " + " ".join(shared)
        extended_b = text_b + " " + " ".join(shared)
        before = plausibility_score(
            [embedder], _artifact(text_a), _artifact(text_b)
        ).per_embedder[embedder.id].reported
        after = plausibility_score(
            [embedder], _artifact(extended_a), _artifact(extended_b)
        ).per_embedder[embedder.id].reported
        assert after >= before - 1e-12
