"""Clip materialization: cut fragments from a source video, or synthesize a
2-fps slideshow from stored keyframes when no video file is available.

Clip digests are a pure function of (video content digest, fragment indices,
policy) — not of the encoded bytes — so caching by digest is stable across
encoder versions. Each clip file gets a ``.digest`` sidecar.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import cv2
import numpy as np

from ._digest import digest_array, digest_bytes, digest_file, digest_json
from .errors import ClipUnavailableError, InvalidInputError
from .model import FeatureBundle

ORIGINAL_VIDEO = "original_video"
KEYFRAME_SLIDESHOW = "keyframe_slideshow"
SOURCE_POLICIES = (ORIGINAL_VIDEO, KEYFRAME_SLIDESHOW)

SLIDESHOW_FPS = 2.0


@dataclass(frozen=True)
class ClipHandle:
    """A materialized clip file plus its provenance."""

    video_id: str
    digest: str
    path: Path | None
    policy: str
    fragment_indices: tuple[int, ...]
    frame_digests: tuple[str, ...]
    fps: float
    lower_fidelity: bool = False

    @property
    def frame_count(self) -> int:
        return len(self.frame_digests)


@runtime_checkable
class FrameStore(Protocol):
    """Keyframe source for slideshow clips."""

    def get_frame(self, video_id: str, sampled_index: int) -> np.ndarray: ...


class SyntheticFrameStore:
    """Deterministic pseudo-keyframes; lets feature-only fixtures make clips."""

    def __init__(self, size: int = 32):
        self.size = size

    def get_frame(self, video_id: str, sampled_index: int) -> np.ndarray:
        seed = int(digest_bytes(f"{video_id}|{sampled_index}".encode())[:16], 16)
        rng = np.random.default_rng(seed)
        return rng.integers(0, 256, (self.size, self.size, 3), dtype=np.uint8)


class DirectoryFrameStore:
    """Keyframes stored as ``<root>/<video_id>/<sampled_index>.png``."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def get_frame(self, video_id: str, sampled_index: int) -> np.ndarray:
        path = self.root / video_id / f"{sampled_index:06d}.png"
        if not path.exists():
            raise ClipUnavailableError(f"no stored keyframe at {path}")
        frame = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if frame is None:
            raise ClipUnavailableError(f"unreadable keyframe {path}")
        return frame


@lru_cache(maxsize=64)
def _video_file_digest(path: str, mtime_ns: int) -> str:
    return digest_file(path)


def clip_digest(content_digest: str, fragment_indices: Sequence[int], policy: str) -> str:
    return digest_json(
        {
            "content": content_digest,
            "fragments": sorted(int(i) for i in fragment_indices),
            "policy": policy,
        }
    )


class ClipExtractor:
    """Writes clip files under one directory, reusing files per digest."""

    def __init__(
        self,
        clips_dir: Path,
        frame_store: FrameStore | None = None,
        slideshow_fps: float = SLIDESHOW_FPS,
    ):
        self.clips_dir = Path(clips_dir)
        self.clips_dir.mkdir(parents=True, exist_ok=True)
        self.frame_store = frame_store
        self.slideshow_fps = slideshow_fps

    def default_policy(self, bundle: FeatureBundle) -> str:
        if bundle.source_path is not None and Path(bundle.source_path).exists():
            return ORIGINAL_VIDEO
        if self.frame_store is not None:
            return KEYFRAME_SLIDESHOW
        raise ClipUnavailableError(
            f"{bundle.video_id}: no source video and no frame store"
        )

    def extract(
        self,
        bundle: FeatureBundle,
        fragment_indices: Sequence[int],
        policy: str | None = None,
    ) -> ClipHandle:
        indices = sorted(int(i) for i in fragment_indices)
        if not indices:
            raise InvalidInputError("need at least one fragment index")
        if len(set(indices)) != len(indices):
            raise InvalidInputError("fragment indices must be distinct")
        if indices[0] < 0 or indices[-1] >= bundle.n_fragments:
            raise InvalidInputError(
                f"fragment indices {indices} out of range [0, {bundle.n_fragments})"
            )
        if policy is None:
            policy = self.default_policy(bundle)
        if policy not in SOURCE_POLICIES:
            raise InvalidInputError(f"unknown source policy {policy!r}")
        if policy == ORIGINAL_VIDEO:
            return self._extract_original(bundle, indices)
        return self._extract_slideshow(bundle, indices)

    def _clip_path(self, bundle: FeatureBundle, digest: str) -> Path:
        return self.clips_dir / f"{bundle.video_id}_{digest[:12]}.avi"

    def _write_clip(self, path: Path, frames: list[np.ndarray], fps: float) -> None:
        if path.exists():
            return
        height, width = frames[0].shape[:2]
        tmp = path.with_suffix(".tmp.avi")
        writer = cv2.VideoWriter(
            str(tmp), cv2.VideoWriter_fourcc(*"MJPG"), fps, (width, height)
        )
        if not writer.isOpened():
            raise ClipUnavailableError(f"cannot open video writer for {path}")
        try:
            for frame in frames:
                writer.write(frame)
        finally:
            writer.release()
        tmp.rename(path)

    def _sidecar(self, path: Path, digest: str) -> None:
        Path(str(path) + ".digest").write_text(digest + "\n", encoding="utf-8")

    def _extract_slideshow(self, bundle: FeatureBundle, indices: list[int]) -> ClipHandle:
        if self.frame_store is None:
            raise ClipUnavailableError(
                f"{bundle.video_id}: slideshow policy needs a frame store"
            )
        digest = clip_digest(bundle.content_digest, indices, KEYFRAME_SLIDESHOW)
        frames: list[np.ndarray] = []
        frame_digests: list[str] = []
        for frag in indices:
            start, end = bundle.fragments[frag]
            for sampled in range(start, end):
                frame = self.frame_store.get_frame(bundle.video_id, sampled)
                frames.append(frame)
                frame_digests.append(digest_array(frame))
        path = self._clip_path(bundle, digest)
        self._write_clip(path, frames, self.slideshow_fps)
        self._sidecar(path, digest)
        return ClipHandle(
            video_id=bundle.video_id,
            digest=digest,
            path=path,
            policy=KEYFRAME_SLIDESHOW,
            fragment_indices=tuple(indices),
            frame_digests=tuple(frame_digests),
            fps=self.slideshow_fps,
            lower_fidelity=True,
        )

    def _extract_original(self, bundle: FeatureBundle, indices: list[int]) -> ClipHandle:
        source = bundle.source_path
        if source is None or not Path(source).exists():
            raise ClipUnavailableError(f"{bundle.video_id}: source video unavailable")
        source = Path(source)
        content = _video_file_digest(str(source), source.stat().st_mtime_ns)
        digest = clip_digest(content, indices, ORIGINAL_VIDEO)
        capture = cv2.VideoCapture(str(source))
        if not capture.isOpened():
            raise ClipUnavailableError(f"cannot open {source}")
        frames: list[np.ndarray] = []
        frame_digests: list[str] = []
        try:
            for frag in indices:
                start, end = bundle.fragments[frag]
                first = int(bundle.picks[start])
                last = int(bundle.picks[end - 1])
                capture.set(cv2.CAP_PROP_POS_FRAMES, first)
                for _ in range(first, last + 1):
                    ok, frame = capture.read()
                    if not ok:
                        raise ClipUnavailableError(
                            f"{source}: decode failed near frame {first}"
                        )
                    frames.append(frame)
                    frame_digests.append(digest_array(frame))
        finally:
            capture.release()
        path = self._clip_path(bundle, digest)
        self._write_clip(path, frames, bundle.fps_original)
        self._sidecar(path, digest)
        return ClipHandle(
            video_id=bundle.video_id,
            digest=digest,
            path=path,
            policy=ORIGINAL_VIDEO,
            fragment_indices=tuple(indices),
            frame_digests=tuple(frame_digests),
            fps=bundle.fps_original,
            lower_fidelity=False,
        )
