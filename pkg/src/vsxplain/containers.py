"""Feature-container ingestion.

Containers follow the HDF5 layout of the public video-summarization feature
releases: one group per video holding ``features`` (n x D), ``change_points``
(F x 2), ``picks`` (n) and ``n_frames`` (scalar), with optional ``fps`` and
``video_name``. Some releases store change points as inclusive ranges; the
loader detects that and normalizes to half-open, recording the normalization
in the bundle metadata.
"""

from __future__ import annotations

from pathlib import Path

import h5py
import numpy as np

from .errors import MalformedContainerError
from .model import FeatureBundle, validate_bundle

REQUIRED_DATASETS = ("features", "change_points", "picks", "n_frames")

DEFAULT_FPS = 30.0

_VIDEO_EXTENSIONS = (".mp4", ".avi", ".mkv", ".mkv", ".webm", ".mov")


def list_videos(container_path: Path) -> list[str]:
    with h5py.File(container_path, "r") as fh:
        return sorted(fh.keys())


def _normalize_change_points(
    cps: np.ndarray, n_sampled: int
) -> tuple[tuple[tuple[int, int], ...], str]:
    if cps.ndim != 2 or cps.shape[1] != 2 or cps.shape[0] < 1:
        raise MalformedContainerError(f"change_points must be F x 2, got {cps.shape}")
    cps = cps.astype(np.int64)
    last_end = int(cps[-1, 1])
    if last_end == n_sampled:
        fragments = tuple((int(s), int(e)) for s, e in cps)
        return fragments, "half_open"
    if last_end == n_sampled - 1:
        fragments = tuple((int(s), int(e) + 1) for s, e in cps)
        return fragments, "inclusive"
    raise MalformedContainerError(
        f"change_points end at {last_end} but there are {n_sampled} sampled frames"
    )


def _find_source_video(videos_dir: Path | None, names: list[str]) -> Path | None:
    if videos_dir is None:
        return None
    videos_dir = Path(videos_dir)
    for name in names:
        if not name:
            continue
        candidate = videos_dir / name
        if candidate.suffix and candidate.exists():
            return candidate
        for ext in _VIDEO_EXTENSIONS:
            candidate = videos_dir / f"{name}{ext}"
            if candidate.exists():
                return candidate
    return None


def load_bundle(
    container_path: Path,
    video_key: str,
    *,
    videos_dir: Path | None = None,
    default_fps: float = DEFAULT_FPS,
) -> FeatureBundle:
    """Read one video's bundle from a container and validate it."""
    container_path = Path(container_path)
    if not container_path.exists():
        raise MalformedContainerError(f"container not found: {container_path}")
    with h5py.File(container_path, "r") as fh:
        if video_key not in fh:
            raise MalformedContainerError(
                f"video key {video_key!r} not in {container_path.name}"
            )
        group = fh[video_key]
        for name in REQUIRED_DATASETS:
            if name not in group:
                raise MalformedContainerError(
                    f"{video_key}: container missing dataset {name!r}"
                )
        features = np.asarray(group["features"])
        picks = np.asarray(group["picks"]).ravel()
        cps = np.asarray(group["change_points"])
        n_frames_original = int(np.asarray(group["n_frames"]).ravel()[0])
        if features.ndim != 2:
            raise MalformedContainerError(
                f"{video_key}: features must be 2-D, got shape {features.shape}"
            )
        n_sampled = features.shape[0]
        if picks.size != n_sampled:
            raise MalformedContainerError(
                f"{video_key}: picks length {picks.size} != feature rows {n_sampled}"
            )
        fragments, cp_format = _normalize_change_points(cps, n_sampled)
        metadata = {
            "container": str(container_path),
            "container_video_key": video_key,
            "change_points_format": cp_format,
            "n_frames_original": str(n_frames_original),
        }
        if "fps" in group:
            fps = float(np.asarray(group["fps"]).ravel()[0])
            metadata["fps_source"] = "container"
        else:
            fps = float(default_fps)
            metadata["fps_source"] = "default"
        names = [video_key]
        if "video_name" in group:
            raw = np.asarray(group["video_name"]).ravel()[0]
            name = raw.decode("utf-8") if isinstance(raw, bytes) else str(raw)
            metadata["video_name"] = name
            names.insert(0, name)
        source_path = _find_source_video(videos_dir, names)

    bundle = FeatureBundle(
        video_id=video_key,
        features=features,
        fragments=fragments,
        picks=picks,
        fps_original=fps,
        source_path=source_path,
        metadata=metadata,
    )
    return validate_bundle(bundle)
