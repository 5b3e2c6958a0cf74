"""Synthetic bundles and containers for tests and desk-scale demo runs.

Run ``python -m vsxplain.fixtures --out demo`` to materialize a small
container plus a ready-to-run mock config.
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Sequence

import h5py
import numpy as np
import yaml

from .model import FeatureBundle


def make_bundle(
    video_id: str = "fix-a",
    fragment_lengths: Sequence[int] = (5, 4, 6, 5, 5),
    feature_dim: int = 16,
    seed: int = 0,
    fps: float = 30.0,
    pick_stride: int = 15,
) -> FeatureBundle:
    """Random-feature bundle with the given fragment layout."""
    lengths = [int(x) for x in fragment_lengths]
    n = sum(lengths)
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, feature_dim))
    fragments = []
    start = 0
    for length in lengths:
        fragments.append((start, start + length))
        start += length
    picks = np.arange(n, dtype=np.int64) * pick_stride
    return FeatureBundle(
        video_id=video_id,
        features=features,
        fragments=tuple(fragments),
        picks=picks,
        fps_original=fps,
        metadata={"fixture": "synthetic"},
    )


def default_fixture_bundles(seed: int = 0) -> list[FeatureBundle]:
    """Three videos: two with 10 fragments, one with only 2."""
    return [
        make_bundle("fix-a", fragment_lengths=(5, 4, 6, 5, 5, 4, 6, 5, 5, 5), seed=seed),
        make_bundle("fix-b", fragment_lengths=(6, 5, 4, 5, 6, 5, 4, 5, 6, 4), seed=seed + 1),
        make_bundle("fix-c", fragment_lengths=(7, 6), seed=seed + 2),
    ]


def write_fixture_container(
    path: Path,
    bundles: Sequence[FeatureBundle],
    change_point_style: str = "half_open",
) -> Path:
    """HDF5 container in the public feature-release layout.

    ``change_point_style`` picks how segment ends are stored ("half_open" or
    "inclusive") to exercise the loader's normalization.
    """
    if change_point_style not in ("half_open", "inclusive"):
        raise ValueError(f"unknown change_point_style {change_point_style!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with h5py.File(path, "w") as fh:
        for bundle in bundles:
            group = fh.create_group(bundle.video_id)
            group.create_dataset("features", data=np.asarray(bundle.features, dtype=np.float32))
            cps = np.array(bundle.fragments, dtype=np.int64)
            if change_point_style == "inclusive":
                cps = cps.copy()
                cps[:, 1] -= 1
            group.create_dataset("change_points", data=cps)
            group.create_dataset("picks", data=np.asarray(bundle.picks, dtype=np.int64))
            n_original = int(bundle.picks[-1]) + 1
            group.create_dataset("n_frames", data=np.int64(n_original))
            group.create_dataset("fps", data=np.float64(bundle.fps_original))
    return path


def write_demo_tree(out_dir: Path, seed: int = 0) -> tuple[Path, Path]:
    """Container + mock-backend config for a runnable demo."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    container = write_fixture_container(
        out_dir / "fixture.h5", default_fixture_bundles(seed)
    )
    config = {
        "datasets": [{"dataset_id": "fixtures", "container": str(container)}],
        "output_dir": str(out_dir / "run"),
        "summarizer_id": "mock-planted",
        "captioner_id": "mock-captioner",
        "embedder_ids": ["mock-bow-a", "mock-bow-b"],
        "explainers": ["lime", "attention"],
        "ks": [1, 3],
        "approaches": ["approach1", "approach2"],
        "seed": seed,
        "replacement": "zeros",
        "frame_store": "synthetic",
        "explainer": {"M": 200},
    }
    config_path = out_dir / "config.yaml"
    config_path.write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    return container, config_path


def main(argv: Sequence[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="write a demo fixture tree")
    parser.add_argument("--out", type=Path, default=Path("demo"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    container, config = write_demo_tree(args.out, args.seed)
    print(f"container: {container}")
    print(f"config:    {config}")


if __name__ == "__main__":
    main()
