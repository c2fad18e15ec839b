"""Seeded synthetic datasets with planted contiguous anomalies.

Normal snippets are isotropic Gaussian around zero; abnormal videos carry a
contiguous block of snippets whose mean is shifted along one fixed unit
direction. Frame-level ground truth for the test split is written as
[start, end) intervals so detections can be scored per frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .features import (
    MANIFEST_VERSION,
    DatasetManifest,
    ManifestEntry,
    save_features,
    save_manifest,
)

GROUND_TRUTH_FILENAME = "ground_truth.json"


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator knobs. Counts apply to each split independently.

    The default anomaly_shift of 3.6 puts roughly 1.5 standard deviations
    between the snippet-magnitude distributions of the two classes at
    d=32, noise_std=1 (magnitude is the anomaly statistic the trainer
    ranks by); the per-dimension projection is then 3.6 noise units.
    """

    n_normal: int = 100
    n_abnormal: int = 100
    d: int = 32
    snippet_len: int = 16
    frame_range: tuple[int, int] = (128, 512)
    eps_range: tuple[int, int] = (2, 5)  # planted abnormal snippets per video
    anomaly_shift: float = 3.6
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_normal < 1 or self.n_abnormal < 1:
            raise ValueError("each split needs at least one normal and one abnormal video")
        if self.d < 1 or self.snippet_len < 1:
            raise ValueError("d and snippet_len must be positive")
        lo, hi = self.frame_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad frame_range {self.frame_range}")
        elo, ehi = self.eps_range
        if not 1 <= elo <= ehi:
            raise ValueError(f"bad eps_range {self.eps_range}")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if self.anomaly_shift < 0:
            raise ValueError("anomaly_shift must be non-negative")
        # anomalies are planted on whole snippets, so the shortest video must
        # fit eps_range[1] complete snippets
        if lo // self.snippet_len < ehi:
            raise ValueError(
                f"eps_range {self.eps_range} cannot fit: {lo} frames give only "
                f"{lo // self.snippet_len} complete snippets of length {self.snippet_len}"
            )


def generate_synthetic(
    cfg: SyntheticConfig, out_dir: str | Path
) -> tuple[DatasetManifest, DatasetManifest]:
    """Write train/ and test/ splits under ``out_dir``; returns both manifests."""
    out = Path(out_dir)
    root = np.random.SeedSequence(cfg.seed)
    dir_seq, train_seq, test_seq = root.spawn(3)

    direction = np.random.default_rng(dir_seq).standard_normal(cfg.d)
    norm = float(np.linalg.norm(direction))
    direction = (direction / norm if norm > 0 else np.eye(cfg.d)[0]).astype(np.float64)

    train = _generate_split(cfg, "train", direction, np.random.default_rng(train_seq), out / "train")
    test = _generate_split(cfg, "test", direction, np.random.default_rng(test_seq), out / "test")
    return train, test


def _generate_split(
    cfg: SyntheticConfig,
    split: str,
    direction: np.ndarray,
    rng: np.random.Generator,
    split_dir: Path,
) -> DatasetManifest:
    split_dir.mkdir(parents=True, exist_ok=True)
    entries: list[ManifestEntry] = []
    intervals: dict[str, list[list[int]]] = {}

    for i in range(cfg.n_normal):
        video_id = f"{split}_norm_{i:04d}"
        frames = int(rng.integers(cfg.frame_range[0], cfg.frame_range[1] + 1))
        feats = _normal_snippets(cfg, rng, frames)
        entries.append(_write_video(split_dir, video_id, feats, 0, frames))
        intervals[video_id] = []

    for i in range(cfg.n_abnormal):
        video_id = f"{split}_anom_{i:04d}"
        frames = int(rng.integers(cfg.frame_range[0], cfg.frame_range[1] + 1))
        eps = int(rng.integers(cfg.eps_range[0], cfg.eps_range[1] + 1))
        whole = frames // cfg.snippet_len
        if eps > whole:
            raise ValueError(
                f"{video_id}: {eps} abnormal snippets do not fit {whole} complete snippets"
            )
        start = int(rng.integers(0, whole - eps + 1))
        feats = _normal_snippets(cfg, rng, frames)
        feats[start : start + eps] += (cfg.anomaly_shift * direction).astype(np.float32)
        entries.append(_write_video(split_dir, video_id, feats, 1, frames))
        intervals[video_id] = [
            [start * cfg.snippet_len, (start + eps) * cfg.snippet_len]
        ]

    manifest = DatasetManifest(
        version=MANIFEST_VERSION,
        d=cfg.d,
        snippet_len=cfg.snippet_len,
        split=split,
        videos=entries,
    )
    save_manifest(manifest, split_dir / "manifest.json")
    if split == "test":
        with open(split_dir / GROUND_TRUTH_FILENAME, "w", encoding="utf-8") as fh:
            json.dump(intervals, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return manifest


def _normal_snippets(cfg: SyntheticConfig, rng: np.random.Generator, frames: int) -> np.ndarray:
    t_k = math.ceil(frames / cfg.snippet_len)
    return rng.normal(0.0, cfg.noise_std, size=(t_k, cfg.d)).astype(np.float32)


def _write_video(
    split_dir: Path, video_id: str, feats: np.ndarray, label: int, frames: int
) -> ManifestEntry:
    path = f"{video_id}.vadf"
    save_features(feats, split_dir / path)
    return ManifestEntry(video_id=video_id, path=path, label=label, frame_count=frames)


def load_ground_truth(path: str | Path) -> dict[str, list[tuple[int, int]]]:
    """Read the per-video [start, end) abnormal frame intervals."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return {vid: [(int(a), int(b)) for a, b in spans] for vid, spans in doc.items()}


def harder_config(cfg: SyntheticConfig | None = None) -> SyntheticConfig:
    """A lower-contrast variant used for the attention on/off comparison:
    weaker shift, fewer training videos, and longer videos so anomalies
    occupy a smaller fraction of each bag."""
    base = cfg or SyntheticConfig()
    return replace(
        base,
        anomaly_shift=base.anomaly_shift * 0.6,
        n_normal=50,
        n_abnormal=50,
        frame_range=(256, 768),
    )
