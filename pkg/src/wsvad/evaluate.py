"""Frame-level inference and evaluation.

Test videos keep their native snippet count (no temporal resizing); snippet
scores are unfolded to frame length by repeating each score snippet_len
times, padding any remainder with the final score. The report's primary
metrics are computed on the continuous unfolded scores; rounded binary
scores are kept as the detection artifact and scored separately.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .features import DatasetManifest, VideoRecord, load_records
from .metrics import auc_pr, auc_roc
from .model import Model, score_bag

BINARY_THRESHOLD = 0.5


@dataclass
class ScoreTimeline:
    """Per-snippet and per-frame anomaly scores for one video."""

    video_id: str
    snippet_scores: np.ndarray  # (T_k,) in (0, 1)
    snippet_binary: np.ndarray  # (T_k,) in {0, 1}
    frame_scores: np.ndarray  # (N,) continuous
    frame_binary: np.ndarray  # (N,) in {0, 1}


@dataclass
class EvalReport:
    auc_roc: float
    auc_pr: float
    auc_roc_binary: float
    num_videos: int
    num_frames: int
    positive_frames: int
    eval_seed: int
    pr_convention: str
    config: dict
    per_video: list[dict]
    wall_clock_sec: float = field(default=0.0, repr=False)

    def to_json(self) -> str:
        """Deterministic serialization; timing is deliberately excluded so
        identical runs produce identical bytes."""
        doc = {
            "auc_roc": self.auc_roc,
            "auc_pr": self.auc_pr,
            "auc_roc_binary": self.auc_roc_binary,
            "num_videos": self.num_videos,
            "num_frames": self.num_frames,
            "positive_frames": self.positive_frames,
            "eval_seed": self.eval_seed,
            "pr_convention": self.pr_convention,
            "config": self.config,
            "per_video": self.per_video,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def unfold_scores(values: np.ndarray, snippet_len: int, frame_count: int) -> np.ndarray:
    """Expand per-snippet values to per-frame values.

    Each value repeats snippet_len times in order; if that overshoots the
    frame count the tail is truncated, and if it falls short the remainder
    is padded with the final value.
    """
    v = np.asarray(values).ravel()
    if v.size < 1:
        raise ValueError("no snippet scores to unfold")
    if snippet_len < 1 or frame_count < 1:
        raise ValueError("snippet_len and frame_count must be positive")
    if frame_count < snippet_len * (v.size - 1):
        raise ValueError(
            f"inconsistent unfold: {v.size} snippets of {snippet_len} frames "
            f"cannot map onto {frame_count} frames"
        )
    out = np.repeat(v, snippet_len)[:frame_count]
    if out.size < frame_count:
        out = np.concatenate([out, np.full(frame_count - out.size, v[-1], dtype=v.dtype)])
    return out


def infer_video(
    record: VideoRecord, model: Model, rng: np.random.Generator
) -> ScoreTimeline:
    """Score one video at its native snippet count (dropout off)."""
    if record.features.shape[1] != model.d:
        raise ValueError(
            f"video '{record.video_id}' has width {record.features.shape[1]}, "
            f"checkpoint expects {model.d}"
        )
    with ag.no_grad():
        scores, _, _ = score_bag(model, Tensor(record.features), train=False, tsa_rng=rng)
    snippet = scores.data.reshape(-1).astype(np.float64)
    binary = (snippet >= BINARY_THRESHOLD).astype(np.uint8)
    return ScoreTimeline(
        video_id=record.video_id,
        snippet_scores=snippet,
        snippet_binary=binary,
        frame_scores=unfold_scores(snippet, record.snippet_len, record.frame_count),
        frame_binary=unfold_scores(binary, record.snippet_len, record.frame_count),
    )


def frame_labels(frame_count: int, intervals: list[tuple[int, int]]) -> np.ndarray:
    """Binary frame mask from [start, end) abnormal intervals."""
    mask = np.zeros(frame_count, dtype=np.uint8)
    for start, end in intervals:
        if not 0 <= start <= end <= frame_count:
            raise ValueError(f"interval [{start}, {end}) outside 0..{frame_count}")
        mask[start:end] = 1
    return mask


def evaluate_manifest(
    manifest: DatasetManifest,
    base_dir: str | Path,
    model: Model,
    ground_truth: dict[str, list[tuple[int, int]]],
    eval_seed: int = 0,
) -> tuple[EvalReport, list[ScoreTimeline], np.ndarray]:
    """Score every video in manifest order and compute frame-level metrics.

    Returns the report, all timelines, and the concatenated frame labels.
    """
    started = time.perf_counter()
    records = load_records(manifest, base_dir)
    timelines: list[ScoreTimeline] = []
    all_scores, all_binary, all_labels = [], [], []
    per_video: list[dict] = []
    for idx, rec in enumerate(records):
        rng = np.random.default_rng(np.random.SeedSequence((eval_seed, idx)))
        tl = infer_video(rec, model, rng)
        labels = frame_labels(rec.frame_count, ground_truth.get(rec.video_id, []))
        timelines.append(tl)
        all_scores.append(tl.frame_scores)
        all_binary.append(tl.frame_binary)
        all_labels.append(labels)
        per_video.append(
            {
                "id": rec.video_id,
                "label": rec.label,
                "frames": rec.frame_count,
                "mean_score": float(tl.frame_scores.mean()),
                "max_score": float(tl.frame_scores.max()),
            }
        )
    scores = np.concatenate(all_scores)
    binary = np.concatenate(all_binary)
    labels = np.concatenate(all_labels)
    report = EvalReport(
        auc_roc=auc_roc(scores, labels),
        auc_pr=auc_pr(scores, labels),
        auc_roc_binary=auc_roc(binary, labels),
        num_videos=len(records),
        num_frames=int(labels.size),
        positive_frames=int(labels.sum()),
        eval_seed=eval_seed,
        pr_convention="average_precision",
        config={
            "tsa_enabled": model.tsa_enabled,
            "num_samples": model.tsa.num_samples,
            "ratio": model.tsa.ratio,
            "sigma_noise": model.tsa.sigma_noise,
            "d": model.d,
        },
        per_video=per_video,
        wall_clock_sec=time.perf_counter() - started,
    )
    return report, timelines, labels


def write_frame_csv(
    path: str | Path,
    timelines: list[ScoreTimeline],
    ground_truth: dict[str, list[tuple[int, int]]],
) -> None:
    """Per-frame scores as CSV: video_id, frame_idx, score, binary, label."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "frame_idx", "score", "binary", "label"])
        for tl in timelines:
            labels = frame_labels(tl.frame_scores.size, ground_truth.get(tl.video_id, []))
            for i in range(tl.frame_scores.size):
                writer.writerow(
                    [tl.video_id, i, repr(float(tl.frame_scores[i])), int(tl.frame_binary[i]), int(labels[i])]
                )
