"""Snippet-feature containers, the on-disk formats, and temporal resizing.

Feature file layout (little-endian): magic ``VADF`` | format version u32 |
snippet count u32 | feature width u32 | count*width IEEE-754 float32,
row-major. A dataset split is described by a JSON manifest listing video
ids, relative feature paths, video-level labels, and frame counts.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"VADF"
FEATURE_VERSION = 1
MANIFEST_VERSION = 1

_HEADER = struct.Struct("<4sIII")
_MAX_DIM = 2**32 - 1


class FormatError(ValueError):
    """A feature file or manifest does not match the documented layout."""


@dataclass
class VideoRecord:
    """One video's snippet features plus its weak label."""

    video_id: str
    label: int
    frame_count: int
    snippet_len: int
    features: np.ndarray  # (T_k, d) float32

    def __post_init__(self) -> None:
        expected = math.ceil(self.frame_count / self.snippet_len)
        if self.features.shape[0] != expected:
            raise FormatError(
                f"video '{self.video_id}': {self.features.shape[0]} snippets but "
                f"{self.frame_count} frames at snippet length {self.snippet_len} "
                f"imply {expected}"
            )

    @property
    def num_snippets(self) -> int:
        return self.features.shape[0]


@dataclass
class ManifestEntry:
    video_id: str
    path: str
    label: int
    frame_count: int


@dataclass
class DatasetManifest:
    version: int
    d: int
    snippet_len: int
    split: str
    videos: list[ManifestEntry]

    def by_label(self, label: int) -> list[ManifestEntry]:
        return [v for v in self.videos if v.label == label]


def save_features(features: np.ndarray, path: str | Path) -> None:
    """Write a (T_k, d) float32 matrix in the binary feature layout."""
    arr = np.ascontiguousarray(features, dtype=np.float32)
    if arr.ndim != 2:
        raise FormatError(f"features must be 2-d, got shape {arr.shape}")
    t_k, d = arr.shape
    if t_k > _MAX_DIM or d > _MAX_DIM:
        raise FormatError(f"dimensions {arr.shape} overflow the u32 header")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, t_k, d))
        fh.write(arr.astype("<f4").tobytes())


def load_features(path: str | Path) -> np.ndarray:
    """Read a feature file back into a (T_k, d) float32 matrix."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, t_k, d = _HEADER.unpack(head)
        if magic != FEATURE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FEATURE_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        payload = fh.read()
    expected = t_k * d * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(t_k, d).astype(np.float32)


def temporal_normalize(features: np.ndarray, t_out: int) -> np.ndarray:
    """Resize a (T_k, d) snippet sequence to exactly ``t_out`` rows.

    Rows are averaged over contiguous non-overlapping chunks when shrinking
    (row i covers input rows [floor(T_k*i/t_out), floor(T_k*(i+1)/t_out))),
    and repeated by nearest lower index when growing. The T_k == t_out case
    returns the input unchanged.
    """
    feats = np.asarray(features)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError(f"expected a non-empty (T_k, d) matrix, got shape {feats.shape}")
    if t_out < 1:
        raise ValueError(f"target length must be positive, got {t_out}")
    t_in = feats.shape[0]
    if t_in == t_out:
        return feats.astype(np.float32, copy=True)
    wide = feats.astype(np.float64)
    out = np.empty((t_out, feats.shape[1]), dtype=np.float32)
    for i in range(t_out):
        lo = (t_in * i) // t_out
        hi = (t_in * (i + 1)) // t_out
        if hi <= lo:
            hi = lo + 1
        out[i] = wide[lo:hi].mean(axis=0)
    return out


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {
        "version": manifest.version,
        "d": manifest.d,
        "snippet_len": manifest.snippet_len,
        "split": manifest.split,
        "videos": [
            {
                "id": v.video_id,
                "path": v.path,
                "label": v.label,
                "frame_count": v.frame_count,
            }
            for v in manifest.videos
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        videos = [
            ManifestEntry(v["id"], v["path"], int(v["label"]), int(v["frame_count"]))
            for v in doc["videos"]
        ]
        manifest = DatasetManifest(
            version=int(doc["version"]),
            d=int(doc["d"]),
            snippet_len=int(doc["snippet_len"]),
            split=str(doc["split"]),
            videos=videos,
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: missing or malformed manifest field ({exc})") from exc
    for v in manifest.videos:
        if v.label not in (0, 1):
            raise FormatError(f"{path}: video '{v.video_id}' has non-binary label {v.label}")
    return manifest


def load_records(manifest: DatasetManifest, base_dir: str | Path) -> list[VideoRecord]:
    """Load every referenced feature file, enforcing header consistency."""
    base = Path(base_dir)
    records = []
    for entry in manifest.videos:
        feats = load_features(base / entry.path)
        if feats.shape[1] != manifest.d:
            raise FormatError(
                f"video '{entry.video_id}': feature width {feats.shape[1]} != manifest d {manifest.d}"
            )
        records.append(
            VideoRecord(
                video_id=entry.video_id,
                label=entry.label,
                frame_count=entry.frame_count,
                snippet_len=manifest.snippet_len,
                features=feats,
            )
        )
    return records


def require_both_classes(manifest: DatasetManifest) -> None:
    """Weak supervision needs at least one normal and one abnormal video."""
    if not manifest.by_label(0) or not manifest.by_label(1):
        raise ValueError(
            f"{manifest.split} split needs both normal and abnormal videos "
            f"({len(manifest.by_label(0))} normal, {len(manifest.by_label(1))} abnormal)"
        )
