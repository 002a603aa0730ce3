"""Record formats, pose ingestion and pipeline configuration.

Stores are JSON Lines. Floats are written with Python's shortest round-trip
``repr`` so reading a file back reproduces every value bit for bit.
"""
from __future__ import annotations

import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .augment import AugmentConfig
from .errors import ConfigError, EmptyInput, ParseError
from .model import ModelConfig
from .quality import FilterConfig, Verdict
from .skeleton import NUM_JOINTS, Tracklet
from .tracking import Detection, TrackerConfig
from .train import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


# ----------------------------------------------------------------------------
# tracklet records


def tracklet_to_record(t: Tracklet) -> dict:
    rec = {
        "track_id": int(t.track_id),
        "camera": t.camera,
        "fps": float(t.fps),
        "start_frame": int(t.start_frame),
        "frames": t.frames.tolist(),
    }
    if t.label is not None:
        rec["label"] = int(t.label)
    if t.run is not None:
        rec["run"] = int(t.run)
    return rec


def record_to_tracklet(rec: dict) -> Tracklet:
    frames = np.asarray(rec["frames"], dtype=np.float64)
    return Tracklet(
        track_id=int(rec["track_id"]),
        frames=frames,
        fps=float(rec["fps"]),
        camera=str(rec.get("camera", "cam0")),
        start_frame=int(rec.get("start_frame", 0)),
        label=rec.get("label"),
        run=rec.get("run"),
    )


def dumps_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_line(rec))
            fh.write("\n")


def read_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc.msg}", line=lineno, offset=exc.colno) from None


def write_tracklets(path, tracklets: Iterable[Tracklet]) -> None:
    write_jsonl(path, (tracklet_to_record(t) for t in tracklets))


def read_tracklets(path) -> list[Tracklet]:
    out = []
    for i, rec in enumerate(read_jsonl(path), 1):
        try:
            out.append(record_to_tracklet(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad tracklet record ({exc})", line=i) from None
    return out


def verdict_to_record(v: Verdict) -> dict:
    rec = {"track_id": int(v.track_id), "passed": bool(v.passed), "reason": v.reason.value}
    if v.leg_velocity is not None:
        rec["leg_velocity"] = float(v.leg_velocity)
    return rec


def embedding_records(table) -> Iterator[dict]:
    for tid, label, run, vec in zip(table.track_ids, table.labels, table.runs, table.vectors):
        rec = {"track_id": int(tid), "label": int(label)}
        if run is not None:
            rec["run"] = int(run)
        rec["embedding"] = [float(v) for v in vec]
        yield rec


def read_embeddings(path):
    """Returns ``(track_ids, labels, vectors)``."""
    ids, labels, vecs = [], [], []
    for i, rec in enumerate(read_jsonl(path), 1):
        try:
            ids.append(int(rec["track_id"]))
            labels.append(int(rec["label"]))
            vecs.append([float(v) for v in rec["embedding"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad embedding record ({exc})", line=i) from None
    arr = np.asarray(vecs, dtype=np.float64) if vecs else np.zeros((0, 0))
    return ids, labels, arr


# ----------------------------------------------------------------------------
# pose ingestion


@dataclass
class IngestResult:
    frames: list[tuple[int, list[Detection]]]
    image_ids: list[str]
    accepted: int
    skipped: int
    skipped_reasons: list[str] = field(default_factory=list)


_CHUNKS = re.compile(r"(\d+)")


def natural_key(s: str):
    """Text chunks compare lexicographically, digit runs numerically."""
    return tuple((0, int(c), "") if c.isdigit() else (1, 0, c) for c in _CHUNKS.split(s) if c != "")


def _frame_number(image_id: str) -> int | None:
    nums = re.findall(r"\d+", image_id)
    return int(nums[-1]) if nums else None


def _validate_pose(rec) -> np.ndarray:
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    if "image_id" not in rec:
        raise ValueError("missing image_id")
    kp = rec.get("keypoints")
    if not isinstance(kp, list) or len(kp) != 3 * NUM_JOINTS:
        n = len(kp) if isinstance(kp, list) else "no"
        raise ValueError(f"expected {3 * NUM_JOINTS} keypoint numbers, got {n}")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in kp):
        raise ValueError("non-numeric keypoint value")
    arr = np.asarray(kp, dtype=np.float64).reshape(NUM_JOINTS, 3)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite keypoint value")
    if np.any(arr[:, 2] < 0) or np.any(arr[:, 2] > 1):
        raise ValueError("confidence outside [0, 1]")
    return arr


def parse_poses(text: str, source: str = "<poses>") -> IngestResult:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc.msg}", line=exc.lineno, offset=exc.colno) from None
    if not isinstance(data, list):
        raise ParseError(f"{source}: expected a JSON array of pose records", line=1, offset=1)
    if not data:
        raise EmptyInput(f"{source}: no pose records")

    grouped: dict[str, list[np.ndarray]] = {}
    skipped, reasons = 0, []
    for i, rec in enumerate(data):
        try:
            skel = _validate_pose(rec)
        except ValueError as exc:
            skipped += 1
            reasons.append(f"record {i}: {exc}")
            continue
        grouped.setdefault(str(rec["image_id"]), []).append(skel)
    if not grouped:
        raise EmptyInput(f"{source}: every record was malformed ({skipped} skipped)")

    image_ids = sorted(grouped, key=lambda s: (natural_key(s), s))
    numbers = [_frame_number(s) for s in image_ids]
    use_numbers = all(n is not None for n in numbers) and all(a < b for a, b in zip(numbers, numbers[1:]))
    frames = []
    for rank, image_id in enumerate(image_ids):
        idx = numbers[rank] if use_numbers else rank
        dets = [Detection(idx, s) for s in grouped[image_id]]
        frames.append((idx, dets))
    accepted = sum(len(v) for v in grouped.values())
    return IngestResult(frames, image_ids, accepted, skipped, reasons)


def ingest(pose_file) -> IngestResult:
    """Group AlphaPose/COCO-style records into per-frame detection lists.

    Frames are ordered by a natural sort of ``image_id``; the frame index is
    the trailing integer in the id when those are strictly increasing,
    otherwise the sorted position.
    """
    return parse_poses(Path(pose_file).read_text(encoding="utf-8"), str(pose_file))


# ----------------------------------------------------------------------------
# pipeline configuration (TOML)


@dataclass
class PipelineConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


_SECTIONS = {f.name: f.default_factory for f in fields(PipelineConfig)}


def config_from_dict(doc: dict) -> PipelineConfig:
    parts = {}
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section [{key}]")
    for name, factory in _SECTIONS.items():
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        default = factory()
        known = {f.name for f in fields(default)}
        unknown = sorted(set(section) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
        try:
            parts[name] = type(default)(**{**asdict(default), **section})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}]: {exc}") from None
    return PipelineConfig(**parts)


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ConfigError("non-finite config value")
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {v!r}")


def config_to_toml(cfg: PipelineConfig) -> str:
    lines = []
    for name in _SECTIONS:
        lines.append(f"[{name}]")
        for key, value in asdict(getattr(cfg, name)).items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
