"""
PanoGraph Storage

Reading and writing of every on-disk format:

- `.scene.json`   scenes
- `.cues.json`    one CueSet per file (masked correspondences as null)
- `.cues.bin`     flat binary CueSet: magic PGCV, u32 version, u32 W, then
                  phi, alpha (masked as 4.0) and covis as little-endian float64
- `.graph.json`   pose graphs

Writes are atomic (temporary file in the target directory, then rename).
Malformed input raises ParseError; structurally valid input that breaks a
domain invariant raises ValidationError.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Dict, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from .cues import CueSet
from .errors import ParseError, ValidationError
from .graph_models import PoseGraph
from .models import Camera, Layout, Scene
from .schemas import CueFile, GraphFile, SceneFile

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)

CUE_MAGIC = b"PGCV"
CUE_VERSION = 1
_CUE_HEADER = struct.Struct("<4sII")


# ============================================================================
# Primitives
# ============================================================================

def atomic_write(path: PathLike, data: Union[str, bytes]) -> Path:
    """
    Write `data` to `path` through a temporary sibling and os.replace.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("Wrote %s (%d bytes)", target, len(payload))
    return target


def dumps(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(path: PathLike, data: Any) -> Path:
    return atomic_write(path, dumps(data))


def read_json_model(path: PathLike, model: Type[M]) -> M:
    """
    Parse a JSON file against a pydantic schema.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"Cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not UTF-8 text: {exc}") from exc
    try:
        return model.model_validate_json(raw)
    except PydanticValidationError as exc:
        raise ParseError(f"{path} does not match the {model.__name__} schema: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"Cannot decode {path}: {exc}") from exc


# ============================================================================
# Scenes
# ============================================================================

def scene_from_record(record: SceneFile) -> Scene:
    """Domain Scene from a parsed record; room and pano ids must be unique."""
    rooms: Dict[str, Layout] = {}
    for r in record.rooms:
        if r.id in rooms:
            raise ValidationError(f"Duplicate room id {r.id}")
        rooms[r.id] = Layout(tuple(r.vertices), room_id=r.id)
    panos: Dict[str, Camera] = {}
    for p in record.panos:
        if p.id in panos:
            raise ValidationError(f"Duplicate pano id {p.id}")
        panos[p.id] = Camera(position=p.position, yaw=p.yaw_rad, height=p.height_m, room_id=p.room_id)
    return Scene(rooms=rooms, panos=panos, clusters=tuple(tuple(c) for c in record.clusters))


def load_scene(path: PathLike) -> Scene:
    """
    Load and validate a `.scene.json` file.
    """
    scene = scene_from_record(read_json_model(path, SceneFile))
    logger.debug("Loaded scene %s: %d rooms, %d panos", path, len(scene.rooms), len(scene.panos))
    return scene


def save_scene(scene: Scene, path: PathLike) -> Path:
    return write_json(path, scene.to_dict())


# ============================================================================
# Cues
# ============================================================================

def save_cues(cue: CueSet, path: PathLike) -> Path:
    return write_json(path, cue.to_dict())


def load_cues(path: PathLike) -> CueSet:
    record = read_json_model(path, CueFile)
    return CueSet.from_dict(record.model_dump())


def encode_cues_binary(cue: CueSet) -> bytes:
    header = _CUE_HEADER.pack(CUE_MAGIC, CUE_VERSION, cue.width)
    body = np.concatenate([cue.phi, cue.alpha, cue.covis]).astype("<f8").tobytes()
    return header + body


def decode_cues_binary(data: bytes, src: str = "", dst: str = "") -> CueSet:
    """
    Inverse of encode_cues_binary. Pano ids are not stored in the binary form.
    """
    if len(data) < _CUE_HEADER.size:
        raise ParseError("Binary cue payload is shorter than its header")
    magic, version, width = _CUE_HEADER.unpack_from(data)
    if magic != CUE_MAGIC:
        raise ParseError(f"Bad binary cue magic {magic!r}")
    if version != CUE_VERSION:
        raise ParseError(f"Unsupported binary cue version {version}")
    expected = _CUE_HEADER.size + 3 * width * 8
    if len(data) != expected:
        raise ParseError(f"Binary cue payload has {len(data)} bytes, expected {expected}")
    rows = np.frombuffer(data, dtype="<f8", offset=_CUE_HEADER.size).reshape(3, width)
    return CueSet(src, dst, int(width), rows[0].copy(), rows[1].copy(), rows[2].copy())


def save_cues_binary(cue: CueSet, path: PathLike) -> Path:
    return atomic_write(path, encode_cues_binary(cue))


def load_cues_binary(path: PathLike, src: str = "", dst: str = "") -> CueSet:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"Cannot read {path}: {exc}") from exc
    try:
        return decode_cues_binary(data, src, dst)
    except ValueError as exc:
        raise ParseError(f"Cannot decode {path}: {exc}") from exc


# ============================================================================
# Graphs
# ============================================================================

def save_graph(graph: PoseGraph, path: PathLike) -> Path:
    return write_json(path, graph.to_dict())


def load_graph(path: PathLike) -> PoseGraph:
    record = read_json_model(path, GraphFile)
    data: Dict[str, Any] = record.model_dump()
    for edge in data["edges"]:
        edge["rel"]["t"] = list(edge["rel"]["t"])
    return PoseGraph.from_dict(data)
