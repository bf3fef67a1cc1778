"""
File Schemas

Pydantic models describing the on-disk JSON formats. They check structure
and types only; domain invariants are enforced by the dataclass models once
the payload has been converted. Unknown fields are ignored.
"""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class _Record(BaseModel):
    model_config = ConfigDict(extra="ignore")


class RoomRecord(_Record):
    id: str
    vertices: List[Tuple[float, float]]


class PanoRecord(_Record):
    id: str
    room_id: str
    position: Tuple[float, float]
    yaw_rad: float
    height_m: float


class SceneFile(_Record):
    """`.scene.json`"""
    version: int = Field(..., ge=1)
    rooms: List[RoomRecord]
    panos: List[PanoRecord]
    clusters: List[List[str]] = Field(default_factory=list)


class CueFile(_Record):
    """`.cues.json`; masked correspondences are null."""
    src: str
    dst: str
    width: int = Field(..., ge=1)
    phi: List[float]
    alpha: List[Optional[float]]
    covis: List[float]


class RelPoseRecord(_Record):
    theta: float
    t: Tuple[float, float]


class EdgeRecord(_Record):
    src: str
    dst: str
    rel: RelPoseRecord
    covis: float = Field(..., ge=0.0, le=1.0)


class GraphFile(_Record):
    """`.graph.json`"""
    nodes: List[str]
    origin: str
    edges: List[EdgeRecord]


class SolutionFile(_Record):
    """`.poses.json`"""
    origin: str
    poses: Dict[str, RelPoseRecord]
    diagnostics: Dict = Field(default_factory=dict)
