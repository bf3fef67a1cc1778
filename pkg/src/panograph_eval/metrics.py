"""
Error Statistics

Pools ATE/ARE over clusters into the mean / median / std rows reported per
(group size, connectivity, method). Rotation is reported in degrees,
translation in meters; std is the population std.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from panograph_core.errors import ValidationError

from .alignment import AlignedErrors


@dataclass(frozen=True)
class MetricSummary:
    group_size: int
    connectivity: str
    method: str
    rot_mean_deg: float
    rot_med_deg: float
    rot_std_deg: float
    tr_mean_m: float
    tr_med_m: float
    tr_std_m: float
    count: int = 0

    def to_dict(self) -> Dict:
        return {
            "group_size": self.group_size,
            "connectivity": self.connectivity,
            "method": self.method,
            "rot_mean_deg": self.rot_mean_deg,
            "rot_med_deg": self.rot_med_deg,
            "rot_std_deg": self.rot_std_deg,
            "tr_mean_m": self.tr_mean_m,
            "tr_med_m": self.tr_med_m,
            "tr_std_m": self.tr_std_m,
        }


def summarize(
    errors: Sequence[AlignedErrors],
    group_size: int,
    method: str,
    connectivity: str = "All",
    per_cluster: bool = False,
) -> MetricSummary:
    """
    Statistics over per-panorama errors, or over per-cluster means with `per_cluster`.
    """
    if not errors:
        raise ValidationError(f"No errors to summarize for {method} (size {group_size}, {connectivity})")
    if per_cluster:
        rot = np.array([float(np.mean(e.rotation)) for e in errors])
        tr = np.array([float(np.mean(e.translation)) for e in errors])
    else:
        rot = np.concatenate([e.rotation for e in errors])
        tr = np.concatenate([e.translation for e in errors])
    rot = np.degrees(rot)
    return MetricSummary(
        group_size=group_size,
        connectivity=connectivity,
        method=method,
        rot_mean_deg=float(np.mean(rot)),
        rot_med_deg=float(np.median(rot)),
        rot_std_deg=float(np.std(rot)),
        tr_mean_m=float(np.mean(tr)),
        tr_med_m=float(np.median(tr)),
        tr_std_m=float(np.std(tr)),
        count=len(rot),
    )
