"""
Metrics CSV

One row per (group_size, connectivity, method), columns ordered like the
result tables: rotation mean/median/std in degrees, then translation in meters.
"""

import csv
import io
from pathlib import Path
from typing import Iterable

from panograph_core.storage import PathLike, atomic_write
from panograph_eval.metrics import MetricSummary

HEADER = (
    "group_size",
    "connectivity",
    "method",
    "rot_mean_deg",
    "rot_med_deg",
    "rot_std_deg",
    "tr_mean_m",
    "tr_med_m",
    "tr_std_m",
)


def render_metrics_csv(rows: Iterable[MetricSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        data = row.to_dict()
        writer.writerow(
            [data["group_size"], data["connectivity"], data["method"]]
            + [f"{data[col]:.6f}" for col in HEADER[3:]]
        )
    return buf.getvalue()


def write_metrics_csv(rows: Iterable[MetricSummary], path: PathLike) -> Path:
    return atomic_write(path, render_metrics_csv(rows))
