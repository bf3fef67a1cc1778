"""
Run Configuration

Per-invocation settings assembled from parsed command-line arguments on top
of the process Config (`panograph_core.config`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

from panograph_core.errors import ValidationError
from panograph_core.graph_models import DEFAULT_CONNECTIVITY_THRESHOLD, NoiseSpec

SOLVER_METHODS = ("greedy", "pgo", "mp-demo")


@dataclass(frozen=True)
class RunConfig:
    seed: Optional[int] = None
    width: int = 512
    sizes: Tuple[int, ...] = (3, 4, 5)
    noise_levels: Tuple[NoiseSpec, ...] = field(default_factory=lambda: (NoiseSpec(),))
    threshold: float = DEFAULT_CONNECTIVITY_THRESHOLD
    pgo_edges: str = "all"
    output: Optional[str] = None
    svg: Optional[str] = None
    per_cluster: bool = False
    by_connectivity: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValidationError(f"Width must be positive, got {self.width}")
        if not self.sizes or min(self.sizes) < 2:
            raise ValidationError(f"Cluster sizes must be at least 2, got {self.sizes}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"Connectivity threshold {self.threshold} outside [0, 1]")
        if not self.noise_levels:
            raise ValidationError("At least one noise level is required")

    def require_seed(self, command: str) -> int:
        if self.seed is None:
            raise ValidationError(f"{command} is stochastic and needs --seed")
        return self.seed


def noise_levels_from(sigma_t: Tuple[float, ...], sigma_theta: Tuple[float, ...],
                      outlier_factor: float = 0.0) -> Tuple[NoiseSpec, ...]:
    """
    Pair translation and rotation sigmas level by level; a single value on
    either side is broadcast.
    """
    if len(sigma_t) == 1:
        sigma_t = sigma_t * len(sigma_theta)
    if len(sigma_theta) == 1:
        sigma_theta = sigma_theta * len(sigma_t)
    if len(sigma_t) != len(sigma_theta):
        raise ValidationError(
            f"--noise-t has {len(sigma_t)} values but --noise-theta has {len(sigma_theta)}"
        )
    return tuple(NoiseSpec(st, sr, outlier_factor) for st, sr in zip(sigma_t, sigma_theta))
