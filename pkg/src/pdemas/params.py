"""Plant parameters shared by every field in the multi-agent loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PlantParams:
    """Diffusion/reaction/Robin coefficients plus the per-agent gains.

    Gains live in [0, l); k_i = 0 is a degenerate edge accepted for testing.
    """

    alpha: float
    lam: float
    robin_l: float
    gains: tuple
    n_agents: int

    def __post_init__(self):
        for name in ("alpha", "lam", "robin_l"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {val}")
        if self.n_agents < 2:
            raise ValueError(f"n_agents must be >= 2, got {self.n_agents}")
        object.__setattr__(self, "gains", tuple(float(k) for k in self.gains))
        if len(self.gains) != self.n_agents:
            raise ValueError(
                f"need {self.n_agents} gains, got {len(self.gains)}"
            )
        for i, k in enumerate(self.gains):
            if not np.isfinite(k) or k < 0 or k >= self.robin_l:
                raise ValueError(
                    f"gain k_{i + 1}={k} outside [0, l) with l={self.robin_l}"
                )
        # Product of gains below l^N is what makes the loop constants finite.
        prod = float(np.prod(self.gains))
        assert prod / self.robin_l**self.n_agents < 1.0

    def gain(self, i: int) -> float:
        """Gain by 1-based agent index, cyclic (index m <= 0 means m + N)."""
        return self.gains[(i - 1) % self.n_agents]
