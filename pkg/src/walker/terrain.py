"""Foothold sequences: flat ground, stairs, random stepping stones."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .reduced_models import StoneConfig


class TerrainMode(str, enum.Enum):
    FLAT = "flat"
    STAIRS = "stairs"
    RANDOM = "random"
    EXPLICIT = "explicit"


@dataclass
class Terrain:
    """Ordered stone configurations, each relative to the previous foothold.

    ``stones[k]`` takes the robot from foothold k to foothold k+1; foothold 0
    is the initial stance foot at the world origin.
    """

    mode: TerrainMode
    stones: list[StoneConfig]
    distance_range: tuple[float, float] = (0.2, 0.7)
    height_range: tuple[float, float] = (-0.25, 0.25)
    seed: int | None = None
    _world: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.mode = TerrainMode(self.mode)
        steps = np.array([[s.l_des, s.h_des] for s in self.stones]).reshape(-1, 2)
        self._world = np.vstack((np.zeros((1, 2)), np.cumsum(steps, axis=0)))

    def __len__(self):
        return len(self.stones)

    def stone(self, k: int) -> StoneConfig | None:
        return self.stones[k] if 0 <= k < len(self.stones) else None

    def foothold(self, k: int) -> np.ndarray:
        """World (x, z) of foothold k."""
        return self._world[k].copy()

    @property
    def footholds(self) -> np.ndarray:
        return self._world.copy()


def flat(l_des: float, n: int) -> Terrain:
    return Terrain(TerrainMode.FLAT, [StoneConfig(l_des, 0.0)] * n)


def stairs(l_des: float, h_des: float, n: int) -> Terrain:
    return Terrain(TerrainMode.STAIRS, [StoneConfig(l_des, h_des)] * n)


def explicit(pairs) -> Terrain:
    return Terrain(TerrainMode.EXPLICIT, [StoneConfig(float(l), float(h)) for l, h in pairs])


def random_stones(n: int, seed: int, distance_range=(0.2, 0.7),
                  height_range=(-0.25, 0.25), max_slope: float = 0.95) -> Terrain:
    """Uniformly random stones; draws steeper than ``max_slope`` are redrawn."""
    rng = np.random.default_rng(seed)
    stones = []
    while len(stones) < n:
        l = rng.uniform(*distance_range)
        h = rng.uniform(*height_range)
        if abs(h) < max_slope * l:
            stones.append(StoneConfig(float(l), float(h)))
    return Terrain(TerrainMode.RANDOM, stones, tuple(distance_range),
                   tuple(height_range), seed)
