"""Cellular-automaton fusion of stacked pixel-aligned maps.

Cell state lives in the log domain: layer i starts at log(clamp(map_i)).
Each synchronous step adds lam * sum of sign terms over the cuboid
neighborhood (4-adjacent positions, every layer), where a neighbor votes
+1/-1 depending on whether its value is above or below its originating
layer's mean. Read-out squashes through the logistic and averages layers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import expit

from .color import minmax_normalize

CLAMP_EPS = 1e-6


@dataclass(frozen=True)
class AutomatonGrid:
    values: np.ndarray  # (H, W, m) log-domain cell state
    mu: np.ndarray      # (m,) per-layer mean of the clamped input values
    lam: float
    steps_taken: int = 0
    recompute_mu: bool = False  # refresh layer means from the evolving state each step

    @property
    def n_layers(self) -> int:
        return self.values.shape[2]


def _layer_mean(layer: np.ndarray) -> float:
    # exact on constant layers so sign(value - mu) is exactly zero there
    lo = layer.min()
    return float(lo) if lo == layer.max() else float(layer.mean())


def init_grid(maps: Sequence[np.ndarray], lam: float, recompute_mu: bool = False) -> AutomatonGrid:
    """Stack maps into a grid; values are clamped to [1e-6, 1] before the log."""
    if len(maps) == 0:
        raise ValueError("at least one map is required")
    if not 0.0 < lam <= 1.0:
        raise ValueError("lam must be in (0, 1]")
    shape = np.asarray(maps[0]).shape
    for m in maps:
        if np.asarray(m).shape != shape:
            raise ValueError("all maps must share the same dimensions")
    clamped = np.stack([np.clip(np.asarray(m, dtype=np.float64), CLAMP_EPS, 1.0) for m in maps], axis=2)
    return AutomatonGrid(
        values=np.log(clamped),
        mu=np.array([_layer_mean(clamped[:, :, i]) for i in range(clamped.shape[2])]),
        lam=float(lam),
        recompute_mu=recompute_mu,
    )


def _neighbor_votes(values: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """(H, W) sum over 4-adjacent positions and all layers of sign(value - mu_layer).

    sign(state - log mu) equals sign(exp(state) - mu): the vote compares the
    cell's current value against its layer mean.
    """
    votes = np.sign(values - np.log(mu)[None, None, :]).sum(axis=2)
    out = np.zeros_like(votes)
    out[1:, :] += votes[:-1, :]
    out[:-1, :] += votes[1:, :]
    out[:, 1:] += votes[:, :-1]
    out[:, :-1] += votes[:, 1:]
    return out


def step(grid: AutomatonGrid) -> AutomatonGrid:
    """One synchronous update; every cell reads the previous state."""
    mu = grid.mu
    if grid.recompute_mu:
        mu = np.array([_layer_mean(np.exp(grid.values[:, :, i]))
                       for i in range(grid.n_layers)])
    delta = grid.lam * _neighbor_votes(grid.values, mu)
    return replace(grid, values=grid.values + delta[:, :, None], steps_taken=grid.steps_taken + 1)


def finalize(grid: AutomatonGrid) -> np.ndarray:
    """Logistic squash per cell, layer average, min-max normalization."""
    squashed = expit(grid.values)
    return minmax_normalize(squashed.mean(axis=2))


def integrate(maps: Sequence[np.ndarray], lam: float, steps: int) -> np.ndarray:
    """Fuse maps: init, `steps` updates, read out."""
    grid = init_grid(maps, lam)
    for _ in range(steps):
        grid = step(grid)
    return finalize(grid)


class LayeredAutomaton:
    """Automaton that persists across pipeline iterations.

    Layers are keyed by name: a layer seen for the first time is initialized
    from its map; layers that already exist keep their evolved state and the
    offered map is ignored.
    """

    def __init__(self, lam: float, recompute_mu: bool = False):
        self.lam = float(lam)
        self.recompute_mu = recompute_mu
        self.grid: AutomatonGrid | None = None
        self._names: list[str] = []

    @property
    def layer_names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def ensure_layer(self, name: str, saliency_map: np.ndarray) -> None:
        if name in self._names:
            return
        clamped = np.clip(np.asarray(saliency_map, dtype=np.float64), CLAMP_EPS, 1.0)
        if self.grid is None:
            self.grid = init_grid([saliency_map], self.lam, self.recompute_mu)
        else:
            if clamped.shape != self.grid.values.shape[:2]:
                raise ValueError("layer dimensions do not match the grid")
            values = np.concatenate([self.grid.values, np.log(clamped)[:, :, None]], axis=2)
            mu = np.concatenate([self.grid.mu, [_layer_mean(clamped)]])
            self.grid = replace(self.grid, values=values, mu=mu)
        self._names.append(name)

    def step(self, count: int = 1) -> None:
        if self.grid is None:
            raise ValueError("no layers initialized")
        for _ in range(count):
            self.grid = step(self.grid)

    def finalize(self) -> np.ndarray:
        if self.grid is None:
            raise ValueError("no layers initialized")
        return finalize(self.grid)
