"""Cumulative hit/miss belief and rubric scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec

PRIOR = 1.0 / 3.0


class UndefinedScoreError(ValueError):
    """The prior already equals the rubric, so the weighted score has no scale."""


def belief_values(hit: np.ndarray, miss: np.ndarray, prior: float = PRIOR) -> np.ndarray:
    """Per-cell belief: H/(H+M) where observed, else the prior. Works on stacks of grids."""
    h = hit.astype(float)
    m = miss.astype(float)
    seen = h + m
    out = np.full(seen.shape, prior, dtype=float)
    np.divide(h, seen, out=out, where=seen > 0)
    return out


@dataclass(frozen=True)
class Belief:
    spec: GridSpec = GridSpec()
    hit: np.ndarray = field(default=None, repr=False)
    miss: np.ndarray = field(default=None, repr=False)
    prior: float = PRIOR

    def __post_init__(self):
        for name in ("hit", "miss"):
            g = getattr(self, name)
            g = self.spec.zeros() if g is None else np.asarray(g, dtype=bool)
            if g.shape != self.spec.shape:
                raise ValueError(f"{name} grid has shape {g.shape}, expected {self.spec.shape}")
            g = g.copy()
            g.flags.writeable = False
            object.__setattr__(self, name, g)
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError("prior must lie in [0, 1]")

    @property
    def values(self) -> np.ndarray:
        return belief_values(self.hit, self.miss, self.prior)

    def update(self, hit: np.ndarray, miss: np.ndarray) -> "Belief":
        """Element-wise OR of the new observation into the cumulative grids."""
        if hit.shape != self.spec.shape or miss.shape != self.spec.shape:
            raise ValueError("observation grids do not match the belief")
        return Belief(self.spec, self.hit | hit, self.miss | miss, self.prior)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Belief)
            and self.spec == other.spec
            and self.prior == other.prior
            and np.array_equal(self.hit, other.hit)
            and np.array_equal(self.miss, other.miss)
        )

    __hash__ = None


def raw_score(x: np.ndarray, rubric: np.ndarray) -> np.ndarray:
    """100 * mean(1 - |X - R|) over the last two axes."""
    return 100.0 * np.mean(1.0 - np.abs(x - rubric), axis=(-2, -1))


def score(x, rubric: np.ndarray, prior: float = PRIOR):
    """Weighted score 100 (S_X - S_P) / (100 - S_P): 100 for the rubric, 0 for the prior.

    `x` is a Belief or a grid of values (or a stack of grids).
    """
    vals = x.values if isinstance(x, Belief) else np.asarray(x, dtype=float)
    s_p = float(raw_score(np.full(rubric.shape, prior), rubric))
    if s_p == 100.0:
        raise UndefinedScoreError("rubric equals the prior")
    s = 100.0 * (raw_score(vals, rubric) - s_p) / (100.0 - s_p)
    return float(s) if np.ndim(s) == 0 else s
