"""Mutual information and Blahut-Arimoto channel capacity, in nats."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cbox import Coupling, Prior
from .errors import NonConvergence, NonStochasticInput, ShapeMismatch

LOG2 = math.log(2.0)


def to_bits(nats: float) -> float:
    return nats / LOG2


def _xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """p * log(p / q) elementwise with 0 log(0/.) = 0."""
    out = np.zeros_like(p, dtype=float)
    mask = p > 0
    out[mask] = p[mask] * np.log(p[mask] / q[mask])
    return out


def row_divergences(channel: np.ndarray, output: np.ndarray) -> np.ndarray:
    """D(channel[a] || output) for every row a."""
    q = np.broadcast_to(output, channel.shape)
    return _xlogy_ratio(channel, q).sum(axis=1)


def mutual_information(channel, prior) -> float:
    """I(S;A) for a channel (a, y) array or a Coupling, in nats."""
    table = channel.table if isinstance(channel, Coupling) else np.asarray(channel, dtype=float)
    weights = prior.weights if isinstance(prior, Prior) else np.asarray(prior, dtype=float)
    if table.ndim != 2 or table.shape[0] != weights.size:
        raise ShapeMismatch(f"channel {table.shape} vs prior of length {weights.size}")
    output = weights @ table
    mi = float(weights @ row_divergences(table, output))
    return max(mi, 0.0)


@dataclass(frozen=True)
class CapacityResult:
    capacity_nats: float
    optimal_prior: Prior
    iterations: int
    gap_bound: float

    @property
    def capacity_bits(self) -> float:
        return to_bits(self.capacity_nats)


def channel_capacity(channel, tol: float = 1e-9, max_iter: int = 100_000) -> CapacityResult:
    """Blahut-Arimoto iteration with the max-divergence upper bound as stopping rule.

    At each step ``I(p) <= C <= max_a D(W_a || pW)``; iteration stops once the
    two bracket values are within ``tol``.
    """
    W = np.asarray(channel, dtype=float)
    if W.ndim != 2 or W.size == 0:
        raise NonStochasticInput("channel must be a nonempty 2-D array")
    if np.any(W < 0) or not np.all(np.isfinite(W)) or np.max(np.abs(W.sum(axis=1) - 1)) > 1e-9:
        raise NonStochasticInput("channel rows must be probability vectors")
    if tol <= 0:
        raise ValueError("tol must be positive")
    W = W[:, W.sum(axis=0) > 0]

    p = np.full(W.shape[0], 1.0 / W.shape[0])
    gap = math.inf
    for it in range(1, max_iter + 1):
        d = row_divergences(W, p @ W)
        lower = float(p @ d)
        upper = float(d.max())
        gap = upper - lower
        if gap <= tol:
            return CapacityResult(max(lower, 0.0), Prior.normalized(p), it, max(gap, 0.0))
        p = p * np.exp(d - d.max())
        p /= p.sum()
    raise NonConvergence(max_iter, gap)
