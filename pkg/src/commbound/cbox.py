"""Two-party boxes P(s|a,b), input priors, outcome tuples and couplings.

Outcome tuples s = (s_1, ..., s_M) are addressed by a single integer index
using base-``s_count`` digits with s_1 as the *least* significant digit.
This ordering is part of the certificate file format and must not change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidInput,
    NegativeProbability,
    RowNotNormalized,
    ShapeMismatch,
    SizeOverflow,
)

DEFAULT_CAP = 10**6

CONSTRUCTION_TOL = 1e-9
MEMBERSHIP_TOL = 1e-6
PRIOR_TOL = 1e-12


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CBox:
    """Dense conditional table ``probs[a, b, s] = P(s | a, b)``."""

    probs: np.ndarray

    @property
    def a_count(self) -> int:
        return self.probs.shape[0]

    @property
    def m_count(self) -> int:
        return self.probs.shape[1]

    @property
    def s_count(self) -> int:
        return self.probs.shape[2]

    @property
    def n_tuples(self) -> int:
        return self.s_count**self.m_count

    def slice(self, b: int) -> np.ndarray:
        """P(.|., b) as an (a, s) array."""
        if not 0 <= b < self.m_count:
            raise IndexOutOfRange(f"setting {b} not in [0, {self.m_count})")
        return self.probs[:, b, :]

    def to_dict(self) -> dict:
        return {
            "a_count": self.a_count,
            "m_count": self.m_count,
            "s_count": self.s_count,
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CBox":
        try:
            probs = np.asarray(doc["probs"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"box document has no usable 'probs' table: {exc}") from exc
        box = validate_cbox(probs)
        for key, got in (("a_count", box.a_count), ("m_count", box.m_count), ("s_count", box.s_count)):
            if key in doc and int(doc[key]) != got:
                raise ShapeMismatch(f"{key}={doc[key]} disagrees with probs shape {probs.shape}")
        return box


@dataclass(frozen=True, eq=False)
class Prior:
    """Input distribution rho(a)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ShapeMismatch("prior weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInput("prior weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > PRIOR_TOL:
            raise InvalidInput(f"prior weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def a_count(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, a_count: int) -> "Prior":
        return cls(np.full(a_count, 1.0 / a_count))

    @classmethod
    def normalized(cls, weights) -> "Prior":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    def to_dict(self) -> dict:
        return {"a_count": self.a_count, "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "Prior":
        weights = doc["weights"] if isinstance(doc, dict) else doc
        return cls(np.asarray(weights, dtype=float))


@dataclass(frozen=True, eq=False)
class Coupling:
    """Conditional distribution ``table[a, i] = rho(s_vec(i) | a)``."""

    table: np.ndarray
    m_count: int
    s_count: int

    def __post_init__(self):
        object.__setattr__(self, "table", _frozen(self.table))
        if self.table.ndim != 2 or self.table.shape[1] != self.s_count**self.m_count:
            raise ShapeMismatch(
                f"coupling table {self.table.shape} incompatible with s_count={self.s_count}, "
                f"m_count={self.m_count}"
            )

    @property
    def a_count(self) -> int:
        return self.table.shape[0]

    def grid(self) -> np.ndarray:
        """View of the table with axes (a, s_1, ..., s_M)."""
        return to_grid(self.table, self.s_count, self.m_count)


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    max_deviation: float
    min_entry: float
    tol: float


def check_cap(s_count: int, m_count: int, cap: int | None = None) -> int:
    cap = DEFAULT_CAP if cap is None else cap
    n = s_count**m_count
    if n > cap:
        raise SizeOverflow(n, cap)
    return n


# ---------------------------------------------------------------------------
# outcome tuple indexing


def encode(entries: Sequence[int], s_count: int) -> int:
    index = 0
    for s in reversed(entries):
        if not 0 <= s < s_count:
            raise IndexOutOfRange(f"outcome {s} not in [0, {s_count})")
        index = index * s_count + int(s)
    return index


def decode(index: int, s_count: int, m_count: int) -> tuple[int, ...]:
    if not 0 <= index < s_count**m_count:
        raise IndexOutOfRange(f"tuple index {index} not in [0, {s_count**m_count})")
    out = []
    for _ in range(m_count):
        index, digit = divmod(index, s_count)
        out.append(digit)
    return tuple(out)


def all_svectors(s_count: int, m_count: int) -> np.ndarray:
    """Array of shape (s_count**m_count, m_count); row i is decode(i)."""
    idx = np.arange(s_count**m_count)
    powers = s_count ** np.arange(m_count)
    return (idx[:, None] // powers[None, :]) % s_count


def to_grid(table: np.ndarray, s_count: int, m_count: int) -> np.ndarray:
    """Reshape (a, s**M) to (a, s_1, ..., s_M)."""
    g = table.reshape((table.shape[0],) + (s_count,) * m_count)
    # C-order reshape puts the most significant digit (s_M) first
    return g.transpose([0] + list(range(m_count, 0, -1)))


def from_grid(grid: np.ndarray) -> np.ndarray:
    m_count = grid.ndim - 1
    g = grid.transpose([0] + list(range(m_count, 0, -1)))
    return np.ascontiguousarray(g).reshape(grid.shape[0], -1)


# ---------------------------------------------------------------------------
# operations


def validate_cbox(raw_table) -> CBox:
    """Check nonnegativity and row normalization, returning an immutable CBox."""
    try:
        probs = np.array(raw_table, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"table is not a numeric tensor: {exc}") from exc
    if probs.ndim != 3 or min(probs.shape) < 1:
        raise ShapeMismatch(f"expected a 3-axis table with positive extents, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise InvalidInput("table contains non-finite entries")
    neg = np.argwhere(probs < 0)
    if neg.size:
        a, b, s = (int(v) for v in neg[0])
        raise NegativeProbability(a, b, s, float(probs[a, b, s]))
    deficit = 1.0 - probs.sum(axis=2)
    bad = np.argwhere(np.abs(deficit) > CONSTRUCTION_TOL)
    if bad.size:
        a, b = (int(v) for v in bad[0])
        raise RowNotNormalized(a, b, float(deficit[a, b]))
    return CBox(_frozen(probs))


def coupling_marginal(c: Coupling, b: int) -> np.ndarray:
    """Marginal of the b-th outcome: (a, s) array."""
    if not 0 <= b < c.m_count:
        raise IndexOutOfRange(f"setting {b} not in [0, {c.m_count})")
    g = c.grid()
    others = tuple(1 + k for k in range(c.m_count) if k != b)
    return g.sum(axis=others)


def all_marginals(c: Coupling) -> np.ndarray:
    """Stacked marginals as an (a, b, s) array, same layout as CBox.probs."""
    return np.stack([coupling_marginal(c, b) for b in range(c.m_count)], axis=1)


def check_membership_V(c: Coupling, box: CBox, tol: float = MEMBERSHIP_TOL) -> MembershipReport:
    """Is ``c`` a coupling whose per-setting marginals reproduce ``box``?"""
    if (c.a_count, c.m_count, c.s_count) != (box.a_count, box.m_count, box.s_count):
        raise ShapeMismatch(
            f"coupling ({c.a_count}, {c.m_count}, {c.s_count}) vs box "
            f"({box.a_count}, {box.m_count}, {box.s_count})"
        )
    dev = float(np.max(np.abs(all_marginals(c) - box.probs)))
    lo = float(c.table.min())
    return MembershipReport(dev <= tol and lo >= -tol, dev, lo, tol)


def product_coupling(box: CBox, cap: int | None = None) -> Coupling:
    """rho(s|a) = prod_b P(s_b|a,b), the canonical element of V."""
    check_cap(box.s_count, box.m_count, cap)
    A, M, S = box.a_count, box.m_count, box.s_count
    grid = np.ones((A,) + (1,) * M)
    for b in range(M):
        shape = [A] + [1] * M
        shape[1 + b] = S
        grid = grid * box.probs[:, b, :].reshape(shape)
    return Coupling(from_grid(grid), M, S)


# ---------------------------------------------------------------------------
# JSON documents


def dumps_box(box: CBox) -> str:
    return json.dumps(box.to_dict(), indent=1)


def loads_box(text: str) -> CBox:
    return CBox.from_dict(json.loads(text))


def load_box(path) -> CBox:
    with open(path, encoding="utf-8") as fh:
        return loads_box(fh.read())


def save_box(box: CBox, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_box(box) + "\n")


def canonical_box_json(box: CBox) -> str:
    """Sorted-key, whitespace-free document with 17 significant digits per entry."""
    probs = [[[float(f"{x:.17g}") for x in row] for row in plane] for plane in box.probs.tolist()]
    doc = {"a_count": box.a_count, "m_count": box.m_count, "s_count": box.s_count, "probs": probs}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
