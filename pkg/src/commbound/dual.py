"""Geometric-programming side: dual objective, exponential constraints,
subgradient ascent and portable lower-bound certificates.

For a fixed prior rho(a), any table lambda(s, a, b) satisfying

    sum_a rho(a) exp(sum_b lambda(s_b, a, b)) <= 1   for every outcome tuple s

gives the lower bound ``sum_{s,a,b} P(s|a,b) rho(a) lambda(s,a,b)`` (nats) on the
asymptotic communication complexity.  Constraints are checked by exhaustive
enumeration, so a verified certificate is sound rather than probabilistic.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import __version__
from .cbox import CBox, Prior, all_svectors, canonical_box_json, check_cap, decode, from_grid
from .errors import DigestMismatch, Infeasible, InvalidInput, ShapeMismatch
from .info import LOG2, to_bits

DEFAULT_FLOOR = -50.0
VERIFY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DualPoint:
    """Dual variables ``lam[s, a, b]`` in nats."""

    lam: np.ndarray
    clamp_floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.ndim != 3:
            raise ShapeMismatch(f"lambda must be indexed [s][a][b], got shape {lam.shape}")
        if not np.all(np.isfinite(lam)):
            raise InvalidInput("lambda entries must be finite")
        if lam.size and lam.min() < self.clamp_floor:
            raise InvalidInput(f"lambda entry {lam.min()} below clamp floor {self.clamp_floor}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @property
    def s_count(self) -> int:
        return self.lam.shape[0]

    @property
    def a_count(self) -> int:
        return self.lam.shape[1]

    @property
    def m_count(self) -> int:
        return self.lam.shape[2]

    @classmethod
    def zeros(cls, s_count: int, a_count: int, m_count: int) -> "DualPoint":
        return cls(np.zeros((s_count, a_count, m_count)))

    @classmethod
    def clamped(cls, lam, clamp_floor: float = DEFAULT_FLOOR) -> "DualPoint":
        return cls(np.maximum(np.asarray(lam, dtype=float), clamp_floor), clamp_floor)


def _check_shapes(lam: np.ndarray, box: Optional[CBox], prior: Prior) -> None:
    S, A, M = lam.shape
    if prior.a_count != A:
        raise ShapeMismatch(f"lambda has {A} inputs, prior has {prior.a_count}")
    if box is not None and box.probs.shape != (A, M, S):
        raise ShapeMismatch(f"lambda shape {lam.shape} vs box shape {box.probs.shape}")


def tuple_exponents(lam: np.ndarray) -> np.ndarray:
    """alpha[a, i] = sum_b lam[s_b(i), a, b] for every outcome-tuple index i."""
    S, A, M = lam.shape
    grid = np.zeros((A,) + (1,) * M)
    for b in range(M):
        shape = [A] + [1] * M
        shape[1 + b] = S
        grid = grid + lam[:, :, b].T.reshape(shape)
    return from_grid(np.broadcast_to(grid, (A,) + (S,) * M))


def constraint_values(lam: np.ndarray, prior: Prior) -> np.ndarray:
    """log sum_a rho(a) exp(alpha[a, i]) for all tuples i (max-shifted)."""
    alpha = tuple_exponents(lam)
    return logsumexp(alpha, axis=0, b=prior.weights[:, None])


def dual_objective(lp: DualPoint, box: CBox, prior: Prior) -> float:
    """sum_{s,a,b} P(s|a,b) rho(a) lambda(s,a,b), in nats."""
    _check_shapes(lp.lam, box, prior)
    weighted = box.probs * prior.weights[:, None, None]  # (a, b, s)
    return float(np.einsum("abs,sab->", weighted, lp.lam))


def constraint_lse(lp: DualPoint, prior: Prior, sv: Sequence[int]) -> float:
    """Constraint value for one outcome tuple; feasible iff <= 0."""
    _check_shapes(lp.lam, None, prior)
    if len(sv) != lp.m_count:
        raise ShapeMismatch(f"outcome tuple of length {len(sv)} for {lp.m_count} settings")
    exps = sum(lp.lam[int(s), :, b] for b, s in enumerate(sv))
    return float(logsumexp(exps, b=prior.weights))


def max_violation(lp: DualPoint, prior: Prior, cap: int | None = None) -> tuple[float, tuple[int, ...]]:
    """Largest constraint value over all outcome tuples and one tuple attaining it."""
    _check_shapes(lp.lam, None, prior)
    check_cap(lp.s_count, lp.m_count, cap)
    vals = constraint_values(lp.lam, prior)
    i = int(np.argmax(vals))
    return float(vals[i]), decode(i, lp.s_count, lp.m_count)


def normalize_feasible(lp: DualPoint, prior: Prior, cap: int | None = None) -> DualPoint:
    """Shift every lambda(., ., b) by -c/M so the worst constraint sits at 0.

    The objective changes by exactly -c since each setting's weights
    P(s|a,b) rho(a) sum to one.
    """
    c, _ = max_violation(lp, prior, cap)
    lam = lp.lam - c / lp.m_count
    return DualPoint(lam, min(lp.clamp_floor, float(lam.min())))


# ---------------------------------------------------------------------------
# ascent


@dataclass
class DualOptions:
    max_iter: int = 2000
    step0: float = 1.0
    clamp_floor: float = DEFAULT_FLOOR
    cap: int | None = None
    init: Optional[np.ndarray] = None
    callback: Optional[Callable[[int, DualPoint, float], None]] = None


@dataclass
class DualResult:
    point: DualPoint
    bound_nats: float
    iterations: int
    history: list = field(default_factory=list)

    @property
    def bound_bits(self) -> float:
        return to_bits(self.bound_nats)


def maximize_dual(box: CBox, prior: Prior, opts: DualOptions | None = None) -> DualResult:
    """Projected subgradient ascent on I(lambda) - c(lambda).

    The surrogate is concave and shift invariant; its value at any lambda
    equals the dual objective of the normalized (feasible) point, so every
    reported bound is valid.  Only improvements are reported, which makes the
    reported sequence nondecreasing.
    """
    opts = opts or DualOptions()
    S, A, M = box.s_count, box.a_count, box.m_count
    if prior.a_count != A:
        raise ShapeMismatch(f"prior of length {prior.a_count} for box with {A} inputs")
    check_cap(S, M, opts.cap)
    w = prior.weights
    grad_obj = np.transpose(box.probs * w[:, None, None], (2, 0, 1))  # (s, a, b)
    tuples = all_svectors(S, M)

    if opts.init is None:
        lam = np.zeros((S, A, M))
    else:
        lam = np.maximum(np.array(opts.init, dtype=float), opts.clamp_floor)
        if lam.shape != (S, A, M):
            raise ShapeMismatch(f"initial lambda shape {lam.shape}, expected {(S, A, M)}")

    best = -math.inf
    best_lam = lam
    history: list[float] = []
    it = 0
    for it in range(1, opts.max_iter + 1):
        alpha = tuple_exponents(lam)
        vals = logsumexp(alpha, axis=0, b=w[:, None])
        i = int(np.argmax(vals))
        c = float(vals[i])
        value = float(np.sum(grad_obj * lam)) - c
        if value > best:
            best = value
            best_lam = lam - c / M
            history.append(value)
            if opts.callback is not None:
                opts.callback(it, DualPoint(best_lam, min(opts.clamp_floor, float(best_lam.min()))), value)
        # subgradient of c at the active tuple
        resp = w * np.exp(alpha[:, i] - c)
        sub = np.zeros_like(lam)
        for b in range(M):
            sub[tuples[i, b], :, b] = resp
        g = grad_obj - sub
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            break
        lam = np.maximum(lam + (opts.step0 / math.sqrt(it)) * g, opts.clamp_floor)

    point = DualPoint(best_lam, min(opts.clamp_floor, float(best_lam.min())))
    return DualResult(point, best, it, history)


def duality_gap(box: CBox, prior: Prior, opts=None, dual_opts: DualOptions | None = None):
    """Solve both sides; returns (primal_nats, dual_nats, gap).

    The dual ascent is warm-started from the exponential-family factors of
    the primal solution and polished with small subgradient steps; its value
    is certified by exhaustive constraint enumeration regardless of origin.
    """
    from .primal import PrimalOptions, minimize_mutual_info

    opts = opts or PrimalOptions()
    primal = minimize_mutual_info(box, prior, opts)
    dual_opts = dual_opts or DualOptions(max_iter=200, step0=1e-3, cap=opts.cap)
    if dual_opts.init is None:
        dual_opts.init = primal.dual_point.lam
    dual = maximize_dual(box, prior, dual_opts)
    return primal.value_nats, dual.bound_nats, primal.value_nats - dual.bound_nats


# ---------------------------------------------------------------------------
# certificates


def box_digest(box: CBox) -> str:
    return hashlib.sha256(canonical_box_json(box).encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class Certificate:
    box_digest: str
    prior: Prior
    dual_point: DualPoint
    claimed_bound_bits: float
    tool_version: str = __version__
    created: str = ""

    def to_dict(self) -> dict:
        return {
            "box_digest": self.box_digest,
            "prior": self.prior.weights.tolist(),
            "lambda": self.dual_point.lam.tolist(),
            "clamp_floor": self.dual_point.clamp_floor,
            "claimed_bound_bits": self.claimed_bound_bits,
            "tool_version": self.tool_version,
            "created": self.created,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        try:
            lam = np.asarray(doc["lambda"], dtype=float)
            floor = float(doc.get("clamp_floor", min(DEFAULT_FLOOR, float(lam.min(initial=0.0)))))
            return cls(
                box_digest=str(doc["box_digest"]),
                prior=Prior.from_dict(doc["prior"]),
                dual_point=DualPoint(lam, floor),
                claimed_bound_bits=float(doc["claimed_bound_bits"]),
                tool_version=str(doc.get("tool_version", "")),
                created=str(doc.get("created", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed certificate: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))


def make_certificate(box: CBox, prior: Prior, point: DualPoint, bound_nats: float) -> Certificate:
    created = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return Certificate(box_digest(box), prior, point, bound_nats / LOG2, __version__, created)


@dataclass(frozen=True)
class VerifiedBound:
    bound_nats: float
    max_violation: float
    claimed_bits: float

    @property
    def bound_bits(self) -> float:
        return to_bits(self.bound_nats)

    @property
    def claim_supported(self) -> bool:
        return self.bound_bits >= self.claimed_bits - VERIFY_TOL


def check_certificate(cert: Certificate, box: CBox, cap: int | None = None) -> VerifiedBound:
    """Recompute feasibility and the bound from scratch.

    The returned bound is the objective of the normalized point, i.e. the
    objective minus any residual violation in (0, 1e-9], so it never exceeds
    the dual objective of the certificate's lambda.
    """
    if cert.box_digest != box_digest(box):
        raise DigestMismatch("certificate was issued for a different box")
    c, witness = max_violation(cert.dual_point, cert.prior, cap)
    if c > VERIFY_TOL:
        raise Infeasible(c, witness)
    value = dual_objective(cert.dual_point, box, cert.prior) - max(c, 0.0)
    return VerifiedBound(value, c, cert.claimed_bound_bits)
