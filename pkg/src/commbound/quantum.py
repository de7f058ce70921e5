"""Pure states, two-outcome rank-1 measurements and Haar-measure geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cbox import CBox, validate_cbox
from .errors import DimensionMismatch, DomainError, EmptyInput, InvalidInput, UnsupportedMoment

NORM_TOL = 1e-12
_CHUNK = 1 << 17


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size == 0:
            raise EmptyInput("a state needs at least one amplitude")
        norm2 = float(np.vdot(amp, amp).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvalidInput(f"state is not normalized (|psi|^2 = {norm2!r})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amp)
        if norm == 0:
            raise InvalidInput("cannot normalize the zero vector")
        return cls(amp / norm)

    @classmethod
    def basis(cls, N: int, k: int = 0) -> "PureState":
        amp = np.zeros(N, dtype=complex)
        amp[k] = 1.0
        return cls(amp)


@dataclass(frozen=True, eq=False)
class TwoOutcomeMeasurement:
    """Projective measurement {|phi><phi|, 1 - |phi><phi|}; outcome 0 is the rank-1 event."""

    axis: PureState

    @property
    def dim(self) -> int:
        return self.axis.dim


@dataclass(frozen=True, eq=False)
class Cone:
    """Unit vectors phi with |<axis|phi>|^2 >= cos^2(half_angle)."""

    axis: PureState
    half_angle: float

    def __post_init__(self):
        if not 0.0 <= self.half_angle <= math.pi / 2:
            raise DomainError(f"cone half-angle {self.half_angle} outside [0, pi/2]")

    def contains(self, phi: PureState) -> bool:
        ov = abs(np.vdot(self.axis.amplitudes, phi.amplitudes)) ** 2
        return ov >= math.cos(self.half_angle) ** 2


def born_probability(psi: PureState, phi: TwoOutcomeMeasurement) -> tuple[float, float]:
    if psi.dim != phi.dim:
        raise DimensionMismatch(f"state dimension {psi.dim} vs measurement dimension {phi.dim}")
    p1 = abs(np.vdot(phi.axis.amplitudes, psi.amplitudes)) ** 2
    p1 = min(max(float(p1), 0.0), 1.0)
    return p1, 1.0 - p1


def build_quantum_cbox(
    states: Sequence[PureState], axes: Sequence[TwoOutcomeMeasurement]
) -> CBox:
    """Box with a = state index, b = measurement index, s in {0: event, 1: complement}."""
    if not states or not axes:
        raise EmptyInput("need at least one state and one measurement")
    dims = {st.dim for st in states} | {ax.dim for ax in axes}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed Hilbert dimensions {sorted(dims)}")
    psi = np.stack([st.amplitudes for st in states])
    phi = np.stack([ax.axis.amplitudes for ax in axes])
    p1 = np.clip(np.abs(psi @ phi.conj().T) ** 2, 0.0, 1.0)
    return validate_cbox(np.stack([p1, 1.0 - p1], axis=2))


def _haar_block(rng: np.random.Generator, N: int, count: int) -> np.ndarray:
    z = rng.standard_normal((count, N)) + 1j * rng.standard_normal((count, N))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_vectors(N: int, count: int, seed) -> np.ndarray:
    """(count, N) array of Haar-random unit vectors."""
    if N < 1 or count < 1:
        raise InvalidInput("need N >= 1 and count >= 1")
    return _haar_block(np.random.default_rng(seed), N, count)


def haar_sample(N: int, count: int, seed) -> list[PureState]:
    return [PureState(v) for v in haar_vectors(N, count, seed)]


def _first_component_weights(N: int, samples: int, seed):
    """Yield chunks of |<e_1|phi>|^2 for Haar phi."""
    if N < 1 or samples < 1:
        raise InvalidInput("need N >= 1 and samples >= 1")
    rng = np.random.default_rng(seed)
    left = samples
    while left:
        n = min(left, _CHUNK)
        z = rng.standard_normal((n, N)) + 1j * rng.standard_normal((n, N))
        w = np.abs(z) ** 2
        yield w[:, 0] / w.sum(axis=1)
        left -= n


def _mean_and_stderr(total: float, total_sq: float, n: int) -> tuple[float, float]:
    mean = total / n
    if n < 2:
        return mean, 0.0
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def mc_overlap_moment(N: int, k: int, samples: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of the Haar average of |<phi|psi>|^k, psi fixed to e_1."""
    if k not in (2, 4):
        raise UnsupportedMoment(f"moment order {k} not supported (use 2 or 4)")
    total = total_sq = 0.0
    for ov in _first_component_weights(N, samples, seed):
        x = ov ** (k // 2)
        total += float(x.sum())
        total_sq += float((x * x).sum())
    return _mean_and_stderr(total, total_sq, samples)


def overlap_moment_exact(N: int, k: int) -> float:
    if k == 2:
        return 1.0 / N
    if k == 4:
        return 2.0 / (N * (N + 1))
    raise UnsupportedMoment(f"moment order {k} not supported (use 2 or 4)")


def _check_angle(theta: float) -> None:
    if not (0.0 <= theta <= math.pi / 2 + 1e-15):
        raise DomainError(f"theta = {theta} outside [0, pi/2]")


def cone_measure(theta: float, N: int) -> float:
    """Haar measure of a cone of half-angle theta: sin(theta)^(2N-2)."""
    _check_angle(theta)
    if N < 2:
        raise DomainError(f"cone measure needs N >= 2, got {N}")
    return math.sin(min(theta, math.pi / 2)) ** (2 * N - 2)


def cone_overlap_integral(theta: float, overlap: float, N: int) -> float:
    """Integral of |<psi|phi>|^2 over the cone, given overlap = |<psi|axis>|^2."""
    if not 0.0 <= overlap <= 1.0:
        raise DomainError(f"overlap {overlap} outside [0, 1]")
    S = cone_measure(theta, N)
    return S * (math.cos(theta) ** 2 * overlap + math.sin(theta) ** 2 / N)


def mc_cone_measure(theta: float, N: int, samples: int, seed) -> tuple[float, float]:
    """Fraction of Haar vectors inside a cone around e_1, with binomial standard error."""
    _check_angle(theta)
    if theta >= math.pi / 2:
        return 1.0, 0.0
    c2 = math.cos(theta) ** 2
    hits = 0
    for ov in _first_component_weights(N, samples, seed):
        hits += int(np.count_nonzero(ov >= c2))
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)
