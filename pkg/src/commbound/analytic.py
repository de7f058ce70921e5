"""Closed-form bounds for a noiseless channel followed by two-outcome
rank-1 projective measurements in Hilbert dimension N = 2, 3, 4.

The dual variables are restricted to the family

    lambda(i, psi, phi) = alpha_i |<phi|psi>|^2 + beta_i,

and only the differences ``alpha = alpha_1 - alpha_2``, ``beta = beta_1 - beta_2``
plus the offset ``alpha_2/N + beta_2`` matter.  Feasibility reduces to
``min_theta F(theta, alpha, beta) >= offset`` where theta is the half-angle
of a cone of measurement vectors.  Everything here is in nats unless the
name says bits.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError, NonConvergence, RegionViolation, UnsupportedDimension
from .info import LOG2

SUPPORTED_N = (2, 3, 4)
PRIOR_N2_BOUND_BITS = 1.0 + math.log2(math.pi / math.e)


def _check_supported(N: int) -> None:
    if N not in SUPPORTED_N:
        raise UnsupportedDimension(
            f"N={N}: the closed-form bound relies on a differentiability property "
            f"that only holds for N in {SUPPORTED_N}"
        )


# ---------------------------------------------------------------------------
# incomplete gamma for integer order


def upper_incomplete_gamma_int(n: int, x: float) -> float:
    """Gamma(n, x) = (n-1)! e^-x sum_{k<n} x^k/k! for integer n >= 1."""
    if n < 1 or int(n) != n:
        raise DomainError(f"order must be a positive integer, got {n}")
    if x < 0:
        raise DomainError(f"argument must be nonnegative, got {x}")
    term = 1.0
    total = 1.0
    for k in range(1, int(n)):
        term *= x / k
        total += term
    return math.factorial(int(n) - 1) * math.exp(-x) * total


def _lower_series(n: int, x: float) -> float:
    """sum_{k>=0} x^k / (n (n+1) ... (n+k)); gamma(n,x) = x^n e^-x times this."""
    term = 1.0 / n
    total = term
    k = 0
    while True:
        k += 1
        term *= x / (n + k)
        total += term
        if term < total * 1e-17:
            return total
        if k > 10_000:
            return total


def lower_incomplete_gamma_int(n: int, x: float) -> float:
    """gamma(n, x) = (n-1)! - Gamma(n, x), without cancellation at small x."""
    if x < 0:
        raise DomainError(f"argument must be nonnegative, got {x}")
    if x < n + 1:
        return x**n * math.exp(-x) * _lower_series(n, x)
    return math.factorial(n - 1) - upper_incomplete_gamma_int(n, x)


def log_bracket_ratio(N: int, y: float) -> float:
    """log{[(N-1)! - (N-1) Gamma(N-1, y)] / y^(N-1)}; tends to 0 as y -> 0.

    Below y = 1 the bracket is evaluated through the lower-gamma series
    (the direct difference loses about -(N-1) log10(y) digits).
    """
    if y < 0:
        raise DomainError(f"argument must be nonnegative, got {y}")
    n = N - 1
    if y < 1.0:
        return math.log(n) - y + math.log(_lower_series(n, y))
    bracket = math.factorial(n) - n * upper_incomplete_gamma_int(n, y)
    return math.log(bracket) - n * math.log(y)


def _gamma_ratio(n: int, x: float) -> float:
    """e^-x x^n / (n gamma(n, x)), the right-hand side of the alpha equation."""
    if x < n + 1:
        return 1.0 / (n * _lower_series(n, x))
    return math.exp(-x) * x**n / (n * lower_incomplete_gamma_int(n, x))


# ---------------------------------------------------------------------------
# the feasibility function


def cone_measure_exp(theta: float, N: int) -> float:
    return math.sin(theta) ** (2 * N - 2)


def F_value(theta: float, alpha: float, beta: float, N: int) -> float:
    """Constraint function; the ansatz is feasible iff min over theta >= offset."""
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    if not 0.0 <= theta <= math.pi / 2 + 1e-15:
        raise DomainError(f"theta = {theta} outside [0, pi/2]")
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    s2, c2 = math.sin(theta) ** 2, math.cos(theta) ** 2
    if theta >= math.pi / 2:
        s2, c2 = 1.0, 0.0
    S = s2 ** (N - 1)
    y = alpha * S * c2
    return -S * (beta + alpha * (s2 / N + c2)) - log_bracket_ratio(N, y)


def theta_m(N: int) -> float:
    """Half-angle with sin^(2N-2) = 1/N."""
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    return math.asin(N ** (-1.0 / (2 * N - 2)))


def alpha_approx(N: int) -> float:
    """alpha with the incomplete-gamma term dropped."""
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    return N * N * (N + 1) / (N - (N + 1) * N ** (1.0 / (1 - N)))


def beta_of_alpha(alpha: float, N: int) -> float:
    r = N ** (1.0 / (1 - N))
    beta = ((1.0 / (1.0 - r) - 1.0) / N - 2.0) * alpha / (N + 1)
    lo, hi = -2.0 * alpha / (N + 1), -alpha / (N + 1)
    if not lo - 1e-9 <= beta <= hi + 1e-9:
        raise RegionViolation(f"beta = {beta} outside [{lo}, {hi}] for alpha = {alpha}, N = {N}")
    return beta


def objective(alpha: float, beta: float, N: int, theta: float | None = None) -> float:
    """beta/N + 2 alpha/(N(N+1)) + F at the minimizing angle (nats)."""
    th = theta_m(N) if theta is None else theta
    return beta / N + 2.0 * alpha / (N * (N + 1)) + F_value(th, alpha, beta, N)


def bound_approx_nats(N: int) -> float:
    _check_supported(N)
    r = N ** (1.0 / (1 - N))
    num = N * (N + 1) * (r - 1.0) * math.exp(-1.0)
    den = ((1 + N) * r - N) * math.gamma(N) ** (1.0 / (N - 1))
    return (N - 1) * math.log(num / den)


def bound_approx_bits(N: int) -> float:
    return bound_approx_nats(N) / LOG2


def alpha_residual(alpha: float, N: int) -> tuple[float, float]:
    """Residual of the implicit alpha equation and its derivative in alpha."""
    c2 = math.cos(theta_m(N)) ** 2
    k = N ** (N / (1.0 - N)) - 1.0 / (N + 1)
    x = c2 * alpha / N
    R = _gamma_ratio(N - 1, x)
    value = k * alpha / N + 1.0 - R
    # d/dx [e^-x x^n / (n gamma(n,x))] = R (n (1 - R)/x - 1)
    dR = R * ((N - 1) * (1.0 - R) / x - 1.0) if x > 0 else 0.0
    return value, k / N - dR * c2 / N


def alpha_exact(N: int, tol: float = 1e-12, max_iter: int = 100) -> float:
    """Newton solve of the implicit alpha equation, safeguarded by bisection."""
    _check_supported(N)
    a0 = alpha_approx(N)
    lo, hi = 0.5 * a0, 4.0 * a0
    f_lo, _ = alpha_residual(lo, N)
    alpha = a0
    for _ in range(max_iter):
        f, df = alpha_residual(alpha, N)
        if abs(f) <= tol:
            return alpha
        if (f > 0) == (f_lo > 0):
            lo, f_lo = alpha, f
        else:
            hi = alpha
        step = alpha - f / df if df != 0 else math.nan
        alpha = step if lo < step < hi else 0.5 * (lo + hi)
    f, _ = alpha_residual(alpha, N)
    raise NonConvergence(max_iter, abs(f))


@dataclass(frozen=True)
class BoundRow:
    N: int
    alpha: float
    beta: float
    theta_m: float
    bound_bits_approx: float
    bound_bits_refined: float

    @property
    def bound_nats_approx(self) -> float:
        return self.bound_bits_approx * LOG2

    @property
    def bound_nats_refined(self) -> float:
        return self.bound_bits_refined * LOG2


def bound_refined_bits(N: int, tol: float = 1e-12) -> BoundRow:
    _check_supported(N)
    alpha = alpha_exact(N, tol)
    beta = beta_of_alpha(alpha, N)
    th = theta_m(N)
    return BoundRow(N, alpha, beta, th, bound_approx_bits(N), objective(alpha, beta, N, th) / LOG2)


def f_profile(N: int, alpha: float, beta: float, grid_points: int) -> list[tuple[float, float]]:
    """F on the uniform grid theta_i = i * (pi/2) / grid_points, i = 1..grid_points."""
    if grid_points < 2:
        raise DomainError("need at least two grid points")
    step = (math.pi / 2) / grid_points
    return [(i * step, F_value(i * step, alpha, beta, N)) for i in range(1, grid_points + 1)]


def bound_table() -> list[dict]:
    """Bounds for N = 2, 3, 4 next to the reference values they are compared with."""
    rows = []
    for N in SUPPORTED_N:
        row = bound_refined_bits(N)
        entry = asdict(row)
        entry["trivial_bits"] = 1.0
        entry["log2N_bits"] = math.log2(N)
        entry["exceeds_trivial"] = row.bound_bits_refined > 1.0
        entry["exceeds_log2N"] = row.bound_bits_refined > math.log2(N)
        if N == 2:
            entry["prior_bound_bits"] = PRIOR_N2_BOUND_BITS
            entry["exceeds_prior_bound"] = row.bound_bits_refined > PRIOR_N2_BOUND_BITS
        rows.append(entry)
    return rows


def fig2_rows() -> list[dict]:
    """Bound-versus-N rows; the N-1 column is a plotting reference only, never a proven bound."""
    out = []
    for N in SUPPORTED_N:
        row = bound_refined_bits(N)
        out.append(
            {
                "N": N,
                "bound_refined_bits": row.bound_bits_refined,
                "bound_approx_bits": row.bound_bits_approx,
                "reference_doublecap": N - 1,
                "reference_trivial": 1,
            }
        )
    return out


def ansatz_dual_lambda(states: np.ndarray, axes: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Discretize the ansatz on finite state/axis samples as lambda[s, a, b].

    Integrals over axes become averages over the M samples, so each entry
    carries a 1/M weight.  The offset is left at zero; normalization fixes it.
    """
    overlap = np.abs(states.conj() @ axes.T) ** 2  # (a, b)
    M = axes.shape[0]
    lam = np.zeros((2,) + overlap.shape)
    lam[0] = (alpha * overlap + beta) / M
    return lam
