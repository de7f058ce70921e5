"""Minimum of I(S;A) over couplings with prescribed per-setting marginals.

The minimizer has the exponential-family form
``rho(s|a) = q(s) * prod_b f_{a,b}(s_b)`` with ``q`` the output mixture, so we
alternate between recomputing ``q`` and I-projecting ``q`` onto the marginal
constraints of each input by iterative proportional fitting.  The fitted
factors double as dual variables: ``lambda(s,a,b) = log f_{a,b}(s)`` is
feasible up to the shift applied by :func:`normalize_feasible`, which gives a
certified lower bound at every iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cbox import CBox, Coupling, Prior, check_cap, from_grid, product_coupling, to_grid
from .dual import DEFAULT_FLOOR, DualPoint, dual_objective, normalize_feasible
from .errors import NonConvergence, ShapeMismatch
from .info import mutual_information, row_divergences, to_bits

log = logging.getLogger(__name__)


@dataclass
class PrimalOptions:
    gap_tol: float = 1e-6
    feas_tol: float = 1e-8
    max_iter: int = 20_000
    ipf_sweeps: int = 200
    ipf_tol: float = 1e-10
    adaptive_fit: bool = True
    cap: int | None = None
    clamp_floor: float = DEFAULT_FLOOR
    init_factors: Optional[np.ndarray] = None


@dataclass
class PrimalResult:
    coupling: Coupling
    value_nats: float
    constraint_violation: float
    prior: Prior
    iterations: int
    dual_bound_nats: float
    dual_point: DualPoint
    factors: np.ndarray = field(repr=False)
    history: list = field(default_factory=list, repr=False)

    @property
    def value_bits(self) -> float:
        return to_bits(self.value_nats)

    @property
    def gap_nats(self) -> float:
        return self.value_nats - self.dual_bound_nats

    def to_report(self, include_coupling: bool = False) -> dict:
        doc = {
            "value_bits": self.value_bits,
            "value_nats": self.value_nats,
            "violation": self.constraint_violation,
            "iterations": self.iterations,
            "prior": self.prior.weights.tolist(),
            "dual_bound_bits": to_bits(self.dual_bound_nats),
        }
        if include_coupling:
            doc["coupling"] = self.coupling.table.tolist()
        return doc


def _expand(vec: np.ndarray, b: int, m_count: int) -> np.ndarray:
    """Reshape (a, s) so it broadcasts along grid axis 1+b."""
    shape = [vec.shape[0]] + [1] * m_count
    shape[1 + b] = vec.shape[1]
    return vec.reshape(shape)


def _ipf(q_grid, target, factors, sweeps, tol):
    """Fit r = q * prod_b f_b to the marginals ``target[a, b, s]``; updates factors in place.

    Returns the fitted grid and the largest marginal deviation seen during
    the final sweep (before each update).
    """
    A, M, S = target.shape
    r = np.broadcast_to(q_grid, (A,) + q_grid.shape[1:]).copy()
    for b in range(M):
        r *= _expand(factors[:, b, :], b, M)
    axes = [tuple(1 + k for k in range(M) if k != b) for b in range(M)]
    violation = math.inf
    for _ in range(sweeps):
        violation = 0.0
        for b in range(M):
            marg = r.sum(axis=axes[b])
            violation = max(violation, float(np.abs(marg - target[:, b, :]).max()))
            ratio = np.divide(target[:, b, :], marg, out=np.zeros_like(marg), where=marg > 0)
            r *= _expand(ratio, b, M)
            factors[:, b, :] *= ratio
        if violation <= tol:
            break
    z = r.sum(axis=tuple(range(1, M + 1)))
    r /= z.reshape((A,) + (1,) * M)
    factors[:, 0, :] /= z[:, None]
    return r, violation


def _violation(table: np.ndarray, box: CBox) -> float:
    grid = to_grid(table, box.s_count, box.m_count)
    M = box.m_count
    worst = 0.0
    for b in range(M):
        marg = grid.sum(axis=tuple(1 + k for k in range(M) if k != b))
        worst = max(worst, float(np.max(np.abs(marg - box.probs[:, b, :]))))
    return worst


def minimize_mutual_info(box: CBox, prior: Prior, opts: PrimalOptions | None = None) -> PrimalResult:
    """Minimize I(S;A) over the coupling set at a fixed prior.

    Stops once the certified gap ``value - dual bound`` drops below
    ``opts.gap_tol`` with marginal violation below ``opts.feas_tol``; raises
    :class:`NonConvergence` (carrying the last iterate) otherwise.
    """
    opts = opts or PrimalOptions()
    A, M, S = box.a_count, box.m_count, box.s_count
    if prior.a_count != A:
        raise ShapeMismatch(f"prior of length {prior.a_count} for box with {A} inputs")
    check_cap(S, M, opts.cap)
    w = prior.weights
    active = w > 0
    target = box.probs[active]
    wa = w[active]

    table = product_coupling(box, opts.cap).table.copy()
    rho = table[active]
    if opts.init_factors is not None:
        factors = np.array(opts.init_factors, dtype=float)[active]
        if factors.shape != target.shape:
            raise ShapeMismatch(f"initial factors {factors.shape}, expected {target.shape}")
        # support reduction: zero probabilities pin their factors to zero
        factors = np.where(target > 0, np.where(factors > 0, factors, 1.0), 0.0)
        q = wa @ rho
        q_grid = to_grid(q[None, :], S, M)
        r, _ = _ipf(q_grid, target, factors, opts.ipf_sweeps, opts.ipf_tol)
        rho = from_grid(r)
    else:
        factors = (target > 0).astype(float)

    q = wa @ rho
    value = float(wa @ row_divergences(rho, q))
    history = [value]
    lam_full = np.zeros((S, A, M))
    dual_pt = DualPoint.zeros(S, A, M)
    dual_val = 0.0
    violation = 0.0

    gap = math.inf
    for it in range(1, opts.max_iter + 1):
        q_grid = to_grid(q[None, :], S, M)
        # loose fits while far from optimal; the dual bound stays valid either way
        fit_tol = max(opts.ipf_tol, min(1e-6, 1e-3 * gap)) if opts.adaptive_fit else opts.ipf_tol
        r, violation = _ipf(q_grid, target, factors, opts.ipf_sweeps, fit_tol)
        rho = from_grid(r)
        q_new = wa @ rho
        new_value = float(wa @ row_divergences(rho, q_new))

        with np.errstate(divide="ignore"):
            lam = np.log(factors)
        lam_full[:] = 0.0
        lam_full[:, active, :] = np.maximum(np.transpose(lam, (2, 0, 1)), opts.clamp_floor)
        dual_pt = normalize_feasible(DualPoint(lam_full, opts.clamp_floor), prior, opts.cap)
        dual_val = dual_objective(dual_pt, box, prior)

        value, q = new_value, q_new
        history.append(value)
        gap = value - dual_val
        if gap <= opts.gap_tol and violation <= opts.feas_tol:
            break
    else:
        it = opts.max_iter

    table[active] = rho
    coupling = Coupling(table, M, S)
    result = PrimalResult(
        coupling=coupling,
        value_nats=max(mutual_information(coupling, prior), 0.0),
        constraint_violation=_violation(table, box),
        prior=prior,
        iterations=it,
        dual_bound_nats=dual_val,
        dual_point=dual_pt,
        factors=_full_factors(factors, active, box),
        history=history,
    )
    if result.gap_nats > opts.gap_tol or result.constraint_violation > max(opts.feas_tol, 1e-6):
        raise NonConvergence(it, result.gap_nats, result)
    log.debug("primal converged in %d iterations, gap %.3g", it, result.gap_nats)
    return result


def _full_factors(factors: np.ndarray, active: np.ndarray, box: CBox) -> np.ndarray:
    full = (box.probs > 0).astype(float)
    full[active] = factors
    return full


@dataclass
class PriorSearch:
    prior: Prior
    result: PrimalResult
    upper_nats: float
    iterations: int


def outer_maximize_prior(
    box: CBox, opts: PrimalOptions | None = None, max_outer: int = 500, prior_tol: float = 1e-6
) -> tuple[Prior, PrimalResult]:
    """Mirror ascent on the prior simplex for max_rho(a) min_V I(S;A).

    The ascent direction is D(rho(.|a) || q) per input (envelope theorem).
    A step is accepted only if it improves the inner minimum; otherwise the
    step size is halved.  ``max_a D(rho(.|a) || q)`` upper-bounds the
    capacity of the current coupling and hence the max-min value, giving a
    stopping gap.
    """
    search = _prior_search(box, opts or PrimalOptions(), max_outer, prior_tol)
    return search.prior, search.result


def _prior_search(box: CBox, opts: PrimalOptions, max_outer: int, prior_tol: float) -> PriorSearch:
    A = box.a_count
    prior = Prior.uniform(A)
    res = minimize_mutual_info(box, prior, opts)
    if A == 1:
        return PriorSearch(prior, res, res.value_nats, 0)
    step = 1.0
    upper = math.inf
    it = 0
    for it in range(1, max_outer + 1):
        q = prior.weights @ res.coupling.table
        d = row_divergences(res.coupling.table, q)
        upper = float(d.max())
        if upper - res.value_nats <= prior_tol or step < 1e-10:
            break
        w = prior.weights * np.exp(step * (d - d.max()))
        cand = Prior.normalized(w)
        trial_opts = PrimalOptions(**{**opts.__dict__, "init_factors": res.factors})
        trial = minimize_mutual_info(box, cand, trial_opts)
        if trial.value_nats > res.value_nats:
            prior, res = cand, trial
            step = min(step * 1.5, 8.0)
        else:
            step *= 0.5
    return PriorSearch(prior, res, upper, it)


def lower_bound_at_prior(box: CBox, prior: Prior, opts: PrimalOptions | None = None) -> float:
    """Lower bound, in bits, on both the asymptotic and one-shot communication cost."""
    return minimize_mutual_info(box, prior, opts).value_bits
