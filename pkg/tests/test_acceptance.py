"""Acceptance suite.  Each test records one PASS/FAIL line, printed in the
terminal summary under "acceptance criteria"."""

import itertools
import math
import time

import numpy as np
import pytest

from commbound.analytic import (
    PRIOR_N2_BOUND_BITS,
    bound_approx_bits,
    bound_refined_bits,
    f_profile,
    upper_incomplete_gamma_int,
)
from commbound.cbox import Coupling, Prior, check_membership_V, from_grid, product_coupling, to_grid
from commbound.dual import (
    Certificate,
    DualOptions,
    DualPoint,
    check_certificate,
    dual_objective,
    duality_gap,
    make_certificate,
    max_violation,
    normalize_feasible,
)
from commbound.errors import Infeasible
from commbound.info import mutual_information
from commbound.primal import PrimalOptions, _ipf, minimize_mutual_info
from commbound.quantum import mc_overlap_moment

import conftest
from conftest import independent_box, quantum_box, random_box


@pytest.fixture
def record(request):
    label = request.node.function.__doc__.strip().splitlines()[0]
    state = {"detail": ""}
    yield state
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    conftest.ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}  {state['detail']}".rstrip())


def test_c1_approx_bounds(record):
    """1. approximate closed-form bounds"""
    expected = {2: 1.14227, 3: 1.86776, 4: 2.45238}
    worst_err, worst_t = 0.0, 0.0
    for N, ref in expected.items():
        t = min(_timed(bound_approx_bits, N) for _ in range(20))
        val = bound_approx_bits(N)
        worst_err, worst_t = max(worst_err, abs(val - ref)), max(worst_t, t)
        assert abs(val - ref) <= 1e-4
        assert t < 1e-3
    record["detail"] = f"max err {worst_err:.1e} bits, slowest {worst_t * 1e6:.0f} us"


def test_c2_refined_bounds(record):
    """2. Newton-refined bounds"""
    expected = {2: 1.14602, 3: 1.87606, 4: 2.46463}
    worst = 0.0
    for N, ref in expected.items():
        row = bound_refined_bits(N)
        worst = max(worst, abs(row.bound_bits_refined - ref))
        assert abs(row.bound_bits_refined - ref) <= 1e-3
        assert row.bound_bits_refined >= row.bound_bits_approx
    record["detail"] = f"max err {worst:.1e} bits"


def test_c3_comparisons(record):
    """3. bounds beat 1 bit and log2 N; N=2 stays below 1+log2(pi/e)"""
    for N in (2, 3, 4):
        b = bound_refined_bits(N).bound_bits_refined
        assert b > 1.0 and b > math.log2(N)
    assert bound_refined_bits(2).bound_bits_refined < PRIOR_N2_BOUND_BITS
    assert PRIOR_N2_BOUND_BITS == pytest.approx(1.2088, abs=1e-4)


def test_c4_profile_minimum(record):
    """4. profile minimum sits at the predicted angle"""
    G = 1000
    step = (math.pi / 2) / G
    offsets = []
    for N in (2, 3, 4):
        row = bound_refined_bits(N)
        prof = f_profile(N, row.alpha, row.beta, G)
        vals = np.array([f for _, f in prof])
        i = int(np.argmin(vals))
        offsets.append(abs(prof[i][0] - row.theta_m) / step)
        assert abs(prof[i][0] - row.theta_m) <= step
        assert vals[0] > vals[i] and vals[-1] > vals[i]
    record["detail"] = f"max offset {max(offsets):.2f} grid steps"


def test_c5_haar_moments(record):
    """5. Haar overlap moments"""
    t0 = time.perf_counter()
    worst = 0.0
    for N in (2, 3, 4):
        for k, exact in ((2, 1 / N), (4, 2 / (N * (N + 1)))):
            est, se = mc_overlap_moment(N, k, 10**6, 1000 + N)
            z = abs(est - exact) / se
            worst = max(worst, z)
            assert z <= 5
    elapsed = time.perf_counter() - t0
    assert elapsed < 30
    record["detail"] = f"max |z| {worst:.2f}, {elapsed:.1f} s"


def _feasible_coupling(box, rng):
    S, M = box.s_count, box.m_count
    q = rng.random(S**M) + 0.05
    r, _ = _ipf(to_grid(q[None, :], S, M), box.probs, (box.probs > 0).astype(float), 5000, 1e-14)
    return Coupling(from_grid(r), M, S)


def test_c6_duality(record):
    """6. duality at desk scale"""
    rng = np.random.default_rng(2024)
    worst_gap = 0.0
    for i in range(20):
        A, M = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        box = random_box(rng, A, M) if i % 2 else quantum_box(int(rng.integers(2, 5)), A, M, 500 + i)
        prior = Prior(rng.dirichlet(np.ones(A)))

        def feasible(it, point, value, prior=prior, box=box):
            c, _ = max_violation(point, prior)
            assert c <= 1e-12
            assert abs(dual_objective(point, box, prior) - value) <= 1e-12

        dopts = DualOptions(max_iter=200, step0=1e-3, callback=feasible)
        p, d, gap = duality_gap(box, prior, PrimalOptions(), dopts)
        worst_gap = max(worst_gap, gap)
        assert -1e-9 <= gap <= 1e-3

        # weak duality against independently built feasible couplings
        primal_vals = [mutual_information(product_coupling(box), prior)]
        for _ in range(3):
            c = _feasible_coupling(box, rng)
            assert check_membership_V(c, box, 1e-9).member
            primal_vals.append(mutual_information(c, prior))
        primal_vals.append(p)
        duals = [d] + [
            dual_objective(normalize_feasible(DualPoint(rng.normal(scale=3, size=(2, A, M))), prior), box, prior)
            for _ in range(20)
        ]
        assert max(duals) <= min(primal_vals) + 1e-9
    record["detail"] = f"max gap {worst_gap:.1e} nats"


def test_c7_exact_values(record, identity_box, uniform2):
    """7. exact small-instance values"""
    p, d, _ = duality_gap(identity_box, uniform2)
    assert abs(p / math.log(2) - 1.0) <= 1e-4 and abs(d / math.log(2) - 1.0) <= 1e-4
    rng = np.random.default_rng(7)
    worst = 0.0
    for A, M, S in ((2, 1, 2), (3, 2, 2), (4, 3, 2), (2, 2, 3)):
        box = independent_box(rng, A, M, S)
        prior = Prior(rng.dirichlet(np.ones(A)))
        p0, d0, _ = duality_gap(box, prior)
        worst = max(worst, abs(p0), abs(d0))
        assert abs(p0) <= 1e-9 and abs(d0) <= 1e-9
    record["detail"] = f"identity {p / math.log(2):.6f}/{d / math.log(2):.6f} bits, independent max {worst:.1e}"


def _naive_violation(lam, w):
    S, A, M = lam.shape
    worst, arg = -math.inf, None
    for sv in itertools.product(range(S), repeat=M):
        v = math.log(sum(w[a] * math.exp(sum(lam[s, a, b] for b, s in enumerate(sv))) for a in range(A)))
        if v > worst:
            worst, arg = v, sv
    return worst, arg


def test_c8_certificate_fuzz(record):
    """8. certificate soundness under fuzzing"""
    rng = np.random.default_rng(8)
    rejected = accepted = 0
    for i in range(100):
        A, M = int(rng.integers(2, 4)), int(rng.integers(1, 4))
        box = random_box(rng, A, M)
        prior = Prior(rng.dirichlet(np.ones(A)))
        res = minimize_mutual_info(box, prior, PrimalOptions(gap_tol=1e-4))
        lam = res.dual_point.lam.copy()
        mode = i % 3
        if mode == 0:
            lam += rng.normal(scale=0.3, size=lam.shape)
        elif mode == 1:
            lam[tuple(rng.integers(0, n) for n in lam.shape)] += rng.uniform(0.1, 3.0)
        else:
            lam -= rng.uniform(0, 0.5, size=lam.shape)
        doc = make_certificate(box, prior, res.dual_point, res.dual_bound_nats).to_dict()
        doc["lambda"] = lam.tolist()
        doc["clamp_floor"] = min(doc["clamp_floor"], float(lam.min()))
        cert = Certificate.from_dict(doc)
        true_c, _ = _naive_violation(lam, prior.weights)
        grad = np.transpose(box.probs * prior.weights[:, None, None], (2, 0, 1))
        true_value = float(np.sum(grad * lam)) - true_c  # objective after exact normalization
        try:
            vb = check_certificate(cert, box)
        except Infeasible as exc:
            rejected += 1
            w_c = math.log(
                sum(
                    prior.weights[a] * math.exp(sum(lam[s, a, b] for b, s in enumerate(exc.witness)))
                    for a in range(A)
                )
            )
            assert w_c > 1e-9
            continue
        accepted += 1
        assert vb.bound_nats <= true_value + 1e-12
    assert rejected > 0 and accepted > 0
    record["detail"] = f"{accepted} accepted, {rejected} rejected with witness"


def test_c9_gamma_recurrence(record):
    """9. incomplete gamma recurrence"""
    worst = 0.0
    for n in range(1, 16):
        for x in np.linspace(0.0, 64.0, 257):
            lhs = upper_incomplete_gamma_int(n + 1, x)
            rhs = n * upper_incomplete_gamma_int(n, x) + x**n * math.exp(-x)
            rel = abs(lhs - rhs) / abs(rhs)
            worst = max(worst, rel)
            assert rel <= 1e-12
    record["detail"] = f"max rel err {worst:.1e}"


def _timed(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0
