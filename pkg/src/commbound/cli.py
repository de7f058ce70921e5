"""Command-line front end.

Exit codes: 0 ok, 1 invalid input, 2 infeasible or unsupported certificate,
3 digest mismatch, 4 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .analytic import bound_refined_bits, bound_table, f_profile, fig2_rows
from .cbox import DEFAULT_CAP, CBox, Prior, check_cap, dumps_box, validate_cbox
from .dual import (
    Certificate,
    DualOptions,
    check_certificate,
    make_certificate,
    maximize_dual,
)
from .errors import (
    CommBoundError,
    DigestMismatch,
    Infeasible,
    InvalidInput,
    NonConvergence,
    SizeOverflow,
)
from .info import to_bits
from .primal import PrimalOptions, minimize_mutual_info, outer_maximize_prior
from .quantum import (
    PureState,
    TwoOutcomeMeasurement,
    build_quantum_cbox,
    cone_measure,
    haar_vectors,
    mc_cone_measure,
    mc_overlap_moment,
    overlap_moment_exact,
)

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_DIGEST, EXIT_OVERFLOW = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _read_json(path: str):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 (byte offset {exc.start})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise InputError(
            f"{path}: malformed JSON at byte offset {offset} (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc


def _load_box(path: str) -> CBox:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object with a 'probs' table")
    return CBox.from_dict(doc)


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def _dump_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _cap(args) -> int:
    if getattr(args, "cap", None) is not None:
        return args.cap
    env = os.environ.get("CBOX_CAP")
    if env:
        try:
            return int(float(env))
        except ValueError as exc:
            raise InputError(f"CBOX_CAP={env!r} is not an integer") from exc
    return DEFAULT_CAP


def _count(text: str) -> int:
    value = float(text)
    if value < 1 or value != int(value):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return int(value)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    box = _load_box(args.box)
    sums = box.probs.sum(axis=2)
    print(f"a_count={box.a_count} m_count={box.m_count} s_count={box.s_count} tuples={box.n_tuples}")
    print(f"row sums: min={float(sums.min())!r} max={float(sums.max())!r} max|1-sum|={np.abs(1 - sums).max():.3g}")
    return EXIT_OK


def _read_vectors(path: str, key: str) -> list[PureState]:
    doc = _read_json(path)
    vecs = doc.get(key) if isinstance(doc, dict) else doc
    if not isinstance(vecs, list) or not vecs:
        raise InputError(f"{path}: expected a nonempty list under '{key}'")
    out = []
    for i, vec in enumerate(vecs):
        try:
            amps = [complex(*x) if isinstance(x, list) else complex(x) for x in vec]
            out.append(PureState.normalized(amps))
        except (TypeError, ValueError, InvalidInput) as exc:
            raise InputError(f"{path}: vector {i}: {exc}") from exc
    return out


def cmd_quantum(args) -> int:
    seeds = np.random.SeedSequence(args.seed).spawn(2)
    if args.states:
        states = _read_vectors(args.states, "states")
    else:
        N, count = args.haar
        states = [PureState(v) for v in haar_vectors(N, count, seeds[0])]
    if args.axes:
        axis_states = _read_vectors(args.axes, "axes")
    else:
        axis_states = [PureState(v) for v in haar_vectors(states[0].dim, args.haar_axes, seeds[1])]
    box = build_quantum_cbox(states, [TwoOutcomeMeasurement(s) for s in axis_states])
    _write(dumps_box(box) + "\n", args.output)
    return EXIT_OK


def _load_prior(choice: str, box: CBox, opts: PrimalOptions):
    if choice == "uniform":
        return Prior.uniform(box.a_count), None
    if choice == "optimal":
        return outer_maximize_prior(box, opts)
    doc = _read_json(choice)
    prior = Prior.from_dict(doc)
    if prior.a_count != box.a_count:
        raise InputError(f"prior has {prior.a_count} entries, box has {box.a_count} inputs")
    return prior, None


def cmd_bound(args) -> int:
    box = _load_box(args.box)
    cap = _cap(args)
    check_cap(box.s_count, box.m_count, cap)
    opts = PrimalOptions(gap_tol=args.tol, cap=cap, max_iter=args.max_iter)
    prior, primal = _load_prior(args.prior, box, opts)

    report: dict = {"box": args.box, "method": args.method, "prior": prior.weights.tolist()}
    if primal is None:
        try:
            primal = minimize_mutual_info(box, prior, opts)
            converged = True
        except NonConvergence as exc:
            primal, converged = exc.result, False
    else:
        converged = True

    lower = primal.dual_bound_nats
    if args.method in ("primal", "both"):
        doc = primal.to_report(include_coupling=args.include_coupling)
        doc["converged"] = converged
        report["primal"] = doc
    if args.method in ("dual", "both"):
        init = None if args.cold else primal.dual_point.lam
        dopts = DualOptions(max_iter=args.dual_iter, step0=1.0 if args.cold else 1e-3, cap=cap, init=init)
        dual = maximize_dual(box, prior, dopts)
        lower = max(lower, dual.bound_nats)
        report["dual"] = {
            "bound_bits": dual.bound_bits,
            "bound_nats": dual.bound_nats,
            "iterations": dual.iterations,
        }
        cert = make_certificate(box, prior, dual.point, dual.bound_nats)
        cert_path = args.cert or os.path.splitext(args.box)[0] + ".cert.json"
        _write(cert.dumps() + "\n", cert_path)
        report["dual"]["certificate"] = cert_path
        if args.method == "both":
            report["gap_nats"] = primal.value_nats - dual.bound_nats
    # only dual-certified numbers are labelled as bounds
    report["lower_bound_bits"] = to_bits(lower)
    report["lower_bound_nats"] = lower
    _write(_dump_json(report), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    box = _load_box(args.box)
    doc = _read_json(args.cert)
    if not isinstance(doc, dict):
        raise InputError(f"{args.cert}: expected a JSON object")
    cert = Certificate.from_dict(doc)
    try:
        vb = check_certificate(cert, box, _cap(args))
    except DigestMismatch as exc:
        _err(str(exc))
        return EXIT_DIGEST
    except Infeasible as exc:
        _err(f"infeasible: violation {exc.violation!r} at outcome tuple {list(exc.witness)}")
        return EXIT_INFEASIBLE
    out = {
        "verified_bound_bits": vb.bound_bits,
        "verified_bound_nats": vb.bound_nats,
        "claimed_bound_bits": vb.claimed_bits,
        "max_violation": vb.max_violation,
        "claim_supported": vb.claim_supported,
    }
    _write(_dump_json(out), args.output)
    if not vb.claim_supported:
        _err(f"claimed {vb.claimed_bits!r} bits exceeds the verified {vb.bound_bits!r} bits")
        return EXIT_INFEASIBLE
    return EXIT_OK


TABLE_COLUMNS = [
    "N", "bound_bits_approx", "bound_bits_refined", "trivial_bits", "log2N_bits",
    "prior_bound_bits", "exceeds_trivial", "exceeds_log2N", "exceeds_prior_bound",
    "alpha", "beta", "theta_m",
]
FIG2_COLUMNS = ["N", "bound_refined_bits", "bound_approx_bits", "reference_doublecap", "reference_trivial"]


def cmd_analytic(args) -> int:
    if args.table:
        rows, columns = bound_table(), TABLE_COLUMNS
    elif args.fig2:
        rows, columns = fig2_rows(), FIG2_COLUMNS
        if args.format == "json":
            rows = {"rows": rows, "reference_doublecap_label": "conjecture-based reference, not a proven bound"}
    else:
        N, grid = args.fig1
        row = bound_refined_bits(N)
        rows = [{"theta": t, "F": f, "N": N} for t, f in f_profile(N, row.alpha, row.beta, grid)]
        columns = ["theta", "F", "N"]
    text = _dump_json(rows) if args.format == "json" else _dump_csv(rows, columns)
    _write(text, args.output)
    return EXIT_OK


MC_COLUMNS = ["quantity", "N", "theta", "estimate", "stderr", "expected", "z"]


def _mc_row(quantity, N, theta, est, se, expected):
    z = (est - expected) / se if se > 0 else (0.0 if est == expected else math.inf)
    return {"quantity": quantity, "N": N, "theta": theta, "estimate": est, "stderr": se,
            "expected": expected, "z": z}


def cmd_mc(args) -> int:
    rows = []
    if args.moments:
        N, samples, seed = args.moments
        for k in (2, 4):
            est, se = mc_overlap_moment(N, k, samples, seed)
            rows.append(_mc_row(f"moment{k}", N, "", est, se, overlap_moment_exact(N, k)))
    else:
        N, theta, samples, seed = args.cone
        est, se = mc_cone_measure(theta, N, samples, seed)
        rows.append(_mc_row("cone_measure", N, theta, est, se, cone_measure(theta, N)))
    _write(_dump_csv(rows, MC_COLUMNS), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="commbound", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a box document")
    v.add_argument("box")
    v.set_defaults(func=cmd_validate)

    q = sub.add_parser("quantum", help="build a box from pure states and two-outcome measurements")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--states", metavar="PATH")
    src.add_argument("--haar", nargs=2, type=_count, metavar=("N", "COUNT"))
    ax = q.add_mutually_exclusive_group(required=True)
    ax.add_argument("--axes", metavar="PATH")
    ax.add_argument("--haar-axes", type=_count, metavar="COUNT")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_quantum)

    b = sub.add_parser("bound", help="compute a certified lower bound")
    b.add_argument("box")
    b.add_argument("--prior", default="uniform", help="uniform, optimal, or a prior JSON file")
    b.add_argument("--method", choices=["primal", "dual", "both"], default="both")
    b.add_argument("--tol", type=float, default=1e-6, help="duality-gap tolerance in nats")
    b.add_argument("--cap", type=_count)
    b.add_argument("--max-iter", type=_count, default=20_000)
    b.add_argument("--dual-iter", type=_count, default=200)
    b.add_argument("--cold", action="store_true", help="start dual ascent from lambda = 0")
    b.add_argument("--cert", metavar="PATH")
    b.add_argument("--include-coupling", action="store_true")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("verify", help="verify a certificate against a box")
    c.add_argument("cert")
    c.add_argument("box")
    c.add_argument("--cap", type=_count)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_verify)

    a = sub.add_parser("analytic", help="closed-form bounds and figure data")
    what = a.add_mutually_exclusive_group(required=True)
    what.add_argument("--table", action="store_true")
    what.add_argument("--fig1", nargs=2, type=_count, metavar=("N", "GRID"))
    what.add_argument("--fig2", action="store_true")
    a.add_argument("--format", choices=["json", "csv"], default="csv")
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_analytic)

    m = sub.add_parser("mc", help="Monte Carlo checks of Haar moments and cone measures")
    mw = m.add_mutually_exclusive_group(required=True)
    mw.add_argument("--moments", nargs=3, metavar=("N", "SAMPLES", "SEED"))
    mw.add_argument("--cone", nargs=4, metavar=("N", "THETA", "SAMPLES", "SEED"))
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_mc)
    return p


def _parse_mc(args, parser) -> None:
    try:
        if args.command == "mc":
            if args.moments:
                N, samples, seed = args.moments
                args.moments = (_count(N), _count(samples), int(seed))
            else:
                N, theta, samples, seed = args.cone
                args.cone = (_count(N), float(theta), _count(samples), int(seed))
    except (ValueError, argparse.ArgumentTypeError) as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _parse_mc(args, parser)
    try:
        return args.func(args)
    except SizeOverflow as exc:
        _err(str(exc))
        return EXIT_OVERFLOW
    except (InputError, CommBoundError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
