"""Command-line front end.

Subcommands: ``estimate``, ``decompose``, ``synth``, ``bench``, ``verify``.

Exit codes: 0 success, 2 bad input or flags, 3 assumption violated,
4 solver did not converge (best iterate still written), 5 verification
failed.
"""

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import io
from .assembler import estimate, structured_objective
from .exceptions import (
    AssumptionViolated,
    MaxIterationsExceeded,
    NotPositiveDefinite,
    OracleTimeout,
    PartitionMismatch,
)
from .extensions import write_partition
from .graph import (
    bridge_block_decomposition,
    connected_components,
    find_bridges,
    support_graph,
    threshold,
    ThresholdedMatrix,
)
from .matrix_core import factorize, invert, objective
from .subsolver import SolverConfig, kkt_residual, solve_subproblem
from .synthetic import (
    GeneratorConfig,
    build_regularizer,
    make_instance,
    ratio_of_improvement,
    save_manifest,
)
from .verifier import BUILD_R_MAX_P, build_R, verify_inverse

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_NOCONV, EXIT_VERIFY = 0, 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _positive_int(text):
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _add_input(p, lam=True):
    g = p.add_argument_group("input")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--cov", help="covariance matrix (Matrix Market)")
    src.add_argument("--data", help="samples as CSV, n rows by p columns")
    g.add_argument("--ddof", type=int, default=0, help="covariance normalization n - ddof")
    if lam:
        g.add_argument("--lambda", dest="lam", help="regularization weights (Matrix Market)")
        g.add_argument("--chi", type=float, default=None, help="derive weights chi / (|theta0| + eps)")
        g.add_argument("--eps", type=float, default=1e-3)


def _add_solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--max-iter", type=_positive_int, default=100_000)
    g.add_argument("--method", choices=("pgd", "bcd"), default="pgd")
    g.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    g.add_argument("--no-decompose", action="store_true")


def build_parser():
    parser = _Parser(prog="mtp2bbd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the precision matrix")
    _add_input(p)
    _add_solver(p)
    p.add_argument("--out", required=True, help="output precision matrix (Matrix Market)")
    p.add_argument("--report", help="JSON report")
    p.add_argument("--trace", help="CSV trace of relative error (needs --reference)")
    p.add_argument("--reference", help="reference optimum for --trace (Matrix Market)")
    p.add_argument("--seed", type=int, default=0, help="echoed into the report")

    p = sub.add_parser("decompose", help="bridges and clusters of the thresholded graph")
    _add_input(p)
    p.add_argument("--report", help="JSON report")
    p.add_argument("--partition-out", help="cluster file, one 1-based cluster per line")

    p = sub.add_parser("synth", help="generate a synthetic instance")
    _add_generator(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bench", help="relative-error traces and ratio-of-improvement tables")
    _add_generator(p, required=False)
    p.add_argument("--cov")
    p.add_argument("--lambda", dest="lam")
    _add_solver(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target-re", type=float, default=1e-6)
    p.add_argument("--budget", type=float, default=None, help="seconds per monolithic run")
    p.add_argument("--grid-K", type=_positive_int, nargs="*", default=None)
    p.add_argument("--grid-size", type=_positive_int, nargs="*", default=[16, 32])
    p.add_argument("--trials", type=_positive_int, default=5)
    p.add_argument("--alpha", type=float, default=0.8, help="community weight for grid instances")

    p = sub.add_parser("verify", help="certify a precision matrix")
    _add_input(p)
    p.add_argument("--theta", required=True, help="precision matrix to check (Matrix Market)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--inverse", action="store_true", help="also check theta R - I with the explicit R")
    p.add_argument("--cutoff", type=float, default=1e-10, help="magnitude treated as zero")
    p.add_argument("--report", help="JSON report")
    return parser


def _add_generator(p, required=True):
    g = p.add_argument_group("generator")
    g.add_argument("--model", choices=("ba", "sbm", "chain"), default="ba")
    g.add_argument("--p", type=_positive_int, required=required)
    g.add_argument("--m", type=_positive_int, default=1)
    g.add_argument("--blocks", type=_positive_int, default=4)
    g.add_argument("--p-in", type=float, default=0.3)
    g.add_argument("--p-out", type=float, default=0.005)
    g.add_argument("--n", type=_positive_int, default=None, help="samples (default 10 p)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chi", type=float, default=0.05)
    g.add_argument("--eps", type=float, default=1e-3)


def _generator_config(args):
    return GeneratorConfig(
        p=args.p, model=args.model, m=args.m, blocks=args.blocks, p_in=args.p_in,
        p_out=args.p_out, seed=args.seed, n_samples=args.n, chi=args.chi, eps=args.eps,
    )


def _load_problem(args):
    if args.cov:
        S = io.read_matrix(args.cov)
    else:
        S = io.covariance_from_data(io.read_data_csv(args.data), args.ddof)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise io.FormatError(f"covariance must be square, got {S.shape}")
    lam = getattr(args, "lam", None)
    chi = getattr(args, "chi", None)
    if lam and chi is not None:
        raise io.FormatError("--lambda and --chi are mutually exclusive")
    if lam:
        Lam = io.read_matrix(lam)
        if Lam.shape != S.shape:
            raise io.FormatError(f"lambda shape {Lam.shape} does not match {S.shape}")
    elif chi is not None:
        Lam = build_regularizer(S, chi, args.eps)
    else:
        raise io.FormatError("one of --lambda or --chi is required")
    return S, Lam


def _solver_config(args):
    return SolverConfig(
        tolerance=args.tol, max_iterations=args.max_iter, method=args.method
    )


def cmd_estimate(args):
    S, Lam = _load_problem(args)
    cfg = _solver_config(args)
    if args.trace and not args.reference:
        raise io.FormatError("--trace needs --reference")
    status = EXIT_OK
    try:
        sol, report = estimate(S, Lam, cfg, decompose=not args.no_decompose, threads=args.threads)
    except MaxIterationsExceeded as exc:
        sol, report = exc.result
        status = EXIT_NOCONV
        print(f"warning: {exc}", file=sys.stderr)
    io.write_sparse(args.out, sol.theta)
    data = report.to_dict()
    data["config"].update(seed=args.seed, decompose=not args.no_decompose)
    data["written"] = str(args.out)
    if args.report:
        io.write_json(args.report, data)
    if args.trace:
        _write_estimate_trace(args, S, Lam, cfg, sol, report)
    print(
        f"p={report.p} edges={report.n_edges} bridges={report.n_bridges} K={report.K} "
        f"kkt={report.kkt_residual:.3e} objective={report.objective:.12g} "
        f"total_ms={report.total_ms:.1f} converged={report.converged}"
    )
    return status


def _write_estimate_trace(args, S, Lam, cfg, sol, report):
    # monolithic: one row per iteration; decomposed: the finished pipeline only
    f_star = objective(io.read_matrix(args.reference), S, Lam)
    rows = []
    if args.no_decompose:
        t0 = time.perf_counter()

        def record(it, theta, f):
            rows.append((it, time.perf_counter() - t0, f, abs(f - f_star) / abs(f_star)))

        solve_subproblem(S, Lam, cfg.with_(on_max_iter="return"), callback=record)
    else:
        f = report.objective
        rows.append((max(report.cluster_iterations), report.total_ms / 1e3, f, abs(f - f_star) / abs(f_star)))
    _write_csv(args.trace, ("iteration", "seconds", "objective", "relative_error"), rows)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_decompose(args):
    S, Lam = _load_problem(args)
    t0 = time.perf_counter()
    T = threshold(S, Lam)
    G = support_graph(T)
    B = find_bridges(G)
    P = bridge_block_decomposition(G, B)
    ms = (time.perf_counter() - t0) * 1e3
    data = {
        "p": P.p,
        "n_edges": T.nnz,
        "n_bridges": len(B),
        "bridges": [[i + 1, j + 1] for i, j in B],
        "K": P.K,
        "cluster_sizes": P.sizes,
        "decomposition_ms": ms,
    }
    if args.report:
        io.write_json(args.report, data)
    if args.partition_out:
        write_partition(P, args.partition_out)
    print(f"p={P.p} edges={T.nnz} bridges={len(B)} K={P.K} largest={max(P.sizes)}")
    for i, j in B:
        print(f"bridge {i + 1} {j + 1}")
    return EXIT_OK


def cmd_synth(args):
    cfg = _generator_config(args)
    inst = make_instance(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_sparse(out / "A.mtx", inst.A)
    io.write_sparse(out / "theta_true.mtx", sp.csr_array(inst.theta_true))
    io.write_dense(out / "S.mtx", inst.S)
    io.write_dense(out / "Lambda.mtx", inst.Lam)
    save_manifest(inst, out / "manifest.json")
    print(f"wrote instance p={inst.p} n={cfg.n} seed={inst.seed_used} to {out}")
    return EXIT_OK


def _decomposed_sweep(S, Lam, cfg, threads, f_star, tols=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9)):
    rows = []
    for tol in tols:
        t0 = time.perf_counter()
        sol, _ = estimate(S, Lam, cfg.with_(tolerance=tol, on_max_iter="return"), threads=threads)
        elapsed = time.perf_counter() - t0
        f = structured_objective(sol, S, Lam)
        rows.append((tol, elapsed, f, abs(f - f_star) / abs(f_star)))
    return rows


def _bench_single(args, S, Lam, out):
    cfg = _solver_config(args)
    ref, _ = estimate(S, Lam, cfg.with_(tolerance=min(cfg.tolerance, 1e-10), on_max_iter="return"), threads=args.threads)
    f_star = structured_objective(ref, S, Lam)
    mono = []
    t0 = time.perf_counter()

    def record(it, theta, f):
        el = time.perf_counter() - t0
        mono.append((it, el, f, abs(f - f_star) / abs(f_star)))
        return args.budget is not None and el > args.budget

    solve_subproblem(S, Lam, cfg.with_(on_max_iter="return"), callback=record)
    _write_csv(out / "trace_monolithic.csv", ("iteration", "seconds", "objective", "relative_error"), mono)
    dec = _decomposed_sweep(S, Lam, cfg, args.threads, f_star)
    _write_csv(out / "trace_decomposed.csv", ("tolerance", "seconds", "objective", "relative_error"), dec)
    hit_m = next((r[1] for r in mono if r[3] < args.target_re), None)
    hit_d = next((r[1] for r in dec if r[3] < args.target_re), None)
    if hit_m is None or hit_d is None:
        print(f"target RE {args.target_re:g} not reached (partial traces written)")
        return EXIT_OK
    print(f"monolithic {hit_m:.3f}s decomposed {hit_d:.3f}s ratio {hit_m / hit_d:.1f}")
    return EXIT_OK


def _bench_grid(args, out):
    cfg = _solver_config(args)
    rows = []
    for K in args.grid_K:
        for size in args.grid_size:
            ratios, partial = [], False
            for trial in range(args.trials):
                gcfg = GeneratorConfig(
                    p=K * size, model="chain", blocks=K, seed=args.seed + trial,
                    chi=args.chi, eps=args.eps,
                )
                inst = make_instance(gcfg, community_alpha=args.alpha)
                try:
                    r = ratio_of_improvement(
                        inst.S, inst.Lam, cfg, args.target_re, args.budget, args.threads
                    ).ratio
                except OracleTimeout as exc:
                    r, partial = exc.lower_bound, True
                ratios.append(r)
            rows.append((K, size, float(np.median(ratios)), *ratios, partial))
            print(f"K={K} size={size} median ratio={np.median(ratios):.2f}{' (partial)' if partial else ''}")
    header = ("K", "cluster_size", "median_ratio", *[f"trial_{t}" for t in range(args.trials)], "timed_out")
    _write_csv(out / "ratio_table.csv", header, rows)
    return EXIT_OK


def cmd_bench(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.grid_K:
        return _bench_grid(args, out)
    if args.cov:
        if not args.lam:
            raise io.FormatError("--cov needs --lambda")
        S, Lam = io.read_matrix(args.cov), io.read_matrix(args.lam)
    elif args.p:
        inst = make_instance(_generator_config(args))
        S, Lam = inst.S, inst.Lam
    else:
        raise io.FormatError("bench needs --cov/--lambda, generator flags or --grid-K")
    return _bench_single(args, S, Lam, out)


def certify(theta, S, Lam, tol=1e-8, cutoff=1e-10, inverse=False):
    """Checks run by ``verify``; returns a dict with an overall ``passed``."""
    theta = np.asarray(theta, dtype=float)
    p = S.shape[0]
    if theta.shape != S.shape:
        raise io.FormatError(f"theta shape {theta.shape} does not match {S.shape}")
    out = {"p": p}
    T = threshold(S, Lam)
    off = np.abs(theta) > cutoff
    np.fill_diagonal(off, False)
    tmask = T.to_dense() != 0
    contained = not np.any(off & ~tmask)
    out["support_contained"] = bool(contained)
    out["sign_pattern"] = bool(np.all(theta[off] < 0))
    try:
        F = factorize(theta)
        R = invert(F)
        out["positive_definite"] = True
        out["kkt_residual"] = kkt_residual(theta, R, S, Lam, zero_cutoff=cutoff)
    except NotPositiveDefinite:
        out["positive_definite"] = False
        out["kkt_residual"] = float("inf")
    rows, cols = np.nonzero(np.triu(off, 1))
    G_theta = support_graph(ThresholdedMatrix.from_entries(p, rows, cols, theta[rows, cols]))
    G_T = support_graph(T)
    comp_T = int(connected_components(G_T).max() + 1)
    comp_theta = int(connected_components(G_theta).max() + 1)
    out["components_T"] = comp_T
    out["components_theta"] = comp_theta
    B_T = find_bridges(G_T)
    B_theta = set(find_bridges(G_theta))
    out["bridges_preserved"] = all(b in B_theta for b in B_T)
    passed = (
        contained and out["sign_pattern"] and out["positive_definite"]
        and out["kkt_residual"] <= tol and comp_T == comp_theta and out["bridges_preserved"]
    )
    if inverse:
        out["inverse_residual"] = _explicit_inverse_residual(theta, S, T, G_T, B_T)
        passed = passed and out["inverse_residual"] <= tol
    out["passed"] = bool(passed)
    return out


def _explicit_inverse_residual(theta, S, T, G, B):
    if S.shape[0] > BUILD_R_MAX_P:
        raise io.FormatError(f"--inverse supports p <= {BUILD_R_MAX_P}")
    P = bridge_block_decomposition(G, B)
    z = np.zeros(P.p)
    for i, j in B:
        t = T.get(i, j)
        r = t * t / (S[i, i] * S[j, j] - t * t)
        z[i] += r / S[i, i]
        z[j] += r / S[j, j]
    subs = []
    for idx in P.clusters:
        block = theta[np.ix_(idx, idx)] - np.diag(z[idx])
        try:
            subs.append(invert(factorize(block)))
        except NotPositiveDefinite:
            return float("inf")
    R = build_R(subs, P, T, S)
    return verify_inverse(theta, R).residual


def cmd_verify(args):
    S, Lam = _load_problem(args)
    theta = io.read_matrix(args.theta)
    res = certify(theta, S, Lam, args.tol, args.cutoff, args.inverse)
    for key in (
        "kkt_residual", "inverse_residual", "positive_definite", "sign_pattern",
        "support_contained", "components_T", "components_theta", "bridges_preserved",
    ):
        if key in res:
            val = res[key]
            print(f"{key}: {val:.3e}" if isinstance(val, float) else f"{key}: {val}")
    print("PASS" if res["passed"] else "FAIL")
    if args.report:
        io.write_json(args.report, res)
    return EXIT_OK if res["passed"] else EXIT_VERIFY


COMMANDS = {
    "estimate": cmd_estimate,
    "decompose": cmd_decompose,
    "synth": cmd_synth,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "data", None) is None and getattr(args, "ddof", 0) != 0:
            raise io.FormatError("--ddof only applies to --data")
        return COMMANDS[args.command](args)
    except AssumptionViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (io.FormatError, PartitionMismatch, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
