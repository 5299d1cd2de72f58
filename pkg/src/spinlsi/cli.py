"""Command-line interface: model ingestion, subcommand dispatch, report
persistence, and plot-data emission.

Reports are JSON with floats serialized at 17 significant digits (lossless
round-trip, diff-friendly); traces and tables are CSV. Identical inputs and
seeds produce byte-identical report bodies; the timestamp lives in a separate
top-level field.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import exact, flow, glauber, inequalities, mcmc, model

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VIOLATION = 2
EXIT_NONCONVERGED = 3


class ViolationError(RuntimeError):
    """A verification subcommand found real violations."""


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    if x == int(x) and abs(x) < 1e16:
        return format(x, ".1f")
    return format(x, ".17g")


def dumps_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {dumps_json(obj[k], indent + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        parts = [f"{inner}{dumps_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, np.ndarray):
        return dumps_json(obj.tolist(), indent)
    return json.dumps(obj)


def write_report(args, payload: dict, name: str = "report.json") -> None:
    document = {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                "report": payload}
    text = dumps_json(document) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
        print(f"wrote {out / name}")
    else:
        print(text, end="")


def write_csv(args, rows, header, name: str) -> Path | None:
    if not args.out:
        return None
    traces = Path(args.out) / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    path = traces / name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v
                             for v in row])
    print(f"wrote {path}")
    return path


def _load_model(args) -> model.ModelSpec:
    if not args.model:
        raise ValueError("--model <file> is required for this subcommand")
    spec = model.load_model_spec(args.model)
    if args.beta is not None:
        spec.beta = float(args.beta)
        if spec.alpha is not None and spec.alpha <= spec.beta:
            spec.alpha = None
    if args.alpha is not None:
        if args.alpha <= spec.beta:
            raise ValueError("--alpha must exceed beta")
        spec.alpha = float(args.alpha)
    return spec


def _model_payload(spec: model.ModelSpec, coupling: model.CouplingMatrix) -> dict:
    return {"spec": spec.to_dict(),
            "n": spec.n,
            "normalization": coupling.normalization.to_dict()
            if coupling.normalization else None,
            "raw_beta_factor": coupling.normalization.scale
            if coupling.normalization else None}


def _cmd_bound(args) -> int:
    spec = _load_model(args)
    coupling = model.build_coupling(spec)
    report = flow.lsi_bound(coupling, spec.beta, grid=args.grid,
                            tol=args.tol, alpha=spec.alpha_value)
    payload = {"model": _model_payload(spec, coupling),
               "bound": report.to_dict()}
    write_csv(args, list(zip(map(float, report.t_grid),
                             map(float, report.chi_values))),
              ["t", "chi"], "chi_grid.csv")
    if args.two_point_radius:
        # uncertified variant: the integrand susceptibility replaced by the
        # spectral radius of the two-point function on the same grid
        radii = [exact.two_point_spectral_radius(coupling, float(t))
                 for t in report.t_grid]
        payload["two_point_radius_grid"] = radii
        payload["two_point_radius_note"] = "uncertified alternative integrand"
    write_report(args, payload)
    return EXIT_NONCONVERGED if report.flags else EXIT_OK


def _cmd_exact(args) -> int:
    spec = _load_model(args)
    coupling = model.build_coupling(spec)
    ens = exact.build_ensemble(coupling, spec.beta, spec.field_vector())
    rows = exact.susceptibility_rows(coupling, spec.beta)
    payload = {
        "model": _model_payload(spec, coupling),
        "log_z": ens.log_z,
        "susceptibility": float(rows.max()),
        "susceptibility_argmax_site": int(rows.argmax()),
        "susceptibility_rows": rows.tolist(),
        "magnetization": exact.magnetization(ens).tolist(),
    }
    if spec.n <= exact.MATRIX_CAP:
        payload["two_point"] = exact.two_point_matrix(ens).tolist()
        payload["two_point_spectral_radius"] = exact.two_point_spectral_radius(
            coupling, spec.beta)
    write_report(args, payload)
    return EXIT_OK


def _cmd_gap(args) -> int:
    spec = _load_model(args)
    coupling = model.build_coupling(spec)
    gen = glauber.build_generator(coupling, spec.beta, spec.field_vector())
    payload = {"model": _model_payload(spec, coupling),
               "spectral_gap": glauber.spectral_gap(gen),
               "conditional_gap_min": glauber.conditional_gap_min(gen)}
    write_report(args, payload)
    return EXIT_OK


def _cmd_lsi(args) -> int:
    spec = _load_model(args)
    coupling = model.build_coupling(spec)
    gen = glauber.build_generator(coupling, spec.beta, spec.field_vector())
    est = glauber.estimate_inverse_lsi(gen, restarts=args.restarts,
                                       iters=args.iters, tol=args.tol,
                                       seed=args.seed, threads=args.threads)
    payload = {"model": _model_payload(spec, coupling),
               "inverse_lsi_lower_bound": est.ratio,
               "converged": est.converged,
               "candidates": est.candidates}
    write_csv(args, est.trace, ["iteration", "ratio"], "lsi_trace.csv")
    write_report(args, payload)
    return EXIT_OK if est.converged else EXIT_NONCONVERGED


def _cmd_decay(args) -> int:
    spec = _load_model(args)
    coupling = model.build_coupling(spec)
    gen = glauber.build_generator(coupling, spec.beta, spec.field_vector())
    rng = np.random.default_rng(args.seed)
    F0 = rng.random(gen.states) + 0.05
    times = np.linspace(0.0, args.tmax, args.points)[1:]
    trace = glauber.entropy_decay_trace(gen, F0, times)
    write_csv(args, [(float(t), float(e)) for t, e in trace],
              ["time", "entropy"], "decay.csv")
    report = flow.lsi_bound(coupling, spec.beta, grid=args.grid, tol=args.tol)
    rate = 1.0 / report.bound_upper
    payload = {"model": _model_payload(spec, coupling),
               "entropy_initial": float(trace[0, 1]),
               "entropy_final": float(trace[-1, 1]),
               "guaranteed_rate": rate,
               "bound_upper": report.bound_upper}
    write_report(args, payload)
    return EXIT_OK


def _cmd_corollary(args) -> int:
    value = flow.meanfield_corollary(args.D, args.beta_c, args.beta, args.L)
    payload = {"D": args.D, "beta_c": args.beta_c, "beta": args.beta,
               "L": args.L, "bound": value}
    write_report(args, payload)
    return EXIT_OK


def _cmd_verify(args) -> int:
    spec = _load_model(args)
    coupling = model.build_coupling(spec)
    label = spec.label()
    ts = [float(v) for v in args.t.split(",")] if args.t else [spec.beta]
    reports = []
    violations = 0

    if args.what in ("fkg", "monotone", "pf"):
        fn = {"fkg": inequalities.check_fkg,
              "monotone": inequalities.check_field_monotonicity,
              "pf": inequalities.check_pf_chain}[args.what]
        for t in ts:
            rep = fn(coupling, t, count=args.count, seed=args.seed, model=label)
            reports.append(rep.to_dict())
            violations += rep.violations
    elif args.what == "decomposition":
        sched = flow.CovarianceSchedule(coupling.matrix, spec.alpha_value, spec.beta)
        rng = np.random.default_rng(args.seed)
        F = rng.random(1 << spec.n) + 0.1
        for t in ts:
            t = min(t, spec.beta * 0.999)
            check = flow.verify_decomposition(sched, t, spec.field_vector(), F,
                                              seed=args.seed)
            reports.append({"t": t, "residual": check.residual,
                            "convolution_residual": check.convolution_residual,
                            "certified": check.certified})
            if check.residual > args.tol:
                violations += 1
    elif args.what == "entropy-decomp":
        sched = flow.CovarianceSchedule(coupling.matrix, spec.alpha_value, spec.beta)
        rng = np.random.default_rng(args.seed)
        F = rng.random(1 << spec.n) + 0.1
        check = flow.verify_entropy_decomposition(sched, spec.field_vector(), F)
        reports.append({"residual": check.residual})
        if check.residual > args.tol:
            violations += 1
    elif args.what == "criterion":
        sched = flow.CovarianceSchedule(coupling.matrix, spec.alpha_value, spec.beta)
        rng = np.random.default_rng(args.seed)
        worst = np.inf
        for t in ts:
            t = min(max(t, 1e-6 * spec.beta), spec.beta * 0.999)
            hs = rng.standard_normal((args.count, spec.n))
            phis = rng.standard_normal((args.count, spec.n))
            slacks = flow.criterion_slack_batch(sched, t, hs, phis)
            worst = min(worst, float(slacks.min()))
            if float(slacks.min()) < -1e-9:
                violations += 1
        reports.append({"worst_slack": worst, "tolerance": 1e-9})
    elif args.what == "theorem":
        betas = ([float(v) for v in args.betas.split(",")]
                 if args.betas else [spec.beta])
        check = inequalities.check_theorem(coupling, betas,
                                           field_count=args.count,
                                           seed=args.seed, model=label,
                                           threads=args.threads)
        reports.append(check.to_dict())
        violations += check.violations
    else:
        raise ValueError(f"unknown verification {args.what!r}")

    write_report(args, {"model": _model_payload(spec, coupling),
                        "check": args.what, "reports": reports,
                        "violations": violations})
    return EXIT_VIOLATION if violations else EXIT_OK


def _cmd_mcmc(args) -> int:
    if args.scaling:
        sizes = [int(v) for v in args.sizes.split(",")]
        betas = [float(v) for v in args.betas.split(",")]
        rows = mcmc.scaling_study(args.family, sizes, betas, args.D,
                                  args.beta_c, J=args.J,
                                  periodic=args.periodic, sweeps=args.sweeps,
                                  burn_in=args.burn_in, chains=args.chains,
                                  batches=args.batches, seed=args.seed)
        write_csv(args, [(r.size, r.beta, r.chi_hat, r.chi_se, r.bound_value,
                          r.corollary_value) for r in rows],
                  ["L", "beta", "chi_hat", "chi_se", "bound_value",
                   "corollary_value"], "scaling.csv")
        write_report(args, {"rows": [r.to_dict() for r in rows]})
        return EXIT_OK
    spec = _load_model(args)
    config = mcmc.ChainConfig(model=spec, sweeps=args.sweeps,
                              burn_in=args.burn_in, thinning=args.thinning,
                              chains=args.chains, batches=args.batches,
                              seed=args.seed)
    est = mcmc.estimate_susceptibility(config)
    coupling = model.build_coupling(spec)
    payload = {"model": _model_payload(spec, coupling),
               "config": {"sweeps": config.sweeps, "burn_in": config.burn_in,
                          "thinning": config.thinning, "chains": config.chains,
                          "batches": config.batches, "seed": config.seed,
                          "scan": config.scan},
               "estimate": est.to_dict()}
    write_report(args, payload)
    return EXIT_NONCONVERGED if "chain_disagreement" in est.flags else EXIT_OK


def _cmd_report(args) -> int:
    if not args.out:
        raise ValueError("report bundling requires --out <dir>")
    out = Path(args.out)
    bundle = {}
    for path in sorted(out.glob("*.json")):
        if path.name == "bundle.json":
            continue
        with open(path) as fh:
            bundle[path.stem] = json.load(fh)
    traces = sorted(str(p.relative_to(out)) for p in (out / "traces").glob("*.csv")) \
        if (out / "traces").exists() else []
    document = {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                "report": {"bundled": bundle, "traces": traces}}
    (out / "bundle.json").write_text(dumps_json(document) + "\n")
    print(f"wrote {out / 'bundle.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model spec JSON file")
    common.add_argument("--beta", type=float, default=None,
                        help="override the spec inverse temperature")
    common.add_argument("--alpha", type=float, default=None,
                        help="override the flow shift parameter")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--out", help="output directory for reports and traces")
    common.add_argument("--grid", type=int, default=256,
                        help="initial susceptibility grid size")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for batch checks")

    parser = argparse.ArgumentParser(
        prog="spinlsi",
        description="Susceptibility-driven log-Sobolev bounds for "
                    "ferromagnetic Glauber dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", parents=[common],
                       help="certified enclosure of the susceptibility-integral bound")
    p.add_argument("--two-point-radius", action="store_true",
                   help="also report the uncertified spectral-radius integrand")
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("exact", parents=[common],
                       help="exact susceptibility, two-point matrix, logZ")
    p.set_defaults(fn=_cmd_exact)

    p = sub.add_parser("gap", parents=[common], help="spectral gap of the generator")
    p.set_defaults(fn=_cmd_gap)

    p = sub.add_parser("lsi", parents=[common],
                       help="multistart lower bound on the inverse log-Sobolev constant")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--iters", type=int, default=300)
    p.set_defaults(fn=_cmd_lsi)

    p = sub.add_parser("verify", parents=[common], help="batch verification checks")
    p.add_argument("what", choices=["fkg", "monotone", "pf", "decomposition",
                                    "entropy-decomp", "criterion", "theorem"])
    p.add_argument("--count", type=int, default=1000, help="samples per check")
    p.add_argument("--t", help="comma-separated inverse temperatures")
    p.add_argument("--betas", help="comma-separated betas for the theorem check")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("decay", parents=[common], help="entropy decay trace CSV")
    p.add_argument("--tmax", type=float, default=2.0)
    p.add_argument("--points", type=int, default=41)
    p.set_defaults(fn=_cmd_decay)

    p = sub.add_parser("corollary", parents=[common],
                       help="mean-field closed-form bounds")
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--beta-c", dest="beta_c", type=float, required=True)
    p.add_argument("--L", type=float, default=None)
    p.set_defaults(fn=_cmd_corollary)

    p = sub.add_parser("mcmc", parents=[common],
                       help="heat-bath susceptibility estimate or scaling study")
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=200)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--batches", type=int, default=32)
    p.add_argument("--scaling", action="store_true")
    p.add_argument("--family", default="grid2d")
    p.add_argument("--sizes", default="8,16")
    p.add_argument("--betas", default="0.1,0.2,0.3")
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--beta-c", dest="beta_c", type=float, default=1.0)
    p.set_defaults(fn=_cmd_mcmc)

    p = sub.add_parser("report", parents=[common],
                       help="bundle prior outputs into one JSON")
    p.set_defaults(fn=_cmd_report)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except flow.NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except ViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
