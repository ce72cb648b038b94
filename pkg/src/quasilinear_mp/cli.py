"""Command line interface: ``check``, ``solve``, ``verify`` and ``rates``.

Exit codes: 0 success, 1 error (bad input, I/O, solver failure), 2 failed
hypothesis, failed verification threshold or trivial solution.
"""

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, require
from .exceptions import DomainError, EndpointSearchError, PotentialOverflowError, SolverDivergenceError
from .exponents import existence_check, fmt
from .mesh import MeshMismatchError, RadialFunction
from .mountain_pass import solve
from .potentials import envelope_check, hypothesis_H_check
from .verify import embedding_rate_fit, verify_solution

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
U64_MAX = 2 ** 64 - 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(payload):
    """Stable serialization: sorted keys, fixed indentation, no timestamp."""
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def write_json(path, payload):
    body = dict(payload)
    body["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    Path(path).write_text(dump_json(body), encoding="utf-8")


def _out_dir(args, cfg):
    out = Path(args.out if args.out else cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    return out


def _seed(args, cfg):
    return cfg.solver["seed"] if args.seed is None else args.seed


def _threads(args, cfg):
    return cfg.solver["threads"] if args.threads is None else args.threads


def _admissibility(cfg):
    kind, q1, q2, theta = cfg.nonlinearity_args()
    return existence_check(cfg.envelopes_zero, cfg.envelopes_infinity, q1, q2, theta, cfg.N)


def _sampled_checks(cfg):
    """Sampled checks of (H) and of the declared envelopes; warnings only."""
    if cfg.V is None or cfg.K is None:
        return {}
    V, K = cfg.build_potentials()
    sup_h, ok_h = hypothesis_H_check(V)
    out = {"H": {"sup_V_r2": sup_h, "ok": ok_h}, "envelopes": []}
    for side, envs in (("zero", cfg.envelopes_zero), ("infinity", cfg.envelopes_infinity)):
        for env in envs:
            sup, ok = envelope_check(K, V, env, side)
            out["envelopes"].append({"side": side, **env.to_dict(), "sup_ratio": sup, "ok": ok})
    return out


def _print_table(rep, sampled):
    rows = [
        ("N", rep.N),
        ("envelope at 0 (alpha, beta)", f"({fmt(rep.env0.alpha)}, {fmt(rep.env0.beta)})"),
        ("envelope at inf (alpha, beta)", f"({fmt(rep.env_inf.alpha)}, {fmt(rep.env_inf.beta)})"),
        ("alpha*(beta0)", fmt(rep.alpha_star_0)),
        ("q0*", fmt(rep.q0_star)),
        ("q_inf*", fmt(rep.q_inf_star)),
        ("q1 range", rep.q1_interval),
        ("q2 lower bound", fmt(rep.q2_lower)),
        ("q1 existence interval", rep.existence_interval_q1),
        ("single-power interval", rep.single_power_interval),
        ("q1, q2, theta", f"{fmt(rep.q1)}, {fmt(rep.q2)}, {fmt(rep.theta)}"),
        ("delta0", "-" if rep.delta_zero is None else fmt(rep.delta_zero)),
        ("delta_inf", "-" if rep.delta_infinity is None else fmt(rep.delta_infinity)),
        ("status", "admissible" if rep.existence_ok else "inadmissible"),
    ]
    width = max(len(k) for k, _ in rows)
    for key, val in rows:
        print(f"{key:<{width}}  {val}")
    for reason in rep.reasons:
        print(f"  reason [{reason.code}]: {reason.message}")
    for note in rep.notes:
        print(f"  note: {note}")
    if sampled:
        if not sampled["H"]["ok"]:
            print("  warning: sampled V(r) r^2 keeps growing near 0; (H) may fail")
        for env in sampled["envelopes"]:
            if not env["ok"]:
                print(f"  warning: sampled K/(r^alpha V^beta) unbounded near {env['side']} "
                      f"for alpha={env['alpha']}, beta={env['beta']}")


def cmd_check(args):
    cfg = load_config(args.config)
    require(cfg, "envelopes", "q1")
    rep = _admissibility(cfg)
    sampled = _sampled_checks(cfg)
    out = _out_dir(args, cfg)
    _print_table(rep, sampled)
    write_json(out / "check.json", {
        "command": "check",
        "config": cfg.to_dict(),
        "admissibility": rep.to_dict(),
        "sampled_checks": sampled,
    })
    return EXIT_OK if rep.existence_ok else EXIT_FAIL


def _write_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "max_energy", "grad_norm"])
        for k, e, g in history:
            writer.writerow([int(k), repr(float(e)), repr(float(g))])


def _residual_summary(u, energy):
    from .verify import dual_ode_profile, original_equation_profile, weak_form_defect

    w = RadialFunction(u.mesh, energy.transform.f(u.values))
    dual = dual_ode_profile(u, energy.V, energy.K, energy.g, energy.transform)
    orig = original_equation_profile(w, energy.V, energy.K, energy.g)
    return {
        "dual_residual": dual.max_rel,
        "dual_residual_raw": dual.max_raw,
        "original_residual": orig.max_rel,
        "original_residual_raw": orig.max_raw,
        "weak_defect": weak_form_defect(w, u, energy.V, energy.K, energy.g, energy.transform),
    }


def cmd_solve(args):
    cfg = load_config(args.config)
    require(cfg, "V", "K", "q1")
    admissible = None
    adm_dict = None
    if cfg.envelopes_zero and cfg.envelopes_infinity:
        rep = _admissibility(cfg)
        admissible = rep.existence_ok
        adm_dict = rep.to_dict()
        if not admissible and not args.force:
            for reason in rep.reasons:
                print(f"inadmissible [{reason.code}]: {reason.message}", file=sys.stderr)
            print("use --force to solve anyway", file=sys.stderr)
            return EXIT_FAIL
    elif not args.force:
        print("no envelopes declared; hypotheses cannot be checked (use --force)", file=sys.stderr)
        return EXIT_FAIL
    out = _out_dir(args, cfg)
    energy = cfg.build_energy(strict=not args.force)
    s = cfg.solver
    outside = admissible is not True
    payload = {"command": "solve", "config": cfg.to_dict(), "admissibility": adm_dict,
               "seed": _seed(args, cfg), "threads": _threads(args, cfg)}
    try:
        report = solve(
            energy, P=s["P"], rho=s["rho"], samples=s["samples"], seed=_seed(args, cfg),
            deform_tol=s["deform_tol"], deform_max_iter=s["deform_max_iter"], tol=s["tol"],
            newton_max_iter=s["newton_max_iter"], threads=_threads(args, cfg),
        )
    except SolverDivergenceError as exc:
        if exc.iterate is not None:
            exc.iterate.to_csv(out / "u_partial.csv")
        if exc.history:
            _write_history(out / "history.csv", exc.history)
        payload["error"] = str(exc)
        write_json(out / "solve.json", payload)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (EndpointSearchError, DomainError) as exc:
        payload["error"] = str(exc)
        write_json(out / "solve.json", payload)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report.outside_hypotheses = outside
    if outside:
        report.notes.append("outside theorem hypotheses")
    report.residuals = _residual_summary(report.u, energy)
    report.u.to_csv(out / "u.csv")
    report.w.to_csv(out / "w.csv")
    _write_history(out / "history.csv", report.history)
    payload["report"] = report.to_dict()
    payload["mesh"] = energy.mesh.params()
    write_json(out / "solve.json", payload)
    print(f"status      {report.status}")
    print(f"I(u)        {report.energy:.12g}")
    print(f"grad norm   {report.grad_norm:.3e}")
    print(f"alpha_hat   {report.certificate.alpha_hat:.6g} at rho={report.rho:.6g} (empirical)")
    print(f"min u       {report.min_u:.3e}")
    if outside:
        print("note        outside theorem hypotheses")
    return EXIT_OK if report.converged else EXIT_ERROR


def cmd_verify(args):
    cfg = load_config(args.config)
    require(cfg, "V", "K", "q1")
    out = _out_dir(args, cfg)
    mesh = cfg.build_mesh()
    path = Path(args.solution) if args.solution else out / "u.csv"
    u = RadialFunction.from_csv(path, mesh)
    V, K = cfg.build_potentials()
    g = cfg.build_nonlinearity(strict=False)
    vcfg = cfg.verify
    thresholds = {
        "weak_defect": vcfg["weak_defect_tol"],
        "order_min": vcfg["order_min"],
        "order_max": vcfg["order_max"],
        "decay_slack": vcfg["decay_slack"],
    }
    rep = verify_solution(u, V, K, g, thresholds=thresholds,
                          study=vcfg["convergence_study"], seed=_seed(args, cfg),
                          threads=_threads(args, cfg))
    write_json(out / "verify.json", {
        "command": "verify",
        "config": cfg.to_dict(),
        "solution": str(path),
        "report": rep.to_dict(),
    })
    print(f"dual ODE residual (rel)       {rep.dual_residual:.3e}")
    print(f"original residual (rel)       {rep.original_residual:.3e}")
    print(f"identity discrepancy (rel)    {rep.identity_discrepancy:.3e}")
    print(f"weak-form defect              {rep.weak_defect:.3e}")
    print(f"decay ratio / library max     {rep.decay_ratio:.4g} / {rep.decay_library_max:.4g}")
    if rep.kink_radii:
        print(f"kinks at r = {', '.join(f'{x:.6g}' for x in rep.kink_radii)}; "
              f"residual there {rep.kink_dual_residual:.3e}")
    if rep.convergence:
        c = rep.convergence
        print(f"residual ratio under halving  {c['ratio']:.3f} (order {c['order']:.3f})")
    for name, ok in sorted(rep.passed.items()):
        print(f"{name:<30}{'pass' if ok else 'FAIL'}")
    if rep.trivial:
        print("trivial solution")
        return EXIT_FAIL
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_rates(args):
    from .exponents import _best_envelope_infinity, _best_envelope_zero

    cfg = load_config(args.config)
    require(cfg, "V", "K", "envelopes", "q1")
    out = _out_dir(args, cfg)
    V, K = cfg.build_potentials()
    _, q1, q2, _ = cfg.nonlinearity_args()
    r = cfg.rates
    plan = [
        ("zero", r["q_zero"] if r["q_zero"] is not None else q1, _best_envelope_zero(cfg.envelopes_zero, cfg.N)),
        ("infinity", r["q_infinity"] if r["q_infinity"] is not None else q2,
         _best_envelope_infinity(cfg.envelopes_infinity, cfg.N)),
    ]
    fits = []
    for side, q, env in plan:
        fit = embedding_rate_fit(q, env, side, V, K, samples=r["samples"], seed=_seed(args, cfg),
                                 threads=_threads(args, cfg), N=cfg.N)
        fit.to_csv(out / f"rates_{side}.csv")
        fits.append(fit)
        print(f"{side:<9} q={fmt(fit.q):<6} delta_hat={fit.delta_hat:.4f} "
              f"predicted={fmt(fit.delta_predicted)} monotone={fit.monotone}")
    write_json(out / "rates.json", {
        "command": "rates",
        "config": cfg.to_dict(),
        "fits": [f.to_dict() for f in fits],
    })
    return EXIT_OK if all(f.monotone for f in fits) else EXIT_FAIL


def _u64(text):
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="quasilinear-mp",
        description="Radial ground states of a quasilinear Schroedinger equation by the dual approach.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("check", "exponent admissibility of the configured problem"),
        ("solve", "mountain-pass solve; writes u.csv, w.csv, history.csv, solve.json"),
        ("verify", "residual suite on a solution CSV; writes verify.json"),
        ("rates", "embedding decay rate fits; writes rates_*.csv, rates.json"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR", help="output directory (default from [output] dir)")
        p.add_argument("--seed", type=_u64, metavar="U64")
        p.add_argument("--threads", type=_positive_int, metavar="N")
        p.add_argument("--force", action="store_true", help="run even when hypotheses fail")
        if name == "verify":
            p.add_argument("--solution", metavar="PATH", help="u profile CSV (default OUT/u.csv)")
    return parser


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "verify": cmd_verify, "rates": cmd_rates}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except MeshMismatchError as exc:
        print(f"mesh mismatch: {exc}", file=sys.stderr)
    except PotentialOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
