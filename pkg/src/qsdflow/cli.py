"""Command-line driver: classify, flow, phi, qsd, dsbp, simulate, verify.

Every artifact embeds a run manifest (tool version, subcommand, parameters,
seed where randomness is involved, and a short hash of all of it) so that a
reported number can be traced back to the exact invocation that produced it.
Artifact bodies are deterministic: identical manifests reproduce identical
bytes, independent of --threads. When --out names a file, a sidecar
PATH.manifest.json is written next to it carrying the same manifest plus a
wall-clock timestamp; the timestamp lives only in the sidecar so that the
artifact itself stays reproducible.

Grids and path tables are CSV (first line is a `# manifest:` comment, cells
printed with 17 significant digits); classification and verification reports
are JSON. Exit codes: 0 success, 1 contract error, 2 numeric error, 3 failed
verification suite, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import pathlib
import sys
from dataclasses import asdict
from datetime import datetime, timezone

from . import __version__
from .discrete import (
    DiscreteBranching,
    SibuyaOffspring,
    dsbp_F,
    dsbp_classify,
    dsbp_qsd_pmf,
)
from .errors import ContractError, NumericError
from .fixtures import ALL_FIXTURES, load_fixture, load_model
from .flows import FlowConfig, phi_explosive, phi_extinction, u_flow
from .mechanisms import classify
from .montecarlo import SimConfig, simulate_csbp, simulate_dsbp, simulate_feller_paths
from .qsd import QsdSpec, qsd_laplace
from .verify import canonical_report_json, run_suites

__all__ = ["main"]


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(64, f"{self.prog}: error: {message}\n")


def _float_list(text: str):
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one number")
    return vals


def _json_safe(obj):
    """Make a parameter tree JSON-serializable; non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if obj is None or isinstance(obj, (int, str)):
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return _json_safe(obj.item())
    return str(obj)


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _manifest(subcommand: str, params: dict, seed: int | None = None) -> dict:
    man = {
        "tool": "qsdflow",
        "version": __version__,
        "subcommand": subcommand,
        "params": _json_safe(params),
    }
    if seed is not None:
        man["seed"] = int(seed)
    man["hash"] = hashlib.sha256(_canon(man).encode("utf-8")).hexdigest()[:16]
    return man


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if hasattr(v, "item"):
        v = v.item()
        if isinstance(v, int):
            return str(v)
    return format(float(v), ".17g")


def _write_artifact(args, text: str, manifest: dict) -> None:
    out = getattr(args, "out", "-") or "-"
    # bare format words mean "stdout in that format"; both formats are implied
    # by the subcommand anyway
    if out in ("-", "csv", "json"):
        sys.stdout.write(text)
        return
    path = pathlib.Path(out)
    path.write_text(text, encoding="utf-8")
    sidecar = dict(manifest)
    sidecar["artifact"] = path.name
    sidecar["timestamp"] = datetime.now(timezone.utc).isoformat()
    path.with_name(path.name + ".manifest.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _emit_csv(args, manifest: dict, header, rows, comments=()) -> None:
    buf = io.StringIO()
    buf.write("# manifest: " + _canon(manifest) + "\n")
    for line in comments:
        buf.write("# " + line + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    _write_artifact(args, buf.getvalue(), manifest)


def _emit_json(args, payload: dict, manifest: dict) -> None:
    _write_artifact(args, json.dumps(payload, indent=2, sort_keys=True) + "\n", manifest)


def _load_model_arg(spec: str):
    """Resolve --mech: a JSON file on disk, else a shipped fixture name."""
    path = pathlib.Path(spec)
    if path.exists():
        return load_model(path)
    name = spec[:-5] if spec.endswith(".json") else spec
    try:
        return load_fixture(name)
    except (ContractError, FileNotFoundError):
        raise ContractError(
            f"cannot load mechanism {spec!r}: not a file on disk and not one of "
            f"the shipped fixtures ({', '.join(ALL_FIXTURES)})"
        )


def _require_continuous(model, command: str):
    if isinstance(model, DiscreteBranching):
        raise ContractError(
            f"{command} expects a continuous-state mechanism; use the dsbp "
            "subcommand for discrete models"
        )
    return model


def _flow_config(args) -> FlowConfig:
    return FlowConfig(
        rel_tol=args.tol,
        abs_tol=min(1e-12, args.tol),
        backend=getattr(args, "backend", "phi_inversion"),
    )


def _resolve_regime(requested: str, cls) -> str:
    if requested != "auto":
        return requested
    return "explosive" if cls.almost_sure_explosion else "extinction"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_classify(args) -> int:
    model = _load_model_arg(args.mech)
    if isinstance(model, DiscreteBranching):
        c = dsbp_classify(model)
        cls = {"kind": "dsbp", "explosive_as": c.explosive_as, "beta0": c.beta0}
    else:
        cls = {"kind": "csbp", **asdict(classify(model))}
    manifest = _manifest("classify", {"mechanism": model.to_config()})
    _emit_json(args, {"manifest": manifest, "classification": _json_safe(cls)}, manifest)
    return 0


def _cmd_flow(args) -> int:
    model = _require_continuous(_load_model_arg(args.mech), "flow")
    cfg = _flow_config(args)
    manifest = _manifest(
        "flow",
        {
            "mechanism": model.to_config(),
            "t": args.t,
            "lambda": args.lam,
            "backend": args.backend,
            "tol": args.tol,
        },
    )
    rows = []
    for t in args.t:
        for lam in args.lam:
            res = u_flow(model, t, lam, cfg)
            rows.append((t, lam, res.value, res.achieved_error_estimate, res.agreement_gap))
    _emit_csv(args, manifest, ("t", "lambda", "u", "err_estimate", "backend_gap"), rows)
    return 0


def _cmd_phi(args) -> int:
    model = _require_continuous(_load_model_arg(args.mech), "phi")
    regime = _resolve_regime(args.regime, classify(model))
    fn = phi_explosive if regime == "explosive" else phi_extinction
    manifest = _manifest(
        "phi", {"mechanism": model.to_config(), "lambda": args.lam, "regime": regime}
    )
    rows = [(lam, fn(model, lam)) for lam in args.lam]
    _emit_csv(args, manifest, ("lambda", "phi"), rows)
    return 0


def _cmd_qsd(args) -> int:
    model = _require_continuous(_load_model_arg(args.mech), "qsd")
    regime = _resolve_regime(args.regime, classify(model))
    spec = QsdSpec(mech=model, beta=args.beta, regime=regime)
    cfg = _flow_config(args)
    manifest = _manifest(
        "qsd",
        {
            "mechanism": model.to_config(),
            "beta": args.beta,
            "regime": regime,
            "t": args.t,
            "lambda": args.lam,
            "tol": args.tol,
        },
    )
    phi_fn = phi_explosive if regime == "explosive" else phi_extinction
    rows = []
    for t in args.t:
        for lam in args.lam:
            u = u_flow(model, t, lam, cfg).value
            shifted = phi_fn(model, u) - t
            if regime == "explosive":
                transform = math.exp(-spec.beta * shifted)
            else:
                transform = -math.expm1(-spec.beta * shifted)
            limit = qsd_laplace(spec, lam)
            rows.append((t, lam, transform, limit, abs(transform - limit)))
    _emit_csv(args, manifest, ("t", "lambda", "transform", "limit", "gap"), rows)
    return 0


def _dsbp_model(args) -> DiscreteBranching:
    if args.mech is not None:
        model = _load_model_arg(args.mech)
        if not isinstance(model, DiscreteBranching):
            raise ContractError("dsbp expects a discrete model (family dsbp)")
        return model
    if args.alpha is None:
        raise ContractError("provide --mech or --alpha to define the offspring law")
    return DiscreteBranching(c=args.c, xi=SibuyaOffspring(alpha=args.alpha))


def _cmd_dsbp_qsd(args) -> int:
    d = _dsbp_model(args)
    q = dsbp_qsd_pmf(d, n=args.n, K=args.K, beta=args.beta)
    manifest = _manifest(
        "dsbp-qsd",
        {"model": d.to_config(), "n": args.n, "beta": args.beta, "K": args.K},
    )
    rows = [(k + 1, q.pmf[k]) for k in range(q.pmf.size)]
    _emit_csv(
        args,
        manifest,
        ("k", "probability"),
        rows,
        comments=(f"truncation_residual: {q.truncation_residual:.17g}",),
    )
    return 0


def _cmd_dsbp_flow(args) -> int:
    d = _dsbp_model(args)
    manifest = _manifest("dsbp-flow", {"model": d.to_config(), "t": args.t, "r": args.r})
    rows = []
    for t in args.t:
        for r in args.r:
            rows.append((t, r, dsbp_F(d, t, r)))
    _emit_csv(args, manifest, ("t", "r", "F"), rows)
    return 0


def _cmd_simulate(args) -> int:
    model = _load_model_arg(args.mech)
    horizon = args.horizon if args.horizon is not None else max(args.times)
    cfg = SimConfig(
        seed=args.seed,
        n_paths=args.paths,
        horizon=horizon,
        explosion_threshold=args.threshold,
        small_jump_cutoff=args.eps,
        max_events=args.max_events,
        threads=args.threads,
    )
    if isinstance(model, DiscreteBranching):
        if not float(args.x).is_integer() or not args.x > 0:
            raise ContractError(f"discrete models need a positive integer --x, got {args.x}")
        ens = simulate_dsbp(model, int(args.x), args.times, cfg)
    else:
        mech_cfg = model.to_config()
        if mech_cfg.get("family") == "stable_plus" and mech_cfg.get("alpha") == 1.0:
            # quadratic mechanism: exact grid transitions instead of events
            ens = simulate_feller_paths(mech_cfg["c"], args.x, args.times, cfg)
        else:
            ens = simulate_csbp(model, args.x, args.times, cfg)
    manifest = _manifest(
        "simulate",
        {
            "model": model.to_config(),
            "x": args.x,
            "times": args.times,
            "horizon": horizon,
            "threshold": args.threshold,
            "eps": args.eps,
            "max_events": args.max_events,
            "paths": args.paths,
        },
        seed=args.seed,
    )
    rows = []
    for i in range(ens.n_paths):
        flag = int(ens.flags[i])
        absorb = float(ens.absorb_time[i])
        for j, t in enumerate(ens.times):
            rows.append((i, float(t), float(ens.states[i, j]), flag, absorb))
    _emit_csv(
        args,
        manifest,
        ("path", "time", "state", "flag", "absorb_time"),
        rows,
        comments=("flags: 0=survived 1=exploded 2=inconclusive 3=extinct",),
    )
    return 0


def _cmd_verify(args) -> int:
    names = []
    for chunk in args.suite or ["all"]:
        names.extend(tok for tok in chunk.split(",") if tok)
    report = run_suites(names, seed=args.seed, threads=args.threads)
    manifest = _manifest("verify", {"suites": names}, seed=args.seed)
    report["manifest"] = manifest
    _write_artifact(args, canonical_report_json(report), manifest)
    n_pass = sum(1 for s in report["suites"] if s["passed"])
    sys.stderr.write(f"verify: {n_pass}/{len(report['suites'])} suites passed\n")
    return 0 if report["passed"] else 3


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="qsdflow",
        description="Flows, quasi-stationary limits, and exact simulation for "
        "explosive branching processes.",
        epilog="Shipped fixtures usable as --mech: " + ", ".join(ALL_FIXTURES) + ".",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    common.add_argument(
        "--out",
        default="-",
        metavar="PATH",
        help="artifact destination; '-' (default) writes to stdout, a path also "
        "gets a PATH.manifest.json sidecar",
    )
    common.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker threads; results are independent of this (default 1)",
    )
    common.add_argument(
        "--tol",
        type=float,
        default=1e-10,
        help="relative accuracy target for flow evaluations (default 1e-10)",
    )

    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("classify", parents=[common], help="analytic regime report for a model")
    p.add_argument("--mech", required=True, help="mechanism JSON file or fixture name")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("flow", parents=[common], help="evaluate u(t, lambda) on a grid")
    p.add_argument("--mech", required=True, help="mechanism JSON file or fixture name")
    p.add_argument("--t", type=_float_list, required=True, help="comma-separated times")
    p.add_argument(
        "--lambda", dest="lam", type=_float_list, required=True, help="comma-separated lambdas"
    )
    p.add_argument(
        "--backend",
        choices=("phi_inversion", "ode", "cross_check"),
        default="cross_check",
        help="flow backend (default cross_check: both, with agreement gap)",
    )
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("phi", parents=[common], help="evaluate the flow-time integral Phi")
    p.add_argument("--mech", required=True, help="mechanism JSON file or fixture name")
    p.add_argument(
        "--lambda", dest="lam", type=_float_list, required=True, help="comma-separated lambdas"
    )
    p.add_argument(
        "--regime",
        choices=("auto", "explosive", "extinction"),
        default="auto",
        help="which boundary the integral runs to (default: by classification)",
    )
    p.set_defaults(func=_cmd_phi)

    p = sub.add_parser(
        "qsd", parents=[common], help="quasi-stationary transform vs its stationary limit"
    )
    p.add_argument("--mech", required=True, help="mechanism JSON file or fixture name")
    p.add_argument("--beta", type=float, required=True, help="decay rate (must be positive)")
    p.add_argument(
        "--t", type=_float_list, default=[1.0, 2.0, 5.0], help="times (default 1,2,5)"
    )
    p.add_argument(
        "--lambda",
        dest="lam",
        type=_float_list,
        default=[0.5, 1.0, 2.0],
        help="lambdas (default 0.5,1,2)",
    )
    p.add_argument(
        "--regime",
        choices=("auto", "explosive", "extinction"),
        default="auto",
        help="conditioning boundary (default: by classification)",
    )
    p.set_defaults(func=_cmd_qsd)

    p = sub.add_parser("dsbp", help="discrete-state branching: QSD pmf and flow")
    dsub = p.add_subparsers(dest="dsbp_command", metavar="SUBCOMMAND", required=True)

    dcommon = argparse.ArgumentParser(add_help=False)
    dcommon.add_argument("--mech", default=None, help="dsbp model JSON file or fixture name")
    dcommon.add_argument("--alpha", type=float, default=None, help="Sibuya exponent in (0, 1)")
    dcommon.add_argument("--c", type=float, default=1.0, help="lifetime rate (default 1)")

    dq = dsub.add_parser("qsd", parents=[common, dcommon], help="QSD pmf by coefficient recursion")
    group = dq.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int, help="spectrum index: decay rate n * beta0")
    group.add_argument("--beta", type=float, help="decay rate directly")
    dq.add_argument("--K", type=int, default=256, help="pmf truncation order (default 256)")
    dq.set_defaults(func=_cmd_dsbp_qsd)

    df = dsub.add_parser(
        "flow", parents=[common, dcommon], help="evaluate the generating-function flow F(t, r)"
    )
    df.add_argument("--t", type=_float_list, required=True, help="comma-separated times")
    df.add_argument("--r", type=_float_list, required=True, help="arguments in [0, 1]")
    df.set_defaults(func=_cmd_dsbp_flow)

    p = sub.add_parser("simulate", parents=[common], help="exact path simulation to a marginal grid")
    p.add_argument("--mech", required=True, help="model JSON file or fixture name")
    p.add_argument("--x", type=float, required=True, help="initial state (integer for dsbp)")
    p.add_argument("--times", type=_float_list, required=True, help="marginal grid")
    p.add_argument("--paths", type=int, default=1000, help="number of paths (default 1000)")
    p.add_argument("--horizon", type=float, default=None, help="simulation horizon (default max time)")
    p.add_argument(
        "--threshold", type=float, default=1e12, help="explosion threshold (default 1e12)"
    )
    p.add_argument(
        "--eps", type=float, default=1e-4, help="small-jump truncation cutoff (default 1e-4)"
    )
    p.add_argument(
        "--max-events",
        dest="max_events",
        type=int,
        default=10_000_000,
        help="per-path event budget (default 1e7)",
    )
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="run the verification suites")
    p.add_argument(
        "--suite",
        action="append",
        metavar="NAME[,NAME...]",
        help="suite names, repeatable or comma-separated (default all)",
    )
    p.add_argument("--report", choices=("json",), default="json", help="report format")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 64
    try:
        return args.func(args)
    except ContractError as exc:
        sys.stderr.write(f"qsdflow: contract error: {exc}\n")
        return 1
    except NumericError as exc:
        sys.stderr.write(f"qsdflow: numeric error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
