"""Command-line front end for reproducible analysis runs.

Every subcommand reads a model JSON file, echoes the effective tolerance
and seed configuration into its output, and writes JSON (or a plain-text
rendering) to stdout or ``--out``.  Trace-valued results are written as
CSV files.  Contract and input problems exit with status 1 and a
machine-readable error object on stderr; internal numerical failures exit
with status 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .classify import classify as classify_channels
from .config import DEFAULT_TOL, Tolerances
from .decouple import apply_filter, design_residual_generator
from .errors import ContractError, InputError, NumericError, SecIndexError
from .identify import identify as identify_attack
from .identify import remove_transient
from .index import security_index, synthesize_attack
from .model import load_model, validate
from .pencil import PencilSelection, invariant_zeros
from .sim import Trace, read_trace_csv, simulate, write_trace_csv

SYNTH_MAGNITUDE_LIMIT = 1e12


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as input errors."""

    def error(self, message):
        raise InputError(f"argument error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="secindex", description=__doc__)
    parser.add_argument("--model", required=False, help="model JSON file")
    parser.add_argument("--tol", type=float, default=None, help="rank tolerance rtol override")
    parser.add_argument("--seed", type=int, default=0, help="seed for all sampling")
    parser.add_argument("--qmax", type=int, default=None, help="index search budget (default m)")
    parser.add_argument("--q", type=int, default=None, help="attacker budget")
    parser.add_argument("--horizon", type=int, default=50, help="trace horizon")
    parser.add_argument("--channel", type=int, default=None, help="attack channel (1-based)")
    parser.add_argument("--out", default=None, help="output path (JSON or CSV per command)")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="check model assumptions")
    p_zeros = sub.add_parser("zeros", help="invariant zeros of a pencil selection")
    p_zeros.add_argument(
        "--support", default="full", help="comma-separated channels, 'full', or 'none'"
    )
    p_index = sub.add_parser("index", help="security index per channel")
    p_index.add_argument("--timing", action="store_true", help="include elapsed_ms in records")
    p_classify = sub.add_parser("classify", help="detectability/identifiability vs budget")
    p_classify.add_argument("--asymptotic", action="store_true")
    sub.add_parser("synth", help="synthesize an undetectable attack witness")
    sub.add_parser("filter", help="design the disturbance-decoupling residual filter")
    p_apply = sub.add_parser("apply", help="run the residual filter over a measurement CSV")
    p_apply.add_argument("--trace", required=True, help="measurement CSV (header y1..yp)")
    p_sim = sub.add_parser("simulate", help="simulate the plant")
    p_sim.add_argument("--x0", default=None, help="comma-separated initial state")
    p_sim.add_argument("--d", default=None, help="disturbance trace CSV")
    p_sim.add_argument("--a", default=None, help="attack trace CSV")
    p_ident = sub.add_parser("identify", help="reconstruct a sparse attack from a trace")
    p_ident.add_argument("--trace", required=True, help="raw output or residual CSV")
    p_ident.add_argument(
        "--kind", choices=("auto", "raw", "residual"), default="auto",
        help="interpret the trace as raw measurements or a filtered residual",
    )
    return parser


def _tolerances(args) -> Tolerances:
    tol = DEFAULT_TOL
    if args.tol is not None:
        if args.tol <= 0:
            raise InputError("--tol must be positive")
        tol = tol.with_rtol(args.tol)
    return tol


def _config_echo(args, tol: Tolerances) -> dict:
    return {
        "rtol": tol.rtol,
        "null_tol": tol.null_tol,
        "boundary_tol": tol.boundary_tol,
        "consistency_tol": tol.consistency_tol,
        "seed": args.seed,
        "horizon": args.horizon,
        "q_max": args.qmax,
        "q": args.q,
    }


def _load_checked_model(args, tol: Tolerances):
    if not args.model:
        raise InputError("--model is required for this command")
    model = load_model(args.model)
    report = validate(model, tol)
    if not report.passed and args.command != "validate":
        warning = {
            "warning": "model rank assumptions violated; proceeding",
            "violated_assumptions": [c.name for c in report.violated_assumptions],
        }
        print(json.dumps(warning, sort_keys=True), file=sys.stderr)
    return model, report


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.format == "text" and text is not None:
        body = text
    else:
        body = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(body + "\n")
    else:
        print(body)


def _tv(value) -> object:
    return "unknown" if value is None else value


def _parse_support(text: str, m: int) -> tuple[int, ...]:
    text = text.strip().lower()
    if text == "full":
        return tuple(range(1, m + 1))
    if text in ("none", ""):
        return ()
    try:
        values = tuple(sorted(int(v) for v in text.split(",")))
    except ValueError as exc:
        raise InputError(f"cannot parse support {text!r}: {exc}") from exc
    return values


def _cmd_validate(args, tol):
    model, report = _load_checked_model(args, tol)
    payload = {"command": "validate", "config": _config_echo(args, tol)}
    payload.update(report.to_dict())
    lines = [f"passed: {report.passed}"]
    for c in report.checks:
        lines.append(
            f"  {c.name}: measured {c.measured_rank} expected {c.expected_rank} "
            f"({'ok' if c.passed else 'VIOLATED'})"
        )
    lines.append(f"spectral radius: {report.spectral_radius:.6g} (schur: {report.is_schur})")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_zeros(args, tol):
    model, _ = _load_checked_model(args, tol)
    support = _parse_support(args.support, model.m)
    sel = PencilSelection(model, support)
    zset = invariant_zeros(sel, tol, args.seed)
    payload = {
        "command": "zeros",
        "config": _config_echo(args, tol),
        "support": list(support),
        "normalrank": zset.normalrank,
        "generically_rank_deficient": zset.generically_rank_deficient,
        "zeros": [
            {
                "re": rec.z.real,
                "im": rec.z.imag,
                "persistent": rec.persistent,
                "rank_at_z": rec.rank_at_z,
                "multiplicity": rec.multiplicity,
            }
            for rec in zset.zeros
        ],
    }
    lines = [f"normalrank: {zset.normalrank}",
             f"generically rank deficient: {zset.generically_rank_deficient}"]
    for rec in zset.zeros:
        lines.append(
            f"  z = {rec.z.real:+.9g}{rec.z.imag:+.9g}j  rank {rec.rank_at_z}"
            f"  persistent: {rec.persistent}"
        )
    _emit(args, payload, "\n".join(lines))
    return 0


def _index_record(res, timing: bool) -> dict:
    rec = {
        "channel": res.channel,
        "alpha": res.alpha.to_json(),
        "method": res.method,
        "subsets_examined": res.subsets_examined,
        "critical": res.critical,
        "support": list(res.witness.support) if res.witness else None,
        "z0": (
            {"re": res.witness.z0.real, "im": res.witness.z0.imag}
            if res.witness
            else None
        ),
    }
    if timing:
        rec["elapsed_ms"] = res.elapsed * 1e3
    return rec


def _cmd_index(args, tol):
    model, _ = _load_checked_model(args, tol)
    channels = [args.channel] if args.channel else list(range(1, model.m + 1))
    results = [
        security_index(model, i, q_max=args.qmax, tol=tol, seed=args.seed)
        for i in channels
    ]
    payload = {
        "command": "index",
        "config": _config_echo(args, tol),
        "channels": [_index_record(r, args.timing) for r in results],
    }
    lines = []
    for r in results:
        sup = ",".join(str(j) for j in r.witness.support) if r.witness else "-"
        lines.append(f"channel {r.channel}: alpha = {r.alpha} (support {sup})")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_classify(args, tol):
    if args.q is None:
        raise InputError("classify requires --q")
    model, report = _load_checked_model(args, tol)
    results = [
        security_index(model, i, q_max=args.qmax, tol=tol, seed=args.seed)
        for i in range(1, model.m + 1)
    ]
    semantics = "asymptotic" if args.asymptotic else "exact"
    system = classify_channels(results, args.q, semantics, is_schur=report.is_schur)
    payload = {"command": "classify", "config": _config_echo(args, tol)}
    payload.update(system.to_dict())
    width = max(len(str(c.alpha)) for c in system.channels)
    lines = [
        f"budget q = {system.q}  semantics = {system.semantics}",
        f"all attacks identifiable: {_tv(system.all_attacks_identifiable)}",
        f"{'ch':>4} {'alpha':>{width + 2}} {'undetectable?':>15} {'i-identifiable?':>17}",
    ]
    for c in system.channels:
        lines.append(
            f"{c.channel:>4} {str(c.alpha):>{width + 2}} "
            f"{str(_tv(c.undetectable_attack_exists)):>15} "
            f"{str(_tv(c.all_attacks_i_identifiable)):>17}"
        )
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_synth(args, tol):
    if args.channel is None:
        raise InputError("synth requires --channel")
    model, _ = _load_checked_model(args, tol)
    res = security_index(model, args.channel, q_max=args.qmax, tol=tol, seed=args.seed)
    if res.witness is None:
        raise ContractError(
            f"channel {args.channel} admits no undetectable attack (alpha = {res.alpha})"
        )
    pat = res.witness
    horizon = args.horizon
    growth = abs(pat.z0)
    capped = False
    if growth > 1.0:
        # Keep emitted trace magnitudes representable in a CSV.
        limit = int(np.floor(np.log(SYNTH_MAGNITUDE_LIMIT) / np.log(growth)))
        if horizon > max(limit, 1):
            horizon = max(limit, 1)
            capped = True
    a, d, x0 = synthesize_attack(pat, horizon, tol)
    prefix = args.out if args.out else "synth"
    attack_path = f"{prefix}_attack.csv"
    write_trace_csv(attack_path, a, prefix="a")
    if model.o > 0:
        dist_path = f"{prefix}_disturbance.csv"
        write_trace_csv(dist_path, d, prefix="d")
    else:
        dist_path = None
    payload = {
        "command": "synth",
        "config": _config_echo(args, tol),
        "channel": args.channel,
        "alpha": res.alpha.to_json(),
        "support": list(pat.support),
        "z0": {"re": pat.z0.real, "im": pat.z0.imag},
        "x0": [float(v) for v in np.real(2.0 * pat.x0 * np.exp(-1j * np.angle(pat.a0[pat.target - 1])))],
        "horizon": horizon,
        "horizon_capped": capped,
        "attack_csv": attack_path,
        "disturbance_csv": dist_path,
    }
    # CSV paths are the artifact; JSON goes to stdout regardless of --out.
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def _cmd_filter(args, tol):
    model, _ = _load_checked_model(args, tol)
    gen = design_residual_generator(model, tol=tol, seed=args.seed)
    payload = {
        "command": "filter",
        "config": _config_echo(args, tol),
        "delay": gen.delay,
        "m_prime": gen.m_prime,
        "m_dprime": gen.m_dprime,
        "annihilator": gen.annihilator.to_json(),
        "completion": gen.completion.to_json(),
        "delta_impulse": [M.tolist() for M in gen.delta_impulse],
    }
    _emit(args, payload)
    return 0


def _cmd_apply(args, tol):
    model, _ = _load_checked_model(args, tol)
    gen = design_residual_generator(model, tol=tol, seed=args.seed)
    y = read_trace_csv(args.trace)
    r = apply_filter(gen, y)
    out = args.out if args.out else "residual.csv"
    write_trace_csv(out, r, prefix="r")
    payload = {
        "command": "apply",
        "config": _config_echo(args, tol),
        "samples": len(r),
        "residual_rows": gen.residual_rows,
        "warmup_samples": gen.delay,
        "residual_csv": out,
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def _cmd_simulate(args, tol):
    model, _ = _load_checked_model(args, tol)
    x0 = None
    if args.x0:
        x0 = np.array([float(v) for v in args.x0.split(",")])
    d = read_trace_csv(args.d) if args.d else None
    a = read_trace_csv(args.a) if args.a else None
    y, x_final = simulate(model, x0, d, a, args.horizon)
    out = args.out if args.out else "y.csv"
    write_trace_csv(out, y, prefix="y")
    payload = {
        "command": "simulate",
        "config": _config_echo(args, tol),
        "samples": len(y),
        "x_final": [float(v) for v in x_final],
        "output_csv": out,
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


def _cmd_identify(args, tol):
    if args.q is None:
        raise InputError("identify requires --q")
    model, _ = _load_checked_model(args, tol)
    gen = design_residual_generator(model, tol=tol, seed=args.seed)
    trace = read_trace_csv(args.trace)
    kind = args.kind
    if kind == "auto":
        if trace.channels == model.p:
            kind = "raw"
        elif trace.channels == gen.residual_rows:
            kind = "residual"
        else:
            raise InputError(
                f"trace has {trace.channels} channels; expected p={model.p} (raw) "
                f"or {gen.residual_rows} (residual)"
            )
    if kind == "raw":
        scale = float(np.max(np.abs(trace.data))) if trace.data.size else 0.0
        r = apply_filter(gen, trace)
    else:
        scale = None
        r = trace
    r_prime = remove_transient(model, gen, r, tol)
    result = identify_attack(gen, r_prime, args.q, scale=scale, tol=tol)
    out = args.out if args.out else "estimate.csv"
    write_trace_csv(out, result.estimate, prefix="a")
    payload = {
        "command": "identify",
        "config": _config_echo(args, tol),
        "kind": kind,
        "accepted": result.accepted,
        "support": list(result.support),
        "consistency_residual": result.consistency_residual,
        "subsets_tried": result.subsets_tried,
        "ambiguous_supports": [list(s) for s in result.ambiguous_supports],
        "estimate_csv": out,
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "zeros": _cmd_zeros,
    "index": _cmd_index,
    "classify": _cmd_classify,
    "synth": _cmd_synth,
    "filter": _cmd_filter,
    "apply": _cmd_apply,
    "simulate": _cmd_simulate,
    "identify": _cmd_identify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        tol = _tolerances(args)
        return _COMMANDS[args.command](args, tol)
    except NumericError as exc:
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 2
    except SecIndexError as exc:
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 1
    except FileNotFoundError as exc:
        print(
            json.dumps({"error": {"type": "FileNotFoundError", "message": str(exc)}}),
            file=sys.stderr,
        )
        return 1
    except Exception as exc:  # internal failure
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
