"""``interferoq`` command line: simulate, sweep, sensitivity, equiv, scaling.

Exit status is 0 on success, 2 when ``equiv`` finds the circuits differ and
1 on any error.  JSON output has sorted keys and 12 significant digits so it
is byte-stable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import dsl
from .circuit import (
    DISTRIBUTION,
    UNITARY,
    EquivalenceQuery,
    Full,
    Measure,
    ClassicalOp,
    SymmetricSector,
    check_equivalence,
    sample,
    simulate,
)
from .errors import InterferoqError
from .protocols import (
    COHERENT,
    PROTOCOLS,
    ProtocolId,
    build,
    default_phi0,
    fringe_sweep,
    scaling_fit,
    sensitivity,
    signal_label,
)


def _num(x):
    """Round to 12 significant digits for stable output."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not np.isfinite(x):
            return None
        r = float(f"{x:.12g}")
        return 0.0 if r == 0 else r
    if isinstance(x, complex):
        return {"re": _num(x.real), "im": _num(x.imag)}
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_num(obj), sort_keys=True, indent=2) + "\n"


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _complex_arg(text: str) -> complex:
    t = text.strip().replace(" ", "")
    try:
        return complex(t.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _protocol_id(args) -> ProtocolId:
    entry = PROTOCOLS[args.target]
    kw = {}
    if entry.family == COHERENT:
        if args.alpha is None:
            raise InterferoqError(f"{args.target} needs --alpha")
        kw["alpha"] = args.alpha
    else:
        if args.N is None:
            raise InterferoqError(f"{args.target} needs --N")
        kw["N"] = args.N
    if args.shift is not None:
        kw["shift"] = args.shift
    return ProtocolId(args.target, **kw)


def _load_target(args):
    """Circuit from a protocol name or a .qc path, plus the protocol id if any."""
    if args.target in PROTOCOLS:
        pid = _protocol_id(args)
        return build(pid), pid
    if os.path.exists(args.target):
        return dsl.load(args.target), None
    raise InterferoqError(f"{args.target!r} is neither a protocol nor a file")


def _dist_record(dist, phi):
    return {
        "phi": phi,
        "labels": list(dist.labels),
        "outcomes": [{"values": list(k), "probability": p} for k, p in dist.items()],
        "dropped_mass": dist.dropped_mass,
    }


def cmd_simulate(args, out) -> int:
    c, _ = _load_target(args)
    if args.shots:
        counts = sample(c, args.shots, seed=args.seed, phi=args.phi)
        rec = {
            "phi": args.phi,
            "shots": args.shots,
            "seed": args.seed,
            "counts": [{"values": list(k), "count": n} for k, n in counts.items()],
        }
        out.write(dumps(rec))
        return 0
    dist = simulate(c, phi=args.phi)
    if args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["phi", "outcome", "probability"])
        for k, p in dist.items():
            w.writerow([_fmt(args.phi) if args.phi is not None else "", " ".join(map(str, k)), _fmt(p)])
    else:
        out.write(dumps(_dist_record(dist, args.phi)))
    return 0


def cmd_sweep(args, out) -> int:
    phis = np.linspace(args.phi_min, args.phi_max, args.steps)
    c, pid = _load_target(args)
    if pid is not None:
        rep = fringe_sweep(pid, phis)
        label = signal_label(pid)
        dists, refs = rep.distributions, rep.reference
    else:
        label = c.result_labels()[-1]
        dists = [simulate(c, float(p)).marginal(label) for p in phis]
        refs = [None] * len(dists)
    sign = all(set(k[0] for k in d.probs) <= {1, -1} for d in dists)
    if args.format == "json":
        rec = {
            "target": args.target,
            "label": label,
            "points": [
                {
                    **_dist_record(d, float(p)),
                    "mean": d.expectation(label),
                    "variance": d.variance(label),
                    "reference": None if r is None else [{"value": k, "probability": v} for k, v in sorted(r.items())],
                }
                for p, d, r in zip(phis, dists, refs)
            ],
        }
        out.write(dumps(rec))
        return 0
    w = csv.writer(out, lineterminator="\n")
    if args.format == "csv":
        w.writerow(["phi", "outcome", "probability", "reference_value", "abs_error"])
        for p, d, r in zip(phis, dists, refs):
            keys = sorted({k[0] for k in d.probs} | set(r or {}))
            for k in keys:
                ref = "" if r is None else _fmt(r.get(k, 0.0))
                err = "" if r is None else _fmt(abs(d[k] - r.get(k, 0.0)))
                w.writerow([_fmt(p), k, _fmt(d[k]), ref, err])
        return 0
    if sign:
        w.writerow(["phi", "p_plus", "p_minus", "mean", "variance", "reference_p_plus"])
        for p, d, r in zip(phis, dists, refs):
            ref = "" if r is None else _fmt(r[1])
            w.writerow([_fmt(p), _fmt(d[1]), _fmt(d[-1]), _fmt(d.expectation(label)), _fmt(d.variance(label)), ref])
    else:
        w.writerow(["phi", "mean", "variance"])
        for p, d in zip(phis, dists):
            w.writerow([_fmt(p), _fmt(d.expectation(label)), _fmt(d.variance(label))])
    return 0


def cmd_sensitivity(args, out) -> int:
    if args.target not in PROTOCOLS:
        raise InterferoqError(f"unknown protocol {args.target!r}")
    pid = _protocol_id(args)
    phi0 = default_phi0(pid) if args.phi0 is None else args.phi0
    dphi = sensitivity(pid, phi0)
    rec = {
        "protocol": pid.name,
        "N": pid.N,
        "alpha": None if pid.alpha is None else abs(pid.alpha),
        "resource": pid.resource,
        "phi0": phi0,
        "delta_phi": dphi,
    }
    out.write(dumps(rec))
    return 0


def _parse_domain(text: str | None):
    if text is None or text == "declared":
        return None
    if text == "full":
        return Full()
    if text.startswith("sector:"):
        return SymmetricSector(int(text.split(":", 1)[1]))
    raise InterferoqError(f"unknown domain {text!r} (use declared, full or sector:N)")


def _measurement_free(c) -> bool:
    return not any(isinstance(i, (Measure, ClassicalOp)) for i in c.instructions)


def cmd_equiv(args, out) -> int:
    left, right = dsl.load(args.left), dsl.load(args.right)
    compare = args.compare
    if compare == "auto":
        compare = UNITARY if _measurement_free(left) and _measurement_free(right) else DISTRIBUTION
    domain = _parse_domain(args.domain)
    grid = tuple(np.linspace(-np.pi, np.pi, args.grid))
    q = EquivalenceQuery(left, right, domain, compare, args.tol, grid)
    res = check_equivalence(q)
    witness = None
    if res.witness is not None:
        witness = {k: (list(v) if isinstance(v, tuple) else v) for k, v in res.witness.items()}
    out.write(dumps({"equal": res.equal, "max_deviation": res.max_deviation, "compare": compare, "witness": witness}))
    return 0 if res.equal else 2


def _param_range(text: str, integer: bool) -> list:
    conv = int if integer else float
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 2:
            raise InterferoqError(f"bad range {text!r}; use lo:hi or a,b,c")
        lo, hi = int(parts[0]), int(parts[1])
        return list(range(lo, hi + 1)) if integer else [float(v) for v in range(lo, hi + 1)]
    return [conv(v) for v in text.split(",") if v]


def cmd_scaling(args, out) -> int:
    if args.target not in PROTOCOLS:
        raise InterferoqError(f"unknown protocol family {args.target!r}")
    fam = PROTOCOLS[args.target].family
    params = _param_range(args.param_range, integer=fam != COHERENT)
    fit = scaling_fit(args.target, params, phi0=args.phi0)
    rec = {
        "family": args.target,
        "params": params,
        "resources": fit.resources,
        "delta_phi": fit.deltas,
        "exponent": fit.exponent,
    }
    out.write(dumps(rec))
    return 0


def _add_protocol_args(p):
    p.add_argument("--N", type=int, help="photon or qubit number (Fock-state protocols)")
    p.add_argument("--alpha", type=_complex_arg, help="coherent amplitude, e.g. 1.5 or 1+0.5i")
    p.add_argument("--shift", type=float, help="fringe-shift angle (qubit-assisted protocols)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="interferoq", description="Interferometric phase-estimation circuits.")
    sub = parser.add_subparsers(dest="command", required=True)
    names = ", ".join(PROTOCOLS)

    p = sub.add_parser("simulate", help="exact outcome distribution of a circuit")
    p.add_argument("target", help=f".qc file or protocol ({names})")
    _add_protocol_args(p)
    p.add_argument("--phi", type=float)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--shots", type=int, default=0, help="draw this many samples instead")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="fringe over a phi grid")
    p.add_argument("target", help=".qc file or protocol name")
    _add_protocol_args(p)
    p.add_argument("--phi-min", type=float, default=-np.pi)
    p.add_argument("--phi-max", type=float, default=np.pi)
    p.add_argument("--steps", "--phi-steps", dest="steps", type=int, default=25)
    p.add_argument("--format", choices=["wide", "csv", "json"], default="wide")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sensitivity", help="error-propagation delta-phi at an operating point")
    p.add_argument("target", help="protocol name")
    _add_protocol_args(p)
    p.add_argument("--phi0", type=float)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("equiv", help="compare two .qc circuits")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--domain", default=None, help="declared (default), full or sector:N")
    p.add_argument("--compare", choices=["auto", UNITARY, DISTRIBUTION], default="auto")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--grid", type=int, default=25)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("scaling", help="log-log exponent of delta-phi against resources")
    p.add_argument("target", help="protocol family name")
    p.add_argument("--param-range", required=True, help="lo:hi or comma list (N, or alpha for coherent families)")
    p.add_argument("--phi0", type=float)
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        buf = io.StringIO()
        code = args.func(args, buf)
        out.write(buf.getvalue())
        return code
    except (InterferoqError, ValueError, OSError) as exc:
        print(f"interferoq: error: {exc}", file=sys.stderr)
        return 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
