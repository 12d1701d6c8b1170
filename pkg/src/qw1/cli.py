"""Command-line interface: ``qw1 {w1, lipschitz, gibbs, pressure, tci, dbar, scaling, verify}``.

Exit codes: 0 success, 1 bad input or a failed invariant, 2 solver did not
converge (results are still written, flagged ``converged: false``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone

from . import __version__
from .classical import StationaryProcess, dbar_sequence, is_nondecreasing
from .errors import InconsistentMarginals, QW1Error
from .lattice import (
    Interaction,
    diagonal_family,
    gibbs_local,
    log_partition,
    phi_r_norm,
    tci_constants,
    w1_specific_certificates,
)
from .operators import DensityMatrix, Region, _as_site, operator_from_json, operator_to_json
from .suite import DEFAULT_SIZES, SUITES, run_suite, summary_lines
from .transport import SolverConfig, partial_dependence, w1_norm

log = logging.getLogger("qw1")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class InputError(Exception):
    pass


def _read_json(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_json_default)


def _json_default(o):
    if hasattr(o, "to_json"):
        return o.to_json()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(obj):
    """Replace non-finite floats by None so output stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


class Run:
    """Collects input digests and writes outputs tagged with the manifest hash."""

    def __init__(self, args):
        self.args = args
        self.inputs = []
        self.outputs = []
        self.started = datetime.now(timezone.utc).isoformat()

    def load(self, path):
        data, digest = _read_json(path)
        self.inputs.append({"path": os.path.basename(path), "sha256": digest})
        return data

    def config(self):
        skip = {"func", "json", "out", "csv", "manifest", "threads", "verbose"}
        cfg = {k: v for k, v in sorted(vars(self.args).items()) if k not in skip}
        return _finite(cfg)

    @property
    def manifest_id(self):
        payload = json.dumps(
            {"command": self.args.command, "inputs": [i["sha256"] for i in self.inputs],
             "config": self.config()},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def emit(self, result, human_lines):
        doc = {"command": self.args.command, "manifest_id": self.manifest_id,
               "result": _finite(result)}
        text = _dump(doc) + "\n"
        if self.args.out:
            with open(self.args.out, "w") as fh:
                fh.write(text)
            self.outputs.append(self.args.out)
        if self.args.json:
            sys.stdout.write(text)
        else:
            for line in human_lines:
                print(line)

    def emit_csv(self, header, rows):
        if not self.args.csv:
            return
        with open(self.args.csv, "w", newline="") as fh:
            fh.write(f"# manifest {self.manifest_id}\n")
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self.outputs.append(self.args.csv)

    def finish(self):
        if not self.args.manifest:
            return
        manifest = {
            "manifest_id": self.manifest_id,
            "command": self.args.command,
            "inputs": self.inputs,
            "config": self.config(),
            "version": __version__,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": self.outputs,
        }
        with open(self.args.manifest, "w") as fh:
            fh.write(_dump(manifest) + "\n")


def _solver_config(args):
    return SolverConfig(tol_gap=args.tol, max_iter=args.max_iter)


def _parse_site(text):
    try:
        return _as_site([int(c) for c in text.split(",")])
    except ValueError:
        raise InputError(f"bad site {text!r}; use comma-separated integers") from None


def _parse_ints(text):
    try:
        return [int(c) for c in str(text).split(",") if c != ""]
    except ValueError:
        raise InputError(f"bad integer list {text!r}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_w1(run, args):
    files = args.files
    if len(files) == 1:
        delta = operator_from_json(run.load(files[0]))
    elif len(files) == 2:
        rho = operator_from_json(run.load(files[0]), DensityMatrix)
        sigma = operator_from_json(run.load(files[1]), DensityMatrix)
        delta = rho - sigma
    else:
        raise InputError("w1 takes delta.json or rho.json sigma.json")
    cert = w1_norm(delta, _solver_config(args))
    run.emit(cert.to_json(), [
        f"W1 in [{cert.dual_value:.10g}, {cert.primal_value:.10g}]  "
        f"gap {cert.gap:.3e}  iterations {cert.iterations}  converged {cert.converged}",
    ])
    return EXIT_OK if cert.converged else EXIT_NONCONVERGED


def cmd_lipschitz(run, args):
    h = operator_from_json(run.load(args.file))
    cfg = _solver_config(args)
    if args.site is not None and not args.all_sites:
        sites = [_parse_site(args.site)]
        if sites[0] not in h.region:
            raise InputError(f"site {args.site} is not in the operator's region")
    else:
        sites = list(h.region.sites)
    rows, converged = [], True
    for s in sites:
        dep = partial_dependence(h, s, cfg)
        converged &= dep.converged
        rows.append({"site": list(s), "value": dep.value, "lower": dep.lower,
                     "converged": dep.converged})
    result = {"values": rows}
    if len(sites) == len(h.region):
        result["lipschitz"] = max((r["value"] for r in rows), default=0.0)
    run.emit(result, [f"site {r['site']}: {r['value']:.10g}" for r in rows])
    return EXIT_OK if converged else EXIT_NONCONVERGED


def _interaction(run, path):
    return Interaction.from_json(run.load(path))


def cmd_gibbs(run, args):
    phi = _interaction(run, args.file)
    box = Region.box(args.box, phi.d, phi.q)
    rho = gibbs_local(phi, box)
    run.emit({"box": args.box, "state": operator_to_json(rho),
              "log_partition": log_partition(phi, box)},
             [f"Gibbs state on {len(box)} sites, ln Z = {log_partition(phi, box):.12g}"])
    return EXIT_OK


def cmd_pressure(run, args):
    phi = _interaction(run, args.file)
    rows = []
    if args.chain:
        if phi.d != 1:
            raise InputError("--chain needs a one-dimensional interaction")
        for n in _parse_ints(args.chain):
            region = Region.chain(n, phi.q)
            rows.append({"sites": n, "pressure": log_partition(phi, region) / n})
    else:
        for a in _parse_ints(args.box):
            box = Region.box(a, phi.d, phi.q)
            rows.append({"a": a, "sites": len(box), "pressure": log_partition(phi, box) / len(box)})
    run.emit({"rows": rows}, [f"{r['sites']:4d} sites  {r['pressure']:.12g}" for r in rows])
    run.emit_csv(["sites", "pressure"], [[r["sites"], repr(r["pressure"])] for r in rows])
    return EXIT_OK


def cmd_tci(run, args):
    if args.file:
        phi = _interaction(run, args.file)
        phi_r, N, q = phi_r_norm(phi, args.r), phi.degree, phi.q
    else:
        if args.phi_r is None:
            raise InputError("tci needs an interaction file or --phi-r")
        phi_r, N, q = args.phi_r, 1, args.q
    if args.phi_r is not None:
        phi_r = args.phi_r
    if args.N is not None:
        N = args.N
    t_max, steps = args.grid.split(",") if "," in args.grid else (args.grid, "1000000")
    consts = tci_constants(phi_r, N, q, grid=(float(t_max), int(steps)))
    result = {"phi_r": phi_r, "N": N, "q": q, **consts.to_json()}
    run.emit(result, [
        f"M = {consts.M:.12g}  kappa = {consts.kappa:.12g}  c = {consts.c:.12g}  valid {consts.valid}",
    ])
    return EXIT_OK


def _process(run, path):
    return StationaryProcess.from_json(run.load(path))


def cmd_dbar(run, args):
    mu, nu = _process(run, args.files[0]), _process(run, args.files[1])
    seq = dbar_sequence(mu, nu, args.a_max)
    rows = [{"a": a, "sites": 2 * a, "value": v} for a, v in enumerate(seq, start=1)]
    run.emit({"sequence": seq, "rows": rows, "sup": max(seq, default=0.0),
              "nondecreasing": is_nondecreasing(seq, 1e-9)},
             [f"a = {r['a']}: {r['value']:.12g}" for r in rows])
    run.emit_csv(["a", "sites", "value"], [[r["a"], r["sites"], repr(r["value"])] for r in rows])
    return EXIT_OK


def _family(run, path):
    data = run.load(path)
    items = data.get("marginals") if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise InputError(f"{path}: expected a list of box marginals")
    return [operator_from_json(m, DensityMatrix) for m in items]


def cmd_scaling(run, args):
    cfg = _solver_config(args)
    if args.process:
        mu, nu = _process(run, args.process[0]), _process(run, args.process[1])
        fam_a, fam_b = diagonal_family(mu, args.a_max), diagonal_family(nu, args.a_max)
    else:
        if len(args.files) != 2:
            raise InputError("scaling takes two family files or --process A.json B.json")
        fam_a, fam_b = _family(run, args.files[0]), _family(run, args.files[1])
        if args.a_max:
            fam_a, fam_b = fam_a[:args.a_max], fam_b[:args.a_max]
    certs = w1_specific_certificates(fam_a, fam_b, cfg)
    rows = [{"a": a, "sites": len(c.region), "upper": c.primal_value / len(c.region),
             "lower": c.dual_value / len(c.region), "converged": c.converged}
            for a, c in enumerate(certs, start=1)]
    ups = [r["upper"] for r in rows]
    tol = 2 * cfg.tol_gap
    result = {
        "rows": rows,
        "nondecreasing": is_nondecreasing(ups, tol),
        "extrapolation": {
            "sup_lower_bound": max((r["lower"] for r in rows), default=0.0),
            "last_upper": ups[-1] if ups else 0.0,
            "consistency": "checked",
            "translation_invariance": "assumed",
        },
    }
    run.emit(result, [f"a = {r['a']}: [{r['lower']:.10g}, {r['upper']:.10g}]" for r in rows])
    run.emit_csv(["a", "sites", "lower", "upper"],
                 [[r["a"], r["sites"], repr(r["lower"]), repr(r["upper"])] for r in rows])
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def cmd_verify(run, args):
    sizes = _parse_ints(args.sizes)
    if not sizes or min(sizes) < 1:
        raise InputError("--sizes needs positive integers")
    if args.samples < 0:
        raise InputError("--samples must be non-negative")
    report = run_suite(args.suite, args.seed, args.samples, sizes, _solver_config(args),
                       threads=args.threads)
    run.emit(report, summary_lines(report))
    return EXIT_OK if report["summary"]["failed"] == 0 else EXIT_INPUT


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("--out", help="write the JSON result here")
    common.add_argument("--csv", help="write the sequence table here (sequence commands)")
    common.add_argument("--manifest", help="write the run manifest here")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--tol", type=float, default=1e-5, help="relative duality-gap target")
    common.add_argument("--max-iter", type=int, default=200_000)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qw1", description="Quantum W1 distances and bounds on lattices.")
    p.add_argument("--version", action="version", version=f"qw1 {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("w1", parents=[common], help="W1 norm with duality-gap certificate")
    s.add_argument("files", nargs="+", metavar="JSON")
    s.set_defaults(func=cmd_w1)

    s = sub.add_parser("lipschitz", parents=[common], help="site dependence / Lipschitz constant")
    s.add_argument("file")
    s.add_argument("--site", help="comma-separated coordinates")
    s.add_argument("--all-sites", action="store_true")
    s.set_defaults(func=cmd_lipschitz)

    s = sub.add_parser("gibbs", parents=[common], help="local Gibbs state on a box")
    s.add_argument("file")
    s.add_argument("--box", type=int, required=True, help="half-width a of the box")
    s.set_defaults(func=cmd_gibbs)

    s = sub.add_parser("pressure", parents=[common], help="finite-volume pressures")
    s.add_argument("file")
    s.add_argument("--box", default="1,2,3", help="comma-separated half-widths")
    s.add_argument("--chain", help="comma-separated chain lengths (d = 1), instead of boxes")
    s.set_defaults(func=cmd_pressure)

    s = sub.add_parser("tci", parents=[common], help="high-temperature transport-cost constants")
    s.add_argument("file", nargs="?")
    s.add_argument("--r", type=float, default=0.0, help="r of the interaction norm")
    s.add_argument("--phi-r", type=float, help="use this norm value directly")
    s.add_argument("--N", type=int, help="override the interaction degree")
    s.add_argument("--q", type=int, default=2)
    s.add_argument("--grid", default="50,1000000", help="t_max,steps")
    s.set_defaults(func=cmd_tci)

    s = sub.add_parser("dbar", parents=[common], help="finite-window d-bar sequence")
    s.add_argument("files", nargs=2, metavar="PROCESS_JSON")
    s.add_argument("--a-max", type=int, default=3)
    s.set_defaults(func=cmd_dbar)

    s = sub.add_parser("scaling", parents=[common], help="per-site W1 over growing boxes")
    s.add_argument("files", nargs="*", metavar="FAMILY_JSON")
    s.add_argument("--process", nargs=2, metavar="PROCESS_JSON")
    s.add_argument("--a-max", type=int, default=None)
    s.set_defaults(func=cmd_scaling)

    s = sub.add_parser("verify", parents=[common], help="seeded inequality verification suite")
    s.add_argument("--suite", default="all")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "scaling" and args.process and args.a_max is None:
        args.a_max = 3
    if args.command == "verify" and args.suite not in SUITES:
        print(f"qw1: unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_INPUT
    run = Run(args)
    try:
        code = args.func(run, args)
    except InconsistentMarginals as exc:
        print(f"qw1: inconsistent marginals {exc.pair}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, QW1Error, ValueError) as exc:
        print(f"qw1: {exc}", file=sys.stderr)
        return EXIT_INPUT
    run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
