"""Command-line entry point: compile, run, sweep and verify.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import SimulationError

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2
PROTOCOLS = {"single": 1, "pair": 2, "nphoton": None}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def _complex_arg(values) -> complex:
    if len(values) > 2:
        raise SimulationError("complex values take one or two numbers (re [im])")
    re, im = (values + [0.0])[:2]
    return complex(re, im)


def _add_protocol_flags(p: argparse.ArgumentParser, netlist: bool):
    src = p.add_mutually_exclusive_group(required=netlist)
    src.add_argument("--protocol", choices=sorted(PROTOCOLS), help="built-in network")
    if netlist:
        src.add_argument("--netlist", metavar="PATH", help="netlist file to execute instead of a built-in network")
    for flag, default in (("alpha", [1.0]), ("beta", [0.0]), ("alpha-p", [1.0]), ("beta-p", [0.0])):
        p.add_argument(f"--{flag}", type=float, nargs="+", default=default, metavar="RE [IM]")
    p.add_argument("--n", type=int, default=None, help="photon count for --protocol nphoton")
    p.add_argument("--k", type=int, default=3, help="UPI delay in ticks (default 3)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", metavar="PATH", help="write here instead of standard output")
    p.add_argument("--seed", type=int, default=0)


def _add_noise_flags(p: argparse.ArgumentParser):
    p.add_argument("--theta", type=float, default=None, help="collective phase for every channel (or theta.* symbol)")
    p.add_argument("--gamma", type=float, nargs="+", default=None, metavar="RE [IM]")
    p.add_argument("--eta", type=float, nargs="+", default=None, metavar="RE [IM]")
    p.add_argument("--random-noise", action="store_true", help="independent random noise per channel from --seed")
    p.add_argument("--bind", action="append", default=[], metavar="NAME=VALUE", help="netlist symbol binding")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="timebinsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="netlist to canonical JSON")
    p.add_argument("netlist", metavar="PATH")
    p.add_argument("-o", "--output", metavar="PATH")

    p = sub.add_parser("run", help="outcome table of one configuration")
    _add_protocol_flags(p, netlist=True)
    _add_noise_flags(p)

    p = sub.add_parser("sweep", help="noise sweep report")
    p.set_defaults(protocol="single")
    _add_protocol_flags(p, netlist=False)
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--grid", type=int, default=None, metavar="STEPS", help="regular grid instead of random draws")
    p.add_argument("--collective", action="store_true", help="one noise draw shared by all channels")
    p.add_argument("--random-inputs", action="store_true", help="also draw the input coefficients")
    p.add_argument("--threads", type=int, default=None, help="worker threads (else TIMEBINSIM_THREADS, else 1)")

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--list", action="store_true", help="print criterion identifiers only")
    p.add_argument("--only", nargs="+", metavar="ID", help="run these criteria (full id or leading number)")
    p.add_argument("--tamper", choices=("bs-phase",), help="mutation check: flip the beam-splitter reflection phase")
    return parser


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def _spec(args):
    from .protocols import ProtocolSpec

    n = PROTOCOLS[args.protocol]
    if n is None:
        n = 3 if args.n is None else args.n
    elif args.n is not None and args.n != n:
        raise SimulationError(f"--protocol {args.protocol} fixes n={n}")
    return ProtocolSpec(
        _complex_arg(args.alpha),
        _complex_arg(args.beta),
        _complex_arg(args.alpha_p),
        _complex_arg(args.beta_p),
        n=n,
        k=args.k,
    )


def _noise(args, proto):
    from .elements import NoiseParams

    fixed = any(v is not None for v in (args.theta, args.gamma, args.eta))
    if fixed and args.random_noise:
        raise SimulationError("--random-noise cannot be combined with --theta/--gamma/--eta")
    if fixed:
        return NoiseParams(
            args.theta or 0.0,
            _complex_arg(args.gamma) if args.gamma else 1.0,
            _complex_arg(args.eta) if args.eta else 0.0,
        )
    if args.random_noise:
        rng = np.random.default_rng(args.seed)
        return {
            key: NoiseParams.from_angles(
                rng.uniform(0, 2 * math.pi), rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi)
            )
            for key in sorted(proto.channels)
        }
    return None


def _parse_bindings(items) -> dict:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise SimulationError(f"binding {item!r} is not NAME=VALUE")
        try:
            z = complex(value.replace(" ", ""))
        except ValueError:
            raise SimulationError(f"binding {item!r} has a malformed value") from None
        out[name] = z.real if z.imag == 0 else z
    return out


def cmd_compile(args) -> int:
    from .netlist import compile_text, emit_canonical

    _emit(emit_canonical(compile_text(_read(args.netlist))), args.output)
    return EXIT_OK


def _table_text(table, fmt: str, meta: dict) -> str:
    from .analysis.outcomes import summarize

    summary = summarize(table)
    if fmt == "json":
        doc = {
            **meta,
            "total_success": float(_fmt(table.success)),
            "discard": float(_fmt(table.discard)),
            "spatial_marginal": None if table.spatial_marginal is None else float(_fmt(table.spatial_marginal)),
            "min_fidelity": None if summary.worst_fidelity is None else float(_fmt(summary.worst_fidelity)),
            "pol_classes": {k: float(_fmt(v)) for k, v in summary.pol_classes.items()},
            "rows": [
                {
                    "ports": r.port_label,
                    "pol_class": r.pol_class,
                    "probability": float(_fmt(r.probability)),
                    "corrected_fidelity": float(_fmt(r.fidelity)),
                    "correction": r.correction.describe(),
                }
                for r in table.rows
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ports", "pol_class", "probability", "corrected_fidelity", "correction"])
    for r in table.rows:
        w.writerow([r.port_label, r.pol_class, _fmt(r.probability), _fmt(r.fidelity), r.correction.describe()])
    w.writerow(["total_success", "", _fmt(table.success), _fmt(summary.worst_fidelity), ""])
    w.writerow(["discard", "", _fmt(table.discard), "", ""])
    return buf.getvalue()


def _run_netlist(args) -> str:
    from .netlist import compile_text, execute
    from .state import make_product_state

    circuit = compile_text(_read(args.netlist))
    if len(circuit.sources) < 2:
        raise SimulationError("netlist input needs two source rails for the spatial coefficients")
    a, b = circuit.sources[:2]
    psi = make_product_state(
        {a: _complex_arg(args.alpha_p), b: _complex_arg(args.beta_p)},
        {"H": _complex_arg(args.alpha), "V": _complex_arg(args.beta)},
    )
    bindings = {}
    for name in circuit.symbols:
        for prefix, value in (("theta", args.theta), ("gamma", args.gamma), ("eta", args.eta)):
            if value is not None and name.split(".")[0] == prefix:
                bindings[name] = value if prefix == "theta" else _complex_arg(value)
    bindings.update(_parse_bindings(args.bind))
    out = execute(circuit, psi, bindings)
    probs: dict = {}
    for (lab,), amp in out.items():
        probs[(lab.rail, lab.time)] = probs.get((lab.rail, lab.time), 0.0) + abs(amp) ** 2
    rows = sorted(probs.items())
    if args.format == "json":
        doc = {
            "circuit": circuit.name,
            "total_norm": float(_fmt(sum(probs.values()))),
            "rows": [{"rail": r, "time": t, "probability": float(_fmt(p))} for (r, t), p in rows],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rail", "time", "probability"])
    for (r, t), p in rows:
        w.writerow([r, t, _fmt(p)])
    w.writerow(["total_norm", "", _fmt(sum(probs.values()))])
    return buf.getvalue()


def cmd_run(args) -> int:
    from .analysis.outcomes import run_protocol
    from .protocols import build

    if args.netlist:
        _emit(_run_netlist(args), args.output)
        return EXIT_OK
    proto = build(_spec(args))
    table = run_protocol(proto, _noise(args, proto))
    meta = {"protocol": args.protocol, "n": proto.n, "k": proto.k}
    _emit(_table_text(table, args.format, meta), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .analysis.sweep import SweepConfig, run_sweep
    from .protocols import build

    proto = build(_spec(args))
    cfg = SweepConfig(
        draws=args.draws, seed=args.seed, grid=args.grid, collective=args.collective, random_inputs=args.random_inputs
    )
    if args.threads is not None and args.threads < 1:
        raise SimulationError("--threads must be >= 1")
    report = run_sweep(proto, cfg, threads=args.threads)
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import acceptance
    from .elements import reflection_phase_override

    try:
        chosen = acceptance.select(args.only)
    except KeyError as exc:
        raise SimulationError(f"unknown criterion {exc.args[0]!r}") from None
    if args.list:
        for c in chosen:
            print(f"{c.ident}  {c.title}")
        return EXIT_OK
    guard = reflection_phase_override(-1j) if args.tamper == "bs-phase" else contextlib.nullcontext()
    with guard:
        results = [c.run() for c in chosen]
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return EXIT_OK if failed == 0 else EXIT_DOMAIN


COMMANDS = {"compile": cmd_compile, "run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
