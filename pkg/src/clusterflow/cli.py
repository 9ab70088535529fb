"""Command-line entry point.

Exit codes: 0 success, 2 protocol or verification failure, 3 domain error
(no protection below threshold), 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

from . import decoder, prepnet, resources

EXIT_OK = 0
EXIT_PROTOCOL = 2
EXIT_DOMAIN = 3
EXIT_USAGE = 64
OUT_ENV = "CLUSTERFLOW_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(name):
    def conv(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return value

    return conv


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args) -> int:
    return args.seed if args.seed is not None else secrets.randbits(63)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def cmd_verify_prep(args) -> int:
    cfg = prepnet.NetworkConfig(args.nx, args.ny, args.layers, 1, _seed(args))
    out = _out_dir(args)
    programs = None
    if args.inject_fault:
        layout = prepnet.build_network(cfg)
        programs = prepnet.inject_fault(prepnet.generate_programs(cfg, layout), layout)
    try:
        report = prepnet.verify_prepared_state(cfg, programs=programs)
    except prepnet.ProtocolViolation as exc:
        print(f"protocol violation: {type(exc).__name__}: {exc}", file=sys.stderr)
        _write(out / "verification.json", json.dumps({"seed": cfg.seed, "error": type(exc).__name__, "detail": str(exc)}, indent=2) + "\n")
        return EXIT_PROTOCOL
    data = dict(report.__dict__)
    data["seed"] = cfg.seed
    data["config"] = {"nx": cfg.nx, "ny": cfg.ny, "layers": cfg.layers}
    _write(out / "verification.json", json.dumps(data, sort_keys=True, indent=2) + "\n")
    print(f"qubits={report.qubits} projections={report.projections} satisfied={report.satisfied} "
          f"frame_satisfied={report.frame_satisfied} violated={report.violated}")
    return EXIT_OK if report.violated == 0 else EXIT_PROTOCOL


def cmd_simulate(args) -> int:
    cfg = prepnet.NetworkConfig(args.nx, args.ny, args.layers, args.gamma, 0)
    out = _out_dir(args)
    try:
        trace = prepnet.run(cfg, record_trace=args.trace)
    except prepnet.ProtocolViolation as exc:
        print(f"protocol violation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    events = prepnet.schedule_to_projections(trace)
    per_copy = {}
    for chip, u in trace.utilization.items():
        per_copy.setdefault(chip.copy, []).append(u)
    occ = list(trace.occupancy.values())
    summary = {
        "config": {"nx": cfg.nx, "ny": cfg.ny, "layers": cfg.layers, "gamma": cfg.gamma},
        "chips": trace.layout.formula_chips,
        "formula_chips": trace.layout.formula_chips,
        "layout_chips": trace.layout.layout_chips,
        "utilization_min_per_copy": {str(k): min(v) for k, v in sorted(per_copy.items())},
        "utilization_min": min(trace.utilization.values()),
        "occupancy_mean": sum(occ) / len(occ),
        "projections": len(events),
        "holds": len(trace.holds),
        "collisions": 0,
        "dropped_windows": trace.dropped,
        "table_divergences": prepnet.table_divergences(),
    }
    _write(out / "simulation.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    with open(out / "projections.jsonl", "w", encoding="utf-8") as fh:
        prepnet.write_projections_jsonl(events, fh)
    if args.trace:
        with open(out / "trace.jsonl", "w", encoding="utf-8") as fh:
            prepnet.write_trace_jsonl(trace, fh)
    print(f"chips={summary['chips']} layout_chips={summary['layout_chips']} "
          f"utilization_min={summary['utilization_min']:.3f} projections={summary['projections']}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    seed = _seed(args)
    out = _out_dir(args)
    scan = decoder.threshold_scan(args.d, args.p, args.trials, seed, args.ploss, args.flavor, args.method)
    _write(out / "threshold.csv", scan.csv())
    summary = {"seed": seed, "crossings": scan.crossings, "crossing": scan.crossing}
    _write(out / "crossing.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"seed={seed} crossing={scan.crossing}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    out = _out_dir(args)
    try:
        report = resources.full_report(args.p, args.pth, args.target, args.nx, args.ny, args.gamma, args.table)
    except resources.NoProtectionError as exc:
        print(f"no protection: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _write(out / "report.json", report.to_json())
    _write(out / "distillation.csv", resources.distillation_csv(args.p))
    v = report.values
    print(f"d={v['distance']} chips={v['chips']} t_gate_error={v['t_gate_error']:.4g} "
          f"qubits_per_t={v['logical_qubits_per_t']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clusterflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        if seed:
            p.add_argument("--seed", type=int, help="master seed; generated and recorded when omitted")

    p = sub.add_parser("verify-prep", help="simulate the preparation network and verify the cluster state")
    p.add_argument("--nx", type=_positive("nx"), default=2)
    p.add_argument("--ny", type=_positive("ny"), default=2)
    p.add_argument("--layers", type=_positive("layers"), default=4)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_verify_prep)

    p = sub.add_parser("simulate", help="run the network and report chip counts and utilization")
    p.add_argument("--nx", type=_positive("nx"), default=2)
    p.add_argument("--ny", type=_positive("ny"), default=2)
    p.add_argument("--layers", type=_positive("layers"), default=4)
    p.add_argument("--gamma", type=_positive("gamma"), default=1)
    p.add_argument("--trace", action="store_true", help="also write the full event trace")
    common(p, seed=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="Monte Carlo logical error rates over a (d, p) grid")
    p.add_argument("--d", type=_positive("d"), nargs="+", default=[3, 5, 7])
    p.add_argument("--p", type=float, nargs="+", default=[0.01, 0.02, 0.03, 0.04, 0.05])
    p.add_argument("--ploss", type=float, default=0.0)
    p.add_argument("--trials", type=_positive("trials"), default=10000)
    p.add_argument("--flavor", choices=[decoder.PRIMAL, decoder.DUAL], default=decoder.PRIMAL)
    p.add_argument("--method", choices=["auto", "fast", "exact"], default="auto")
    common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("estimate", help="resource and T-gate failure estimate")
    p.add_argument("--p", type=float, default=resources.DEFAULT_P)
    p.add_argument("--pth", type=float, default=resources.DEFAULT_PTH)
    p.add_argument("--target", type=float, default=resources.DEFAULT_TARGET)
    p.add_argument("--nx", type=_positive("nx"))
    p.add_argument("--ny", type=_positive("ny"))
    p.add_argument("--gamma", type=_positive("gamma"), default=1)
    p.add_argument("--table", choices=["original", "revised"], default="original")
    common(p, seed=False)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "threshold":
        if any(d < 2 for d in args.d):
            parser.error("distances must be >= 2")
        if any(not 0 <= p <= 1 for p in args.p) or not 0 <= args.ploss <= 1:
            parser.error("probabilities must lie in [0, 1]")
        if args.method == "fast" and args.ploss:
            parser.error("--method fast does not support losses")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
