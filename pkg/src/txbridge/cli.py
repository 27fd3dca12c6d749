"""Command-line driver: synthesize, simulate, compare, export-refs.

Exit codes: 0 success, 2 input error (parse/validation/missing file),
3 synthesis failure (no legal transactor), 4 simulation failure
(protocol deadlock, delay underrun, workload shape), 5 comparison failure
(traces cover different transactions).  No output file is created until
every input has parsed and validated.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from fractions import Fraction

from . import protocols
from .dsl import (
    ParseError,
    ValidationFailure,
    parse_interface_spec,
    parse_payload_mapping,
    parse_transactor_spec,
    serialize_transactor,
)
from .fsm import ActionKind, FsmError
from .sim import (
    DelayModel,
    ErrorReport,
    SimTrace,
    SimulationError,
    TraceFormatError,
    WorkloadMismatchError,
    compare_traces,
    read_trace_csv,
    write_events_csv,
    write_trace_csv,
)
from .synth import (
    NoLegalTransactorError,
    SynthesisError,
    SynthesisInputError,
    T_SIDE,
    TransactorFsm,
)


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _info(msg: str) -> None:
    print(msg)


def _fail(msg: str) -> None:
    print(f"txbridge: error: {msg}", file=sys.stderr)


def cmd_synth(args: argparse.Namespace) -> int:
    initiator = parse_interface_spec(_read(args.initiator))
    target = parse_interface_spec(_read(args.target))
    mapping = parse_payload_mapping(_read(args.map))
    t_side, i_side = protocols.synthesis_inputs(initiator, target)
    from .synth import synthesize

    result = synthesize(t_side, i_side, mapping, name=args.name)
    g = result.transactor
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_transactor(g))
    _info(f"wrote {args.out}")
    _info(f"pairs={len(g.pairs)} transitions={len(g.transitions)}")
    _info(f"search: {result.stats.summary()}")
    if args.verbose:
        _info(f"per-step candidates: {list(result.stats.step_candidates)}")
    return 0


def _transactor_burst_len(g: TransactorFsm) -> int:
    samples = sum(
        1
        for t in g.transitions
        if t.side == T_SIDE
        for a in t.actions
        if a.kind is ActionKind.SAMPLE_DATA
    )
    return max(samples - 1, 0)  # one address beat, the rest data


def _build_workload(args: argparse.Namespace):
    if args.workload:
        return protocols.generate_workload(args.workload, args.n, args.seed)
    return protocols.fixed_write_workload(
        n=args.n, burst_len=args.burst_len, idle_gap_cycles=args.gap, seed=args.seed
    )


def _build_delay_model(args: argparse.Namespace) -> DelayModel:
    try:
        prob = Fraction(args.contention_prob)
    except (ValueError, ZeroDivisionError):
        raise ValueError(
            f"cannot read --contention-prob {args.contention_prob!r} as a fraction"
        ) from None
    lo, _, hi = args.contention_extra.partition(":")
    seed = args.seed if args.delay_seed is None else args.delay_seed
    return DelayModel(
        base_latency_cycles=args.delay_base,
        contention_probability=prob,
        contention_extra_cycles=(int(lo), int(hi or lo)),
        seed=seed,
    )


def cmd_sim(args: argparse.Namespace) -> int:
    if not args.conventional and not args.reference and not args.transactor:
        _fail("give a transactor file, or --conventional, or --reference")
        return 2
    loaded: TransactorFsm | None = None
    if args.transactor and not (args.conventional or args.reference):
        loaded = parse_transactor_spec(_read(args.transactor))
    workload = _build_workload(args)
    delays = _build_delay_model(args)

    lengths = sorted({t.burst_len for t in workload.transfers})
    suite = protocols.build_protocol_suite(tuple(lengths))
    if loaded is not None:
        k = _transactor_burst_len(loaded)
        models = []
        for m in suite.models:
            models.append(replace(m, transactor=loaded) if m.burst_len == k else m)
        suite = replace(suite, models=tuple(models))
        if k not in lengths and args.verbose:
            _info(f"note: workload never uses the loaded transactor's burst length {k}")

    approach = (
        "conventional" if args.conventional else "reference" if args.reference else "coherent"
    )
    trace = protocols.run_suite(suite, workload, delays, approach=approach)
    write_trace_csv(trace, args.out)
    _info(f"wrote {args.out} ({len(trace.records)} records, approach={approach})")
    if args.events_out:
        write_events_csv(trace, args.events_out)
        _info(f"wrote {args.events_out} ({len(trace.events)} events)")
    return 0


def _pair_label(path: str) -> tuple[str, str] | None:
    import os

    stem = os.path.splitext(os.path.basename(path))[0]
    parts = stem.split("__")
    if len(parts) == 2:
        return parts[0], parts[1]
    return None


def _render_report(
    pairs: list[tuple[str, str, ErrorReport]]
) -> str:
    lines = ["txbridge comparison report", f"pairs={len(pairs)}"]
    for idx, (test_path, ref_path, report) in enumerate(pairs):
        lines.append("")
        lines.append(f"[pair {idx}]")
        lines.append(f"test={test_path}")
        lines.append(f"reference={ref_path}")
        lines.append(f"total={report.total}")
        lines.append(f"erroneous={len(report.erroneous)}")
        rate = report.error_rate
        lines.append(f"error_rate_exact={rate.numerator}/{rate.denominator}")
        lines.append(f"error_rate_percent={float(rate) * 100:.6f}")
        for txn, bad in report.verdicts:
            lines.append(f"verdict,{txn},{'error' if bad else 'ok'}")
    return "\n".join(lines) + "\n"


def _print_matrix(pairs: list[tuple[str, str, ErrorReport]]) -> None:
    labels = [_pair_label(test) for test, _, _ in pairs]
    if any(lbl is None for lbl in labels):
        for (test, _, report), lbl in zip(pairs, labels):
            _info(f"{test}: {report.summary()}")
        return
    approaches = sorted({a for a, _ in labels})
    workloads = sorted({w for _, w in labels})
    cell = {lbl: report.summary().split(" = ")[1] for lbl, (_, _, report) in zip(labels, pairs)}
    width = max(len(a) for a in approaches) + 2
    colw = max(max(len(w) for w in workloads), 8) + 2
    _info("".ljust(width) + "".join(w.ljust(colw) for w in workloads))
    for a in approaches:
        row = a.ljust(width)
        for w in workloads:
            row += cell.get((a, w), "-").ljust(colw)
        _info(row)


def cmd_compare(args: argparse.Namespace) -> int:
    paths = [(args.test, args.reference)] + [tuple(p) for p in (args.pair or [])]
    traces = [(t, r, read_trace_csv(t), read_trace_csv(r)) for t, r in paths]
    pairs = [
        (t_path, r_path, compare_traces(t_trace, r_trace))
        for t_path, r_path, t_trace, r_trace in traces
    ]
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_render_report(pairs))
    if len(pairs) == 1:
        _info(pairs[0][2].summary())
    else:
        _print_matrix(pairs)
    _info(f"wrote {args.out}")
    return 0


def cmd_export_refs(args: argparse.Namespace) -> int:
    written = protocols.export_reference_files(args.out)
    for path in written:
        _info(f"wrote {path}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="txbridge",
        description="Synthesize timing-coherent transactors and co-simulate "
        "cycle-accurate masters against transaction-level slaves.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a transactor from two interface FSMs")
    p.add_argument("initiator", help="initiating component's .ifsm file")
    p.add_argument("target", help="responding component's .ifsm file")
    p.add_argument("map", help="payload mapping .pmap file")
    p.add_argument("out", help="output .tfsm path")
    p.add_argument("--name", default=None, help="name for the generated transactor")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sim", help="run a co-simulation and write the trace")
    p.add_argument("transactor", nargs="?", default=None, help=".tfsm to execute")
    p.add_argument("-o", "--out", required=True, help="output trace .csv path")
    p.add_argument("--conventional", action="store_true",
                   help="run the timing-oblivious baseline instead of a transactor")
    p.add_argument("--reference", action="store_true",
                   help="run the pure cycle-accurate reference configuration")
    p.add_argument("--workload", choices=protocols.WORKLOAD_KINDS, default=None,
                   help="generated workload kind (default: fixed two-beat writes)")
    p.add_argument("--n", type=int, default=1, help="number of transfers")
    p.add_argument("--seed", type=int, default=0, help="workload seed")
    p.add_argument("--burst-len", type=int, default=2,
                   help="burst length for the fixed default workload")
    p.add_argument("--gap", type=int, default=0,
                   help="idle gap cycles for the fixed default workload")
    p.add_argument("--delay-base", type=int, default=5,
                   help="base service latency in cycles for a two-beat transfer")
    p.add_argument("--contention-prob", default="0",
                   help="contention probability as an exact fraction, e.g. 0.3 or 3/10")
    p.add_argument("--contention-extra", default="1:8",
                   help="contention penalty range in cycles, LO:HI inclusive")
    p.add_argument("--delay-seed", type=int, default=None,
                   help="delay model seed (default: same as --seed)")
    p.add_argument("--events-out", default=None, help="optional event log .csv path")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("compare", help="compare a trace against a reference trace")
    p.add_argument("test", help="trace under test (.csv)")
    p.add_argument("reference", help="reference trace (.csv)")
    p.add_argument("out", help="output report path")
    p.add_argument("--pair", action="append", nargs=2, metavar=("TEST", "REF"),
                   help="additional test/reference pair (repeatable)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-refs", help="write the embedded reference models to disk")
    p.add_argument("--out", default=".", help="destination directory")
    p.set_defaults(func=cmd_export_refs)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except WorkloadMismatchError as exc:
        _fail(str(exc))
        return 5
    except TraceFormatError as exc:
        _fail(str(exc))
        return 2
    except NoLegalTransactorError as exc:
        _fail(str(exc))
        return 3
    except SynthesisInputError as exc:
        _fail(str(exc))
        return 2
    except SynthesisError as exc:
        _fail(str(exc))
        return 3
    except SimulationError as exc:
        _fail(str(exc))
        return 4
    except (ParseError, ValidationFailure, FsmError) as exc:
        _fail(str(exc))
        return 2
    except OSError as exc:
        _fail(str(exc))
        return 2
    except ValueError as exc:
        _fail(str(exc))
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
