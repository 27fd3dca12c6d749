"""Deterministic mixed-level co-simulation kernel.

The kernel executes one cycle-accurate master model against a responder and
records every transaction's begin and end instant on both membranes:

* ``TransactorEngine``    replays a synthesized transactor: the CA side runs
  in lockstep with the master cycle by cycle on the master's local clock,
  the PVT side fires as instantaneous interface calls, and the returned
  delay is burned off at the delay-consumption state by holding the
  completion handshake inactive.
* ``PureCaEngine``        runs a CA master against a CA slave with no
  transactor in between -- the ground-truth reference configuration.
* ``ConventionalEngine``  models the single-global-clock baseline that
  issues the transaction call only after payload collection completes and
  acknowledges the CA handshake on the cycle after the call returns.

Time is an integer count of nanoseconds throughout; there is no floating
point anywhere in the timing path, because the acceptance predicate is
exact boundary equality.  Identical inputs and seeds give byte-identical
serialized traces.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from fractions import Fraction

from .fsm import (
    ActionKind,
    InterfaceFsm,
    Level,
    Role,
    SignalKind,
    Transition,
    find_last_handshake_state,
)
from .synth import I_SIDE, T_SIDE, TransactorFsm, TransactorTransition

CA = "CA"
PVT = "PVT"


class SimulationError(ValueError):
    code = "simulation-error"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")
        self.message = message


class DelayUnderrunError(SimulationError):
    code = "delay-underrun"


class ProtocolDeadlockError(SimulationError):
    code = "protocol-deadlock"


class WorkloadShapeError(SimulationError):
    code = "workload-shape-mismatch"


class WorkloadMismatchError(SimulationError):
    code = "workload-mismatch"


class OrphanRecordError(SimulationError):
    code = "orphan-record"

    def __init__(self, message: str, txn_ids: tuple[int, ...]):
        super().__init__(message)
        self.txn_ids = txn_ids


class TraceFormatError(SimulationError):
    code = "trace-format"


@dataclass(frozen=True)
class LocalClock:
    """A component's private notion of now.  PVT components are event-timed
    (period 0); CA clocks only ever sit on cycle boundaries."""

    owner: str
    now_ns: int
    period_ns: int

    def __post_init__(self) -> None:
        if self.now_ns < 0:
            raise ValueError("clocks do not run backwards")
        if self.period_ns and self.now_ns % self.period_ns:
            raise ValueError(
                f"{self.owner}: {self.now_ns} ns is not on a {self.period_ns} ns boundary"
            )


def advance_local_clock(clock: LocalClock, cycles: int) -> LocalClock:
    """Advance one CA clock by a whole number of cycles; nobody else moves."""
    if clock.period_ns <= 0:
        raise ValueError(f"{clock.owner} is event-timed, not cycle-timed")
    if cycles <= 0:
        raise ValueError("advance by at least one cycle")
    return replace(clock, now_ns=clock.now_ns + cycles * clock.period_ns)


def wrap_clock_for_call(
    begin_ns: int, returned_delay_ns: int, ca_now_ns: int, period_ns: int
) -> tuple[int, int]:
    """Local clock wrapping: place the PVT-side end at begin + delay and
    convert the difference to committed CA time into held handshake cycles.

    ``ca_now_ns`` is the CA-side completion instant the protocol has already
    committed to (the earliest cycle boundary at which the completion
    handshake can finish).  Returns (pvt_end_ns, hold_cycles).
    """
    if period_ns <= 0:
        raise ValueError("period must be positive")
    if returned_delay_ns < 0 or ca_now_ns < begin_ns:
        raise ValueError("need returned_delay >= 0 and ca_now >= begin")
    pvt_end = begin_ns + returned_delay_ns
    if pvt_end < ca_now_ns:
        raise DelayUnderrunError(
            f"returned delay ends at {pvt_end} ns but the interface protocol "
            f"already commits the transaction until {ca_now_ns} ns"
        )
    if (pvt_end - ca_now_ns) % period_ns:
        raise SimulationError(
            f"delay-not-cycle-multiple: {pvt_end - ca_now_ns} ns of slack "
            f"does not divide into {period_ns} ns cycles"
        )
    return pvt_end, (pvt_end - ca_now_ns) // period_ns


@dataclass(frozen=True)
class Transfer:
    """One workload entry: a burst transfer plus the idle gap preceding it."""

    kind: str  # "write" | "read"
    burst_len: int
    idle_gap_cycles: int
    payload_values: tuple[str, ...]


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    seed: int
    transfers: tuple[Transfer, ...]

    def __len__(self) -> int:
        return len(self.transfers)


@dataclass(frozen=True)
class DelayModel:
    """Seeded service-delay source for the transaction-level responder.

    ``base_latency_cycles`` is the service time of the canonical two-beat
    transfer; longer bursts add one cycle per extra beat.  With probability
    ``contention_probability`` a transfer additionally draws a contention
    penalty from ``contention_extra_cycles`` (inclusive range).  All derived
    delays are whole cycles, and the same seed always yields the same
    sequence.
    """

    base_latency_cycles: int
    contention_probability: Fraction
    contention_extra_cycles: tuple[int, int]
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "contention_probability", Fraction(self.contention_probability)
        )
        if self.base_latency_cycles < 1:
            raise ValueError("base latency must be at least one cycle")
        if not 0 <= self.contention_probability <= 1:
            raise ValueError("contention probability must be within [0, 1]")
        lo, hi = self.contention_extra_cycles
        if lo < 1 or hi < lo:
            raise ValueError("contention extra cycles must be a positive range")

    def delays_for(self, workload: WorkloadSpec) -> tuple[int, ...]:
        """Per-transfer service delays in cycles, in workload order."""
        rng = random.Random(self.seed)
        p = self.contention_probability
        lo, hi = self.contention_extra_cycles
        out = []
        for transfer in workload.transfers:
            contends = rng.randrange(p.denominator) < p.numerator
            extra = rng.randint(lo, hi) if contends else 0
            out.append(self.base_latency_cycles + (transfer.burst_len - 2) + extra)
        return tuple(out)


@dataclass(frozen=True)
class TransactionRecord:
    txn_id: int
    side: str  # CA | PVT
    begin_ns: int
    end_ns: int
    payload_digest: str

    def __post_init__(self) -> None:
        if self.end_ns < self.begin_ns:
            raise ValueError("transaction ends before it begins")


@dataclass(frozen=True)
class SimEvent:
    time_ns: int
    component: str
    description: str


@dataclass(frozen=True)
class SimTrace:
    records: tuple[TransactionRecord, ...]
    events: tuple[SimEvent, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "records",
            tuple(sorted(self.records, key=lambda r: (r.txn_id, r.side))),
        )


def payload_digest(values: tuple[str, ...]) -> str:
    return hashlib.sha256(",".join(values).encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# cycle-level machinery


@dataclass(frozen=True)
class _Edge:
    """Pre-chewed transition: guards and effects split out for the cycle loop."""

    to_state: int
    requires: tuple[tuple[str, int], ...]
    drive_levels: tuple[tuple[str, int], ...]
    drive_data: tuple[str, ...]
    sample_data: tuple[str, ...]
    is_loop: bool
    consumes_delay: bool


def _chew(t: Transition) -> _Edge:
    return _Edge(
        to_state=t.to_state,
        requires=tuple(
            (a.signal, a.level)
            for a in t.actions
            if a.kind is ActionKind.REQUIRE_LEVEL
        ),
        drive_levels=tuple(
            (a.signal, a.level) for a in t.actions if a.kind is ActionKind.DRIVE_LEVEL
        ),
        drive_data=tuple(
            a.signal for a in t.actions if a.kind is ActionKind.DRIVE_DATA
        ),
        sample_data=tuple(
            a.signal for a in t.actions if a.kind is ActionKind.SAMPLE_DATA
        ),
        is_loop=t.is_self_loop,
        consumes_delay=any(a.kind is ActionKind.CONSUME_DELAY for a in t.actions),
    )


def _chew_fsm(fsm: InterfaceFsm) -> dict[int, tuple[_Edge, ...]]:
    return {s: tuple(_chew(t) for t in fsm.outgoing(s)) for s in fsm.states}


def _satisfied(requires: tuple[tuple[str, int], ...], levels: dict[str, int],
               extra: tuple[tuple[str, int], ...]) -> bool:
    for sig, want in requires:
        have = levels.get(sig)
        for s, v in extra:
            if s == sig:
                have = v
        if have != want:
            return False
    return True


def _initial_levels(fsm: InterfaceFsm) -> dict[str, int]:
    return {
        s.name: s.inactive_level
        for s in fsm.signals
        if s.kind is SignalKind.HANDSHAKE
    }


def nominal_path(fsm: InterfaceFsm) -> list[Transition]:
    """Shortest initial -> final path ignoring self-loops (the zero-wait
    schedule of the protocol)."""
    prev: dict[int, Transition] = {}
    seen = {fsm.initial}
    queue = [fsm.initial]
    while queue:
        state = queue.pop(0)
        if state == fsm.final:
            break
        for t in fsm.outgoing(state):
            if not t.is_self_loop and t.to_state not in seen:
                seen.add(t.to_state)
                prev[t.to_state] = t
                queue.append(t.to_state)
    if fsm.final not in seen:
        raise SimulationError(f"{fsm.name}: no path from initial to final state")
    chain: list[Transition] = []
    state = fsm.final
    while state != fsm.initial:
        t = prev[state]
        chain.append(t)
        state = t.from_state
    chain.reverse()
    return chain


def master_payload_slots(master: InterfaceFsm) -> int:
    """How many data values the master drives along its nominal path."""
    return sum(
        1
        for t in nominal_path(master)
        for a in t.actions
        if a.kind is ActionKind.DRIVE_DATA
    )


@dataclass
class _Outcome:
    records: list[TransactionRecord]
    events: list[SimEvent]
    end_ns: int


def _check_master(master: InterfaceFsm) -> None:
    if master.level is not Level.CA or master.role is not Role.INITIATOR:
        raise SimulationError(f"{master.name}: the master must be a CA initiator")
    if not master.clock_period_ns:
        raise SimulationError(f"{master.name}: master needs a clock period")


class _MasterWalker:
    """Joint-step helper: picks the master's unique enabled transition under
    the responder's drive proposal, then applies both sides' effects."""

    def __init__(self, master: InterfaceFsm):
        _check_master(master)
        self.fsm = master
        self.edges = _chew_fsm(master)

    def pick(
        self,
        state: int,
        levels: dict[str, int],
        responder_drives: tuple[tuple[str, int], ...],
    ) -> _Edge | None:
        enabled = [
            e
            for e in self.edges[state]
            if _satisfied(e.requires, levels, responder_drives)
        ]
        if not enabled:
            return None
        if len(enabled) > 1:
            # guard determinism was validated; getting here means two
            # unguarded choices, which a master model must not have
            raise ProtocolDeadlockError(
                f"{self.fsm.name}: ambiguous choice at state {state}"
            )
        return enabled[0]


def _fire_joint(
    master_edge: _Edge,
    responder_drives: tuple[tuple[str, int], ...],
    responder_samples: tuple[str, ...],
    levels: dict[str, int],
    wires: dict[str, str],
    value_feed: list[str],
    collected: list[str],
    txn_id: int,
) -> None:
    for sig, lvl in master_edge.drive_levels:
        levels[sig] = lvl
    for sig, lvl in responder_drives:
        levels[sig] = lvl
    for sig in master_edge.drive_data:
        if not value_feed:
            raise WorkloadShapeError(
                f"txn {txn_id}: master needs more payload values than the transfer carries"
            )
        wires[sig] = value_feed.pop(0)
    for sig in responder_samples:
        if sig not in wires:
            raise ProtocolDeadlockError(
                f"txn {txn_id}: sampled {sig} before anything was driven on it"
            )
        collected.append(wires[sig])


class TransactorEngine:
    """Coherent mixed-level execution of one synthesized transactor."""

    def __init__(
        self,
        master: InterfaceFsm,
        transactor: TransactorFsm,
        slave: InterfaceFsm,
        component: str = "transactor",
    ):
        if transactor.t_level is not Level.CA or transactor.i_level is not Level.PVT:
            raise SimulationError(
                f"{transactor.name}: kernel drives CA-target / PVT-initiator transactors"
            )
        if slave.level is not Level.PVT or slave.role is not Role.TARGET:
            raise SimulationError(f"{slave.name}: the slave must be a PVT target")
        self.master = _MasterWalker(master)
        self.transactor = transactor
        self.slave = slave
        self.component = component
        self.period = master.clock_period_ns or 0
        if transactor.clock_period_ns not in (None, self.period):
            raise SimulationError(
                f"{transactor.name}: clock {transactor.clock_period_ns} ns does not "
                f"match the master's {self.period} ns"
            )
        self.payload_slots = master_payload_slots(master)
        self.out: dict[tuple[int, int], list[TransactorTransition]] = {}
        for t in transactor.transitions:
            self.out.setdefault((t.from_pair.p, t.from_pair.q), []).append(t)
        self._chewed = {
            id(t): _chew(
                Transition(
                    t.from_pair.p if t.side == T_SIDE else t.from_pair.q,
                    t.to_pair.p if t.side == T_SIDE else t.to_pair.q,
                    t.actions,
                )
            )
            for ts in self.out.values()
            for t in ts
        }

    def _pvt_kind(self, t: TransactorTransition) -> str | None:
        kinds = {a.kind for a in t.actions}
        if kinds & {ActionKind.BEGIN_CALL_SEND, ActionKind.PAYLOAD_SEND}:
            return "call"
        if kinds & {
            ActionKind.DELAY_RECV,
            ActionKind.END_CALL_RECV,
            ActionKind.RESPONSE_RECV,
        }:
            return "return"
        return None

    def run_transfer(
        self, txn_id: int, transfer: Transfer, t0: int, delay_ns: int
    ) -> _Outcome:
        if len(transfer.payload_values) != self.payload_slots:
            raise WorkloadShapeError(
                f"txn {txn_id}: transfer carries {len(transfer.payload_values)} payload "
                f"values but the protocol moves {self.payload_slots}"
            )
        period = self.period
        master = self.master
        levels = _initial_levels(master.fsm)
        wires: dict[str, str] = {}
        value_feed = list(transfer.payload_values)
        collected: list[str] = []
        events: list[SimEvent] = []
        records: list[TransactionRecord] = []

        pair = self.transactor.initial_pair
        m_state = master.fsm.initial
        ca_now = t0
        begin = t0
        pvt_end: int | None = None
        remaining: int | None = None
        held = 0
        call_issued = False
        returned = False

        events.append(
            SimEvent(t0, master.fsm.name, f"txn {txn_id}: begin ({transfer.kind}, burst {transfer.burst_len})")
        )
        budget = 4 * (len(master.fsm.states) + len(self.transactor.pairs)) + delay_ns // max(period, 1) + 64

        def at_final() -> bool:
            return pair == self.transactor.final_pair and m_state == master.fsm.final

        while not at_final():
            budget -= 1
            if budget < 0:
                raise ProtocolDeadlockError(f"txn {txn_id}: no progress (cycle budget exhausted)")

            fired = False
            for t in self.out.get((pair.p, pair.q), ()):
                if t.side != I_SIDE:
                    continue
                kind = self._pvt_kind(t)
                if kind == "call" and not call_issued:
                    call_issued = True
                    pair = t.to_pair
                    events.append(
                        SimEvent(
                            ca_now,
                            self.component,
                            f"txn {txn_id}: issued transaction call carrying begin time {begin} ns",
                        )
                    )
                    events.append(
                        SimEvent(
                            begin,
                            self.slave.name,
                            f"txn {txn_id}: call received, returning delay {delay_ns} ns",
                        )
                    )
                    fired = True
                    break
                if kind == "return" and call_issued and not returned:
                    returned = True
                    if delay_ns % period:
                        rounded = delay_ns + (period - delay_ns % period)
                        events.append(
                            SimEvent(
                                ca_now,
                                self.component,
                                f"txn {txn_id}: warning: delay {delay_ns} ns rounded up to {rounded} ns "
                                f"(not a multiple of the {period} ns cycle)",
                            )
                        )
                        delay_ns = rounded
                    pvt_end = begin + delay_ns
                    pair = t.to_pair
                    records.append(
                        TransactionRecord(
                            txn_id, PVT, begin, pvt_end, payload_digest(tuple(collected))
                        )
                    )
                    events.append(
                        SimEvent(
                            ca_now,
                            self.component,
                            f"txn {txn_id}: wrapped PVT clock to end time {pvt_end} ns",
                        )
                    )
                    fired = True
                    break
            if fired:
                continue
            if at_final():
                break

            t_edges = [
                t for t in self.out.get((pair.p, pair.q), ()) if t.side == T_SIDE
            ]
            loops = [t for t in t_edges if t.is_self_loop]
            progress = [t for t in t_edges if not t.is_self_loop]
            consume_loop = next(
                (t for t in loops if self._chewed[id(t)].consumes_delay), None
            )
            if consume_loop is not None and pvt_end is not None and remaining is None:
                # earliest boundary the protocol can still make: one more cycle
                nominal_end = ca_now + period
                try:
                    _, remaining = wrap_clock_for_call(begin, delay_ns, nominal_end, period)
                except DelayUnderrunError as exc:
                    raise DelayUnderrunError(f"txn {txn_id}: {exc.message}") from None
            if consume_loop is not None and remaining is not None and remaining > 0:
                candidates = [consume_loop]
            else:
                candidates = progress

            step = None
            for t in candidates:
                edge = self._chewed[id(t)]
                m_edge = master.pick(m_state, levels, edge.drive_levels)
                if m_edge is None:
                    continue
                if not _satisfied(edge.requires, levels, m_edge.drive_levels):
                    continue
                step = (t, edge, m_edge)
                break
            if step is None:
                raise ProtocolDeadlockError(
                    f"txn {txn_id}: no joint transition at pair {pair}, "
                    f"master state {m_state}"
                )
            t, edge, m_edge = step
            _fire_joint(
                m_edge, edge.drive_levels, edge.sample_data, levels, wires,
                value_feed, collected, txn_id,
            )
            if edge.consumes_delay:
                assert remaining is not None
                remaining -= 1
                held += 1
            m_state = m_edge.to_state
            pair = t.to_pair
            ca_now += period

        if pvt_end is None:
            raise ProtocolDeadlockError(f"txn {txn_id}: finished without a transaction call")
        if ca_now != pvt_end:
            raise SimulationError(
                f"txn {txn_id}: CA completed at {ca_now} ns, PVT at {pvt_end} ns"
            )
        if held:
            events.append(
                SimEvent(
                    ca_now,
                    self.component,
                    f"txn {txn_id}: held completion handshake inactive {held} extra cycle(s)",
                )
            )
        records.append(
            TransactionRecord(
                txn_id, CA, begin, ca_now, payload_digest(transfer.payload_values)
            )
        )
        events.append(SimEvent(ca_now, master.fsm.name, f"txn {txn_id}: end"))
        return _Outcome(records, events, ca_now)


class PureCaEngine:
    """CA master against a CA slave, no transactor: the reference run.

    The slave responds at full rate and stretches only the completion
    handshake, holding it inactive until the modeled service delay has
    elapsed.  Both membranes trivially observe the same boundaries; records
    are emitted under both side labels so reference traces align with
    mixed-level ones.
    """

    def __init__(self, master: InterfaceFsm, slave: InterfaceFsm, component: str = "ca_slave"):
        if slave.level is not Level.CA or slave.role is not Role.TARGET:
            raise SimulationError(f"{slave.name}: the reference slave must be a CA target")
        if slave.clock_period_ns != master.clock_period_ns:
            raise SimulationError("master and slave clocks differ")
        self.master = _MasterWalker(master)
        self.slave = slave
        self.component = component
        self.period = master.clock_period_ns or 0
        self.payload_slots = master_payload_slots(master)
        self.edges = _chew_fsm(slave)
        self.hold_state = find_last_handshake_state(slave)

    def run_transfer(
        self, txn_id: int, transfer: Transfer, t0: int, delay_ns: int
    ) -> _Outcome:
        if len(transfer.payload_values) != self.payload_slots:
            raise WorkloadShapeError(
                f"txn {txn_id}: transfer carries {len(transfer.payload_values)} payload "
                f"values but the protocol moves {self.payload_slots}"
            )
        period = self.period
        if delay_ns % period:
            delay_ns += period - delay_ns % period
        end_target = t0 + delay_ns
        levels = _initial_levels(self.slave)
        wires: dict[str, str] = {}
        value_feed = list(transfer.payload_values)
        collected: list[str] = []
        events = [
            SimEvent(t0, self.master.fsm.name,
                     f"txn {txn_id}: begin ({transfer.kind}, burst {transfer.burst_len})"),
            SimEvent(t0, self.component, f"txn {txn_id}: service delay {delay_ns} ns"),
        ]

        m_state = self.master.fsm.initial
        s_state = self.slave.initial
        ca_now = t0
        budget = 4 * len(self.slave.states) + delay_ns // max(period, 1) + 64
        while not (m_state == self.master.fsm.final and s_state == self.slave.final):
            budget -= 1
            if budget < 0:
                raise ProtocolDeadlockError(f"txn {txn_id}: no progress in reference run")
            all_edges = self.edges[s_state]
            loops = [e for e in all_edges if e.is_loop]
            progress = [e for e in all_edges if not e.is_loop]
            if s_state == self.hold_state:
                if ca_now + period < end_target:
                    if not loops:
                        raise ProtocolDeadlockError(
                            f"txn {txn_id}: slave has no wait state to stretch the handshake"
                        )
                    candidates = loops
                elif ca_now + period == end_target:
                    candidates = progress
                else:
                    raise DelayUnderrunError(
                        f"txn {txn_id}: service delay ends at {end_target} ns but the "
                        f"protocol cannot complete before {ca_now + period} ns"
                    )
            else:
                candidates = progress
            step = None
            for edge in candidates:
                m_edge = self.master.pick(m_state, levels, edge.drive_levels)
                if m_edge is None:
                    continue
                if not _satisfied(edge.requires, levels, m_edge.drive_levels):
                    continue
                step = (edge, m_edge)
                break
            if step is None:
                raise ProtocolDeadlockError(
                    f"txn {txn_id}: no joint transition at slave state {s_state}, "
                    f"master state {m_state}"
                )
            edge, m_edge = step
            _fire_joint(
                m_edge, edge.drive_levels, edge.sample_data, levels, wires,
                value_feed, collected, txn_id,
            )
            m_state = m_edge.to_state
            s_state = edge.to_state
            ca_now += period

        if ca_now != end_target:
            raise SimulationError(
                f"txn {txn_id}: reference run ended at {ca_now} ns, wanted {end_target} ns"
            )
        records = [
            TransactionRecord(txn_id, CA, t0, ca_now, payload_digest(transfer.payload_values)),
            TransactionRecord(txn_id, PVT, t0, ca_now, payload_digest(tuple(collected))),
        ]
        events.append(SimEvent(ca_now, self.master.fsm.name, f"txn {txn_id}: end"))
        return _Outcome(records, events, ca_now)


@dataclass(frozen=True)
class ConventionalTransactor:
    """Executable model of the timing-oblivious baseline.

    One global clock: the device follows the CA protocol through payload
    collection (``prefinal_cycles``), spends one cycle packing and issuing
    the call when there is a payload at all, and completes the CA handshake
    on the cycle after the call returns.  No clock wrapping, no delay
    stretching.
    """

    name: str
    clock_period_ns: int
    prefinal_cycles: int
    payload_slots: int


class ConventionalEngine:
    def __init__(self, baseline: ConventionalTransactor, slave_name: str = "pvt_slave"):
        self.baseline = baseline
        self.period = baseline.clock_period_ns
        self.payload_slots = baseline.payload_slots
        self.slave_name = slave_name

    def run_transfer(
        self, txn_id: int, transfer: Transfer, t0: int, delay_ns: int
    ) -> _Outcome:
        b = self.baseline
        if len(transfer.payload_values) != b.payload_slots:
            raise WorkloadShapeError(
                f"txn {txn_id}: transfer carries {len(transfer.payload_values)} payload "
                f"values but the protocol moves {b.payload_slots}"
            )
        period = self.period
        collect_done = t0 + b.prefinal_cycles * period
        call_time = collect_done + (period if b.payload_slots else 0)
        pvt_begin = call_time
        pvt_end = pvt_begin + delay_ns
        ca_end = call_time + period
        digest = payload_digest(transfer.payload_values)
        events = [
            SimEvent(t0, b.name, f"txn {txn_id}: begin ({transfer.kind}, burst {transfer.burst_len})"),
            SimEvent(call_time, b.name,
                     f"txn {txn_id}: collection complete, issuing call at global time {call_time} ns"),
            SimEvent(pvt_begin, self.slave_name,
                     f"txn {txn_id}: call received, returning delay {delay_ns} ns"),
            SimEvent(ca_end, b.name, f"txn {txn_id}: CA handshake completed on return"),
        ]
        records = [
            TransactionRecord(txn_id, CA, t0, ca_end, digest),
            TransactionRecord(txn_id, PVT, pvt_begin, pvt_end, digest),
        ]
        return _Outcome(records, events, ca_end)


def run_timeline(engine_for, workload: WorkloadSpec, delays: DelayModel) -> SimTrace:
    """Drive a sequence of transfers through per-transfer engines.

    ``engine_for`` maps a Transfer to an engine (all sharing one clock
    period); a bare engine is accepted for uniform workloads.  Transfers run
    back to back on one timeline, each preceded by its idle gap.
    """
    if not workload.transfers:
        raise WorkloadShapeError("workload is empty")
    if not callable(engine_for):
        single = engine_for
        engine_for = lambda transfer: single  # noqa: E731
    delay_cycles = delays.delays_for(workload)
    records: list[TransactionRecord] = []
    events: list[SimEvent] = []
    current = 0
    for txn_id, transfer in enumerate(workload.transfers):
        engine = engine_for(transfer)
        t0 = current + transfer.idle_gap_cycles * engine.period
        outcome = engine.run_transfer(
            txn_id, transfer, t0, delay_cycles[txn_id] * engine.period
        )
        records.extend(outcome.records)
        events.extend(outcome.events)
        current = outcome.end_ns
    return SimTrace(tuple(records), tuple(events))


def run_cosimulation(
    master: InterfaceFsm,
    transactor: TransactorFsm | ConventionalTransactor,
    slave: InterfaceFsm,
    workload: WorkloadSpec,
    delays: DelayModel,
) -> SimTrace:
    """Mixed-level run: CA master, (synthesized or baseline) transactor, PVT
    slave.  All transfers must fit the master's payload shape; mixed-shape
    workloads go through a per-length protocol suite instead."""
    if isinstance(transactor, ConventionalTransactor):
        engine: object = ConventionalEngine(transactor, slave_name=slave.name)
    else:
        engine = TransactorEngine(master, transactor, slave)
    return run_timeline(engine, workload, delays)


def run_pure_ca_reference(
    master: InterfaceFsm,
    slave: InterfaceFsm,
    workload: WorkloadSpec,
    delays: DelayModel,
) -> SimTrace:
    """The ground-truth configuration: both components cycle-accurate."""
    return run_timeline(PureCaEngine(master, slave), workload, delays)


# ---------------------------------------------------------------------------
# trace analysis


def extract_transactions(
    trace: SimTrace,
) -> tuple[tuple[TransactionRecord, TransactionRecord], ...]:
    """Pair up per-transaction records (CA, PVT); orphans are an error."""
    by_txn: dict[int, dict[str, TransactionRecord]] = {}
    for r in trace.records:
        sides = by_txn.setdefault(r.txn_id, {})
        if r.side in sides:
            raise TraceFormatError(f"txn {r.txn_id}: duplicate {r.side} record")
        sides[r.side] = r
    orphans = tuple(
        txn for txn, sides in sorted(by_txn.items()) if len(sides) != 2
    )
    if orphans:
        raise OrphanRecordError(
            f"transactions recorded on one side only: {', '.join(map(str, orphans))}",
            orphans,
        )
    return tuple((sides[CA], sides[PVT]) for _, sides in sorted(by_txn.items()))


@dataclass(frozen=True)
class ErrorReport:
    """Per-transaction verdicts against a reference trace.

    A transaction is erroneous when its begin or end differs from the
    reference on either side.  ``error_rate`` is exact.
    """

    total: int
    verdicts: tuple[tuple[int, bool], ...]  # (txn_id, erroneous)

    @property
    def erroneous(self) -> tuple[int, ...]:
        return tuple(txn for txn, bad in self.verdicts if bad)

    @property
    def error_rate(self) -> Fraction:
        if self.total == 0:
            return Fraction(0)
        return Fraction(len(self.erroneous), self.total)

    def summary(self) -> str:
        rate = self.error_rate
        return (
            f"error_rate: {len(self.erroneous)}/{self.total} = "
            f"{float(rate) * 100:.1f}%"
        )


def compare_traces(test: SimTrace, reference: SimTrace) -> ErrorReport:
    test_pairs = {ca.txn_id: (ca, pvt) for ca, pvt in extract_transactions(test)}
    ref_pairs = {ca.txn_id: (ca, pvt) for ca, pvt in extract_transactions(reference)}
    if set(test_pairs) != set(ref_pairs):
        only_test = sorted(set(test_pairs) - set(ref_pairs))
        only_ref = sorted(set(ref_pairs) - set(test_pairs))
        raise WorkloadMismatchError(
            f"traces cover different transactions "
            f"(only in test: {only_test[:5]}, only in reference: {only_ref[:5]})"
        )
    verdicts = []
    for txn in sorted(test_pairs):
        t_ca, t_pvt = test_pairs[txn]
        r_ca, r_pvt = ref_pairs[txn]
        bad = (
            (t_ca.begin_ns, t_ca.end_ns) != (r_ca.begin_ns, r_ca.end_ns)
            or (t_pvt.begin_ns, t_pvt.end_ns) != (r_pvt.begin_ns, r_pvt.end_ns)
        )
        verdicts.append((txn, bad))
    return ErrorReport(total=len(verdicts), verdicts=tuple(verdicts))


# ---------------------------------------------------------------------------
# trace files

TRACE_HEADER = "txn_id,side,begin_ns,end_ns,payload_digest"
EVENT_HEADER = "time_ns,component,description"


def render_trace_csv(trace: SimTrace) -> str:
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(f"{r.txn_id},{r.side},{r.begin_ns},{r.end_ns},{r.payload_digest}")
    return "\n".join(lines) + "\n"


def parse_trace_csv(text: str) -> SimTrace:
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != TRACE_HEADER:
        raise TraceFormatError(f"expected header {TRACE_HEADER!r}")
    records = []
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 5:
            raise TraceFormatError(f"line {n}: expected 5 fields, got {len(parts)}")
        txn, side, begin, end, digest = parts
        if side not in (CA, PVT):
            raise TraceFormatError(f"line {n}: side must be CA or PVT")
        try:
            records.append(
                TransactionRecord(int(txn), side, int(begin), int(end), digest)
            )
        except ValueError as exc:
            raise TraceFormatError(f"line {n}: {exc}") from None
    return SimTrace(tuple(records))


def write_trace_csv(trace: SimTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_trace_csv(trace))


def read_trace_csv(path) -> SimTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace_csv(fh.read())


def write_events_csv(trace: SimTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EVENT_HEADER + "\n")
        for e in trace.events:
            desc = e.description.replace(",", ";")
            fh.write(f"{e.time_ns},{e.component},{desc}\n")
