"""Reference interface models, the conventional baseline, and seeded
workload generators.

The canonical protocol is a burst write: one address beat, ``burst_len``
data beats (each carried by HWDATA and accepted when HREADY is high), a
bus-release cycle, then a completion cycle gated by the HREADY handshake.
The two-beat instance ships as ``.ifsm``/``.pmap`` files embedded in the
package; other burst lengths are built programmatically by the same
constructors, so a mixed-length workload gets a per-length family of
masters, slaves and synthesized transactors (a payload mapping pins the
payload shape, so each burst length is its own little protocol).

Workload kinds:

* ``general_channel`` -- independent transfers with burst lengths drawn
  from {1, 2, 4, 8, 16} and small random idle gaps.
* ``multimedia``      -- back-to-back burst groups alternating between
  two-sources-to-one-destination writes and one-source-to-two-destinations
  reads, with bulk burst lengths.
* ``mixed``           -- a seeded interleaving of the two.

Everything here is a pure function of its seed and parameters.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources

from .dsl import parse_interface_spec, parse_payload_mapping
from .fsm import (
    InterfaceFsm,
    Level,
    MappingEntry,
    PayloadMapping,
    Role,
    SignalDecl,
    SignalKind,
    Transition,
    apply_delay_consumption,
    call_action,
    complement,
    drive,
    drive_level,
    require_level,
    sample,
    strip_self_loops,
)
from .sim import (
    ConventionalEngine,
    ConventionalTransactor,
    DelayModel,
    PureCaEngine,
    SimTrace,
    Transfer,
    TransactorEngine,
    WorkloadShapeError,
    WorkloadSpec,
    nominal_path,
    payload_digest,
    run_timeline,
)
from .synth import (
    SynthesisInputError,
    SynthesisStats,
    TransactorFsm,
    synthesize,
)

BURST_CHOICES = (1, 2, 4, 8, 16)
DEFAULT_CLOCK_NS = 10
WORKLOAD_KINDS = ("general_channel", "multimedia", "mixed")

_SIGNALS = (
    SignalDecl("HADDR", SignalKind.DATA),
    SignalDecl("HBUSREQ", SignalKind.HANDSHAKE, active_level=1),
    SignalDecl("HREADY", SignalKind.HANDSHAKE, active_level=1),
    SignalDecl("HWDATA", SignalKind.DATA),
)


def ca_write_initiator_fsm(
    burst_len: int = 2,
    clock_period_ns: int = DEFAULT_CLOCK_NS,
    name: str | None = None,
) -> InterfaceFsm:
    """Cycle-accurate burst-write master: address, data beats, release,
    READY-gated completion.  Wait states are self-loops polling READY low."""
    if burst_len < 1:
        raise ValueError("burst length must be positive")
    k = burst_len
    final = k + 3
    transitions = [Transition(0, 1, (drive_level("HBUSREQ", 1), drive("HADDR")))]
    for beat in range(1, k + 1):
        transitions.append(Transition(beat, beat, (require_level("HREADY", 0),)))
        transitions.append(
            Transition(beat, beat + 1, (require_level("HREADY", 1), drive("HWDATA")))
        )
    transitions.append(Transition(k + 1, k + 2, (drive_level("HBUSREQ", 0),)))
    transitions.append(Transition(k + 2, k + 2, (require_level("HREADY", 0),)))
    transitions.append(Transition(k + 2, final, (require_level("HREADY", 1),)))
    return InterfaceFsm(
        name=name or _family_name("ca_write_initiator", k),
        role=Role.INITIATOR,
        level=Level.CA,
        states=frozenset(range(final + 1)),
        initial=0,
        final=final,
        transitions=tuple(transitions),
        clock_period_ns=clock_period_ns,
        signals=_SIGNALS,
    )


def ca_write_target_fsm(
    burst_len: int = 2,
    clock_period_ns: int = DEFAULT_CLOCK_NS,
    name: str | None = None,
) -> InterfaceFsm:
    base = ca_write_initiator_fsm(burst_len, clock_period_ns)
    flipped = complement(base)
    return InterfaceFsm(
        name=name or _family_name("ca_write_target", burst_len),
        role=flipped.role,
        level=flipped.level,
        states=flipped.states,
        initial=flipped.initial,
        final=flipped.final,
        transitions=flipped.transitions,
        clock_period_ns=flipped.clock_period_ns,
        signals=flipped.signals,
        payload_fields=flipped.payload_fields,
    )


def pvt_write_initiator_fsm(name: str = "pvt_write_initiator") -> InterfaceFsm:
    """Transaction-level write master: one call carrying the payload, then
    wait for the call to end with a returned delay and response."""
    return InterfaceFsm(
        name=name,
        role=Role.INITIATOR,
        level=Level.PVT,
        states=frozenset({0, 1, 2}),
        initial=0,
        final=2,
        transitions=(
            Transition(0, 1, (call_action("begin_call", True), call_action("payload", True))),
            Transition(
                1,
                2,
                (
                    call_action("end_call", False),
                    call_action("delay", False),
                    call_action("response", False),
                ),
            ),
        ),
        payload_fields=("addr", "data"),
    )


def pvt_write_target_fsm(name: str = "pvt_write_target") -> InterfaceFsm:
    flipped = complement(pvt_write_initiator_fsm())
    return InterfaceFsm(
        name=name,
        role=flipped.role,
        level=flipped.level,
        states=flipped.states,
        initial=flipped.initial,
        final=flipped.final,
        transitions=flipped.transitions,
        payload_fields=flipped.payload_fields,
    )


def write_payload_mapping(burst_len: int = 2, name: str | None = None) -> PayloadMapping:
    entries = [MappingEntry("addr", None, "HADDR")]
    entries += [MappingEntry("data", i, "HWDATA") for i in range(burst_len)]
    return PayloadMapping(name or _family_name("write_payload", burst_len), tuple(entries))


def _family_name(base: str, burst_len: int) -> str:
    return base if burst_len == 2 else f"{base}_b{burst_len}"


REFERENCE_FILES = (
    "ca_write_initiator.ifsm",
    "ca_write_target.ifsm",
    "pvt_write_initiator.ifsm",
    "pvt_write_target.ifsm",
    "write_payload.pmap",
)


def reference_file_text(filename: str) -> str:
    return (resources.files("txbridge") / "data" / filename).read_text(encoding="utf-8")


@dataclass(frozen=True)
class ReferenceLibrary:
    ca_initiator: InterfaceFsm
    ca_target: InterfaceFsm
    pvt_initiator: InterfaceFsm
    pvt_target: InterfaceFsm
    mapping: PayloadMapping

    def fsms(self) -> tuple[InterfaceFsm, ...]:
        return (self.ca_initiator, self.ca_target, self.pvt_initiator, self.pvt_target)


def reference_models() -> ReferenceLibrary:
    """The canonical two-beat write models, parsed from the shipped files."""
    return ReferenceLibrary(
        ca_initiator=parse_interface_spec(reference_file_text("ca_write_initiator.ifsm")),
        ca_target=parse_interface_spec(reference_file_text("ca_write_target.ifsm")),
        pvt_initiator=parse_interface_spec(reference_file_text("pvt_write_initiator.ifsm")),
        pvt_target=parse_interface_spec(reference_file_text("pvt_write_target.ifsm")),
        mapping=parse_payload_mapping(reference_file_text("write_payload.pmap")),
    )


def export_reference_files(out_dir) -> list[str]:
    """Write the embedded reference files to ``out_dir``; returns the paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for filename in REFERENCE_FILES:
        path = os.path.join(out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(reference_file_text(filename))
        written.append(path)
    return written


def synthesis_inputs(
    master: InterfaceFsm, pvt_slave: InterfaceFsm
) -> tuple[InterfaceFsm, InterfaceFsm]:
    """Complement the two component FSMs into the transactor's sides and
    prepare the CA target side (self-loop stripping + delay consumption)."""
    t_side = complement(master)
    i_side = complement(pvt_slave)
    if t_side.level is Level.CA:
        t_side = apply_delay_consumption(strip_self_loops(t_side))
    return t_side, i_side


def conventional_transactor(
    t_fsm: InterfaceFsm, i_fsm: InterfaceFsm, mapping: PayloadMapping,
    name: str | None = None,
) -> ConventionalTransactor:
    """Build the timing-oblivious baseline for the same inputs as synthesis.

    The baseline shares the synthesis engine's structural requirements (it
    must be able to collect the payload in mapping order and reach the final
    state), so it fails with the same errors on the same broken inputs; it
    just never wraps clocks or stretches the handshake when run.
    """
    if t_fsm.level is not Level.CA or i_fsm.level is not Level.PVT:
        raise SynthesisInputError(
            "the conventional baseline models a CA-to-PVT transactor"
        )
    stripped = strip_self_loops(t_fsm)
    synthesize(stripped, i_fsm, mapping)  # structural check; result unused
    prefinal = len(nominal_path(stripped)) - 1
    return ConventionalTransactor(
        name=name or f"conventional_{t_fsm.name}",
        clock_period_ns=t_fsm.clock_period_ns or 0,
        prefinal_cycles=prefinal,
        payload_slots=len(mapping.entries),
    )


@dataclass(frozen=True)
class ProtocolModels:
    """Everything needed to run one burst length at every abstraction mix."""

    burst_len: int
    master: InterfaceFsm
    ca_slave: InterfaceFsm
    pvt_slave: InterfaceFsm
    mapping: PayloadMapping
    transactor: TransactorFsm
    baseline: ConventionalTransactor
    stats: SynthesisStats


@dataclass(frozen=True)
class ProtocolSuite:
    clock_period_ns: int
    models: tuple[ProtocolModels, ...]

    def for_burst(self, burst_len: int) -> ProtocolModels:
        for m in self.models:
            if m.burst_len == burst_len:
                return m
        raise WorkloadShapeError(f"no protocol models for burst length {burst_len}")

    def burst_lens(self) -> tuple[int, ...]:
        return tuple(m.burst_len for m in self.models)


def build_protocol_models(
    burst_len: int, clock_period_ns: int = DEFAULT_CLOCK_NS
) -> ProtocolModels:
    master = ca_write_initiator_fsm(burst_len, clock_period_ns)
    ca_slave = ca_write_target_fsm(burst_len, clock_period_ns)
    pvt_slave = pvt_write_target_fsm()
    mapping = write_payload_mapping(burst_len)
    t_side, i_side = synthesis_inputs(master, pvt_slave)
    result = synthesize(
        t_side, i_side, mapping, name=_family_name("write_transactor", burst_len)
    )
    baseline = conventional_transactor(
        complement(master), i_side, mapping,
        name=_family_name("conventional_write", burst_len),
    )
    return ProtocolModels(
        burst_len=burst_len,
        master=master,
        ca_slave=ca_slave,
        pvt_slave=pvt_slave,
        mapping=mapping,
        transactor=result.transactor,
        baseline=baseline,
        stats=result.stats,
    )


def build_protocol_suite(
    burst_lens: tuple[int, ...] = BURST_CHOICES,
    clock_period_ns: int = DEFAULT_CLOCK_NS,
) -> ProtocolSuite:
    models = tuple(build_protocol_models(k, clock_period_ns) for k in sorted(burst_lens))
    return ProtocolSuite(clock_period_ns=clock_period_ns, models=models)


APPROACHES = ("coherent", "conventional", "reference")


def run_suite(
    suite: ProtocolSuite,
    workload: WorkloadSpec,
    delays: DelayModel,
    approach: str = "coherent",
) -> SimTrace:
    """Run a (possibly mixed-burst-length) workload end to end.

    ``approach`` selects the device under test: the synthesized transactor,
    the conventional baseline, or the pure-CA reference configuration.
    """
    if approach not in APPROACHES:
        raise ValueError(f"approach must be one of {APPROACHES}")
    engines: dict[int, object] = {}

    def engine_for(transfer: Transfer):
        k = transfer.burst_len
        if k not in engines:
            m = suite.for_burst(k)
            if approach == "coherent":
                engines[k] = TransactorEngine(m.master, m.transactor, m.pvt_slave)
            elif approach == "reference":
                engines[k] = PureCaEngine(m.master, m.ca_slave)
            else:
                engines[k] = ConventionalEngine(m.baseline, slave_name=m.pvt_slave.name)
        return engines[k]

    return run_timeline(engine_for, workload, delays)


# ---------------------------------------------------------------------------
# workload generation


def _tokens(rng: random.Random, count: int) -> tuple[str, ...]:
    return tuple(f"{rng.getrandbits(32):08x}" for _ in range(count))


def _burst_values(rng: random.Random, burst_len: int, addr: str | None = None) -> tuple[str, ...]:
    head = addr if addr is not None else f"{rng.getrandbits(32):08x}"
    return (head,) + _tokens(rng, burst_len)


def _general_transfer(rng: random.Random) -> Transfer:
    kind = "write" if rng.random() < 0.65 else "read"
    burst = rng.choice(BURST_CHOICES)
    gap = rng.randint(0, 4)
    return Transfer(kind, burst, gap, _burst_values(rng, burst))


def _multimedia_group(rng: random.Random) -> list[Transfer]:
    # context tasks move bulk data: two sources feeding one destination
    # (back-to-back writes sharing the destination address token) alternating
    # with one source feeding two destinations (back-to-back reads sharing
    # the source address token)
    burst = rng.choice((4, 8, 16))
    shared = f"{rng.getrandbits(32):08x}"
    lead_gap = rng.randint(1, 3)
    if rng.random() < 0.5:
        kind = "write"
    else:
        kind = "read"
    return [
        Transfer(kind, burst, lead_gap, _burst_values(rng, burst, addr=shared)),
        Transfer(kind, burst, 0, _burst_values(rng, burst, addr=shared)),
    ]


def generate_workload(kind: str, n: int, seed: int) -> WorkloadSpec:
    """Deterministic workload of ``n`` transfers for the named test shape."""
    if kind not in WORKLOAD_KINDS:
        raise ValueError(f"workload kind must be one of {WORKLOAD_KINDS}")
    if n < 1:
        raise ValueError("need at least one transfer")
    rng = random.Random(f"{kind}:{seed}")
    transfers: list[Transfer] = []
    while len(transfers) < n:
        if kind == "general_channel":
            transfers.append(_general_transfer(rng))
        elif kind == "multimedia":
            transfers.extend(_multimedia_group(rng))
        else:  # mixed
            if rng.random() < 0.5:
                transfers.append(_general_transfer(rng))
            else:
                transfers.extend(_multimedia_group(rng))
    return WorkloadSpec(name=kind, seed=seed, transfers=tuple(transfers[:n]))


def fixed_write_workload(
    n: int = 1, burst_len: int = 2, idle_gap_cycles: int = 0, seed: int = 0
) -> WorkloadSpec:
    """Uniform writes of one burst length; transfer 0 begins at time zero.

    This is the single-transfer scenario used throughout the timing
    walkthroughs (one address plus ``burst_len`` data beats).
    """
    rng = random.Random(f"fixed:{seed}")
    transfers = tuple(
        Transfer(
            "write",
            burst_len,
            0 if i == 0 else idle_gap_cycles,
            _burst_values(rng, burst_len),
        )
        for i in range(n)
    )
    return WorkloadSpec(name=f"fixed_write_b{burst_len}", seed=seed, transfers=transfers)


def render_workload(workload: WorkloadSpec) -> str:
    lines = [f"seed={workload.seed}", "kind,burst_len,idle_gap_cycles,payload_digest"]
    for t in workload.transfers:
        lines.append(
            f"{t.kind},{t.burst_len},{t.idle_gap_cycles},{payload_digest(t.payload_values)}"
        )
    return "\n".join(lines) + "\n"


def write_workload_file(workload: WorkloadSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_workload(workload))
