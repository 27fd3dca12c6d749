"""txbridge: timing-coherent transactor synthesis and mixed-level
co-simulation for cycle-accurate / transaction-level interface FSMs.

Workflow: describe each interface side as an FSM (``.ifsm``), give the
payload-to-signal mapping (``.pmap``), synthesize the bridging transactor,
then co-simulate a cycle-accurate master against a transaction-level slave
and check that every transaction begins and ends at the same instant on
both sides of the bridge.
"""

from .fsm import (
    Action,
    ActionKind,
    InterfaceFsm,
    Level,
    MappingEntry,
    PayloadMapping,
    Role,
    SignalDecl,
    SignalKind,
    Transition,
    ValidationReport,
    Violation,
    apply_delay_consumption,
    complement,
    find_last_handshake_state,
    strip_self_loops,
    validate,
)
from .dsl import (
    ParseError,
    SourceSpan,
    ValidationFailure,
    parse_interface_spec,
    parse_payload_mapping,
    parse_transactor_spec,
    serialize_fsm,
    serialize_payload_mapping,
    serialize_transactor,
)
from .synth import (
    LegalityContext,
    NoLegalTransactorError,
    StatePair,
    SynthesisResult,
    SynthesisStats,
    TransactorFsm,
    TransactorTransition,
    check_data_legality,
    check_timing_legality,
    generate_transactor,
    prune_dead_states,
    synthesize,
    verify_transactor_legality,
)
from .sim import (
    ConventionalTransactor,
    DelayModel,
    DelayUnderrunError,
    ErrorReport,
    LocalClock,
    ProtocolDeadlockError,
    SimTrace,
    TransactionRecord,
    Transfer,
    WorkloadSpec,
    advance_local_clock,
    compare_traces,
    extract_transactions,
    read_trace_csv,
    run_cosimulation,
    run_pure_ca_reference,
    wrap_clock_for_call,
    write_trace_csv,
)
from .protocols import (
    build_protocol_suite,
    conventional_transactor,
    fixed_write_workload,
    generate_workload,
    reference_models,
    run_suite,
    synthesis_inputs,
)

__version__ = "0.1.0"
