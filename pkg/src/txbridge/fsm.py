"""Interface-FSM domain types and structural transforms.

An interface FSM describes one side of a bus protocol as states joined by
action-labelled transitions.  Cycle-accurate (CA) FSMs speak in signals, one
clock period per fired transition; transaction-level (PVT) FSMs speak in
interface method calls carrying a payload and a returned delay.

Besides the types themselves this module provides:

* ``validate``      -- structural invariant checking (violations as data),
* ``complement``    -- action-direction inversion, turning an initiator
                       description into the matching target and vice versa,
* ``find_last_handshake_state`` -- locates the state whose handshake raise
                       completes a CA transaction,
* ``apply_delay_consumption``   -- rewrites that state so the completion
                       handshake is held inactive until a runtime-supplied
                       delay has been burned off cycle by cycle,
* ``strip_self_loops``          -- drops wait-state self-loops everywhere
                       except at the last handshake state.

All types are immutable values; all operations are pure functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace


class Role(str, enum.Enum):
    INITIATOR = "initiator"
    TARGET = "target"


class Level(str, enum.Enum):
    CA = "ca"
    PVT = "pvt"


class SignalKind(str, enum.Enum):
    DATA = "data"
    HANDSHAKE = "handshake"


class ActionKind(str, enum.Enum):
    # CA-level, signal-class actions
    DRIVE_DATA = "drive-data"        # SIG!    put a value on a data signal
    SAMPLE_DATA = "sample-data"      # SIG?    read a value off a data signal
    DRIVE_LEVEL = "drive-level"      # SIG!b   set a control signal to 0/1
    REQUIRE_LEVEL = "require-level"  # SIG?b   fire only if signal is at 0/1
    # PVT-level, call-class actions
    BEGIN_CALL_SEND = "begin-call-send"
    BEGIN_CALL_RECV = "begin-call-receive"
    PAYLOAD_SEND = "payload-send"
    PAYLOAD_RECV = "payload-receive"
    END_CALL_SEND = "end-call-send"
    END_CALL_RECV = "end-call-receive"
    DELAY_SEND = "delay-send"
    DELAY_RECV = "delay-receive"
    RESPONSE_SEND = "response-send"
    RESPONSE_RECV = "response-receive"
    # Inserted by apply_delay_consumption; burns one clock period of the
    # pending delay.  Has no complement.
    CONSUME_DELAY = "consume-delay-cycle"


SIGNAL_ACTIONS = frozenset(
    {
        ActionKind.DRIVE_DATA,
        ActionKind.SAMPLE_DATA,
        ActionKind.DRIVE_LEVEL,
        ActionKind.REQUIRE_LEVEL,
    }
)

CALL_ACTIONS = frozenset(
    {
        ActionKind.BEGIN_CALL_SEND,
        ActionKind.BEGIN_CALL_RECV,
        ActionKind.PAYLOAD_SEND,
        ActionKind.PAYLOAD_RECV,
        ActionKind.END_CALL_SEND,
        ActionKind.END_CALL_RECV,
        ActionKind.DELAY_SEND,
        ActionKind.DELAY_RECV,
        ActionKind.RESPONSE_SEND,
        ActionKind.RESPONSE_RECV,
    }
)

_COMPLEMENT = {
    ActionKind.DRIVE_DATA: ActionKind.SAMPLE_DATA,
    ActionKind.SAMPLE_DATA: ActionKind.DRIVE_DATA,
    ActionKind.DRIVE_LEVEL: ActionKind.REQUIRE_LEVEL,
    ActionKind.REQUIRE_LEVEL: ActionKind.DRIVE_LEVEL,
    ActionKind.BEGIN_CALL_SEND: ActionKind.BEGIN_CALL_RECV,
    ActionKind.BEGIN_CALL_RECV: ActionKind.BEGIN_CALL_SEND,
    ActionKind.PAYLOAD_SEND: ActionKind.PAYLOAD_RECV,
    ActionKind.PAYLOAD_RECV: ActionKind.PAYLOAD_SEND,
    ActionKind.END_CALL_SEND: ActionKind.END_CALL_RECV,
    ActionKind.END_CALL_RECV: ActionKind.END_CALL_SEND,
    ActionKind.DELAY_SEND: ActionKind.DELAY_RECV,
    ActionKind.DELAY_RECV: ActionKind.DELAY_SEND,
    ActionKind.RESPONSE_SEND: ActionKind.RESPONSE_RECV,
    ActionKind.RESPONSE_RECV: ActionKind.RESPONSE_SEND,
}


class FsmError(ValueError):
    """Base class for structural errors raised by FSM operations.

    ``code`` is a stable kebab-case identifier suitable for matching in
    tooling; the message carries the human-readable detail.
    """

    code = "fsm-error"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")
        self.message = message


class ComplementError(FsmError):
    code = "no-defined-complement"


class NoLastHandshakeError(FsmError):
    code = "no-last-handshake"


class AmbiguousLastHandshakeError(FsmError):
    code = "ambiguous-last-handshake"


class AlreadyTransformedError(FsmError):
    code = "already-transformed"


@dataclass(frozen=True)
class SignalDecl:
    """A named CA signal: data-carrying or handshake (with an active level)."""

    name: str
    kind: SignalKind
    active_level: int = 1  # handshake signals only; inactive = 1 - active

    @property
    def inactive_level(self) -> int:
        return 1 - self.active_level


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    signal: str | None = None
    level: int | None = None

    def __post_init__(self) -> None:
        if self.kind in SIGNAL_ACTIONS and self.signal is None:
            raise ValueError(f"{self.kind.value} needs a signal name")
        if self.kind in (ActionKind.DRIVE_LEVEL, ActionKind.REQUIRE_LEVEL):
            if self.level not in (0, 1):
                raise ValueError(f"{self.kind.value} needs a level of 0 or 1")

    def complement(self) -> "Action":
        try:
            kind = _COMPLEMENT[self.kind]
        except KeyError:
            raise ComplementError(
                f"action {self.render()} has no defined complement"
            ) from None
        return Action(kind, self.signal, self.level)

    def render(self) -> str:
        """Concrete-syntax spelling, e.g. ``HREADY!1`` or ``begin_call?``."""
        if self.kind is ActionKind.CONSUME_DELAY:
            return "consume_delay"
        if self.kind in SIGNAL_ACTIONS:
            mark = "!" if self.kind in (ActionKind.DRIVE_DATA, ActionKind.DRIVE_LEVEL) else "?"
            bit = "" if self.level is None else str(self.level)
            return f"{self.signal}{mark}{bit}"
        word, direction = self.kind.value.rsplit("-", 1)
        mark = "!" if direction == "send" else "?"
        return word.replace("-", "_") + mark


# Convenience constructors; these read better than raw Action(...) calls
# at the model-building sites.
def drive(signal: str) -> Action:
    return Action(ActionKind.DRIVE_DATA, signal)


def sample(signal: str) -> Action:
    return Action(ActionKind.SAMPLE_DATA, signal)


def drive_level(signal: str, level: int) -> Action:
    return Action(ActionKind.DRIVE_LEVEL, signal, level)


def require_level(signal: str, level: int) -> Action:
    return Action(ActionKind.REQUIRE_LEVEL, signal, level)


def call_action(word: str, send: bool) -> Action:
    kind = ActionKind(f"{word.replace('_', '-')}-{'send' if send else 'receive'}")
    return Action(kind)


CONSUME_DELAY = Action(ActionKind.CONSUME_DELAY)


@dataclass(frozen=True)
class Transition:
    """One edge of the FSM.  A fired CA transition consumes one clock period.

    Action order within a transition is the payload binding order; the
    actions themselves take effect atomically at the firing instant.
    """

    from_state: int
    to_state: int
    actions: tuple[Action, ...]

    @property
    def is_self_loop(self) -> bool:
        return self.from_state == self.to_state

    def render_actions(self) -> str:
        return ", ".join(a.render() for a in self.actions)


def _transition_sort_key(t: Transition) -> tuple:
    return (t.from_state, t.to_state, t.render_actions())


@dataclass(frozen=True)
class InterfaceFsm:
    """One side of an interface protocol.

    ``clock_period_ns`` and ``signals`` are meaningful only at CA level;
    ``payload_fields`` only at PVT level.  Construction normalizes field
    order (signals by name, transitions by (from, to, actions)) so that
    structurally equal machines compare equal field-for-field.
    """

    name: str
    role: Role
    level: Level
    states: frozenset[int]
    initial: int
    final: int
    transitions: tuple[Transition, ...]
    clock_period_ns: int | None = None
    signals: tuple[SignalDecl, ...] = ()
    payload_fields: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "signals", tuple(sorted(self.signals, key=lambda s: s.name))
        )
        object.__setattr__(
            self, "transitions", tuple(sorted(self.transitions, key=_transition_sort_key))
        )

    def signal(self, name: str) -> SignalDecl | None:
        for s in self.signals:
            if s.name == name:
                return s
        return None

    def outgoing(self, state: int) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.from_state == state)


@dataclass(frozen=True)
class MappingEntry:
    """One payload binding: a field (optionally indexed) fed by a CA signal."""

    field: str
    index: int | None
    signal: str

    def render(self) -> str:
        sub = "" if self.index is None else f"[{self.index}]"
        return f"{self.field}{sub} <- {self.signal}"


@dataclass(frozen=True)
class PayloadMapping:
    """Ordered binding of transaction payload fields to CA signals.

    Entry order is the order in which the CA side collects (or distributes)
    the payload, so it drives the data-legality check during synthesis.
    """

    name: str
    entries: tuple[MappingEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def signals(self) -> frozenset[str]:
        return frozenset(e.signal for e in self.entries)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} [{self.subject}]: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


def _reachable(fsm: InterfaceFsm, start: int, forward: bool) -> set[int]:
    seen = {start}
    frontier = [start]
    while frontier:
        state = frontier.pop()
        for t in fsm.transitions:
            src, dst = (t.from_state, t.to_state) if forward else (t.to_state, t.from_state)
            if src == state and dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    return seen


def _guard_map(t: Transition) -> dict[str, int]:
    return {
        a.signal: a.level  # type: ignore[misc]
        for a in t.actions
        if a.kind is ActionKind.REQUIRE_LEVEL
    }


def _guards_overlap(a: Transition, b: Transition) -> bool:
    """Two guarded transitions overlap when some signal assignment enables both.

    Transitions without require-level guards express the machine's own
    internal choice (a target picking when to raise its handshake) and are
    not treated as guard conflicts.
    """
    ga, gb = _guard_map(a), _guard_map(b)
    if not ga or not gb:
        return False
    return all(ga[s] == gb[s] for s in ga.keys() & gb.keys())


def validate(fsm: InterfaceFsm) -> ValidationReport:
    """Check every structural invariant; violations come back as data."""
    out: list[Violation] = []

    def bad(code: str, subject: str, message: str) -> None:
        out.append(Violation(code, subject, message))

    names = [s.name for s in fsm.signals]
    for name in sorted(set(n for n in names if names.count(n) > 1)):
        bad("duplicate-signal", name, "signal declared more than once")
    fields = list(fsm.payload_fields)
    for name in sorted(set(f for f in fields if fields.count(f) > 1)):
        bad("duplicate-field", name, "payload field declared more than once")

    if fsm.level is Level.CA:
        if not fsm.clock_period_ns or fsm.clock_period_ns <= 0:
            bad("clock-period-required-at-ca", fsm.name, "CA FSM needs a positive clock period")
        if fsm.payload_fields:
            bad("fields-forbidden-at-ca", fsm.name, "payload fields belong to PVT FSMs")
        if not any(s.kind is SignalKind.HANDSHAKE for s in fsm.signals):
            bad(
                "no-handshake-signal",
                fsm.name,
                "a CA FSM with a final state needs a handshake signal to time completion",
            )
    else:
        if fsm.clock_period_ns:
            bad("clock-period-forbidden-at-pvt", fsm.name, "PVT FSMs are event-timed")
        if fsm.signals:
            bad("signals-forbidden-at-pvt", fsm.name, "signal declarations belong to CA FSMs")

    if fsm.initial not in fsm.states:
        bad("initial-not-a-state", str(fsm.initial), "initial state is not declared")
    if fsm.final not in fsm.states:
        bad("final-not-a-state", str(fsm.final), "final state is not declared")

    declared = {s.name for s in fsm.signals}
    for t in fsm.transitions:
        where = f"{t.from_state}->{t.to_state}"
        if t.from_state not in fsm.states or t.to_state not in fsm.states:
            bad("undeclared-state", where, "transition endpoint is not a declared state")
        if t.from_state == fsm.final:
            bad("final-not-terminal", where, "final state must have no outgoing transitions")
        for a in t.actions:
            if a.kind in SIGNAL_ACTIONS:
                if fsm.level is not Level.CA:
                    bad("ca-action-at-pvt", where, f"{a.render()} is a signal action")
                elif a.signal not in declared:
                    bad("undeclared-signal", where, f"{a.render()} references an unknown signal")
                else:
                    decl = fsm.signal(a.signal)  # type: ignore[arg-type]
                    is_level = a.kind in (ActionKind.DRIVE_LEVEL, ActionKind.REQUIRE_LEVEL)
                    if is_level and decl.kind is not SignalKind.HANDSHAKE:
                        bad("action-signal-kind-mismatch", where,
                            f"{a.render()} sets a level on a data signal")
                    if not is_level and decl.kind is not SignalKind.DATA:
                        bad("action-signal-kind-mismatch", where,
                            f"{a.render()} moves data on a handshake signal")
            elif a.kind in CALL_ACTIONS and fsm.level is not Level.PVT:
                bad("pvt-action-at-ca", where, f"{a.render()} is a call action")
            elif a.kind is ActionKind.CONSUME_DELAY and fsm.level is not Level.CA:
                bad("consume-delay-at-pvt", where, "delay consumption is cycle-based")

    outgoing: dict[int, list[Transition]] = {}
    for t in fsm.transitions:
        outgoing.setdefault(t.from_state, []).append(t)
    for state, ts in sorted(outgoing.items()):
        for i, a in enumerate(ts):
            for b in ts[i + 1 :]:
                if _guards_overlap(a, b):
                    bad(
                        "nondeterministic-guards",
                        str(state),
                        f"guards of {a.from_state}->{a.to_state} and "
                        f"{b.from_state}->{b.to_state} can be enabled together",
                    )

    if fsm.initial in fsm.states and fsm.final in fsm.states:
        from_initial = _reachable(fsm, fsm.initial, forward=True)
        to_final = _reachable(fsm, fsm.final, forward=False)
        for state in sorted(fsm.states):
            if state not in from_initial:
                bad("unreachable-state", str(state), "not reachable from the initial state")
            elif state not in to_final:
                bad("cannot-reach-final", str(state), "no path from here to the final state")

    return ValidationReport(tuple(out))


def complement(fsm: InterfaceFsm) -> InterfaceFsm:
    """Invert every action's direction and flip the role.

    The state graph, level, clock, signals and payload fields are preserved
    exactly, so ``complement`` is an involution.  Rejects machines carrying
    ``consume_delay`` (it only appears after the delay-consumption transform
    and has no directional counterpart).
    """
    new_role = Role.TARGET if fsm.role is Role.INITIATOR else Role.INITIATOR
    transitions = tuple(
        Transition(t.from_state, t.to_state, tuple(a.complement() for a in t.actions))
        for t in fsm.transitions
    )
    return replace(fsm, role=new_role, transitions=transitions)


def _raising_handshakes(fsm: InterfaceFsm, t: Transition) -> set[str]:
    """Handshake signals this transition puts at (or requires at) their active level."""
    raised = set()
    for a in t.actions:
        if a.kind in (ActionKind.DRIVE_LEVEL, ActionKind.REQUIRE_LEVEL):
            decl = fsm.signal(a.signal)  # type: ignore[arg-type]
            if decl and decl.kind is SignalKind.HANDSHAKE and a.level == decl.active_level:
                raised.add(decl.name)
    return raised


def find_last_handshake_state(fsm: InterfaceFsm) -> int:
    """State whose handshake-raising transition enters the final state.

    This is the state that delay consumption converts: completion of the
    transaction is recognized there, so runtime slack must be burned there.
    """
    if fsm.level is not Level.CA:
        raise NoLastHandshakeError(f"{fsm.name} is not a CA FSM")
    candidates: dict[int, set[str]] = {}
    for t in fsm.transitions:
        if t.to_state == fsm.final and not t.is_self_loop:
            raised = _raising_handshakes(fsm, t)
            if raised:
                candidates.setdefault(t.from_state, set()).update(raised)
    if not candidates:
        raise NoLastHandshakeError(
            f"{fsm.name}: no transition into state {fsm.final} raises a handshake"
        )
    if len(candidates) > 1:
        states = ", ".join(str(s) for s in sorted(candidates))
        raise AmbiguousLastHandshakeError(
            f"{fsm.name}: states {states} all raise handshakes into the final state"
        )
    (state, signals), = candidates.items()
    if len(signals) > 1:
        raise AmbiguousLastHandshakeError(
            f"{fsm.name}: completion raises several handshakes ({', '.join(sorted(signals))})"
        )
    return state


def last_handshake_signal(fsm: InterfaceFsm) -> SignalDecl:
    """The handshake signal raised on the final transition (unique per
    find_last_handshake_state)."""
    state = find_last_handshake_state(fsm)
    for t in fsm.transitions:
        if t.from_state == state and t.to_state == fsm.final:
            raised = _raising_handshakes(fsm, t)
            if raised:
                return fsm.signal(raised.pop())  # type: ignore[return-value]
    raise NoLastHandshakeError(f"{fsm.name}: lost the completion handshake")  # unreachable


def is_delay_consuming(fsm: InterfaceFsm) -> bool:
    return any(
        a.kind is ActionKind.CONSUME_DELAY for t in fsm.transitions for a in t.actions
    )


def apply_delay_consumption(fsm: InterfaceFsm) -> InterfaceFsm:
    """Convert the last handshake state into a delay consumption model.

    The state receives a single self-loop ``consume_delay`` + handshake-held-
    inactive; any wait self-loop already sitting there is folded into it.
    From then on the transition into the final state is understood to fire
    only once the returned delay has been received and fully consumed --
    reaching the final state earlier is illegal because there would be no
    delay left to consume.  The synthesis legality checks and the simulation
    kernel both enforce that gate off the presence of the consume self-loop.
    """
    if is_delay_consuming(fsm):
        raise AlreadyTransformedError(f"{fsm.name} already carries a consume_delay self-loop")
    state = find_last_handshake_state(fsm)
    handshake = last_handshake_signal(fsm)
    if fsm.role is Role.TARGET:
        hold = drive_level(handshake.name, handshake.inactive_level)
    else:
        hold = require_level(handshake.name, handshake.inactive_level)
    loop = Transition(state, state, (CONSUME_DELAY, hold))
    transitions = tuple(
        t for t in fsm.transitions if not (t.is_self_loop and t.from_state == state)
    ) + (loop,)
    return replace(fsm, transitions=transitions)


def strip_self_loops(fsm: InterfaceFsm) -> InterfaceFsm:
    """Remove wait-state self-loops, keeping the one at the last handshake state.

    Wait self-loops only stretch timing; after synthesis all stretching is
    performed at the last handshake state, so the other loops are dead weight
    for the transactor.  FSMs with no identifiable last handshake state (PVT
    machines in particular) lose every self-loop.
    """
    try:
        keep = find_last_handshake_state(fsm)
    except FsmError:
        keep = None
    transitions = tuple(
        t for t in fsm.transitions if not t.is_self_loop or t.from_state == keep
    )
    return replace(fsm, transitions=transitions)
