"""Transactor synthesis: depth-first exploration of the state-pair product
of two complementary interface FSMs, filtered by data and timing legality.

The two inputs are the *transactor-side* machines: ``T`` plays the target
role toward the component that initiates transactions, ``I`` plays the
initiator role toward the component that responds.  For a cycle-accurate
``T`` the caller is expected to have applied ``strip_self_loops`` and
``apply_delay_consumption`` first, so that all timing slack is concentrated
at the last handshake state.

A transition of the product machine executes an edge of exactly one side.
It is *data-legal* when payload fields move through the transactor in the
payload mapping's declared order and a payload send happens only once every
mapped field has been collected.  It is *timing-legal* when it never commits
a transaction boundary before the transaction's duration is determined
(i.e. before the returned delay is known, or before the cycle-accurate side
has actually completed).

Exploration discipline: one pair is expanded at most once; popping an
already-visited pair deletes its recorded edges from the output (its
descendants were exhausted without reaching the final pair) and moves on;
self-loop edges are recorded but never followed.  Reaching the final pair
stops the search, after which dead branches are pruned away.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from .fsm import (
    Action,
    ActionKind,
    InterfaceFsm,
    Level,
    PayloadMapping,
    Role,
    SignalDecl,
    SignalKind,
    Transition,
    validate,
)

T_SIDE = "t"
I_SIDE = "i"


class SynthesisError(ValueError):
    code = "synthesis-error"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")
        self.message = message


class NoLegalTransactorError(SynthesisError):
    code = "no-legal-transactor"


class EmptyAfterPruneError(SynthesisError):
    code = "empty-after-prune"


class SynthesisInputError(SynthesisError):
    code = "inconsistent-synthesis-inputs"


@dataclass(frozen=True)
class StatePair:
    """One state from each side of the product: p in T, q in I."""

    p: int
    q: int

    def __str__(self) -> str:
        return f"({self.p},{self.q})"


@dataclass(frozen=True)
class LegalityContext:
    """Per-path synthesis context.

    ``bound_fields`` is the prefix of mapping entries already moved through
    the transactor on this path (samples while collecting, drives while
    distributing); the flags track the call protocol and delay visibility.
    """

    bound_fields: tuple[tuple[str, int | None], ...] = ()
    payload_sent: bool = False
    delay_received: bool = False
    call_open: bool = False

    def summary(self) -> str:
        return (
            f"bound={len(self.bound_fields)} sent={int(self.payload_sent)} "
            f"delay={int(self.delay_received)} open={int(self.call_open)}"
        )


@dataclass(frozen=True)
class TransactorTransition:
    from_pair: StatePair
    to_pair: StatePair
    side: str  # T_SIDE or I_SIDE
    actions: tuple[Action, ...]
    context: LegalityContext | None = None  # snapshot after firing

    @property
    def is_self_loop(self) -> bool:
        return self.from_pair == self.to_pair

    def render_actions(self) -> str:
        return ", ".join(a.render() for a in self.actions)


def _tt_sort_key(t: TransactorTransition) -> tuple:
    return (t.from_pair.p, t.from_pair.q, t.to_pair.p, t.to_pair.q, t.side, t.render_actions())


@dataclass(frozen=True)
class TransactorFsm:
    """The synthesized product machine, plus the declarations needed to
    execute and serialize it (signal/field vocabulary and the CA clock)."""

    name: str
    t_level: Level
    i_level: Level
    clock_period_ns: int | None
    signals: tuple[SignalDecl, ...]
    payload_fields: tuple[str, ...]
    pairs: frozenset[StatePair]
    initial_pair: StatePair
    final_pair: StatePair
    transitions: tuple[TransactorTransition, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "signals", tuple(sorted(self.signals, key=lambda s: s.name))
        )
        object.__setattr__(
            self, "transitions", tuple(sorted(self.transitions, key=_tt_sort_key))
        )

    def outgoing(self, pair: StatePair) -> tuple[TransactorTransition, ...]:
        return tuple(t for t in self.transitions if t.from_pair == pair)


@dataclass(frozen=True)
class SynthesisStats:
    """Instrumentation of one DFS run.

    ``step_candidates[k]`` is the number of transitions examined at the
    k-th expansion -- by construction outdegree(p) + outdegree(q), never the
    n*m of concurrent pairing, which ``step_products`` records for contrast.
    """

    expansions: int
    step_candidates: tuple[int, ...]
    step_products: tuple[int, ...]
    pushes: int
    visited_deletions: int

    @property
    def max_candidates(self) -> int:
        return max(self.step_candidates, default=0)

    def summary(self) -> str:
        return (
            f"expansions={self.expansions} pushes={self.pushes} "
            f"deletions={self.visited_deletions} "
            f"max-candidates-per-step={self.max_candidates} "
            f"(pairwise product would be "
            f"{max(self.step_products, default=0)})"
        )


@dataclass(frozen=True)
class SynthesisResult:
    transactor: TransactorFsm
    stats: SynthesisStats


def _delay_expected(t_fsm: InterfaceFsm, i_fsm: InterfaceFsm) -> bool:
    delayish = {ActionKind.DELAY_SEND, ActionKind.DELAY_RECV, ActionKind.CONSUME_DELAY}
    return any(
        a.kind in delayish
        for fsm in (t_fsm, i_fsm)
        for t in fsm.transitions
        for a in t.actions
    )


def _end_call_expected(t_fsm: InterfaceFsm, i_fsm: InterfaceFsm) -> bool:
    endish = {ActionKind.END_CALL_SEND, ActionKind.END_CALL_RECV}
    return any(
        a.kind in endish
        for fsm in (t_fsm, i_fsm)
        for t in fsm.transitions
        for a in t.actions
    )


def apply_actions_to_context(
    ctx: LegalityContext, actions: Iterable[Action], mapping: PayloadMapping
) -> LegalityContext | None:
    """Advance the context over one action sequence; None when data-illegal.

    Mapped-signal samples and drives must follow the mapping's declared
    order; a payload send is only legal once every entry is bound.  A
    payload receive delivers the whole payload at once, after which drives
    distribute it entry by entry.
    """
    mapped = mapping.signals()
    bound = ctx.bound_fields
    payload_sent = ctx.payload_sent
    delay_received = ctx.delay_received
    call_open = ctx.call_open
    for a in actions:
        if a.kind in (ActionKind.SAMPLE_DATA, ActionKind.DRIVE_DATA):
            if a.signal not in mapped:
                continue
            k = len(bound)
            if k >= len(mapping.entries) or mapping.entries[k].signal != a.signal:
                return None
            entry = mapping.entries[k]
            bound = bound + ((entry.field, entry.index),)
        elif a.kind is ActionKind.PAYLOAD_SEND:
            if len(bound) != len(mapping.entries):
                return None
            payload_sent = True
        elif a.kind is ActionKind.PAYLOAD_RECV:
            payload_sent = True
        elif a.kind in (ActionKind.BEGIN_CALL_SEND, ActionKind.BEGIN_CALL_RECV):
            call_open = True
        elif a.kind in (ActionKind.END_CALL_SEND, ActionKind.END_CALL_RECV):
            call_open = False
        elif a.kind is ActionKind.DELAY_RECV:
            delay_received = True
    return LegalityContext(bound, payload_sent, delay_received, call_open)


def check_data_legality(
    pair: StatePair,
    transition: Transition,
    ctx: LegalityContext,
    mapping: PayloadMapping,
) -> bool:
    """Pure data-legality predicate for one candidate transition at ``pair``."""
    del pair  # data legality depends on the path context, not the pair
    return apply_actions_to_context(ctx, transition.actions, mapping) is not None


def check_timing_legality(
    pair: StatePair,
    transition: Transition,
    side: str,
    ctx: LegalityContext,
    t_fsm: InterfaceFsm,
    i_fsm: InterfaceFsm,
) -> bool:
    """False when the transition commits a transaction boundary too early.

    Only boundary transitions (into a side's final state) are gated, and
    only for protocol pairs that carry a delay at all.  The boundary is
    committable once the returned delay is on board, or -- for a boundary
    merely *observed* on a cycle-accurate initiator side -- once that side
    has actually completed.
    """
    if not _delay_expected(t_fsm, i_fsm):
        return True
    side_fsm = t_fsm if side == T_SIDE else i_fsm
    if transition.to_state != side_fsm.final or transition.is_self_loop:
        return True
    received = ctx.delay_received or any(
        a.kind is ActionKind.DELAY_RECV for a in transition.actions
    )
    if received:
        return True
    if side == T_SIDE:
        # the side facing the initiating component reports the boundary;
        # legal only if the cycle-accurate opposite side has already ended
        return i_fsm.level is Level.CA and pair.q == i_fsm.final
    # an initiator-role CA side merely observes the responding component's
    # completion; the observation itself determines the time
    return i_fsm.level is Level.CA


def _check_inputs(t_fsm: InterfaceFsm, i_fsm: InterfaceFsm, mapping: PayloadMapping) -> None:
    problems: list[str] = []
    for fsm_ in (t_fsm, i_fsm):
        report = validate(fsm_)
        if not report.ok:
            problems.append(f"{fsm_.name} is invalid: {report.violations[0]}")
    if t_fsm.role is not Role.TARGET:
        problems.append(f"{t_fsm.name} must play the target role")
    if i_fsm.role is not Role.INITIATOR:
        problems.append(f"{i_fsm.name} must play the initiator role")
    ca_side = t_fsm if t_fsm.level is Level.CA else i_fsm if i_fsm.level is Level.CA else None
    pvt_side = t_fsm if t_fsm.level is Level.PVT else i_fsm if i_fsm.level is Level.PVT else None
    for entry in mapping.entries:
        if ca_side is None:
            problems.append(f"mapping entry {entry.render()} but neither side is CA")
            break
        decl = ca_side.signal(entry.signal)
        if decl is None or decl.kind is not SignalKind.DATA:
            problems.append(f"mapping entry {entry.render()}: not a data signal of {ca_side.name}")
        if pvt_side is not None and entry.field not in pvt_side.payload_fields:
            problems.append(f"mapping entry {entry.render()}: unknown field of {pvt_side.name}")
    if problems:
        raise SynthesisInputError("; ".join(problems))


def synthesize(
    t_fsm: InterfaceFsm,
    i_fsm: InterfaceFsm,
    mapping: PayloadMapping,
    name: str | None = None,
) -> SynthesisResult:
    """Run the product DFS and return the pruned transactor plus stats.

    Deterministic by construction: at each expansion, T-side transitions are
    explored before I-side ones, each side in its canonical serialized
    order.  Raises NoLegalTransactorError when the stack empties without
    reaching the final pair.
    """
    _check_inputs(t_fsm, i_fsm, mapping)
    t_out = {s: t_fsm.outgoing(s) for s in t_fsm.states}
    i_out = {s: i_fsm.outgoing(s) for s in i_fsm.states}
    delay_gated = _delay_expected(t_fsm, i_fsm)
    end_expected = _end_call_expected(t_fsm, i_fsm)
    final_pair = StatePair(t_fsm.final, i_fsm.final)

    edges_from: dict[StatePair, list[TransactorTransition]] = {}
    stack: list[tuple[StatePair, LegalityContext]] = [
        (StatePair(t_fsm.initial, i_fsm.initial), LegalityContext())
    ]
    visited: set[StatePair] = set()
    pushes = 1
    deletions = 0
    step_candidates: list[int] = []
    step_products: list[int] = []
    success_ctx: LegalityContext | None = None

    while stack:
        pair, ctx = stack.pop()
        if pair in visited:
            # all descendants were explored without reaching the final pair
            deletions += len(edges_from.pop(pair, []))
            continue
        visited.add(pair)
        if pair == final_pair and not (end_expected and ctx.call_open):
            success_ctx = ctx
            break
        t_candidates = t_out.get(pair.p, ())
        i_candidates = i_out.get(pair.q, ())
        step_candidates.append(len(t_candidates) + len(i_candidates))
        step_products.append(len(t_candidates) * len(i_candidates))
        to_push: list[tuple[StatePair, LegalityContext]] = []
        for side, candidates in ((T_SIDE, t_candidates), (I_SIDE, i_candidates)):
            for tr in candidates:
                new_ctx = apply_actions_to_context(ctx, tr.actions, mapping)
                if new_ctx is None:
                    continue
                if delay_gated and not check_timing_legality(
                    pair, tr, side, ctx, t_fsm, i_fsm
                ):
                    continue
                if side == T_SIDE:
                    succ = StatePair(tr.to_state, pair.q)
                else:
                    succ = StatePair(pair.p, tr.to_state)
                edges_from.setdefault(pair, []).append(
                    TransactorTransition(pair, succ, side, tr.actions, new_ctx)
                )
                if succ != pair:  # do not follow self-loops
                    to_push.append((succ, new_ctx))
        for item in reversed(to_push):  # LIFO: first candidate pops first
            stack.append(item)
            pushes += 1

    stats = SynthesisStats(
        expansions=len(step_candidates),
        step_candidates=tuple(step_candidates),
        step_products=tuple(step_products),
        pushes=pushes,
        visited_deletions=deletions,
    )
    if success_ctx is None:
        raise NoLegalTransactorError(
            f"no legal transactor for ({t_fsm.name}, {i_fsm.name}, {mapping.name}); "
            f"{stats.summary()}"
        )

    transitions = tuple(t for ts in edges_from.values() for t in ts)
    pairs = {final_pair, StatePair(t_fsm.initial, i_fsm.initial)}
    for t in transitions:
        pairs.update((t.from_pair, t.to_pair))
    ca_side = t_fsm if t_fsm.level is Level.CA else i_fsm if i_fsm.level is Level.CA else None
    pvt_side = t_fsm if t_fsm.level is Level.PVT else i_fsm if i_fsm.level is Level.PVT else None
    raw = TransactorFsm(
        name=name or f"{t_fsm.name}__{i_fsm.name}",
        t_level=t_fsm.level,
        i_level=i_fsm.level,
        clock_period_ns=ca_side.clock_period_ns if ca_side else None,
        signals=ca_side.signals if ca_side else (),
        payload_fields=pvt_side.payload_fields if pvt_side else (),
        pairs=frozenset(pairs),
        initial_pair=StatePair(t_fsm.initial, i_fsm.initial),
        final_pair=final_pair,
        transitions=transitions,
    )
    pruned = prune_dead_states(raw)
    bad = verify_transactor_legality(pruned, t_fsm, i_fsm, mapping)
    if bad:
        raise SynthesisError(f"post-hoc legality re-verification failed: {bad[0]}")
    return SynthesisResult(pruned, stats)


def generate_transactor(
    t_fsm: InterfaceFsm,
    i_fsm: InterfaceFsm,
    mapping: PayloadMapping,
    name: str | None = None,
) -> TransactorFsm:
    return synthesize(t_fsm, i_fsm, mapping, name).transactor


def prune_dead_states(g: TransactorFsm) -> TransactorFsm:
    """Keep only pairs lying on some initial -> final path.

    Idempotent.  Raises EmptyAfterPruneError when the initial pair itself
    has no path to the final pair (a successful search cannot produce that).
    """
    forward = {g.initial_pair}
    frontier = [g.initial_pair]
    by_from: dict[StatePair, list[TransactorTransition]] = {}
    by_to: dict[StatePair, list[TransactorTransition]] = {}
    for t in g.transitions:
        by_from.setdefault(t.from_pair, []).append(t)
        by_to.setdefault(t.to_pair, []).append(t)
    while frontier:
        pair = frontier.pop()
        for t in by_from.get(pair, ()):
            if t.to_pair not in forward:
                forward.add(t.to_pair)
                frontier.append(t.to_pair)
    backward = {g.final_pair}
    frontier = [g.final_pair]
    while frontier:
        pair = frontier.pop()
        for t in by_to.get(pair, ()):
            if t.from_pair not in backward:
                backward.add(t.from_pair)
                frontier.append(t.from_pair)
    alive = forward & backward
    if g.initial_pair not in alive:
        raise EmptyAfterPruneError(
            f"{g.name}: the initial pair cannot reach the final pair"
        )
    transitions = tuple(
        t for t in g.transitions if t.from_pair in alive and t.to_pair in alive
    )
    return replace(g, pairs=frozenset(alive), transitions=transitions)


def _context_walk(
    g: TransactorFsm, mapping: PayloadMapping
) -> dict[StatePair, LegalityContext]:
    """Deterministic breadth-first context propagation from the initial pair."""
    ctx_at: dict[StatePair, LegalityContext] = {g.initial_pair: LegalityContext()}
    queue = [g.initial_pair]
    while queue:
        pair = queue.pop(0)
        ctx = ctx_at[pair]
        for t in g.outgoing(pair):
            new_ctx = apply_actions_to_context(ctx, t.actions, mapping)
            if new_ctx is None or t.to_pair in ctx_at:
                continue
            ctx_at[t.to_pair] = new_ctx
            queue.append(t.to_pair)
    return ctx_at


def recompute_contexts(
    g: TransactorFsm, mapping: PayloadMapping | None = None
) -> TransactorFsm:
    """Fill per-edge context snapshots by replaying from the initial pair.

    Used when a transactor comes back from disk; with no mapping given, the
    binding order is reconstructed from the edge actions themselves (each
    mapped sample/drive binds the next entry of an implied mapping).
    """
    if mapping is None:
        mapping = PayloadMapping("implied", ())
        # with an empty mapping, samples/drives bind nothing; flags still track
    ctx_at = _context_walk(g, mapping)
    transitions = []
    for t in g.transitions:
        ctx = ctx_at.get(t.from_pair)
        if ctx is None:
            transitions.append(t)
            continue
        new_ctx = apply_actions_to_context(ctx, t.actions, mapping)
        transitions.append(replace(t, context=new_ctx))
    return replace(g, transitions=tuple(transitions))


def verify_transactor_legality(
    g: TransactorFsm,
    t_fsm: InterfaceFsm,
    i_fsm: InterfaceFsm,
    mapping: PayloadMapping,
) -> list[str]:
    """Re-check every emitted transition against both legality predicates
    and the single-sided progression rule; returns human-readable findings
    (empty list = clean)."""
    findings: list[str] = []
    ctx_at = _context_walk(g, mapping)
    for t in g.transitions:
        p_changed = t.from_pair.p != t.to_pair.p
        q_changed = t.from_pair.q != t.to_pair.q
        if p_changed and q_changed:
            findings.append(f"{t.from_pair}->{t.to_pair}: advances both sides at once")
        if t.side == T_SIDE and q_changed:
            findings.append(f"{t.from_pair}->{t.to_pair}: T-side edge moved q")
        if t.side == I_SIDE and p_changed:
            findings.append(f"{t.from_pair}->{t.to_pair}: I-side edge moved p")
        ctx = ctx_at.get(t.from_pair)
        if ctx is None:
            findings.append(f"{t.from_pair}: unreachable from the initial pair")
            continue
        src = t.from_pair.p if t.side == T_SIDE else t.from_pair.q
        dst = t.to_pair.p if t.side == T_SIDE else t.to_pair.q
        side_tr = Transition(src, dst, t.actions)
        if not check_data_legality(t.from_pair, side_tr, ctx, mapping):
            findings.append(f"{t.from_pair}->{t.to_pair}: data-illegal")
        if not check_timing_legality(t.from_pair, side_tr, t.side, ctx, t_fsm, i_fsm):
            findings.append(f"{t.from_pair}->{t.to_pair}: timing-illegal")
    return findings
