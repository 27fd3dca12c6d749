"""Textual formats: ``.ifsm`` interface FSMs, ``.pmap`` payload mappings,
``.tfsm`` synthesized transactors.

The grammar (``ifsm v1``) is deliberately small and hand-parsed:

    spec    := "ifsm" "v1" fsm
    fsm     := "fsm" IDENT "{" header* decl*
               "initial" "=" INT ";" "final" "=" INT ";" edge* "}"
    header  := "role" "=" ("initiator"|"target") ";"
             | "level" "=" ("ca"|"pvt") ";"
             | "clock_period" "=" INT "ns" ";"
    decl    := "signal" IDENT ":" ("data"|"handshake") ["active" ("high"|"low")] ";"
             | "field" IDENT ";"
    edge    := "on" INT "->" INT ":" action ("," action)* ";"
    action  := IDENT "!" [BIT] | IDENT "?" [BIT] | PVTKW ("!"|"?") | "consume_delay"
    PVTKW   := "begin_call" | "end_call" | "payload" | "delay" | "response"

Mapping files:  ``map IDENT { (IDENT ["[" INT "]"] "<-" IDENT ";")* }``.

Comments run from ``#`` to end of line; whitespace is free between tokens.
Serialization is canonical -- transitions sorted by (from, to, actions),
signals by name -- and parse/serialize round-trips every valid machine.
"""

from __future__ import annotations

from dataclasses import dataclass

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
    Violation,
    call_action,
    validate,
)
from .synth import StatePair, TransactorFsm, TransactorTransition, recompute_contexts

PVT_KEYWORDS = ("begin_call", "end_call", "payload", "delay", "response")
RESERVED = frozenset(PVT_KEYWORDS) | {
    "ifsm", "tfsm", "fsm", "transactor", "map", "role", "level", "clock_period",
    "signal", "field", "initial", "final", "on", "active", "consume_delay",
}


@dataclass(frozen=True)
class SourceSpan:
    line: int    # 1-based
    column: int  # 1-based
    length: int

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}"


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan, expected: tuple[str, ...] = ()):
        detail = f"{message} at {span}"
        if expected:
            detail += " (expected " + " | ".join(expected) + ")"
        super().__init__(detail)
        self.span = span
        self.expected = expected


class ValidationFailure(ValueError):
    """Parsed text that is grammatical but violates an FSM invariant."""

    def __init__(self, name: str, findings: tuple[tuple[Violation, SourceSpan | None], ...]):
        lines = [f"{name}: {len(findings)} invariant violation(s)"]
        for v, span in findings:
            where = f" at {span}" if span else ""
            lines.append(f"  {v}{where}")
        super().__init__("\n".join(lines))
        self.findings = findings

    def codes(self) -> set[str]:
        return {v.code for v, _ in self.findings}


@dataclass(frozen=True)
class _Token:
    type: str  # IDENT | INT | SYM | EOF
    text: str
    line: int
    column: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.column, len(self.text))


_SYMBOLS = ("->", "<-", "{", "}", "=", ";", ":", ",", "[", "]", "(", ")", "!", "?")


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        two = text[i : i + 2]
        if two in ("->", "<-"):
            tokens.append(_Token("SYM", two, line, col))
            i, col = i + 2, col + 2
            continue
        if ch in "{}=;:,[]()!?":
            tokens.append(_Token("SYM", ch, line, col))
            i, col = i + 1, col + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", SourceSpan(line, col, 1))
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, *expected: str) -> ParseError:
        tok = self.current
        what = "end of input" if tok.type == "EOF" else repr(tok.text)
        return ParseError(f"unexpected {what}", tok.span, expected)

    def accept(self, text: str) -> _Token | None:
        tok = self.current
        if tok.type != "EOF" and tok.text == text:
            self.pos += 1
            return tok
        return None

    def expect(self, text: str) -> _Token:
        tok = self.accept(text)
        if tok is None:
            raise self.error(text)
        return tok

    def expect_int(self) -> tuple[int, _Token]:
        tok = self.current
        if tok.type != "INT":
            raise self.error("integer")
        self.pos += 1
        return int(tok.text), tok

    def expect_ident(self, what: str) -> _Token:
        tok = self.current
        if tok.type != "IDENT":
            raise self.error(what)
        self.pos += 1
        return tok

    def expect_name(self, what: str) -> _Token:
        tok = self.expect_ident(what)
        if tok.text in RESERVED:
            raise ParseError(f"{tok.text!r} is a reserved word", tok.span, (what,))
        return tok


def _parse_action(p: _Parser) -> Action:
    tok = p.expect_ident("action")
    word = tok.text
    if word == "consume_delay":
        return Action(ActionKind.CONSUME_DELAY)
    if word in PVT_KEYWORDS:
        if p.accept("!"):
            return call_action(word, send=True)
        if p.accept("?"):
            return call_action(word, send=False)
        raise p.error("!", "?")
    if p.accept("!"):
        mark_send = True
    elif p.accept("?"):
        mark_send = False
    else:
        raise p.error("!", "?")
    if p.current.type == "INT":
        level, bit_tok = p.expect_int()
        if level not in (0, 1):
            raise ParseError("signal level must be 0 or 1", bit_tok.span, ("0", "1"))
        kind = ActionKind.DRIVE_LEVEL if mark_send else ActionKind.REQUIRE_LEVEL
        return Action(kind, word, level)
    kind = ActionKind.DRIVE_DATA if mark_send else ActionKind.SAMPLE_DATA
    return Action(kind, word)


def _attach_spans(
    report_violations, spans: dict[str, SourceSpan]
) -> tuple[tuple[Violation, SourceSpan | None], ...]:
    return tuple((v, spans.get(v.subject)) for v in report_violations)


def parse_interface_spec(text: str) -> InterfaceFsm:
    """Parse and validate one ``.ifsm`` document.

    Raises ParseError on malformed syntax and ValidationFailure when the
    machine is grammatical but structurally invalid; both carry source spans.
    """
    p = _Parser(text)
    p.expect("ifsm")
    p.expect("v1")
    p.expect("fsm")
    name_tok = p.expect_name("fsm name")
    p.expect("{")

    role: Role | None = None
    level: Level | None = None
    clock: int | None = None
    spans: dict[str, SourceSpan] = {}
    seen_headers: set[str] = set()
    while p.current.text in ("role", "level", "clock_period"):
        tok = p.current
        if tok.text in seen_headers:
            raise ParseError(f"duplicate {tok.text} header", tok.span)
        seen_headers.add(tok.text)
        p.pos += 1
        p.expect("=")
        if tok.text == "role":
            val = p.expect_ident("initiator or target")
            if val.text not in ("initiator", "target"):
                raise ParseError("role must be initiator or target", val.span)
            role = Role(val.text)
        elif tok.text == "level":
            val = p.expect_ident("ca or pvt")
            if val.text not in ("ca", "pvt"):
                raise ParseError("level must be ca or pvt", val.span)
            level = Level(val.text)
        else:
            clock, _ = p.expect_int()
            p.expect("ns")
            spans[name_tok.text] = tok.span
        p.expect(";")
    if role is None:
        raise ParseError("missing role header", p.current.span, ("role",))
    if level is None:
        raise ParseError("missing level header", p.current.span, ("level",))

    signals: list[SignalDecl] = []
    fields: list[str] = []
    while p.current.text in ("signal", "field"):
        tok = p.current
        p.pos += 1
        if tok.text == "signal":
            sig_tok = p.expect_name("signal name")
            p.expect(":")
            kind_tok = p.expect_ident("data or handshake")
            if kind_tok.text not in ("data", "handshake"):
                raise ParseError("signal kind must be data or handshake", kind_tok.span)
            kind = SignalKind(kind_tok.text)
            active = 1
            if p.accept("active"):
                lvl_tok = p.expect_ident("high or low")
                if lvl_tok.text not in ("high", "low"):
                    raise ParseError("active level must be high or low", lvl_tok.span)
                if kind is not SignalKind.HANDSHAKE:
                    raise ParseError("active level applies to handshake signals", lvl_tok.span)
                active = 1 if lvl_tok.text == "high" else 0
            signals.append(SignalDecl(sig_tok.text, kind, active))
            spans[sig_tok.text] = sig_tok.span
        else:
            f_tok = p.expect_name("field name")
            fields.append(f_tok.text)
            spans[f_tok.text] = f_tok.span
        p.expect(";")

    p.expect("initial")
    p.expect("=")
    initial, init_tok = p.expect_int()
    spans[str(initial)] = init_tok.span
    p.expect(";")
    p.expect("final")
    p.expect("=")
    final, fin_tok = p.expect_int()
    spans.setdefault(str(final), fin_tok.span)
    p.expect(";")

    transitions: list[Transition] = []
    states = {initial, final}
    while p.current.text == "on":
        on_tok = p.expect("on")
        src, src_tok = p.expect_int()
        p.expect("->")
        dst, _ = p.expect_int()
        p.expect(":")
        actions = [_parse_action(p)]
        while p.accept(","):
            actions.append(_parse_action(p))
        p.expect(";")
        t = Transition(src, dst, tuple(actions))
        if t in transitions:
            raise ParseError(f"duplicate transition {src} -> {dst}", on_tok.span)
        transitions.append(t)
        states.update((src, dst))
        spans.setdefault(f"{src}->{dst}", on_tok.span)
        spans.setdefault(str(src), src_tok.span)

    p.expect("}")
    if p.current.type != "EOF":
        raise p.error("end of input")

    fsm = InterfaceFsm(
        name=name_tok.text,
        role=role,
        level=level,
        states=frozenset(states),
        initial=initial,
        final=final,
        transitions=tuple(transitions),
        clock_period_ns=clock,
        signals=tuple(signals),
        payload_fields=tuple(fields),
    )
    report = validate(fsm)
    if not report.ok:
        raise ValidationFailure(fsm.name, _attach_spans(report.violations, spans))
    return fsm


def serialize_fsm(fsm: InterfaceFsm) -> str:
    """Canonical text: headers, declarations sorted by name, the boundary
    line, then transitions sorted by (from, to, actions)."""
    out = ["ifsm v1", f"fsm {fsm.name} {{"]
    out.append(f"  role = {fsm.role.value};")
    out.append(f"  level = {fsm.level.value};")
    if fsm.level is Level.CA and fsm.clock_period_ns:
        out.append(f"  clock_period = {fsm.clock_period_ns} ns;")
    for sig in fsm.signals:  # stored sorted by name
        if sig.kind is SignalKind.HANDSHAKE:
            act = "high" if sig.active_level == 1 else "low"
            out.append(f"  signal {sig.name} : handshake active {act};")
        else:
            out.append(f"  signal {sig.name} : data;")
    for f in fsm.payload_fields:
        out.append(f"  field {f};")
    out.append(f"  initial = {fsm.initial}; final = {fsm.final};")
    for t in fsm.transitions:  # stored sorted canonically
        out.append(f"  on {t.from_state} -> {t.to_state} : {t.render_actions()};")
    out.append("}")
    return "\n".join(out) + "\n"


def parse_payload_mapping(text: str) -> PayloadMapping:
    """Parse one ``.pmap`` document into an ordered PayloadMapping."""
    p = _Parser(text)
    p.expect("map")
    name_tok = p.expect_name("mapping name")
    p.expect("{")
    entries: list[MappingEntry] = []
    seen: set[tuple[str, int | None]] = set()
    next_index: dict[str, int] = {}
    while p.current.text != "}":
        f_tok = p.expect_name("field name")
        index: int | None = None
        if p.accept("["):
            index, idx_tok = p.expect_int()
            p.expect("]")
            expected = next_index.get(f_tok.text, 0)
            if index != expected:
                raise ParseError(
                    f"non-contiguous-index: {f_tok.text}[{index}] "
                    f"declared before {f_tok.text}[{expected}]",
                    idx_tok.span,
                )
            next_index[f_tok.text] = index + 1
        else:
            if f_tok.text in next_index:
                raise ParseError(
                    f"field {f_tok.text} mixes indexed and plain entries", f_tok.span
                )
            next_index[f_tok.text] = 0
        key = (f_tok.text, index)
        if key in seen:
            raise ParseError(f"duplicate entry {f_tok.text}", f_tok.span)
        seen.add(key)
        p.expect("<-")
        sig_tok = p.expect_name("signal name")
        p.expect(";")
        entries.append(MappingEntry(f_tok.text, index, sig_tok.text))
    p.expect("}")
    if p.current.type != "EOF":
        raise p.error("end of input")
    return PayloadMapping(name_tok.text, tuple(entries))


def serialize_payload_mapping(mapping: PayloadMapping) -> str:
    out = [f"map {mapping.name} {{"]
    for e in mapping.entries:
        out.append(f"  {e.render()};")
    out.append("}")
    return "\n".join(out) + "\n"


def _render_pair(pair: StatePair) -> str:
    return f"({pair.p},{pair.q})"


def serialize_transactor(g: TransactorFsm) -> str:
    """Canonical ``.tfsm`` text: mirrors ``.ifsm`` with state-pair ids and a
    ``[t]``/``[i]`` side annotation per edge."""
    out = ["tfsm v1", f"transactor {g.name} {{"]
    out.append(f"  t_level = {g.t_level.value};")
    out.append(f"  i_level = {g.i_level.value};")
    if g.clock_period_ns:
        out.append(f"  clock_period = {g.clock_period_ns} ns;")
    for sig in g.signals:
        if sig.kind is SignalKind.HANDSHAKE:
            act = "high" if sig.active_level == 1 else "low"
            out.append(f"  signal {sig.name} : handshake active {act};")
        else:
            out.append(f"  signal {sig.name} : data;")
    for f in g.payload_fields:
        out.append(f"  field {f};")
    out.append(
        f"  initial = {_render_pair(g.initial_pair)}; final = {_render_pair(g.final_pair)};"
    )
    for t in sorted(
        g.transitions,
        key=lambda t: (t.from_pair.p, t.from_pair.q, t.to_pair.p, t.to_pair.q, t.side),
    ):
        acts = ", ".join(a.render() for a in t.actions)
        out.append(
            f"  on {_render_pair(t.from_pair)} -> {_render_pair(t.to_pair)}"
            f" [{t.side}] : {acts};"
        )
    out.append("}")
    return "\n".join(out) + "\n"


def _parse_pair(p: _Parser) -> StatePair:
    p.expect("(")
    a, _ = p.expect_int()
    p.expect(",")
    b, _ = p.expect_int()
    p.expect(")")
    return StatePair(a, b)


def parse_transactor_spec(text: str) -> TransactorFsm:
    """Parse one ``.tfsm`` document.

    Legality-context snapshots are synthesis metadata and are not stored in
    the file; they are recomputed by replaying the edges from the initial
    pair.
    """
    p = _Parser(text)
    p.expect("tfsm")
    p.expect("v1")
    p.expect("transactor")
    name_tok = p.expect_name("transactor name")
    p.expect("{")

    p.expect("t_level")
    p.expect("=")
    t_level = Level(p.expect_ident("ca or pvt").text)
    p.expect(";")
    p.expect("i_level")
    p.expect("=")
    i_level = Level(p.expect_ident("ca or pvt").text)
    p.expect(";")
    clock: int | None = None
    if p.accept("clock_period"):
        p.expect("=")
        clock, _ = p.expect_int()
        p.expect("ns")
        p.expect(";")

    signals: list[SignalDecl] = []
    fields: list[str] = []
    while p.current.text in ("signal", "field"):
        tok = p.current
        p.pos += 1
        if tok.text == "signal":
            sig_tok = p.expect_name("signal name")
            p.expect(":")
            kind_tok = p.expect_ident("data or handshake")
            kind = SignalKind(kind_tok.text)
            active = 1
            if p.accept("active"):
                lvl_tok = p.expect_ident("high or low")
                active = 1 if lvl_tok.text == "high" else 0
            signals.append(SignalDecl(sig_tok.text, kind, active))
        else:
            fields.append(p.expect_name("field name").text)
        p.expect(";")

    p.expect("initial")
    p.expect("=")
    initial = _parse_pair(p)
    p.expect(";")
    p.expect("final")
    p.expect("=")
    final = _parse_pair(p)
    p.expect(";")

    transitions: list[TransactorTransition] = []
    pairs = {initial, final}
    while p.current.text == "on":
        p.pos += 1
        src = _parse_pair(p)
        p.expect("->")
        dst = _parse_pair(p)
        p.expect("[")
        side_tok = p.expect_ident("t or i")
        if side_tok.text not in ("t", "i"):
            raise ParseError("side must be t or i", side_tok.span)
        p.expect("]")
        p.expect(":")
        actions = [_parse_action(p)]
        while p.accept(","):
            actions.append(_parse_action(p))
        p.expect(";")
        transitions.append(
            TransactorTransition(src, dst, side_tok.text, tuple(actions), None)
        )
        pairs.update((src, dst))
    p.expect("}")
    if p.current.type != "EOF":
        raise p.error("end of input")

    g = TransactorFsm(
        name=name_tok.text,
        t_level=t_level,
        i_level=i_level,
        clock_period_ns=clock,
        signals=tuple(signals),
        payload_fields=tuple(fields),
        pairs=frozenset(pairs),
        initial_pair=initial,
        final_pair=final,
        transitions=tuple(transitions),
    )
    return recompute_contexts(g)
