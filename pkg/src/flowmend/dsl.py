"""Textual chart format: parser, canonical serializer and patch diffs.

The grammar is documented in ``docs/grammar.md``. Parsing stops at the first
lexical or syntax error; type and reference errors are collected from the
finished tree so several can be reported at once.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass
from pathlib import Path

from .model import (
    INITIAL_ID,
    LOGIC_OPS,
    UNITS,
    After,
    Assignment,
    Binary,
    Chart,
    Conjunct,
    Diagnostic,
    Expr,
    Lit,
    Span,
    State,
    Transition,
    Unary,
    Var,
    VarDecl,
    components,
    validate,
)


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str  # name, int, real, op, eof
    text: str
    span: Span


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|&&|\|\||==|!=|<=|>=|[{}()\[\];:,=<>+\-*/!])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "chart", "input", "output", "local", "bool", "int", "real", "state", "entry",
    "during", "initial", "transition", "when", "after", "true", "false",
}


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            span = Span(file, line, col, 1)
            raise ParseError([Diagnostic(f"unexpected character {text[pos]!r}", span=span)])
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, Span(file, line, col, len(chunk))))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    col = pos - line_start + 1
    tokens.append(Token("eof", "", Span(file, line, col, 0)))
    return tokens


# Binary precedence levels, loosest first.
_LEVELS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/")]
_GUARD_LEVEL = 2  # guard conjuncts are parsed at equality level


class _Parser:
    def __init__(self, text: str, file: str):
        self.toks = tokenize(text, file)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError([Diagnostic(f"{msg}, found {found}", span=tok.span)])

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("op", "name") and self.tok.text in texts

    def take(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected '{text}'")
        tok = self.tok
        self.i += 1
        return tok

    def name(self, what: str = "identifier") -> Token:
        tok = self.tok
        if tok.kind != "name" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}")
        self.i += 1
        return tok

    # -- chart structure
    def chart(self) -> tuple:
        self.take("chart")
        name = self.name("chart name").text
        self.take("{")
        decls, states, transitions = [], [], []
        initial = None
        while not self.at("}"):
            if self.at("input", "output", "local"):
                decls.append(self.decl())
            elif self.at("state"):
                states.append(self.state(len(states) + 1))
            elif self.at("initial"):
                tok = self.take("initial")
                if initial is not None:
                    raise self.error("duplicate initial transition", tok)
                self.take("->")
                initial = (self.name("state name"), tok.span)
                self.take(";")
            elif self.at("transition"):
                transitions.append(self.transition(len(transitions) + 1))
            else:
                raise self.error("expected a declaration, state or transition")
        self.take("}")
        if self.tok.kind != "eof":
            raise self.error("expected end of input")
        return name, decls, states, initial, transitions

    def decl(self) -> VarDecl:
        kind_tok = self.tok
        self.i += 1
        name = self.name("variable name")
        self.take(":")
        if not self.at("bool", "int", "real"):
            raise self.error("expected a type (bool, int or real)")
        ty = self.tok.text
        self.i += 1
        init = None
        if self.at("="):
            self.take("=")
            expr = self.unary()
            if not isinstance(expr, Lit):
                raise self.error("expected a literal initial value", self.toks[self.i - 1])
            init = expr
            if ty == "real" and init.type == "int":
                init = Lit(float(init.value), "real", init.span)
        self.take(";")
        return VarDecl(name.text, kind_tok.text, ty, init, kind_tok.span)

    def state(self, index: int) -> State:
        tok = self.take("state")
        name = self.name("state name")
        self.take("{")
        blocks: dict[str, list[Assignment]] = {"entry": [], "during": []}
        seen: set[str] = set()
        while not self.at("}"):
            if not self.at("entry", "during"):
                raise self.error("expected 'entry' or 'during'")
            block = self.tok.text
            if block in seen:
                raise self.error(f"duplicate '{block}' block")
            seen.add(block)
            self.i += 1
            self.take("{")
            while not self.at("}"):
                blocks[block].append(self.assignment())
            self.take("}")
        self.take("}")
        return State(
            f"S{index}", name.text, tuple(blocks["entry"]), tuple(blocks["during"]),
            Span(tok.span.file, tok.span.line, tok.span.column, len("state")),
        )

    def assignment(self) -> Assignment:
        lhs = self.name("assignment target")
        self.take("=")
        rhs = self.expr(0)
        self.take(";")
        return Assignment(lhs.text, rhs, lhs.span)

    def transition(self, index: int):
        tok = self.take("transition")
        src = self.name("source state")
        self.take("->")
        dst = self.name("destination state")
        self.take("when")
        self.take("[")
        guard = [Conjunct(None, self.expr(_GUARD_LEVEL))]
        while self.at(*LOGIC_OPS):
            conn = self.tok.text
            self.i += 1
            guard.append(Conjunct(conn, self.expr(_GUARD_LEVEL)))
        self.take("]")
        self.take(";")
        return (f"T{index}", src, dst, tuple(guard), tok.span)

    # -- expressions
    def expr(self, level: int) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _LEVELS[level]:
            op_tok = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = Binary(op_tok.text, left, right, op_tok.span)
        return left

    def unary(self) -> Expr:
        if self.at("-", "!"):
            op_tok = self.tok
            self.i += 1
            operand = self.unary()
            if op_tok.text == "-" and isinstance(operand, Lit) and operand.type != "bool":
                return Lit(-operand.value, operand.type, op_tok.span)
            return Unary(op_tok.text, operand, op_tok.span)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return Lit(int(tok.text), "int", tok.span)
        if tok.kind == "real":
            self.i += 1
            return Lit(float(tok.text), "real", tok.span)
        if self.at("true", "false"):
            self.i += 1
            return Lit(tok.text == "true", "bool", tok.span)
        if self.at("after"):
            self.i += 1
            self.take("(")
            count = self.unary()
            if not isinstance(count, Lit) or count.type == "bool":
                raise self.error("after() needs a numeric literal count", self.toks[self.i - 1])
            self.take(",")
            unit = self.tok
            if unit.kind != "name" or unit.text not in UNITS:
                raise self.error("expected a time unit (sec, msec or usec)")
            self.i += 1
            self.take(")")
            return After(count.value, unit.text, tok.span)
        if self.at("("):
            self.i += 1
            inner = self.expr(0)
            self.take(")")
            return inner
        if tok.kind == "name" and tok.text not in KEYWORDS:
            self.i += 1
            return Var(tok.text, tok.span)
        raise self.error("expected an expression")


def parse(text: str, file: str = "<input>") -> Chart:
    """Parse chart source; raises ParseError carrying diagnostics."""
    p = _Parser(text, file)
    name, decls, states, initial, raw_transitions = p.chart()
    by_name: dict[str, str] = {}
    for s in states:
        by_name.setdefault(s.name, s.cid)
    diags: list[Diagnostic] = []

    def resolve(tok: Token, role: str) -> str:
        cid = by_name.get(tok.text)
        if cid is None:
            diags.append(Diagnostic(f"unknown {role} state '{tok.text}'", span=tok.span))
            return f"?{tok.text}"
        return cid

    transitions = []
    if initial is None:
        diags.append(Diagnostic("missing initial transition", span=p.toks[-1].span))
    else:
        dst_tok, span = initial
        transitions.append(Transition(INITIAL_ID, None, resolve(dst_tok, "dest"), (), span))
    for cid, src, dst, guard, span in raw_transitions:
        transitions.append(
            Transition(cid, resolve(src, "source"), resolve(dst, "dest"), guard, span)
        )
    if diags:
        raise ParseError(diags)
    chart = Chart(name, tuple(decls), tuple(states), tuple(transitions))
    problems = validate(chart)
    if problems:
        raise ParseError(problems)
    return chart


def parse_file(path: str | Path) -> Chart:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


# ---------------------------------------------------------------- serializer

_PREC = {op: lvl for lvl, ops in enumerate(_LEVELS) for op in ops}
_UNARY_PREC = len(_LEVELS)
_ATOM_PREC = len(_LEVELS) + 1


def format_number(value: int | float) -> str:
    """Shortest text that reads back to the same value and type."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    text = repr(float(value))
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) or (isinstance(e, Lit) and e.type != "bool" and e.value < 0):
        return _UNARY_PREC
    return _ATOM_PREC


def format_expr(e: Expr, min_prec: int = 0) -> str:
    if isinstance(e, Lit):
        text = format_number(e.value)
    elif isinstance(e, Var):
        text = e.name
    elif isinstance(e, After):
        text = f"after({format_number(e.count)}, {e.unit})"
    elif isinstance(e, Unary):
        text = e.op + format_expr(e.operand, _UNARY_PREC)
    else:
        p = _PREC[e.op]
        text = f"{format_expr(e.left, p)} {e.op} {format_expr(e.right, p + 1)}"
    if _prec(e) < min_prec:
        return f"({text})"
    return text


def format_guard(guard: tuple[Conjunct, ...]) -> str:
    parts = []
    for c in guard:
        body = format_expr(c.expr, _GUARD_LEVEL)
        parts.append(body if c.connector is None else f"{c.connector} {body}")
    return " ".join(parts)


def serialize(chart: Chart) -> str:
    names = {s.cid: s.name for s in chart.states}
    out = [f"chart {chart.name} {{"]
    for v in chart.vars:
        init = "" if v.init is None else f" = {format_number(v.init.value)}"
        out.append(f"    {v.kind} {v.name}: {v.type}{init};")
    for s in chart.states:
        out.append("")
        if not s.entry and not s.during:
            out.append(f"    state {s.name} {{}}")
            continue
        out.append(f"    state {s.name} {{")
        for block, actions in (("entry", s.entry), ("during", s.during)):
            if actions:
                out.append(f"        {block} {{")
                out.extend(f"            {a.lhs} = {format_expr(a.rhs)};" for a in actions)
                out.append("        }")
        out.append("    }")
    if chart.transitions:
        out.append("")
    for t in chart.transitions:
        if t.is_initial:
            out.append(f"    initial -> {names[t.dest]};")
    for t in chart.transitions:
        if not t.is_initial:
            out.append(
                f"    transition {names[t.source]} -> {names[t.dest]}"
                f" when [{format_guard(t.guard)}];"
            )
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- diffs


def _component_text(chart: Chart) -> dict[str, str]:
    names = {s.cid: s.name for s in chart.states}
    text = {}
    for s in chart.states:
        text[s.cid] = repr((s.name, [format_expr(a.rhs) for a in s.entry],
                            [a.lhs for a in s.entry], [format_expr(a.rhs) for a in s.during],
                            [a.lhs for a in s.during]))
    for t in chart.transitions:
        src = "initial" if t.is_initial else names[t.source]
        text[t.cid] = f"{src} -> {names[t.dest]} [{format_guard(t.guard)}]"
    return text


def touched_components(original: Chart, patched: Chart) -> list[str]:
    a, b = _component_text(original), _component_text(patched)
    order = list(a) + [cid for cid in b if cid not in a]
    return [cid for cid in order if a.get(cid) != b.get(cid)]


def render_diff(original: Chart, patched: Chart, context: int = 1) -> str:
    """Unified diff of canonical forms, headed by the touched component ids."""
    before, after = serialize(original), serialize(patched)
    if before == after:
        return ""
    lines = list(difflib.unified_diff(
        before.splitlines(keepends=True), after.splitlines(keepends=True),
        fromfile=f"{original.name} (original)", tofile=f"{patched.name} (patched)", n=context,
    ))
    kinds = dict(components(original) + components(patched))
    notes = []
    for cid in touched_components(original, patched):
        status = ("removed" if patched.state(cid) is None and patched.transition(cid) is None
                  else "changed")
        notes.append(f"# {status} {kinds[cid]} {cid}\n")
    return "".join(notes + lines)

