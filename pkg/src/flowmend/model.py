"""In-memory representation of flat timed statecharts.

Charts are immutable trees of frozen dataclasses. States and transitions carry
stable component ids (``S<n>`` for states, ``T<n>`` for transitions, ``T0`` for
the initial transition) that survive edits, so a suspiciousness score computed
on the original chart can still be looked up on any variant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterator, Mapping, Union

INITIAL = None  # source of the initial transition
INITIAL_ID = "T0"

TYPES = ("bool", "int", "real")
VAR_KINDS = ("input", "output", "local")
REL_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("&&", "||")
MATH_OPS = ("+", "-", "*", "/")
UNITS = {"sec": 1.0, "msec": 1e-3, "usec": 1e-6}

INT_MIN = -(2**31)
INT_MAX = 2**31 - 1


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    severity: str = "error"
    span: Span | None = None
    component: str | None = None

    def __str__(self) -> str:
        where = str(self.span) if self.span else (self.component or "<chart>")
        return f"{where}: {self.severity}: {self.message}"


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Lit:
    value: bool | int | float
    type: str
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: Expr
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class After:
    count: int | float
    unit: str
    span: Span | None = field(default=None, compare=False, repr=False)


Expr = Union[Lit, Var, Unary, Binary, After]


def lit(value: bool | int | float) -> Lit:
    if isinstance(value, bool):
        return Lit(value, "bool")
    if isinstance(value, int):
        return Lit(value, "int")
    return Lit(float(value), "real")


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal."""
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)


# ---------------------------------------------------------------- chart nodes


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str
    type: str
    init: Lit | None = None
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Assignment:
    lhs: str
    rhs: Expr
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Conjunct:
    connector: str | None
    expr: Expr


@dataclass(frozen=True)
class State:
    cid: str
    name: str
    entry: tuple[Assignment, ...] = ()
    during: tuple[Assignment, ...] = ()
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Transition:
    cid: str
    source: str | None  # None for the initial transition
    dest: str
    guard: tuple[Conjunct, ...] = ()
    span: Span | None = field(default=None, compare=False, repr=False)

    @property
    def is_initial(self) -> bool:
        return self.source is INITIAL


@dataclass(frozen=True)
class Chart:
    name: str
    vars: tuple[VarDecl, ...]
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]

    def var(self, name: str) -> VarDecl | None:
        for v in self.vars:
            if v.name == name:
                return v
        return None

    def vars_of(self, *kinds: str) -> list[VarDecl]:
        return [v for v in self.vars if v.kind in kinds]

    def state(self, cid: str) -> State | None:
        for s in self.states:
            if s.cid == cid:
                return s
        return None

    def state_named(self, name: str) -> State | None:
        for s in self.states:
            if s.name == name:
                return s
        return None

    def transition(self, cid: str) -> Transition | None:
        for t in self.transitions:
            if t.cid == cid:
                return t
        return None

    @property
    def initial(self) -> Transition | None:
        for t in self.transitions:
            if t.is_initial:
                return t
        return None

    def outgoing(self, state_cid: str) -> list[Transition]:
        """Transitions leaving a state, in priority order."""
        return [t for t in self.transitions if t.source == state_cid]


def components(chart: Chart) -> list[tuple[str, str]]:
    """All (component id, kind) pairs: states first, then transitions."""
    return [(s.cid, "state") for s in chart.states] + [
        (t.cid, "transition") for t in chart.transitions
    ]


def component_kind(chart: Chart, cid: str) -> str | None:
    if chart.state(cid) is not None:
        return "state"
    if chart.transition(cid) is not None:
        return "transition"
    return None


# ---------------------------------------------------------------- typing


class ChartTypeError(Exception):
    def __init__(self, message: str, node: Any = None):
        super().__init__(message)
        self.node = node


def type_of(expr: Expr, var_types: Mapping[str, str], in_guard: bool = False) -> str:
    """Static type of an expression; raises ChartTypeError on misuse."""
    if isinstance(expr, Lit):
        return expr.type
    if isinstance(expr, Var):
        if expr.name not in var_types:
            raise ChartTypeError(f"unknown variable '{expr.name}'", expr)
        return var_types[expr.name]
    if isinstance(expr, After):
        if not in_guard:
            raise ChartTypeError("after() is only allowed in transition guards", expr)
        if expr.unit not in UNITS:
            raise ChartTypeError(f"unknown time unit '{expr.unit}'", expr)
        if isinstance(expr.count, bool) or not math.isfinite(expr.count):
            raise ChartTypeError("after() count must be a finite number", expr)
        return "bool"
    if isinstance(expr, Unary):
        t = type_of(expr.operand, var_types, in_guard)
        if expr.op == "!":
            if t != "bool":
                raise ChartTypeError("operand of '!' must be bool", expr)
            return "bool"
        if t == "bool":
            raise ChartTypeError("operand of unary '-' must be numeric", expr)
        return t
    if isinstance(expr, Binary):
        lt = type_of(expr.left, var_types, in_guard)
        rt = type_of(expr.right, var_types, in_guard)
        if expr.op in MATH_OPS:
            if lt == "bool" or rt == "bool":
                raise ChartTypeError(f"operands of '{expr.op}' must be numeric", expr)
            return "int" if lt == rt == "int" else "real"
        if expr.op in REL_OPS:
            if (lt == "bool") != (rt == "bool"):
                raise ChartTypeError(f"cannot compare {lt} with {rt}", expr)
            if lt == "bool" and expr.op not in ("==", "!="):
                raise ChartTypeError(f"'{expr.op}' needs numeric operands", expr)
            return "bool"
        if expr.op in LOGIC_OPS:
            if lt != "bool" or rt != "bool":
                raise ChartTypeError(f"operands of '{expr.op}' must be bool", expr)
            return "bool"
        raise ChartTypeError(f"unknown operator '{expr.op}'", expr)
    raise ChartTypeError(f"not an expression: {expr!r}")


def assignable(target: str, value: str) -> bool:
    return target == value or (target == "real" and value == "int")


# ---------------------------------------------------------------- validation


def _lit_ok(value: Lit) -> bool:
    if value.type == "real":
        return isinstance(value.value, float) and math.isfinite(value.value)
    if value.type == "int":
        return (
            isinstance(value.value, int)
            and not isinstance(value.value, bool)
            and INT_MIN <= value.value <= INT_MAX
        )
    return isinstance(value.value, bool)


def validate(chart: Chart) -> list[Diagnostic]:
    """Check every structural and typing invariant; empty list means valid."""
    diags: list[Diagnostic] = []

    def err(msg: str, span: Span | None = None, cid: str | None = None) -> None:
        diags.append(Diagnostic(msg, "error", span, cid))

    var_types: dict[str, str] = {}
    for v in chart.vars:
        if v.name in var_types:
            err(f"duplicate variable name '{v.name}'", v.span)
            continue
        if v.kind not in VAR_KINDS or v.type not in TYPES:
            err(f"bad declaration of '{v.name}'", v.span)
            continue
        var_types[v.name] = v.type
        if v.kind == "input" and v.init is not None:
            err(f"input '{v.name}' cannot have an initial value", v.span)
        if v.kind == "output" and v.init is None:
            err(f"output '{v.name}' needs an initial value", v.span)
        if v.init is not None:
            if not assignable(v.type, v.init.type) or not _lit_ok(v.init):
                err(f"initial value of '{v.name}' does not match type {v.type}", v.span)

    def check_expr(expr: Expr, cid: str, in_guard: bool) -> str | None:
        for node in walk(expr):
            if isinstance(node, Lit) and not _lit_ok(node):
                err(f"invalid {node.type} literal {node.value!r}", node.span, cid)
                return None
        try:
            return type_of(expr, var_types, in_guard)
        except ChartTypeError as exc:
            span = getattr(exc.node, "span", None)
            err(str(exc), span, cid)
            return None

    if not chart.states:
        err("chart has no states")
    seen_names: set[str] = set()
    seen_ids: set[str] = set()
    for s in chart.states:
        if s.name in seen_names:
            err(f"duplicate state name '{s.name}'", s.span, s.cid)
        seen_names.add(s.name)
        if s.cid in seen_ids:
            err(f"duplicate component id '{s.cid}'", s.span, s.cid)
        seen_ids.add(s.cid)
        for a in s.entry + s.during:
            decl = chart.var(a.lhs)
            if decl is None:
                err(f"unknown variable '{a.lhs}'", a.span, s.cid)
                continue
            if decl.kind == "input":
                err(f"cannot assign to input '{a.lhs}'", a.span, s.cid)
            t = check_expr(a.rhs, s.cid, in_guard=False)
            if t is not None and not assignable(decl.type, t):
                err(f"cannot assign {t} to {decl.type} variable '{a.lhs}'", a.span, s.cid)

    state_ids = {s.cid for s in chart.states}
    initials = 0
    for t in chart.transitions:
        if t.cid in seen_ids:
            err(f"duplicate component id '{t.cid}'", t.span, t.cid)
        seen_ids.add(t.cid)
        if t.dest not in state_ids:
            err("unknown dest", t.span, t.cid)
        if t.is_initial:
            initials += 1
            if t.guard:
                err("initial transition cannot have a guard", t.span, t.cid)
            continue
        if t.source not in state_ids:
            err("unknown source", t.span, t.cid)
        if not t.guard:
            err("transition needs a guard", t.span, t.cid)
        for i, c in enumerate(t.guard):
            if (i == 0) != (c.connector is None) or (
                c.connector is not None and c.connector not in LOGIC_OPS
            ):
                err("malformed guard connector", t.span, t.cid)
            ty = check_expr(c.expr, t.cid, in_guard=True)
            if ty is not None and ty != "bool":
                err(f"guard condition must be bool, got {ty}", c.expr.span or t.span, t.cid)
    if initials == 0:
        err("missing initial transition")
    elif initials > 1:
        err("more than one initial transition")
    return diags


# ---------------------------------------------------------------- operators


class OperatorKind(str, enum.Enum):
    RelationalOpReplace = "RelationalOpReplace"
    ConditionalOpReplace = "ConditionalOpReplace"
    MathOpReplace = "MathOpReplace"
    AfterUnitChange = "AfterUnitChange"
    NumericReplace = "NumericReplace"
    TransitionDestReplace = "TransitionDestReplace"
    TransitionRootReplace = "TransitionRootReplace"
    InitialTransitionChange = "InitialTransitionChange"
    StateDelete = "StateDelete"
    TransitionDelete = "TransitionDelete"
    StateVarDelete = "StateVarDelete"
    TransitionCondDelete = "TransitionCondDelete"
    MathOpInsert = "MathOpInsert"
    VarInsert = "VarInsert"
    CondInsert = "CondInsert"

    @property
    def op_class(self) -> str:
        return OP_CLASS[self]


Op = OperatorKind
OP_CLASS = {
    Op.RelationalOpReplace: "R",
    Op.ConditionalOpReplace: "R",
    Op.MathOpReplace: "R",
    Op.AfterUnitChange: "R",
    Op.NumericReplace: "R",
    Op.TransitionDestReplace: "R",
    Op.TransitionRootReplace: "R",
    Op.InitialTransitionChange: "R",
    Op.StateDelete: "D",
    Op.TransitionDelete: "D",
    Op.StateVarDelete: "D",
    Op.TransitionCondDelete: "D",
    Op.MathOpInsert: "I",
    Op.VarInsert: "I",
    Op.CondInsert: "I",
}

TRANSITION_OPS = frozenset({
    Op.RelationalOpReplace, Op.ConditionalOpReplace, Op.MathOpReplace,
    Op.AfterUnitChange, Op.NumericReplace, Op.TransitionDestReplace,
    Op.TransitionRootReplace, Op.InitialTransitionChange, Op.TransitionDelete,
    Op.TransitionCondDelete, Op.CondInsert,
})
STATE_OPS = frozenset({
    Op.MathOpReplace, Op.NumericReplace, Op.StateDelete, Op.StateVarDelete,
    Op.MathOpInsert, Op.VarInsert,
})


@dataclass(frozen=True)
class Edit:
    op: OperatorKind
    target: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"op": self.op.value, "component": self.target, "params": dict(self.params)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Edit:
        return cls(OperatorKind(data["op"]), data["component"], dict(data.get("params", {})))


@dataclass(frozen=True)
class Patch:
    edits: tuple[Edit, ...] = ()

    def __add__(self, edit: Edit) -> Patch:
        return Patch(self.edits + (edit,))

    def __len__(self) -> int:
        return len(self.edits)

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.edits]

    @classmethod
    def from_json(cls, data: list) -> Patch:
        return cls(tuple(Edit.from_json(d) for d in data))


class ApplyError(Exception):
    """Base class; ``index`` is set by apply_patch to the failing edit."""

    index: int | None = None


class TargetMissing(ApplyError):
    pass


class Inapplicable(ApplyError):
    pass


class WouldInvalidate(ApplyError):
    pass


# ---------------------------------------------------------------- sites
#
# Operator-replacement edits address a token by its ordinal among all tokens
# of the same category inside one component, counting guard conjuncts (or
# entry then during assignments) in order and each expression in pre-order.


def _is_rel(e: Expr) -> bool:
    return isinstance(e, Binary) and e.op in REL_OPS


def _is_math(e: Expr) -> bool:
    return isinstance(e, Binary) and e.op in MATH_OPS


def _is_logic(e: Expr) -> bool:
    return isinstance(e, Binary) and e.op in LOGIC_OPS


def _is_after(e: Expr) -> bool:
    return isinstance(e, After)


def _is_number(e: Expr) -> bool:
    return (isinstance(e, Lit) and e.type != "bool") or isinstance(e, After)


SITE_MATCHERS: dict[str, Callable[[Expr], bool]] = {
    "relational": _is_rel,
    "math": _is_math,
    "logic": _is_logic,
    "after": _is_after,
    "number": _is_number,
}


def component_exprs(chart: Chart, cid: str) -> list[Expr]:
    s = chart.state(cid)
    if s is not None:
        return [a.rhs for a in s.entry + s.during]
    t = chart.transition(cid)
    if t is not None:
        return [c.expr for c in t.guard]
    return []


def sites(chart: Chart, cid: str, category: str) -> list[Expr]:
    """Nodes of one category in a component, in site order.

    For ``logic`` the guard connectors count as sites too; they are returned
    as ``Conjunct`` objects interleaved before their conjunct's nested nodes.
    """
    match = SITE_MATCHERS[category]
    out: list[Any] = []
    t = chart.transition(cid)
    if category == "logic" and t is not None:
        for c in t.guard:
            if c.connector is not None:
                out.append(c)
            out.extend(n for n in walk(c.expr) if match(n))
        return out
    for root in component_exprs(chart, cid):
        out.extend(n for n in walk(root) if match(n))
    return out


def _rewrite_nth(expr: Expr, match: Callable[[Expr], bool], counter: list[int],
                 fn: Callable[[Expr], Expr]) -> Expr:
    if match(expr):
        if counter[0] == 0:
            counter[0] = -1
            return fn(expr)
        counter[0] -= 1
    if counter[0] < 0:
        return expr
    if isinstance(expr, Unary):
        new = _rewrite_nth(expr.operand, match, counter, fn)
        return expr if new is expr.operand else replace(expr, operand=new)
    if isinstance(expr, Binary):
        left = _rewrite_nth(expr.left, match, counter, fn)
        right = _rewrite_nth(expr.right, match, counter, fn)
        if left is expr.left and right is expr.right:
            return expr
        return replace(expr, left=left, right=right)
    return expr


def _rewrite_component(chart: Chart, cid: str, category: str, index: int,
                       fn: Callable[[Any], Any]) -> Chart:
    """Apply ``fn`` to the ``index``-th site of ``category`` in ``cid``."""
    match = SITE_MATCHERS[category]
    counter = [index]
    t = chart.transition(cid)
    if t is not None:
        guard = []
        for c in t.guard:
            if category == "logic" and c.connector is not None:
                if counter[0] == 0:
                    counter[0] = -1
                    c = fn(c)
                elif counter[0] > 0:
                    counter[0] -= 1
            if counter[0] >= 0:
                c = replace(c, expr=_rewrite_nth(c.expr, match, counter, fn))
            guard.append(c)
        if counter[0] >= 0:
            raise Inapplicable(f"{cid} has no {category} site #{index}")
        return _replace_transition(chart, replace(t, guard=tuple(guard)))
    s = chart.state(cid)
    blocks = []
    for block in (s.entry, s.during):
        new_block = []
        for a in block:
            if counter[0] >= 0:
                a = replace(a, rhs=_rewrite_nth(a.rhs, match, counter, fn))
            new_block.append(a)
        blocks.append(tuple(new_block))
    if counter[0] >= 0:
        raise Inapplicable(f"{cid} has no {category} site #{index}")
    return _replace_state(chart, replace(s, entry=blocks[0], during=blocks[1]))


def _replace_state(chart: Chart, state: State) -> Chart:
    return replace(chart, states=tuple(state if s.cid == state.cid else s for s in chart.states))


def _replace_transition(chart: Chart, tr: Transition) -> Chart:
    return replace(
        chart, transitions=tuple(tr if t.cid == tr.cid else t for t in chart.transitions)
    )


def constants(chart: Chart) -> list[bool | int | float]:
    """Distinct numeric literal values of the chart, in first-seen order."""
    seen: list[Any] = []
    keys: set[tuple[str, Any]] = set()

    def add(value: Any, ty: str) -> None:
        if (ty, value) not in keys:
            keys.add((ty, value))
            seen.append(value)

    for cid, _ in components(chart):
        for node in sites(chart, cid, "number"):
            if isinstance(node, After):
                add(node.count, "int" if isinstance(node.count, int) else "real")
            else:
                add(node.value, node.type)
    return seen


# ---------------------------------------------------------------- edits


def _param(edit: Edit, key: str) -> Any:
    try:
        return edit.params[key]
    except KeyError:
        raise Inapplicable(f"{edit.op.value} edit lacks parameter '{key}'") from None


def _expect(found: Any, expected: Any, what: str) -> None:
    if found != expected or type(found) is not type(expected):
        raise Inapplicable(f"{what}: expected {expected!r}, found {found!r}")


def _term_expr(term: Any) -> Expr:
    if isinstance(term, str):
        return Var(term)
    return lit(term)


def _apply(chart: Chart, edit: Edit) -> Chart:
    op, cid, p = edit.op, edit.target, edit.params
    kind = component_kind(chart, cid)
    if kind is None:
        raise TargetMissing(f"component {cid} does not exist")
    allowed = TRANSITION_OPS if kind == "transition" else STATE_OPS
    if op not in allowed:
        raise Inapplicable(f"{op.value} does not apply to a {kind}")
    tr = chart.transition(cid)
    if tr is not None and tr.is_initial and op is not Op.InitialTransitionChange:
        raise Inapplicable(f"{op.value} does not apply to the initial transition")
    if op is Op.InitialTransitionChange and not (tr is not None and tr.is_initial):
        raise Inapplicable("InitialTransitionChange needs the initial transition")

    if op in (Op.RelationalOpReplace, Op.MathOpReplace, Op.ConditionalOpReplace):
        category = {Op.RelationalOpReplace: "relational", Op.MathOpReplace: "math",
                    Op.ConditionalOpReplace: "logic"}[op]
        old, new = _param(edit, "old"), _param(edit, "new")

        def swap(node: Any) -> Any:
            if isinstance(node, Conjunct):
                _expect(node.connector, old, "operator")
                return replace(node, connector=new)
            _expect(node.op, old, "operator")
            return replace(node, op=new)

        return _rewrite_component(chart, cid, category, _param(edit, "site"), swap)

    if op is Op.AfterUnitChange:
        old, new = _param(edit, "old"), _param(edit, "new")

        def unit(node: After) -> After:
            _expect(node.unit, old, "unit")
            return replace(node, unit=new)

        return _rewrite_component(chart, cid, "after", _param(edit, "site"), unit)

    if op is Op.NumericReplace:
        old, new = _param(edit, "old"), _param(edit, "new")

        def number(node: Any) -> Any:
            if isinstance(node, After):
                _expect(node.count, old, "number")
                return replace(node, count=new)
            _expect(node.value, old, "number")
            return replace(node, value=new)

        return _rewrite_component(chart, cid, "number", _param(edit, "site"), number)

    if op in (Op.TransitionDestReplace, Op.InitialTransitionChange):
        _expect(tr.dest, _param(edit, "old"), "destination")
        return _replace_transition(chart, replace(tr, dest=_param(edit, "new")))

    if op is Op.TransitionRootReplace:
        _expect(tr.source, _param(edit, "old"), "source")
        return _replace_transition(chart, replace(tr, source=_param(edit, "new")))

    if op is Op.TransitionDelete:
        return replace(chart, transitions=tuple(t for t in chart.transitions if t.cid != cid))

    if op is Op.TransitionCondDelete:
        idx = _param(edit, "index")
        if len(tr.guard) < 2 or not 0 <= idx < len(tr.guard):
            raise Inapplicable(f"cannot delete condition #{idx} of {cid}")
        guard = [c for i, c in enumerate(tr.guard) if i != idx]
        guard[0] = replace(guard[0], connector=None)
        return _replace_transition(chart, replace(tr, guard=tuple(guard)))

    if op is Op.CondInsert:
        conn = _param(edit, "connector")
        cond = Binary(_param(edit, "rel"), Var(_param(edit, "var")), lit(_param(edit, "value")))
        return _replace_transition(chart, replace(tr, guard=tr.guard + (Conjunct(conn, cond),)))

    state = chart.state(cid)
    if op is Op.StateDelete:
        init = chart.initial
        if init is not None and init.dest == cid:
            raise WouldInvalidate("cannot delete the initial state")
        if len(chart.states) == 1:
            raise WouldInvalidate("cannot delete the only state")
        return replace(
            chart,
            states=tuple(s for s in chart.states if s.cid != cid),
            transitions=tuple(
                t for t in chart.transitions if t.source != cid and t.dest != cid
            ),
        )

    if op is Op.StateVarDelete:
        block, idx = _param(edit, "block"), _param(edit, "index")
        if block not in ("entry", "during"):
            raise Inapplicable(f"unknown action block '{block}'")
        actions = getattr(state, block)
        if not 0 <= idx < len(actions):
            raise Inapplicable(f"{cid} has no {block} action #{idx}")
        return _replace_state(
            chart, replace(state, **{block: actions[:idx] + actions[idx + 1:]})
        )

    if op is Op.MathOpInsert:
        lhs = _param(edit, "lhs")
        rhs = Binary(_param(edit, "op"), Var(lhs), _term_expr(_param(edit, "term")))
        return _replace_state(chart, replace(state, entry=state.entry + (Assignment(lhs, rhs),)))

    if op is Op.VarInsert:
        a = Assignment(_param(edit, "lhs"), lit(_param(edit, "value")))
        return _replace_state(chart, replace(state, entry=state.entry + (a,)))

    raise Inapplicable(f"unsupported operator {op!r}")  # pragma: no cover


def apply_edit(chart: Chart, edit: Edit) -> Chart:
    """Return a new chart with ``edit`` applied; the input is never touched."""
    result = _apply(chart, edit)
    problems = validate(result)
    if problems:
        raise WouldInvalidate("; ".join(str(d) for d in problems))
    return result


def apply_patch(chart: Chart, patch: Patch) -> Chart:
    for i, edit in enumerate(patch.edits):
        try:
            chart = apply_edit(chart, edit)
        except ApplyError as exc:
            exc.index = i
            raise
    return chart
