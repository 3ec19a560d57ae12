"""Fixed-step, zero-order-hold interpreter for charts.

Expressions are compiled to Python closures once per ``simulate`` call; the
step loop then only dispatches on precomputed transition tables.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

from .dsl import format_number
from .model import (
    INT_MAX,
    INT_MIN,
    UNITS,
    After,
    Binary,
    Chart,
    Conjunct,
    Expr,
    Lit,
    Span,
    Unary,
    Var,
)

DEFAULT_DT = 0.1
# Absolute slack on after() comparisons so k * dt round-off never delays a
# timer by a whole step.
TIMER_SLACK = 1e-9


class SimError(Exception):
    pass


class EvalError(Exception):
    pass


class TypeMismatch(EvalError):
    pass


class DivisionByZero(SimError, EvalError):
    def __init__(self, span: Span | None, time: float | None = None):
        self.span, self.time = span, time
        super().__init__(f"division by zero at {span or '<expr>'} (t={time})")


class NonFiniteValue(SimError):
    def __init__(self, var: str | None, time: float | None = None):
        self.var, self.time = var, time
        super().__init__(f"non-finite or out-of-range value for {var or '<expr>'} (t={time})")


class InputMismatch(SimError):
    pass


@dataclass(frozen=True)
class SignalTrace:
    """Uniformly sampled signal; sample k is at time k * dt."""

    name: str
    dt: float
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"signal {self.name} has no samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def times(self) -> list[float]:
        return [sample_time(k, self.dt) for k in range(len(self.values))]

    @property
    def samples(self) -> list[tuple[float, Any]]:
        return list(zip(self.times, self.values))

    @property
    def duration(self) -> float:
        return (len(self.values) - 1) * self.dt


def sample_time(k: int, dt: float) -> float:
    return round(k * dt, 12)


@dataclass(frozen=True)
class StimulusSet:
    dt: float
    duration: float
    inputs: Mapping[str, SignalTrace]

    @property
    def steps(self) -> int:
        return step_count(self.duration, self.dt)


def step_count(duration: float, dt: float) -> int:
    n = round(duration / dt)
    if n < 1 or abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise InputMismatch(f"duration {duration} is not a positive multiple of dt {dt}")
    return n


@dataclass(frozen=True)
class CoverageTrace:
    executed_states: frozenset
    fired_transitions: frozenset


@dataclass(frozen=True)
class SimResult:
    outputs: Mapping[str, SignalTrace]
    coverage: CoverageTrace
    steps: int
    dt: float


# ---------------------------------------------------------------- evaluation

Compiled = Callable[[dict, float], Any]


def _check_int(v: int) -> int:
    if not INT_MIN <= v <= INT_MAX:
        raise NonFiniteValue(None)
    return v


def _check_real(v: float) -> float:
    if not math.isfinite(v):
        raise NonFiniteValue(None)
    return v


def _int_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def compile_expr(expr: Expr, types: Mapping[str, str]) -> tuple[Compiled, str]:
    """Closure ``f(env, time_in_state)`` plus the static type of ``expr``."""
    if isinstance(expr, Lit):
        value = expr.value
        return (lambda env, tis: value), expr.type
    if isinstance(expr, Var):
        name = expr.name
        if name not in types:
            raise TypeMismatch(f"unbound variable {name}")
        return (lambda env, tis: env[name]), types[name]
    if isinstance(expr, After):
        threshold = expr.count * UNITS[expr.unit] - TIMER_SLACK
        return (lambda env, tis: tis >= threshold), "bool"
    if isinstance(expr, Unary):
        f, t = compile_expr(expr.operand, types)
        if expr.op == "!":
            if t != "bool":
                raise TypeMismatch("'!' on non-bool")
            return (lambda env, tis: not f(env, tis)), "bool"
        if t == "int":
            return (lambda env, tis: _check_int(-f(env, tis))), t
        return (lambda env, tis: -f(env, tis)), t
    if isinstance(expr, Binary):
        return _compile_binary(expr, types)
    raise TypeMismatch(f"cannot evaluate {expr!r}")


def _compile_binary(expr: Binary, types: Mapping[str, str]) -> tuple[Compiled, str]:
    lf, lt = compile_expr(expr.left, types)
    rf, rt = compile_expr(expr.right, types)
    op, span = expr.op, expr.span
    if op == "&&":
        return (lambda env, tis: lf(env, tis) and rf(env, tis)), "bool"
    if op == "||":
        return (lambda env, tis: lf(env, tis) or rf(env, tis)), "bool"
    if op in ("<", "<=", ">", ">=", "==", "!="):
        if (lt == "bool") != (rt == "bool"):
            raise TypeMismatch(f"cannot compare {lt} with {rt}")
        fn = {
            "<": lambda env, tis: lf(env, tis) < rf(env, tis),
            "<=": lambda env, tis: lf(env, tis) <= rf(env, tis),
            ">": lambda env, tis: lf(env, tis) > rf(env, tis),
            ">=": lambda env, tis: lf(env, tis) >= rf(env, tis),
            "==": lambda env, tis: lf(env, tis) == rf(env, tis),
            "!=": lambda env, tis: lf(env, tis) != rf(env, tis),
        }[op]
        return fn, "bool"
    if lt == "bool" or rt == "bool":
        raise TypeMismatch(f"'{op}' on bool")
    if lt == rt == "int":
        if op == "/":
            def int_div(env, tis):
                b = rf(env, tis)
                if b == 0:
                    raise DivisionByZero(span)
                return _check_int(_int_div(lf(env, tis), b))
            return int_div, "int"
        arith = {"+": int.__add__, "-": int.__sub__, "*": int.__mul__}[op]
        return (lambda env, tis: _check_int(arith(lf(env, tis), rf(env, tis)))), "int"
    if op == "/":
        def real_div(env, tis):
            b = rf(env, tis)
            if b == 0:
                raise DivisionByZero(span)
            return _check_real(lf(env, tis) / b)
        return real_div, "real"
    if op == "+":
        return (lambda env, tis: _check_real(lf(env, tis) + rf(env, tis))), "real"
    if op == "-":
        return (lambda env, tis: _check_real(lf(env, tis) - rf(env, tis))), "real"
    return (lambda env, tis: _check_real(float(lf(env, tis) * rf(env, tis)))), "real"


def compile_guard(guard: tuple[Conjunct, ...], types: Mapping[str, str]) -> Compiled:
    """Connectors fold strictly left to right, short-circuiting."""
    parts = [(c.connector, compile_expr(c.expr, types)[0]) for c in guard]
    if len(parts) == 1:
        return parts[0][1]

    def guard_fn(env, tis):
        value = parts[0][1](env, tis)
        for conn, f in parts[1:]:
            if conn == "&&":
                if value:
                    value = f(env, tis)
            elif not value:
                value = f(env, tis)
        return value

    return guard_fn


def evaluate(expr: Expr, env: Mapping[str, Any], time_in_state: float = 0.0,
             types: Mapping[str, str] | None = None) -> Any:
    """Evaluate one expression; variable types default to the Python types in ``env``."""
    if types is None:
        types = {name: _type_of_value(v) for name, v in env.items()}
    f, _ = compile_expr(expr, types)
    return f(dict(env), time_in_state)


def _type_of_value(v: Any) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    return "real"


# ---------------------------------------------------------------- simulation


def _coerce(value: Any, ty: str, name: str) -> Any:
    if ty == "bool":
        if value in (0, 1, True, False):
            return bool(value)
    elif ty == "int":
        if not isinstance(value, bool) and float(value).is_integer():
            return int(value)
    else:
        v = float(value)
        if math.isfinite(v):
            return v
    raise InputMismatch(f"input '{name}' value {value!r} is not a valid {ty}")


def _compile_actions(actions, types) -> list[tuple[str, Compiled, str]]:
    out = []
    for a in actions:
        f, t = compile_expr(a.rhs, types)
        out.append((a.lhs, f, types[a.lhs]))
    return out


def simulate(chart: Chart, stim: StimulusSet) -> SimResult:
    """Run ``chart`` against ``stim``; deterministic and side-effect free."""
    dt = stim.dt
    if not dt > 0:
        raise InputMismatch("dt must be positive")
    n = stim.steps
    types = {v.name: v.type for v in chart.vars}
    input_names = [v.name for v in chart.vars_of("input")]
    missing = [name for name in input_names if name not in stim.inputs]
    if missing:
        raise InputMismatch(f"missing input column(s): {', '.join(missing)}")
    extra = [name for name in stim.inputs if name not in input_names]
    if extra:
        raise InputMismatch(f"unknown input column(s): {', '.join(extra)}")
    columns = []
    for name in input_names:
        trace = stim.inputs[name]
        if len(trace.values) != n + 1 or abs(trace.dt - dt) > 1e-12:
            raise InputMismatch(f"input '{name}' does not cover the stimulus grid")
        columns.append((name, [_coerce(v, types[name], name) for v in trace.values]))

    entry = {s.cid: _compile_actions(s.entry, types) for s in chart.states}
    during = {s.cid: _compile_actions(s.during, types) for s in chart.states}
    outgoing = {
        s.cid: [(t.cid, t.dest, compile_guard(t.guard, types)) for t in chart.outgoing(s.cid)]
        for s in chart.states
    }
    output_names = [v.name for v in chart.vars_of("output")]
    env: dict[str, Any] = {}
    for v in chart.vars:
        if v.kind != "input":
            init = v.init.value if v.init is not None else {"bool": False, "int": 0,
                                                            "real": 0.0}[v.type]
            env[v.name] = float(init) if v.type == "real" else init
    traces: dict[str, list] = {name: [] for name in output_names}
    executed: set[str] = set()
    fired: set[str] = set()
    k = 0

    def run(actions, tis):
        for lhs, f, ty in actions:
            try:
                value = f(env, tis)
            except NonFiniteValue:
                raise NonFiniteValue(lhs, sample_time(k, dt)) from None
            if ty == "real":
                value = float(value)
            env[lhs] = value

    try:
        for name, col in columns:
            env[name] = col[0]
        init = chart.initial
        fired.add(init.cid)
        active = init.dest
        executed.add(active)
        run(entry[active], 0.0)
        entered = 0
        for name in output_names:
            traces[name].append(env[name])
        for k in range(1, n + 1):
            for name, col in columns:
                env[name] = col[k]
            tis = (k - entered) * dt
            target = None
            for cid, dest, guard in outgoing[active]:
                try:
                    ok = guard(env, tis)
                except NonFiniteValue:
                    raise NonFiniteValue(cid, sample_time(k, dt)) from None
                if ok:
                    target = dest
                    fired.add(cid)
                    break
            if target is not None:
                active = target
                executed.add(active)
                entered = k
                run(entry[active], 0.0)
            else:
                run(during[active], tis)
            for name in output_names:
                traces[name].append(env[name])
    except DivisionByZero as exc:
        raise DivisionByZero(exc.span, sample_time(k, dt)) from None

    outputs = {name: SignalTrace(name, dt, tuple(vals)) for name, vals in traces.items()}
    return SimResult(outputs, CoverageTrace(frozenset(executed), frozenset(fired)), n, dt)


# ---------------------------------------------------------------- CSV


def _parse_cell(text: str) -> int | float:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_traces(source: str | Path, text: str | None = None) -> tuple[float, dict[str, SignalTrace]]:
    """Load ``time,<name>,...`` CSV; returns (dt, traces). Enforces uniform dt."""
    if text is None:
        text = Path(source).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows or rows[0][0].strip() != "time":
        raise InputMismatch(f"{source}: header must start with 'time'")
    names = [h.strip() for h in rows[0][1:]]
    if len(set(names)) != len(names):
        raise InputMismatch(f"{source}: duplicate column names")
    body = rows[1:]
    if len(body) < 2:
        raise InputMismatch(f"{source}: need at least two samples")
    times = [float(r[0]) for r in body]
    dt = times[1] - times[0]
    if times[0] != 0 or not dt > 0:
        raise InputMismatch(f"{source}: samples must start at t=0 with increasing time")
    dt = round(dt, 12)
    for k, t in enumerate(times):
        if abs(t - k * dt) > 1e-6 * dt:
            raise InputMismatch(f"{source}: non-uniform time step at row {k + 2}")
    values: dict[str, list] = {name: [] for name in names}
    for k, row in enumerate(body):
        if len(row) != len(names) + 1:
            raise InputMismatch(f"{source}: row {k + 2} has {len(row)} cells")
        for name, cell in zip(names, row[1:]):
            values[name].append(_parse_cell(cell))
    return dt, {name: SignalTrace(name, dt, tuple(v)) for name, v in values.items()}


def load_stimulus(path: str | Path, text: str | None = None) -> StimulusSet:
    dt, traces = read_traces(path, text)
    duration = next(iter(traces.values())).duration if traces else 0.0
    return StimulusSet(dt, round(duration, 12), traces)


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    return format_number(v)


def format_traces(traces: Mapping[str, SignalTrace]) -> str:
    names = list(traces)
    first = traces[names[0]]
    lines = [",".join(["time"] + names)]
    for k in range(len(first.values)):
        t = format_number(sample_time(k, first.dt))
        lines.append(",".join([t] + [_cell(traces[n].values[k]) for n in names]))
    return "\n".join(lines) + "\n"


def write_traces(path: str | Path, traces: Mapping[str, SignalTrace]) -> None:
    Path(path).write_text(format_traces(traces), encoding="utf-8", newline="\n")
