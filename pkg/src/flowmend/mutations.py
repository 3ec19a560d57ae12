"""The fifteen repair operators and the global/local mutation policies."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any

from .localization import SuspiciousnessRanking, roulette_select
from .model import (
    INT_MAX,
    INT_MIN,
    LOGIC_OPS,
    MATH_OPS,
    REL_OPS,
    STATE_OPS,
    TRANSITION_OPS,
    UNITS,
    After,
    Chart,
    Conjunct,
    Edit,
    OperatorKind,
    apply_edit,
    component_kind,
    constants,
    sites,
    type_of,
)

Op = OperatorKind
OPERATORS: tuple[OperatorKind, ...] = tuple(OperatorKind)
GLOBAL_RETRIES = 20
SAME_OPERATOR_PROBABILITY = 0.5
INSERT_MATH_OPS = ("+", "-", "*")


class MutationError(Exception):
    pass


class NothingApplicable(MutationError):
    pass


class ComponentVanished(MutationError):
    pass


@dataclass(frozen=True)
class MutationOutcome:
    variant: Chart
    edit: Edit
    component: str
    operator: OperatorKind


# ---------------------------------------------------------------- helpers


def _types(chart: Chart) -> dict[str, str]:
    return {v.name: v.type for v in chart.vars}


def _writable(chart: Chart) -> list:
    return chart.vars_of("output", "local")


def _rel_pool(chart: Chart, node) -> list[str]:
    left = type_of(node.left, _types(chart), in_guard=True)
    pool = ("==", "!=") if left == "bool" else REL_OPS
    return [op for op in pool if op != node.op]


def _other_states(chart: Chart, current: str | None) -> list[str]:
    return [s.cid for s in chart.states if s.cid != current]


def _number_pool(chart: Chart, ty: str) -> list[Any]:
    """Chart constants converted to ``ty``, plus 0 and 1, without repeats."""
    out: list[Any] = []
    for c in constants(chart) + [0, 1]:
        if ty == "int":
            if isinstance(c, float) and not c.is_integer():
                continue
            c = int(c)
        else:
            c = float(c)
        if c not in out:
            out.append(c)
    return out


def _insert_terms(chart: Chart, ty: str) -> list[Any]:
    """Operands for MathOpInsert: numeric inputs and chart constants."""
    terms: list[Any] = []
    for v in chart.vars_of("input"):
        if v.type == "int" or (v.type == "real" and ty == "real"):
            terms.append(v.name)
    for c in constants(chart):
        if ty == "real":
            terms.append(float(c) if isinstance(c, int) else c)
        elif isinstance(c, int):
            terms.append(c)
    out: list[Any] = []
    for t in terms:
        if t not in out:
            out.append(t)
    return out


def _cond_vars(chart: Chart) -> list:
    return chart.vars_of("input", "local")


# ---------------------------------------------------------------- applicability


def applicable_ops(chart: Chart, cid: str) -> set[OperatorKind]:
    kind = component_kind(chart, cid)
    if kind is None:
        return set()
    ops: set[OperatorKind] = set()
    if kind == "transition":
        tr = chart.transition(cid)
        if tr.is_initial:
            if len(chart.states) > 1:
                ops.add(Op.InitialTransitionChange)
            return ops
        if sites(chart, cid, "relational"):
            ops.add(Op.RelationalOpReplace)
        if sites(chart, cid, "logic"):
            ops.add(Op.ConditionalOpReplace)
        if sites(chart, cid, "math"):
            ops.add(Op.MathOpReplace)
        if sites(chart, cid, "after"):
            ops.add(Op.AfterUnitChange)
        if sites(chart, cid, "number"):
            ops.add(Op.NumericReplace)
        if len(chart.states) > 1:
            ops.add(Op.TransitionDestReplace)
            ops.add(Op.TransitionRootReplace)
        ops.add(Op.TransitionDelete)
        if len(tr.guard) >= 2:
            ops.add(Op.TransitionCondDelete)
        if _cond_vars(chart):
            ops.add(Op.CondInsert)
        return ops
    state = chart.state(cid)
    if sites(chart, cid, "math"):
        ops.add(Op.MathOpReplace)
    if sites(chart, cid, "number"):
        ops.add(Op.NumericReplace)
    if len(chart.states) > 1 and chart.initial.dest != cid:
        ops.add(Op.StateDelete)
    if state.entry or state.during:
        ops.add(Op.StateVarDelete)
    if any(v.type != "bool" and _insert_terms(chart, v.type) for v in _writable(chart)):
        ops.add(Op.MathOpInsert)
    if _writable(chart):
        ops.add(Op.VarInsert)
    return ops


# ---------------------------------------------------------------- parameters


NUMERIC_MOVES = ("negate", "zero", "one", "minus_one", "times_10", "times_0.1",
                 "double", "half", "plus_1", "minus_1", "other_literal")


def _move(name: str, value: int | float, others: list[Any], rng: random.Random) -> Any:
    if name == "other_literal":
        return rng.choice(others)
    return {
        "negate": lambda: -value,
        "zero": lambda: 0,
        "one": lambda: 1,
        "minus_one": lambda: -1,
        "times_10": lambda: value * 10,
        "times_0.1": lambda: value * 0.1,
        "double": lambda: value * 2,
        "half": lambda: value * 0.5,
        "plus_1": lambda: value + 1,
        "minus_1": lambda: value - 1,
    }[name]()


def new_number(value: int | float, is_int: bool, rng: random.Random,
               others: list[Any]) -> int | float:
    """Draw a numeric move that changes ``value`` and keeps its type.

    Moves yielding the same value, a non-finite real or an out-of-range int are
    redrawn; ``others`` are the remaining chart literals.
    """
    moves = [m for m in NUMERIC_MOVES if m != "other_literal" or others]
    while True:
        candidate = _move(rng.choice(moves), value, others, rng)
        if is_int:
            if isinstance(candidate, float):
                candidate = round(candidate)
            if not INT_MIN <= candidate <= INT_MAX:
                continue
            candidate = int(candidate)
        else:
            candidate = float(candidate)
            if not math.isfinite(candidate):
                continue
        if candidate != value:
            return candidate


def draw_edit(chart: Chart, cid: str, op: OperatorKind, rng: random.Random) -> Edit:
    """Random parameters for applying ``op`` to component ``cid``."""
    if op is Op.RelationalOpReplace:
        nodes = sites(chart, cid, "relational")
        i = rng.randrange(len(nodes))
        new = rng.choice(_rel_pool(chart, nodes[i]))
        return Edit(op, cid, {"site": i, "old": nodes[i].op, "new": new})
    if op is Op.ConditionalOpReplace:
        nodes = sites(chart, cid, "logic")
        i = rng.randrange(len(nodes))
        old = nodes[i].connector if isinstance(nodes[i], Conjunct) else nodes[i].op
        new = LOGIC_OPS[1] if old == LOGIC_OPS[0] else LOGIC_OPS[0]
        return Edit(op, cid, {"site": i, "old": old, "new": new})
    if op is Op.MathOpReplace:
        nodes = sites(chart, cid, "math")
        i = rng.randrange(len(nodes))
        new = rng.choice([o for o in MATH_OPS if o != nodes[i].op])
        return Edit(op, cid, {"site": i, "old": nodes[i].op, "new": new})
    if op is Op.AfterUnitChange:
        nodes = sites(chart, cid, "after")
        i = rng.randrange(len(nodes))
        new = rng.choice([u for u in UNITS if u != nodes[i].unit])
        return Edit(op, cid, {"site": i, "old": nodes[i].unit, "new": new})
    if op is Op.NumericReplace:
        nodes = sites(chart, cid, "number")
        i = rng.randrange(len(nodes))
        node = nodes[i]
        old = node.count if isinstance(node, After) else node.value
        is_int = isinstance(old, int)
        others = [c for c in constants(chart)
                  if c != old and (not is_int or float(c).is_integer())]
        return Edit(op, cid, {"site": i, "old": old, "new": new_number(old, is_int, rng, others)})
    if op in (Op.TransitionDestReplace, Op.InitialTransitionChange):
        tr = chart.transition(cid)
        return Edit(op, cid, {"old": tr.dest, "new": rng.choice(_other_states(chart, tr.dest))})
    if op is Op.TransitionRootReplace:
        tr = chart.transition(cid)
        return Edit(op, cid, {"old": tr.source,
                              "new": rng.choice(_other_states(chart, tr.source))})
    if op in (Op.StateDelete, Op.TransitionDelete):
        return Edit(op, cid, {})
    if op is Op.StateVarDelete:
        s = chart.state(cid)
        slots = [("entry", i) for i in range(len(s.entry))] + [
            ("during", i) for i in range(len(s.during))]
        block, i = rng.choice(slots)
        return Edit(op, cid, {"block": block, "index": i})
    if op is Op.TransitionCondDelete:
        tr = chart.transition(cid)
        return Edit(op, cid, {"index": rng.randrange(len(tr.guard))})
    if op is Op.MathOpInsert:
        targets = [v for v in _writable(chart)
                   if v.type != "bool" and _insert_terms(chart, v.type)]
        v = rng.choice(targets)
        return Edit(op, cid, {"lhs": v.name, "op": rng.choice(INSERT_MATH_OPS),
                              "term": rng.choice(_insert_terms(chart, v.type))})
    if op is Op.VarInsert:
        v = rng.choice(_writable(chart))
        pool = [True, False] if v.type == "bool" else _number_pool(chart, v.type)
        return Edit(op, cid, {"lhs": v.name, "value": rng.choice(pool)})
    if op is Op.CondInsert:
        v = rng.choice(_cond_vars(chart))
        if v.type == "bool":
            rel, value = rng.choice(("==", "!=")), rng.choice((True, False))
        else:
            rel = rng.choice(REL_OPS)
            pool = [c for c in constants(chart)] or [0, 1]
            value = rng.choice(pool)
            if v.type == "int" and isinstance(value, float) and value.is_integer():
                value = int(value)
        return Edit(op, cid, {"connector": rng.choice(LOGIC_OPS), "var": v.name,
                              "rel": rel, "value": value})
    raise NothingApplicable(f"unknown operator {op!r}")


def _ordered(ops: set[OperatorKind]) -> list[OperatorKind]:
    return [op for op in OPERATORS if op in ops]


def _mutate(chart: Chart, cid: str, op: OperatorKind, rng: random.Random) -> MutationOutcome:
    edit = draw_edit(chart, cid, op, rng)
    return MutationOutcome(apply_edit(chart, edit), edit, cid, op)


# ---------------------------------------------------------------- policies


def apply_global_mutation(chart: Chart, ranking: SuspiciousnessRanking,
                          rng: random.Random) -> MutationOutcome:
    """Roulette-pick a component, then a uniformly random compatible operator."""
    present = [cid for cid in ranking.kinds if component_kind(chart, cid) is not None]
    present += [cid for cid in _all_ids(chart) if cid not in ranking.kinds]
    chosen = None
    for _ in range(GLOBAL_RETRIES):
        cid = roulette_select(ranking, rng, present)
        ops = applicable_ops(chart, cid)
        if ops:
            chosen = cid, ops
            break
    if chosen is None:
        usable = [(cid, applicable_ops(chart, cid)) for cid in present]
        usable = [(cid, ops) for cid, ops in usable if ops]
        if not usable:
            raise NothingApplicable("no component of the chart can be mutated")
        chosen = rng.choice(usable)
    cid, ops = chosen
    return _mutate(chart, cid, rng.choice(_ordered(ops)), rng)


def _all_ids(chart: Chart) -> list[str]:
    return [s.cid for s in chart.states] + [t.cid for t in chart.transitions]


def pick_local_operator(ops: set[OperatorKind], last_op: OperatorKind | None,
                        rng: random.Random) -> OperatorKind:
    ordered = _ordered(ops)
    if last_op in ops:
        if len(ordered) == 1:
            return last_op
        if rng.random() < SAME_OPERATOR_PROBABILITY:
            return last_op
        return rng.choice([op for op in ordered if op is not last_op])
    return rng.choice(ordered)


def apply_local_mutation(chart: Chart, cid: str, last_op: OperatorKind | None,
                         rng: random.Random) -> MutationOutcome:
    """Mutate ``cid`` again, reusing ``last_op`` half of the time."""
    if component_kind(chart, cid) is None:
        raise ComponentVanished(f"component {cid} no longer exists")
    ops = applicable_ops(chart, cid)
    if not ops:
        raise NothingApplicable(f"no operator applies to {cid}")
    return _mutate(chart, cid, pick_local_operator(ops, last_op, rng), rng)


def applicability_table() -> dict[str, list[str]]:
    return {
        "transition": [op.value for op in OPERATORS if op in TRANSITION_OPS],
        "state": [op.value for op in OPERATORS if op in STATE_OPS],
    }

