from __future__ import annotations

import json

import pytest

from flowmend.dsl import format_expr, parse, serialize
from flowmend.model import (
    ApplyError,
    Edit,
    Inapplicable,
    OperatorKind as Op,
    Patch,
    TargetMissing,
    WouldInvalidate,
    apply_edit,
    apply_patch,
    component_kind,
    constants,
    sites,
    validate,
)


def lines_of(chart):
    return [line.strip() for line in serialize(chart).splitlines()]


@pytest.mark.parametrize("edit,line", [
    (Edit(Op.RelationalOpReplace, "T2", {"site": 0, "old": ">", "new": ">="}),
     "transition CLOSE_NORM -> CLOSE_HOT when [TEMP >= 5.0];"),
    (Edit(Op.MathOpReplace, "S2", {"site": 2, "old": "-", "new": "+"}),
     "POWER = 40.0 + (TEMP + 5.0) * 10.0;"),
    (Edit(Op.AfterUnitChange, "T6", {"site": 0, "old": "sec", "new": "msec"}),
     "transition OPEN -> OPEN_15_SEC when [after(15, msec)];"),
    (Edit(Op.NumericReplace, "T6", {"site": 0, "old": 15, "new": 150}),
     "transition OPEN -> OPEN_15_SEC when [after(150, sec)];"),
    (Edit(Op.NumericReplace, "S2", {"site": 2, "old": 10.0, "new": 2.0}),
     "POWER = 40.0 + (TEMP - 5.0) * 2.0;"),
    (Edit(Op.TransitionDestReplace, "T1", {"old": "S3", "new": "S4"}),
     "transition CLOSE_NORM -> OPEN_15_SEC when [DOOR];"),
    (Edit(Op.TransitionRootReplace, "T1", {"old": "S1", "new": "S2"}),
     "transition CLOSE_HOT -> OPEN when [DOOR];"),
    (Edit(Op.InitialTransitionChange, "T0", {"old": "S1", "new": "S3"}),
     "initial -> OPEN;"),
    (Edit(Op.CondInsert, "T1", {"connector": "&&", "var": "TEMP", "rel": "<", "value": 3.0}),
     "transition CLOSE_NORM -> OPEN when [DOOR && TEMP < 3.0];"),
    (Edit(Op.MathOpInsert, "S3", {"lhs": "POWER", "op": "*", "term": "TEMP"}),
     ("S3", "entry", ["COLD = false", "LIGHT = true", "POWER = 0.0", "POWER = POWER * TEMP"])),
    (Edit(Op.VarInsert, "S4", {"lhs": "LIGHT", "value": False}),
     ("S4", "entry", ["ALARM = true", "LIGHT = false"])),
    (Edit(Op.StateVarDelete, "S2", {"block": "during", "index": 0}),
     ("S2", "during", [])),
])
def test_operator_rewrites(fridge, edit, line):
    patched = apply_edit(fridge, edit)
    if isinstance(line, str):
        assert line in lines_of(patched)
    else:
        cid, block, want = line
        got = [f"{a.lhs} = {format_expr(a.rhs)}" for a in getattr(patched.state(cid), block)]
        assert got == want
    assert validate(patched) == []
    assert fridge == parse(serialize(fridge))  # input untouched


def test_deletions(fridge):
    no_t3 = apply_edit(fridge, Edit(Op.TransitionDelete, "T3", {}))
    assert component_kind(no_t3, "T3") is None and len(no_t3.transitions) == 7
    no_s4 = apply_edit(fridge, Edit(Op.StateDelete, "S4", {}))
    assert component_kind(no_s4, "S4") is None
    assert component_kind(no_s4, "T6") is None and component_kind(no_s4, "T7") is None
    with pytest.raises(WouldInvalidate):
        apply_edit(fridge, Edit(Op.StateDelete, "S1", {}))


def test_cond_delete():
    chart = parse("""chart C { input A: bool; input B: bool; state X {} state Y {}
        initial -> X; transition X -> Y when [A || B && !A]; }""")
    out = apply_edit(chart, Edit(Op.TransitionCondDelete, "T1", {"index": 0}))
    assert "transition X -> Y when [B && !A];" in lines_of(out)
    out = apply_edit(chart, Edit(Op.TransitionCondDelete, "T1", {"index": 2}))
    assert "transition X -> Y when [A || B];" in lines_of(out)
    logic = sites(chart, "T1", "logic")
    assert [getattr(n, "connector", None) for n in logic] == ["||", "&&"]


def test_logic_sites_follow_conjunct_order():
    chart = parse("""chart C { input A: bool; input B: bool; state X {} state Y {}
        initial -> X; transition X -> Y when [(A || B) && A]; }""")
    nodes = sites(chart, "T1", "logic")
    assert len(nodes) == 2
    # Conjuncts in order; the nested || of the first comes before the second's connector.
    out = apply_edit(chart, Edit(Op.ConditionalOpReplace, "T1", {"site": 0, "old": "||", "new": "&&"}))
    assert "transition X -> Y when [(A && B) && A];" in lines_of(out)
    out = apply_edit(chart, Edit(Op.ConditionalOpReplace, "T1", {"site": 1, "old": "&&", "new": "||"}))
    assert "transition X -> Y when [(A || B) || A];" in lines_of(out)


def test_stale_edits_are_rejected(fridge):
    with pytest.raises(TargetMissing):
        apply_edit(fridge, Edit(Op.TransitionDelete, "T42", {}))
    with pytest.raises(Inapplicable):
        apply_edit(fridge, Edit(Op.RelationalOpReplace, "T2", {"site": 0, "old": "<", "new": ">"}))
    with pytest.raises(Inapplicable):
        apply_edit(fridge, Edit(Op.NumericReplace, "T6", {"site": 0, "old": 15.0, "new": 1}))
    with pytest.raises(Inapplicable):
        apply_edit(fridge, Edit(Op.StateDelete, "T1", {}))
    with pytest.raises(Inapplicable):
        apply_edit(fridge, Edit(Op.TransitionDelete, "T0", {}))
    with pytest.raises(WouldInvalidate):
        apply_edit(fridge, Edit(Op.VarInsert, "S1", {"lhs": "COLD", "value": 1.5}))


def test_patch_reports_failing_index(fridge):
    good = Edit(Op.TransitionDelete, "T3", {})
    patch = Patch((good, good))
    with pytest.raises(ApplyError) as err:
        apply_patch(fridge, patch)
    assert err.value.index == 1


def test_patch_json_roundtrip(fridge):
    patch = Patch((
        Edit(Op.NumericReplace, "S2", {"site": 0, "old": 40.0, "new": 4.0}),
        Edit(Op.VarInsert, "S4", {"lhs": "COLD", "value": True}),
    ))
    again = Patch.from_json(json.loads(json.dumps(patch.to_json())))
    assert again == patch
    assert apply_patch(fridge, again) == apply_patch(fridge, patch)


def test_constants_keep_type(fridge):
    consts = constants(fridge)
    assert 5.0 in consts and 15 in consts
    assert isinstance(consts[consts.index(15)], int)


def test_validate_catches_problems(fridge):
    from dataclasses import replace

    dup = replace(fridge, states=fridge.states + (replace(fridge.states[0], cid="S9"),))
    assert any("duplicate state name" in d.message for d in validate(dup))
    no_init = replace(fridge, transitions=fridge.transitions[1:])
    assert any("missing initial transition" in d.message for d in validate(no_init))
