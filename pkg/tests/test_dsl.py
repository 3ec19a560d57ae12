from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowmend.dsl import (
    ParseError,
    format_expr,
    format_number,
    parse,
    render_diff,
    serialize,
    tokenize,
    touched_components,
)
from flowmend.model import Binary, Edit, Lit, OperatorKind, Var, apply_edit, components

SMALL = """
chart Small {
    input X: real;
    output Y: int = 0;
    state A { entry { Y = 1; } }
    state B { during { Y = Y + 2 * 3; } }
    initial -> A;
    transition A -> B when [X > 1.5 && after(2, sec)];
    transition B -> A when [X <= 0.0];
}
"""


def test_parse_assigns_component_ids():
    chart = parse(SMALL)
    assert [cid for cid, _ in components(chart)] == ["S1", "S2", "T0", "T1", "T2"]
    assert chart.state_named("B").cid == "S2"
    assert chart.transition("T1").source == "S1"
    assert chart.transition("T0").dest == "S1"


def test_fridge_has_four_states(fridge):
    assert fridge.name == "FridgeController"
    assert [s.name for s in fridge.states] == ["CLOSE_NORM", "CLOSE_HOT", "OPEN", "OPEN_15_SEC"]


def test_roundtrip_is_fixpoint(corpus):
    for case in corpus:
        for chart in (case.buggy, case.fixed):
            text = serialize(chart)
            again = parse(text)
            assert again == chart
            assert serialize(again) == text
            assert components(again) == components(chart)


def test_guard_connectors_fold_left_to_right():
    chart = parse(SMALL.replace("[X > 1.5 && after(2, sec)]", "[X > 1.0 || X < 0.0 && X > 5.0]"))
    guard = chart.transition("T1").guard
    assert [c.connector for c in guard] == [None, "||", "&&"]
    assert serialize(parse(serialize(chart))) == serialize(chart)


def test_nested_precedence_and_parentheses():
    chart = parse(SMALL.replace("Y = Y + 2 * 3;", "Y = (Y + 2) * 3 - -4;"))
    rhs = chart.state("S2").during[0].rhs
    assert format_expr(rhs) == "(Y + 2) * 3 - -4"
    assert isinstance(rhs, Binary) and rhs.op == "-"
    assert rhs.right == Lit(-4, "int")


def test_minimal_parentheses_for_right_nested_minus():
    e = Binary("-", Var("A"), Binary("-", Var("B"), Var("C")))
    assert format_expr(e) == "A - (B - C)"
    assert format_expr(Binary("-", Binary("-", Var("A"), Var("B")), Var("C"))) == "A - B - C"


@pytest.mark.parametrize("value,text", [(0.1, "0.1"), (3.0, "3.0"), (1e-7, "1e-07"),
                                        (-2.5, "-2.5"), (7, "7"), (1e20, "1e+20")])
def test_format_number(value, text):
    assert format_number(value) == text


def test_comments_and_whitespace_ignored():
    chart = parse("// header\n" + SMALL.replace("initial", "// note\n    initial"))
    assert chart == parse(SMALL)


def test_syntax_error_points_at_token():
    bad = SMALL.replace("state B {", "state B ;")
    with pytest.raises(ParseError) as err:
        parse(bad, "small.chart")
    diag = err.value.diagnostics[0]
    assert diag.span.file == "small.chart"
    assert diag.span.line == 6
    assert diag.span.column == 13
    assert "expected '{'" in diag.message


def test_unknown_state_and_type_errors_are_collected():
    bad = SMALL.replace("B -> A", "B -> C").replace("Y = 1;", "Y = true;")
    with pytest.raises(ParseError) as err:
        parse(bad)
    messages = [d.message for d in err.value.diagnostics]
    assert any("unknown dest state 'C'" in m for m in messages)
    bad2 = SMALL.replace("Y = 1;", "Y = true;")
    with pytest.raises(ParseError) as err2:
        parse(bad2)
    assert err2.value.diagnostics[0].span.line == 5


def test_unexpected_character():
    with pytest.raises(ParseError) as err:
        parse(SMALL.replace("Y = 1;", "Y = 1 $;"))
    assert "unexpected character '$'" in str(err.value)


def test_missing_initial_transition():
    with pytest.raises(ParseError, match="missing initial transition"):
        parse(SMALL.replace("initial -> A;", ""))


def test_inputs_cannot_be_assigned():
    with pytest.raises(ParseError, match="X"):
        parse(SMALL.replace("Y = 1;", "X = 1.0;"))


def test_after_only_in_guards():
    with pytest.raises(ParseError, match="after"):
        parse(SMALL.replace("Y = 1;", "Y = after(1, sec);"))


def test_tokenizer_spans():
    toks = tokenize("chart A {\n  x", "f")
    assert [(t.text, t.span.line, t.span.column) for t in toks[:4]] == [
        ("chart", 1, 1), ("A", 1, 7), ("{", 1, 9), ("x", 2, 3)]


def test_diff_marks_touched_component(fridge):
    edit = Edit(OperatorKind.RelationalOpReplace, "T2", {"site": 0, "old": ">", "new": "<"})
    patched = apply_edit(fridge, edit)
    assert touched_components(fridge, patched) == ["T2"]
    diff = render_diff(fridge, patched)
    assert diff.startswith("# changed transition T2\n")
    assert "-    transition CLOSE_NORM -> CLOSE_HOT when [TEMP > 5.0];" in diff
    assert "+    transition CLOSE_NORM -> CLOSE_HOT when [TEMP < 5.0];" in diff
    assert render_diff(fridge, fridge) == ""


def test_diff_reports_removed_component(fridge):
    patched = apply_edit(fridge, Edit(OperatorKind.StateDelete, "S4", {}))
    diff = render_diff(fridge, patched)
    assert "# removed state S4" in diff
    assert "# removed transition T7" in diff


def test_mutated_variants_roundtrip(corpus):
    from flowmend.localization import localize
    from flowmend.mutations import apply_global_mutation

    rng = random.Random(5)
    for case in corpus[:3]:
        ranking = localize(case.buggy, case.suite)
        chart = case.buggy
        for _ in range(50):
            chart = apply_global_mutation(chart, ranking, rng).variant
            # Deleted components leave gaps that a re-parse renumbers, so the
            # fixpoint is on the text.
            text = serialize(chart)
            assert serialize(parse(text)) == text


numbers = st.one_of(
    st.integers(min_value=-10**6, max_value=10**6).map(lambda v: Lit(v, "int")),
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).map(lambda v: Lit(v, "real")),
)


def _arith(children):
    return st.builds(Binary, st.sampled_from(["+", "-", "*", "/"]), children, children)


arith = st.recursive(numbers | st.just(Var("R")), _arith, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(arith)
def test_arbitrary_arithmetic_roundtrips(expr):
    text = SMALL.replace("Y = Y + 2 * 3;", "").replace(
        "output Y: int = 0;", "output Y: int = 0;\n    local R: real;").replace(
        "state B {", "state B { entry { R = " + format_expr(expr) + "; }")
    chart = parse(text)
    assert chart.state("S2").entry[0].rhs == expr
    assert parse(serialize(chart)) == chart
