"""Regenerate the bundled benchmark corpus.

Each case gets buggy.chart, fixed.chart, case.json and one directory per test
holding stim.csv, expected.csv (simulated on the fixed chart) and test.json.

    python scripts/make_corpus.py [--out src/flowmend/corpus]
"""

from __future__ import annotations

import argparse
import json
import shutil
from pathlib import Path

from flowmend.dsl import parse, serialize
from flowmend.simulator import SignalTrace, StimulusSet, format_traces, simulate, step_count

HERE = Path(__file__).resolve().parent
TEMPLATES = HERE / "templates"
DEFAULT_OUT = HERE.parent / "src" / "flowmend" / "corpus"


def signal(fn, dt, duration):
    return [fn(round(k * dt, 12)) for k in range(step_count(duration, dt) + 1)]


def pulses(times, dt):
    ticks = {round(t / dt) for t in times}
    return lambda t: round(t / dt) in ticks


def between(a, b):
    return lambda t: a - 1e-9 <= t < b - 1e-9


def const(v):
    return lambda t: v


FRIDGE_TOL = {"POWER": 0.1}

FRIDGE_RAMP = {
    "ramp": ("failing", 0.1, 60.0, {"DOOR": const(False), "TEMP": lambda t: 1.0 + 7.0 * t / 60.0}),
    "door_short": ("passing", 0.1, 30.0, {"DOOR": between(5.0, 10.0), "TEMP": const(5.0)}),
    "door_long": ("passing", 0.1, 30.0, {"DOOR": between(5.0, 25.0), "TEMP": const(5.0)}),
}

FRIDGE_HOT_DOOR = {
    "hot_then_door": ("failing", 0.1, 60.0, {
        "DOOR": between(30.0, 50.0),
        "TEMP": lambda t: 7.0 if t < 20.0 - 1e-9 else 2.0,
    }),
    "door_blips": ("passing", 0.1, 30.0, {
        "DOOR": pulses([5.0, 12.0, 20.0], 0.1), "TEMP": const(4.0)}),
    "cool_idle": ("passing", 0.1, 30.0, {
        "DOOR": const(False), "TEMP": lambda t: 2.0 + 2.0 * t / 30.0}),
}

DOOR_WALK = {
    "walk_through": ("failing", 0.1, 20.0, {"PERSON": between(1.0, 3.0)}),
    "idle": ("passing", 0.1, 10.0, {"PERSON": const(False)}),
    "comes_back": ("passing", 0.1, 15.0, {
        "PERSON": lambda t: between(1.0, 2.0)(t) or t >= 8.0 - 1e-9}),
}

DOOR_LINGER = {
    "linger": ("failing", 0.1, 20.0, {"PERSON": between(1.0, 12.0)}),
    "idle": ("passing", 0.1, 10.0, {"PERSON": const(False)}),
    "arrive_and_stay": ("passing", 0.1, 6.5, {"PERSON": lambda t: t >= 1.0 - 1e-9}),
}

PACEMAKER = {
    "bradycardia": ("failing", 0.01, 6.0, {"SENSE": pulses([0.3, 0.9, 1.5], 0.01)}),
    "sinus": ("passing", 0.01, 6.0, {
        "SENSE": pulses([0.2 + 0.5 * i for i in range(12)], 0.01)}),
    "sinus_fast": ("passing", 0.01, 4.0, {
        "SENSE": pulses([0.1 + 0.4 * i for i in range(10)], 0.01)}),
}

ALARM_MSEC = ("after(15, sec)", "after(15, msec)")
COOL_GUARD = ("[TEMP <= 3.0]", "[TEMP >= 3.0]")

CASES = {
    "fridge_1": ("fridge", [("transition CLOSE_NORM -> CLOSE_HOT when [TEMP > 5.0]",
                             "transition CLOSE_NORM -> CLOSE_HOT when [TEMP < 5.0]")],
                 FRIDGE_RAMP, "hot-threshold guard uses < instead of >", FRIDGE_TOL),
    "fridge_2": ("fridge", [ALARM_MSEC, COOL_GUARD], FRIDGE_HOT_DOOR,
                 "door alarm timer in msec; cool-down guard uses >= instead of <=",
                 FRIDGE_TOL),
    "fridge_2a": ("fridge", [ALARM_MSEC], FRIDGE_HOT_DOOR, "door alarm timer in msec",
                  FRIDGE_TOL),
    "fridge_2b": ("fridge", [COOL_GUARD], FRIDGE_HOT_DOOR,
                  "cool-down guard uses >= instead of <=", FRIDGE_TOL),
    "fridge_3": ("fridge", [("after(15, sec)", "after(150, msec)")], FRIDGE_HOT_DOOR,
                 "door alarm after 150 msec instead of 15 sec", FRIDGE_TOL),
    "door_1": ("door", [("transition CLOSING -> CLOSED", "transition CLOSING -> OPENED")],
               DOOR_WALK, "closing ends in OPENED instead of CLOSED", {}),
    "door_2": ("door", [("[!PERSON && after(4, sec)]", "[!PERSON || after(4, sec)]")],
               DOOR_LINGER, "door closes on timeout even with a person present", {}),
    "pacemaker_1": ("pacemaker", [("[CNT >= LRI]", "[CNT > LRI]")], PACEMAKER,
                    "pacing threshold uses > instead of >=", {}),
    "pacemaker_2": ("pacemaker", [("LRI = 70;", "LRI = 125;")], PACEMAKER,
                    "lower-rate interval set to 125 ticks instead of 70", {}),
}

# Fewest operator applications that undo the seeded bug; None for the case
# built to stay out of reach of the search.
REPAIR_STEPS = {"fridge_3": 2, "pacemaker_2": None}


def seed_bugs(text: str, edits) -> str:
    for old, new in edits:
        if text.count(old) != 1:
            raise SystemExit(f"seeded edit {old!r} does not match exactly once")
        text = text.replace(old, new)
    return text


def build_case(case_id: str, out: Path) -> None:
    template, edits, tests, description, tol = CASES[case_id]
    fixed_text = (TEMPLATES / f"{template}.chart").read_text(encoding="utf-8")
    fixed = parse(fixed_text)
    buggy = parse(seed_bugs(fixed_text, edits))
    case_dir = out / case_id
    if case_dir.exists():
        shutil.rmtree(case_dir)
    (case_dir / "tests").mkdir(parents=True)
    (case_dir / "fixed.chart").write_text(serialize(fixed), encoding="utf-8")
    (case_dir / "buggy.chart").write_text(serialize(buggy), encoding="utf-8")
    meta = {
        "id": case_id,
        "description": description,
        "fault_count": len(edits),
        "repair_steps": REPAIR_STEPS.get(case_id, len(edits)),
        "seeded_edits": [{"fixed": a, "buggy": b} for a, b in edits],
    }
    (case_dir / "case.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    for name, (kind, dt, duration, fns) in tests.items():
        test_dir = case_dir / "tests" / name
        test_dir.mkdir()
        inputs = {n: SignalTrace(n, dt, tuple(signal(f, dt, duration))) for n, f in fns.items()}
        stim = StimulusSet(dt, duration, inputs)
        result = simulate(fixed, stim)
        (test_dir / "stim.csv").write_text(format_traces(inputs), encoding="utf-8")
        (test_dir / "expected.csv").write_text(format_traces(result.outputs), encoding="utf-8")
        info = {"name": name, "kind": kind, "dt": dt, "duration": duration,
                "tolerances": {k: v for k, v in tol.items() if k in result.outputs}}
        (test_dir / "test.json").write_text(json.dumps(info, indent=1) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("cases", nargs="*", default=list(CASES))
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for case_id in args.cases:
        build_case(case_id, args.out)
        print(f"wrote {args.out / case_id}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
