"""Regression-oracle verdicts and the three repair objectives.

A verdict condenses the failing-test simulation into failure-active time
(minimise), failure-onset time (maximise) and severity (minimise). Candidate
charts are compared against their parent with ``is_enhanced``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .model import Chart
from .simulator import (
    SignalTrace,
    SimError,
    SimResult,
    StimulusSet,
    load_stimulus,
    read_traces,
    simulate,
)

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class Oracle:
    expected: Mapping[str, SignalTrace]
    tol: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    name: str
    kind: str  # "passing" | "failing"
    stim: StimulusSet
    oracle: Oracle


@dataclass(frozen=True)
class Verdict:
    passed: bool
    o1_failure_active: float
    o2_failure_onset: float
    o3_severity: float
    regression: bool = False
    sim_error: str | None = None

    def to_json(self) -> dict:
        o3 = self.o3_severity
        return {
            "pass": self.passed,
            "o1": self.o1_failure_active,
            "o2": self.o2_failure_onset,
            "o3": o3 if math.isfinite(o3) else "inf",
            "regression": self.regression,
            "sim_error": self.sim_error,
        }


@dataclass(frozen=True)
class SuiteVerdict:
    verdict: Verdict  # of the failing test, with the regression flag set
    passing: tuple[Verdict, ...]
    steps_simulated: int

    @property
    def plausible(self) -> bool:
        return self.verdict.passed and not self.verdict.regression

    @property
    def regression(self) -> bool:
        return self.verdict.regression


def deviation(result: SimResult, oracle: Oracle, k: int) -> float:
    """Largest tolerance exceedance over all outputs at sample ``k``."""
    worst = 0.0
    for name, expected in oracle.expected.items():
        actual = result.outputs[name].values[k]
        want = expected.values[k]
        if isinstance(actual, float) or isinstance(want, float):
            d = max(0.0, abs(actual - want) - oracle.tol.get(name, 0.0))
        else:
            d = 0.0 if actual == want else 1.0
        if d > worst:
            worst = d
    return worst


def deviation_at(result: SimResult, oracle: Oracle, t: float) -> float:
    k = round(t / result.dt)
    if abs(k * result.dt - t) > 1e-9:
        raise ValueError(f"t={t} is not on the sample grid")
    return deviation(result, oracle, k)


def worst_verdict(duration: float, error: str) -> Verdict:
    return Verdict(False, duration, 0.0, math.inf, sim_error=error)


def verdict_from_deviations(devs: list[float], dt: float) -> Verdict:
    duration = round((len(devs) - 1) * dt, 12)
    failing = [k for k, d in enumerate(devs) if d > 0]
    if not failing:
        return Verdict(True, 0.0, duration, 0.0)
    o1 = min(duration, round(len(failing) * dt, 12))
    return Verdict(False, o1, round(failing[0] * dt, 12), max(devs))


def verdict(result: SimResult, tc: TestCase) -> Verdict:
    oracle = tc.oracle
    missing = [n for n in oracle.expected if n not in result.outputs]
    if missing:
        raise KeyError(f"oracle references unknown outputs {missing}")
    devs = [deviation(result, oracle, k) for k in range(result.steps + 1)]
    return verdict_from_deviations(devs, result.dt)


def run_test(chart: Chart, tc: TestCase) -> Verdict:
    try:
        result = simulate(chart, tc.stim)
    except SimError as exc:
        return worst_verdict(tc.stim.duration, f"{type(exc).__name__}: {exc}")
    return verdict(result, tc)


def is_enhanced(candidate: Verdict, reference: Verdict, eps: float = DEFAULT_EPS) -> bool:
    """At least one objective strictly better and none worse, within ``eps``."""
    if candidate.regression or candidate.sim_error is not None:
        return False
    c1, c2, c3 = candidate.o1_failure_active, candidate.o2_failure_onset, candidate.o3_severity
    r1, r2, r3 = reference.o1_failure_active, reference.o2_failure_onset, reference.o3_severity
    better = c1 < r1 - eps or c2 > r2 + eps or c3 < r3 - eps
    no_worse = c1 <= r1 + eps and c2 >= r2 - eps and c3 <= r3 + eps
    return better and no_worse


def failing_test(suite: list[TestCase]) -> TestCase:
    failing = [tc for tc in suite if tc.kind == "failing"]
    if len(failing) != 1:
        raise ValueError(f"suite must contain exactly one failing test, found {len(failing)}")
    return failing[0]


def run_suite(chart: Chart, suite: list[TestCase]) -> SuiteVerdict:
    """Failing test first; passing tests only run once it passes."""
    fail_tc = failing_test(suite)
    v = run_test(chart, fail_tc)
    steps = fail_tc.stim.steps
    passing: list[Verdict] = []
    if v.passed:
        for tc in suite:
            if tc.kind != "passing":
                continue
            passing.append(run_test(chart, tc))
            steps += tc.stim.steps
            if not passing[-1].passed:
                break
        if not all(p.passed for p in passing):
            v = replace(v, regression=True)
    return SuiteVerdict(v, tuple(passing), steps)


def suite_cost(suite: list[TestCase]) -> int:
    return sum(tc.stim.steps for tc in suite)


# ---------------------------------------------------------------- loading


def load_test(directory: str | Path) -> TestCase:
    """Read ``stim.csv``, ``expected.csv`` and ``test.json`` from one directory."""
    directory = Path(directory)
    meta = json.loads((directory / "test.json").read_text(encoding="utf-8"))
    stim = load_stimulus(directory / "stim.csv")
    dt, expected = read_traces(directory / "expected.csv")
    kind = meta["kind"]
    if kind not in ("passing", "failing"):
        raise ValueError(f"{directory}: kind must be 'passing' or 'failing'")
    if "dt" in meta and abs(meta["dt"] - stim.dt) > 1e-12:
        raise ValueError(f"{directory}: dt in test.json disagrees with stim.csv")
    if "duration" in meta and abs(meta["duration"] - stim.duration) > 1e-9:
        raise ValueError(f"{directory}: duration in test.json disagrees with stim.csv")
    for name, trace in expected.items():
        if len(trace.values) != stim.steps + 1 or abs(dt - stim.dt) > 1e-12:
            raise ValueError(f"{directory}: expected trace '{name}' is misaligned with stim")
    tol = {k: float(v) for k, v in meta.get("tolerances", {}).items()}
    if any(v < 0 for v in tol.values()):
        raise ValueError(f"{directory}: tolerances must be non-negative")
    return TestCase(meta.get("name", directory.name), kind, stim, Oracle(expected, tol))


def load_suite(directory: str | Path) -> list[TestCase]:
    """Load every ``<dir>/<name>/`` test case, sorted by name."""
    directory = Path(directory)
    subdirs = sorted(p for p in directory.iterdir() if (p / "test.json").is_file())
    if not subdirs:
        raise FileNotFoundError(f"{directory}: no test cases found")
    return [load_test(p) for p in subdirs]


class SuiteInvalid(ValueError):
    pass


def check_suite(chart: Chart, suite: list[TestCase]) -> None:
    """The original chart must fail the failing test and pass the passing ones."""
    fail_tc = failing_test(suite)
    if run_test(chart, fail_tc).passed:
        raise SuiteInvalid(f"failing test '{fail_tc.name}' passes on the original chart")
    for tc in suite:
        if tc.kind == "passing" and not run_test(chart, tc).passed:
            raise SuiteInvalid(f"passing test '{tc.name}' fails on the original chart")
