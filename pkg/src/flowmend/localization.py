"""Spectrum-based fault localization over chart components."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .model import Chart, components
from .oracle import TestCase, run_test
from .simulator import CoverageTrace, SimError, simulate

ROULETTE_FLOOR = 0.01


class LocalizeError(Exception):
    pass


class NoFailingTest(LocalizeError):
    pass


def tarantula(ef: int, tf: int, ep: int, tp: int) -> float:
    if ef == 0 and ep == 0:
        return 0.0
    if tp == 0 or ep == 0:
        return 1.0
    # (ef/tf) / (ef/tf + ep/tp) as one integer division, which Python rounds
    # correctly; chained float divisions can be off by an ulp.
    return (ef * tp) / (ef * tp + ep * tf)


@dataclass(frozen=True)
class CoverageMatrix:
    counts: Mapping[str, tuple[int, int]]  # component -> (ef, ep)
    tf: int
    tp: int


@dataclass(frozen=True)
class SuspiciousnessRanking:
    scores: Mapping[str, float]
    order: tuple[str, ...]
    kinds: Mapping[str, str]
    matrix: CoverageMatrix | None = None

    def score(self, cid: str) -> float:
        return self.scores.get(cid, 0.0)

    def to_json(self) -> list[dict]:
        rows = []
        for cid in self.order:
            ef, ep = self.matrix.counts[cid] if self.matrix else (None, None)
            rows.append({"component": cid, "kind": self.kinds[cid], "ef": ef, "ep": ep,
                         "score": self.scores[cid]})
        return rows


def coverage_matrix(
    comps: Sequence[str], coverages: Iterable[tuple[CoverageTrace, bool]]
) -> CoverageMatrix:
    """Count, per component, the failing and passing runs that executed it."""
    counts = {cid: [0, 0] for cid in comps}
    tf = tp = 0
    for cov, failed in coverages:
        if failed:
            tf += 1
        else:
            tp += 1
        for cid in cov.executed_states | cov.fired_transitions:
            if cid in counts:
                counts[cid][0 if failed else 1] += 1
    return CoverageMatrix({cid: (ef, ep) for cid, (ef, ep) in counts.items()}, tf, tp)


def rank(
    chart: Chart,
    matrix: CoverageMatrix,
    metric: Callable[[int, int, int, int], float] = tarantula,
) -> SuspiciousnessRanking:
    if matrix.tf < 1:
        raise NoFailingTest("suspiciousness needs at least one failing test")
    comps = components(chart)
    scores = {cid: metric(*_args(matrix, cid)) for cid, _ in comps}
    position = {cid: i for i, (cid, _) in enumerate(comps)}
    order = tuple(sorted(scores, key=lambda c: (-scores[c], position[c])))
    return SuspiciousnessRanking(scores, order, dict(comps), matrix)


def _args(matrix: CoverageMatrix, cid: str) -> tuple[int, int, int, int]:
    ef, ep = matrix.counts[cid]
    return ef, matrix.tf, ep, matrix.tp


def localize(chart: Chart, suite: Sequence[TestCase]) -> SuspiciousnessRanking:
    """Simulate every test on ``chart`` and score components with Tarantula.

    A test counts as failing when the chart fails its oracle, whatever its
    declared kind.
    """
    runs = []
    for tc in suite:
        try:
            result = simulate(chart, tc.stim)
        except SimError as exc:
            raise LocalizeError(f"test '{tc.name}' does not simulate: {exc}") from exc
        failed = not run_test(chart, tc).passed
        runs.append((result.coverage, failed))
    if not any(failed for _, failed in runs):
        raise NoFailingTest("no test fails on this chart")
    return rank(chart, coverage_matrix([c for c, _ in components(chart)], runs))


def roulette_select(
    ranking: SuspiciousnessRanking,
    rng: random.Random,
    candidates: Sequence[str] | None = None,
    floor: float = ROULETTE_FLOOR,
) -> str:
    """Draw a component with probability proportional to score + floor.

    ``candidates`` restricts the wheel (e.g. to components still present in a
    variant); it defaults to every ranked component in declaration order.
    """
    if candidates is None:
        candidates = list(ranking.kinds)
    if not candidates:
        raise ValueError("roulette over an empty set")
    if len(candidates) == 1:
        return candidates[0]
    weights = [ranking.score(c) + floor for c in candidates]
    return rng.choices(candidates, weights=weights)[0]


def selection_probabilities(
    ranking: SuspiciousnessRanking, candidates: Sequence[str] | None = None,
    floor: float = ROULETTE_FLOOR,
) -> dict[str, float]:
    if candidates is None:
        candidates = list(ranking.kinds)
    total = sum(ranking.score(c) + floor for c in candidates)
    return {c: (ranking.score(c) + floor) / total for c in candidates}
