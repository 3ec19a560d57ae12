"""Archive-based global/local repair search and the (1+1)EA baseline.

Both algorithms run until a time budget is spent. By default time is measured
on a virtual clock that charges each candidate a fixed overhead plus a fixed
cost per simulated step, which keeps runs reproducible bit for bit.
``clock="wall"`` uses real elapsed time instead.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .dsl import render_diff, serialize
from .localization import SuspiciousnessRanking
from .model import Chart, Patch, apply_patch
from .mutations import (
    ComponentVanished,
    MutationOutcome,
    NothingApplicable,
    apply_global_mutation,
    apply_local_mutation,
)
from .oracle import (
    DEFAULT_EPS,
    SuiteInvalid,
    SuiteVerdict,
    TestCase,
    Verdict,
    check_suite,
    is_enhanced,
    run_suite,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("flowrepair", "baseline")
CLOCKS = ("virtual", "wall")


class RepairError(Exception):
    pass


@dataclass
class RunConfig:
    budget: float = 3600.0
    local_tries: int = 30
    eps: float = DEFAULT_EPS
    seed: int = 0
    algo: str = "flowrepair"
    parallelism: int = 1
    clock: str = "virtual"
    step_cost: float = 1e-4  # virtual seconds per simulated step
    candidate_overhead: float = 0.001  # virtual seconds per candidate
    # Optional early exit once an archived plausible entry satisfies this.
    stop_when: Callable[[ArchiveEntry], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.local_tries < 1:
            raise ValueError("local_tries must be at least 1")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.clock not in CLOCKS:
            raise ValueError(f"unknown clock {self.clock!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")

    def to_json(self) -> dict:
        return {
            "budget": self.budget, "local_tries": self.local_tries, "eps": self.eps,
            "seed": self.seed, "algo": self.algo, "parallelism": self.parallelism,
            "clock": self.clock, "step_cost": self.step_cost,
            "candidate_overhead": self.candidate_overhead,
        }


class VirtualClock:
    def __init__(self, cfg: RunConfig):
        self.t = 0.0
        self.overhead = cfg.candidate_overhead
        self.cost_per_step = cfg.step_cost

    def now(self) -> float:
        return self.t

    def charge(self, steps: int) -> None:
        self.t += self.overhead + steps * self.cost_per_step


class WallClock:
    def __init__(self, cfg: RunConfig):
        self.start = time.perf_counter()

    def now(self) -> float:
        return time.perf_counter() - self.start

    def charge(self, steps: int) -> None:
        pass


@dataclass
class ArchiveEntry:
    patch: Patch
    chart: Chart
    verdict: Verdict
    lineage: int | None
    found_at: float
    key: str
    index: int = 0

    def summary(self) -> dict:
        return {
            "index": self.index,
            "lineage": self.lineage,
            "found_at": self.found_at,
            "verdict": self.verdict.to_json(),
            "patch": self.patch.to_json(),
        }


@dataclass
class RunLog:
    config: dict
    records: list[dict] = field(default_factory=list)
    partial: list[ArchiveEntry] = field(default_factory=list)
    plausible: list[ArchiveEntry] = field(default_factory=list)
    elapsed: float = 0.0
    stopped_early: bool = False

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "candidates": self.records,
            "partial_archive": [e.summary() for e in self.partial],
            "plausible_archive": [e.summary() for e in self.plausible],
            "elapsed": self.elapsed,
            "stopped_early": self.stopped_early,
        }


@dataclass
class RepairResult:
    plausible: list[ArchiveEntry]
    log: RunLog


def chart_key(chart: Chart) -> str:
    return hashlib.sha256(serialize(chart).encode("utf-8")).hexdigest()


class _Search:
    """Shared bookkeeping: clock, archives, candidate evaluation and logging."""

    def __init__(self, original: Chart, suite: Sequence[TestCase],
                 ranking: SuspiciousnessRanking, cfg: RunConfig):
        try:
            check_suite(original, list(suite))
        except SuiteInvalid as exc:
            raise RepairError(str(exc)) from exc
        self.original = original
        self.suite = list(suite)
        self.ranking = ranking
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.clock = (VirtualClock if cfg.clock == "virtual" else WallClock)(cfg)
        self.log = RunLog(cfg.to_json())
        self.plausible_keys: set[str] = set()
        self.partial_keys: set[str] = set()
        self.done = False
        first = run_suite(original, self.suite)
        self.clock.charge(first.steps_simulated)
        root = ArchiveEntry(Patch(), original, first.verdict, None, 0.0, chart_key(original))
        self.log.partial.append(root)
        self.partial_keys.add(root.key)

    def expired(self) -> bool:
        return self.done or self.clock.now() >= self.cfg.budget

    def evaluate(self, parent: ArchiveEntry, outcome: MutationOutcome,
                 phase: str) -> tuple[str, ArchiveEntry]:
        """Simulate one candidate, archive it and log it; returns its class."""
        sv: SuiteVerdict = run_suite(outcome.variant, self.suite)
        self.clock.charge(sv.steps_simulated)
        now = self.clock.now()
        entry = ArchiveEntry(parent.patch + outcome.edit, outcome.variant, sv.verdict,
                             parent.index, now, chart_key(outcome.variant))
        duplicate = False
        if sv.plausible:
            cls = "plausible"
            duplicate = entry.key in self.plausible_keys
            if not duplicate:
                entry.index = len(self.log.plausible)
                self.plausible_keys.add(entry.key)
                self.log.plausible.append(entry)
        elif is_enhanced(sv.verdict, parent.verdict, self.cfg.eps):
            cls = "partial"
            duplicate = entry.key in self.partial_keys
        else:
            cls = "rejected"
        self.log.records.append({
            "i": len(self.log.records),
            "t": now,
            "phase": phase,
            "parent": parent.index,
            "operator": outcome.operator.value,
            "component": outcome.component,
            "edit": outcome.edit.to_json(),
            "edits": len(entry.patch),
            "classification": cls,
            "duplicate": duplicate,
            "verdict": sv.verdict.to_json(),
        })
        if cls == "plausible" and not duplicate and self.cfg.stop_when is not None:
            if self.cfg.stop_when(entry):
                self.done = True
                self.log.stopped_early = True
        return cls, entry

    def add_partial(self, entry: ArchiveEntry) -> ArchiveEntry:
        if entry.key in self.partial_keys:
            for existing in self.log.partial:
                if existing.key == entry.key:
                    return existing
        entry.index = len(self.log.partial)
        self.partial_keys.add(entry.key)
        self.log.partial.append(entry)
        return entry

    def finish(self) -> RepairResult:
        self.log.elapsed = self.clock.now()
        return RepairResult(list(self.log.plausible), self.log)


def repair(original: Chart, suite: Sequence[TestCase], ranking: SuspiciousnessRanking,
           cfg: RunConfig) -> RepairResult:
    """Alternate global exploration over the partial archive with local
    exploitation of the last improving component."""
    if cfg.algo == "baseline":
        return repair_baseline(original, suite, ranking, cfg)
    s = _Search(original, suite, ranking, cfg)
    rng = s.rng
    while not s.expired():
        # Global phase: until some candidate improves on the model it came from.
        base = outcome = None
        while not s.expired():
            parent = s.log.partial[rng.randrange(len(s.log.partial))]
            try:
                outcome = apply_global_mutation(parent.chart, ranking, rng)
            except NothingApplicable:
                s.clock.charge(0)
                continue
            cls, entry = s.evaluate(parent, outcome, "global")
            if cls == "partial":
                base = s.add_partial(entry)
                break
        if base is None:
            break
        # Local phase: keep mutating the same component.
        component, operator = outcome.component, outcome.operator
        tries = 0
        while tries < cfg.local_tries and not s.expired():
            tries += 1
            try:
                local = apply_local_mutation(base.chart, component, operator, rng)
            except (ComponentVanished, NothingApplicable):
                break
            cls, entry = s.evaluate(base, local, "local")
            if cls == "partial":
                base = s.add_partial(entry)
                tries = 0
        # Partial patches are never pruned from the archive.
    return s.finish()


def repair_baseline(original: Chart, suite: Sequence[TestCase],
                    ranking: SuspiciousnessRanking, cfg: RunConfig) -> RepairResult:
    """(1+1)EA: a single incumbent, replaced by any improving mutant."""
    s = _Search(original, suite, ranking, cfg)
    current = s.log.partial[0]
    while not s.expired():
        try:
            outcome = apply_global_mutation(current.chart, ranking, s.rng)
        except NothingApplicable:
            s.clock.charge(0)
            continue
        cls, entry = s.evaluate(current, outcome, "global")
        if cls == "partial":
            entry.index = 0
            s.log.partial[0] = entry
            s.partial_keys = {entry.key}
            current = entry
    return s.finish()


# ---------------------------------------------------------------- output files


def summary_rows(result: RepairResult) -> list[tuple[float, int]]:
    rows = [(0.0, 0)]
    for i, entry in enumerate(result.plausible, start=1):
        rows.append((entry.found_at, i))
    rows.append((result.log.elapsed, len(result.plausible)))
    return rows


def format_summary(result: RepairResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_seconds", "plausible_count"])
    for t, n in summary_rows(result):
        w.writerow([repr(round(t, 9)), n])
    return buf.getvalue()


def dump_json(data) -> str:
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def write_run(out_dir: str | Path, original: Chart, result: RepairResult) -> Path:
    """patches/NNN.chart, patches/NNN.patch.json, run_log.json and summary.csv."""
    out = Path(out_dir)
    patches = out / "patches"
    patches.mkdir(parents=True, exist_ok=True)
    for i, entry in enumerate(result.plausible):
        stem = f"{i:03d}"
        (patches / f"{stem}.chart").write_text(serialize(entry.chart), encoding="utf-8")
        (patches / f"{stem}.patch.json").write_text(dump_json(entry.patch.to_json()),
                                                     encoding="utf-8")
        (patches / f"{stem}.diff").write_text(render_diff(original, entry.chart),
                                              encoding="utf-8")
    (out / "run_log.json").write_text(dump_json(result.log.to_json()), encoding="utf-8")
    (out / "summary.csv").write_text(format_summary(result), encoding="utf-8")
    return out


def replay(original: Chart, patch_file: str | Path) -> Chart:
    data = json.loads(Path(patch_file).read_text(encoding="utf-8"))
    return apply_patch(original, Patch.from_json(data))
