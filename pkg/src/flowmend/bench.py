"""Multi-run experiments over the benchmark corpus and report aggregation."""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import BenchmarkCase, get_case, load_case
from .engine import ALGORITHMS, RunConfig, dump_json, repair, write_run
from .localization import localize

log = logging.getLogger(__name__)

DESK_BUDGET = 120.0
REPORT_COLUMNS = ("case", "algo", "runs", "crashed", "successes", "mean", "min", "max")


@dataclass
class ExperimentSpec:
    cases: list[str]
    repetitions: int = 5
    budget: float = DESK_BUDGET
    algos: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    base_seed: int = 0
    local_tries: int = 30
    clock: str = "virtual"
    parallelism: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.cases:
            raise ValueError("an experiment needs at least one case")
        bad = [a for a in self.algos if a not in ALGORITHMS]
        if bad or not self.algos:
            raise ValueError(f"algos must be a non-empty subset of {ALGORITHMS}, got {self.algos}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")

    @classmethod
    def from_json(cls, data: dict) -> ExperimentSpec:
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"unknown experiment keys: {', '.join(unknown)}")
        return cls(**known)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentSpec:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class RunRecord:
    case: str
    algo: str
    seed: int
    directory: str
    plausible: int | None
    candidates: int | None
    error: str | None = None


@dataclass(frozen=True)
class ReportRow:
    case: str
    algo: str
    runs: int
    crashed: int
    successes: int
    mean: float | None
    min: int | None
    max: int | None


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    runs: list[RunRecord]


def resolve_case(ref: str) -> BenchmarkCase:
    path = Path(ref)
    if (path / "case.json").is_file():
        return load_case(path)
    return get_case(ref)


def run_dir(out: Path, case_id: str, algo: str, rep: int) -> Path:
    return out / case_id / algo / f"run_{rep:02d}"


def _run_one(job: tuple) -> RunRecord:
    case_ref, algo, seed, budget, local_tries, clock, directory = job
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    case = resolve_case(case_ref)
    meta = {"case": case.id, "algo": algo, "seed": seed, "budget": budget}
    try:
        ranking = localize(case.buggy, case.suite)
        cfg = RunConfig(budget=budget, local_tries=local_tries, seed=seed, algo=algo, clock=clock)
        result = repair(case.buggy, case.suite, ranking, cfg)
        write_run(directory, case.buggy, result)
    except Exception as exc:  # a crashed run is recorded, not fatal
        meta["error"] = f"{type(exc).__name__}: {exc}"
        (directory / "run.json").write_text(dump_json(meta), encoding="utf-8")
        log.warning("run %s/%s seed %d crashed: %s", case.id, algo, seed, exc)
        log.debug("%s", traceback.format_exc())
        return RunRecord(case.id, algo, seed, str(directory), None, None, meta["error"])
    meta["plausible"] = len(result.plausible)
    meta["candidates"] = len(result.log.records)
    (directory / "run.json").write_text(dump_json(meta), encoding="utf-8")
    return RunRecord(case.id, algo, seed, str(directory), meta["plausible"], meta["candidates"])


def run_experiment(spec: ExperimentSpec, out: str | Path) -> ExperimentReport:
    """Run repetitions x cases x algos; run k of every (case, algo) uses seed base + k."""
    out = Path(out)
    cases = [resolve_case(ref) for ref in spec.cases]  # fail before any run starts
    out.mkdir(parents=True, exist_ok=True)
    (out / "experiment.json").write_text(dump_json(asdict(spec)), encoding="utf-8")
    jobs = []
    for ref, case in zip(spec.cases, cases):
        for algo in spec.algos:
            for rep in range(spec.repetitions):
                jobs.append((ref, algo, spec.base_seed + rep, spec.budget, spec.local_tries,
                             spec.clock, str(run_dir(out, case.id, algo, rep))))
    if spec.parallelism > 1:
        with ProcessPoolExecutor(max_workers=spec.parallelism) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(job) for job in jobs]
    report = aggregate(out)
    return ExperimentReport(report.rows, records)


# ---------------------------------------------------------------- aggregation


def final_count(summary_csv: Path) -> int:
    with open(summary_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{summary_csv}: empty summary")
    return int(rows[-1]["plausible_count"])


def collect_runs(out: str | Path) -> list[RunRecord]:
    records = []
    for meta_file in sorted(Path(out).rglob("run.json")):
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
        directory = meta_file.parent
        summary = directory / "summary.csv"
        error = meta.get("error")
        plausible = None
        if error is None:
            if summary.is_file():
                plausible = final_count(summary)
            else:
                error = "incomplete run: summary.csv missing"
        records.append(RunRecord(meta["case"], meta["algo"], meta["seed"], str(directory),
                                 plausible, meta.get("candidates"), error))
    return records


def summarize(records: list[RunRecord]) -> list[ReportRow]:
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.case, r.algo), []).append(r)
    rows = []
    for (case, algo), runs in sorted(groups.items()):
        counts = [r.plausible for r in runs if r.error is None]
        crashed = len(runs) - len(counts)
        if counts:
            rows.append(ReportRow(case, algo, len(runs), crashed, sum(c > 0 for c in counts),
                                  statistics.fmean(counts), min(counts), max(counts)))
        else:
            rows.append(ReportRow(case, algo, len(runs), crashed, 0, None, None, None))
    return rows


def format_report(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        mean = "" if r.mean is None else repr(round(r.mean, 6))
        w.writerow([r.case, r.algo, r.runs, r.crashed, r.successes, mean,
                    "" if r.min is None else r.min, "" if r.max is None else r.max])
    return buf.getvalue()


def aggregate(out: str | Path) -> ExperimentReport:
    """Rebuild report.csv from the per-run directories below ``out``."""
    records = collect_runs(out)
    if not records:
        raise FileNotFoundError(f"{out}: no runs found")
    rows = summarize(records)
    (Path(out) / "report.csv").write_text(format_report(rows), encoding="utf-8")
    return ExperimentReport(rows, records)


def format_table(rows: list[ReportRow]) -> str:
    """Plain-text table of plausible-patch counts per case and algorithm."""
    header = f"{'case':<14}{'algo':<12}{'runs':>5}{'ok':>4}{'mean':>8}{'min':>5}{'max':>5}  note"
    lines = [header]
    for r in rows:
        note = f"{r.crashed} crashed" if r.crashed else ""
        mean = "-" if r.mean is None else f"{r.mean:.1f}"
        lo = "-" if r.min is None else str(r.min)
        hi = "-" if r.max is None else str(r.max)
        lines.append(f"{r.case:<14}{r.algo:<12}{r.runs:>5}{r.successes:>4}{mean:>8}{lo:>5}{hi:>5}  {note}")
    return "\n".join(lines)
