"""Bundled benchmark cases: buggy chart, reference fix and test suite."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .dsl import parse_file
from .model import Chart
from .oracle import TestCase, load_suite

CORPUS_DIR = Path(__file__).resolve().parent / "corpus"


@dataclass(frozen=True)
class BenchmarkCase:
    id: str
    buggy_file: Path
    fixed_file: Path
    tests_dir: Path
    description: str
    seeded_edits: tuple[dict, ...]
    fault_count: int
    repair_steps: int | None = None

    @cached_property
    def buggy(self) -> Chart:
        return parse_file(self.buggy_file)

    @cached_property
    def fixed(self) -> Chart:
        return parse_file(self.fixed_file)

    @cached_property
    def suite(self) -> list[TestCase]:
        return load_suite(self.tests_dir)


def load_case(directory: str | Path) -> BenchmarkCase:
    directory = Path(directory)
    meta = json.loads((directory / "case.json").read_text(encoding="utf-8"))
    return BenchmarkCase(
        id=meta["id"],
        buggy_file=directory / "buggy.chart",
        fixed_file=directory / "fixed.chart",
        tests_dir=directory / "tests",
        description=meta["description"],
        seeded_edits=tuple(meta["seeded_edits"]),
        fault_count=meta["fault_count"],
        repair_steps=meta.get("repair_steps"),
    )


def build_corpus(root: str | Path = CORPUS_DIR) -> list[BenchmarkCase]:
    root = Path(root)
    return [load_case(p) for p in sorted(root.iterdir()) if (p / "case.json").is_file()]


def get_case(case_id: str, root: str | Path = CORPUS_DIR) -> BenchmarkCase:
    directory = Path(root) / case_id
    if not (directory / "case.json").is_file():
        raise KeyError(f"unknown benchmark case '{case_id}'")
    return load_case(directory)
