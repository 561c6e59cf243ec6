"""Benchmark harness: pair selection, batch runs and run directories."""
from __future__ import annotations

import itertools
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .bridge import BridgeConfig, scripted_agent, serve_process, serve_session, AgentTransport
from .metrics import MetricsReport, Summary, aggregate, dumps_reports, efficiency, evaluate, render_table
from .model import Instance, Recipe, combine
from .schedulers import (
    NoFeasiblePlan,
    check_plan,
    greedy_schedule,
    heuristic_schedule,
    optimal_schedule,
)
from .sim import FailureReason, Transcript, failure, new_session


@dataclass(frozen=True)
class InstanceFilterCriteria:
    min_eff_without_tc: float = 0.80
    require_efficiency_drop: bool = True

    def __post_init__(self):
        if not 0 <= self.min_eff_without_tc <= 1:
            raise ValueError("min_eff_without_tc must lie in [0, 1]")


@dataclass(frozen=True)
class PairScore:
    names: tuple[str, str]
    eff_without: float
    eff_with: float | None  # None: no feasible plan with deadlines

    def kept(self, criteria: InstanceFilterCriteria) -> bool:
        if self.eff_with is None or not self.eff_without > criteria.min_eff_without_tc:
            return False
        return self.eff_with < self.eff_without or not criteria.require_efficiency_drop


def heuristic_efficiency(instance: Instance, respect_time_constraints: bool = True) -> float:
    plan = heuristic_schedule(instance, respect_time_constraints)
    target = instance if respect_time_constraints else instance.without_time_constraints()
    return efficiency(target, check_plan(instance, plan).transcript)[2]


def score_pairs(recipes) -> list[PairScore]:
    """Heuristic efficiency of every unordered recipe pair, with and without deadlines."""
    recipes = sorted(recipes, key=lambda r: r.name)
    if len(recipes) < 2:
        raise ValueError("need at least two recipes to form pairs")
    out = []
    for a, b in itertools.combinations(recipes, 2):
        inst = combine([a, b])
        without = heuristic_efficiency(inst, False)
        try:
            with_tc = heuristic_efficiency(inst, True)
        except NoFeasiblePlan:
            with_tc = None
        out.append(PairScore((a.name, b.name), without, with_tc))
    return out


def generate_instances(recipes, criteria: InstanceFilterCriteria | None = None) -> list[Instance]:
    """Pairs whose heuristic plan multitasks well without deadlines and worse with them."""
    criteria = criteria or InstanceFilterCriteria()
    recipes = list(recipes)
    by_name = {r.name: r for r in recipes}
    return [combine([by_name[a], by_name[b]])
            for (a, b) in (s.names for s in score_pairs(recipes) if s.kept(criteria))]


# -- runs -------------------------------------------------------------------------

RUNNERS = ("heuristic", "greedy", "optimal", "agent-script", "serve")


@dataclass
class BenchConfig:
    with_time_constraints: bool = True
    script_dir: Path | None = None      # agent-script: <instance name>.plan files
    agent_command: list[str] | None = None  # serve: external agent program
    bridge: BridgeConfig = field(default_factory=BridgeConfig)
    workers: int = 1
    optimal_budget: float = 60.0


@dataclass(frozen=True)
class RunRecord:
    report: MetricsReport
    transcript: Transcript | None
    error: str | None = None


@dataclass(frozen=True)
class BenchResult:
    runner: str
    with_time_constraints: bool
    records: tuple[RunRecord, ...]
    summary: Summary

    @property
    def reports(self) -> list[MetricsReport]:
        return [r.report for r in self.records]

    def table(self) -> str:
        label = f"{self.runner} ({'with' if self.with_time_constraints else 'w/o'} time constraints)"
        return render_table({label: self.summary})


def _failed_report(instance: Instance, reason: FailureReason) -> MetricsReport:
    return MetricsReport(instance=instance.name, outcome=str(failure(reason)), success=0, progress_rate=0.0,
                         efficiency=0.0, reference_efficiency=0.0, relative_efficiency=0.0,
                         multitask_score=0.0, t_save=0, t_auto=0, makespan=0, completed_actions=0)


def _run_one(instance: Instance, runner: str, config: BenchConfig) -> RunRecord:
    target = instance if config.with_time_constraints else instance.without_time_constraints()
    try:
        reference = check_plan(target, heuristic_schedule(target)).transcript
        if runner == "heuristic":
            transcript = reference
        elif runner == "greedy":
            transcript = greedy_schedule(target).transcript
        elif runner == "optimal":
            plan = optimal_schedule(target, time_budget=config.optimal_budget)
            transcript = check_plan(target, plan).transcript
        elif runner == "agent-script":
            if config.script_dir is None:
                raise ValueError("agent-script runner needs a script directory")
            agent = scripted_agent(Path(config.script_dir) / f"{instance.name}.plan")
            transcript = serve_session(target, AgentTransport(agent), config.bridge, reference).transcript
        elif runner == "serve":
            if not config.agent_command:
                raise ValueError("serve runner needs an agent command")
            transcript = serve_process(target, config.agent_command, config.bridge, reference).transcript
        else:
            raise ValueError(f"unknown runner {runner!r}")
        return RunRecord(evaluate(target, transcript, reference), transcript)
    except Exception as e:  # a broken run is a failed instance, the bench goes on
        return RunRecord(_failed_report(instance, FailureReason.AGENT_ABORTED), None, f"{type(e).__name__}: {e}")


def run_bench(instances, runner: str, config: BenchConfig | None = None) -> BenchResult:
    """Run every instance with one runner and aggregate the reports."""
    config = config or BenchConfig()
    if runner not in RUNNERS:
        raise ValueError(f"unknown runner {runner!r}; choose from {', '.join(RUNNERS)}")
    instances = list(instances)
    if not instances:
        raise ValueError("no instances to run")
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        records = tuple(pool.map(lambda inst: _run_one(inst, runner, config), instances))
    return BenchResult(runner, config.with_time_constraints, records, aggregate(r.report for r in records))


# -- run directories ----------------------------------------------------------------

def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def new_run_dir(root: Path, label: str) -> Path:
    """Create a fresh, uniquely named directory under ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    while True:
        path = root / f"{stamp}-{label}"
        try:
            path.mkdir()
            return path
        except FileExistsError:
            time.sleep(0.001)
            stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


def write_run(root: Path, result: BenchResult) -> Path:
    """Write table, machine-readable report and transcripts; returns the run directory."""
    d = new_run_dir(root, f"{result.runner}-{'tc' if result.with_time_constraints else 'notc'}")
    (d / "transcripts").mkdir()
    for rec in result.records:
        if rec.transcript is not None:
            atomic_write(d / "transcripts" / f"{rec.report.instance}.txt", rec.transcript.render())
    lines = [result.table(), ""]
    for rec in result.records:
        r = rec.report
        lines.append(f"{r.instance}: {r.outcome} progress={r.progress_rate:.3f} "
                     f"efficiency={r.efficiency:.4f} r_efficiency={r.relative_efficiency:.4f}"
                     + (f" error={rec.error}" if rec.error else ""))
    atomic_write(d / "report.txt", "\n".join(lines) + "\n")
    atomic_write(d / "report.json", dumps_reports(result.reports, result.summary))
    return d
