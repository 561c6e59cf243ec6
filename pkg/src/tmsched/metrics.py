"""Feasibility and efficiency metrics for transcripts."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .model import ActionKey, Instance
from .sim import Segment, Transcript


def _horizon(transcript: Transcript) -> float:
    # an undecided or failed run stops at its clock; later work never happened
    return math.inf if transcript.outcome.success else transcript.clock


def executed_segments(transcript: Transcript) -> dict[ActionKey, tuple[Segment, ...]]:
    """Segments each action actually ran, clipped at the end of the run."""
    end = _horizon(transcript)
    out = {}
    for key, p in transcript.state.progress.items():
        segs = tuple(Segment(s.start, min(s.end, end)) for s in p.segments if s.start < end)
        if segs:
            out[key] = segs
    return out


def completed_actions(transcript: Transcript) -> list[tuple[int, ActionKey]]:
    """``(completion time, key)`` for finished actions, in completion order."""
    end = _horizon(transcript)
    done = [(p.completed_at, k) for k, p in transcript.state.progress.items()
            if p.completed_at is not None and p.completed_at <= end]
    return sorted(done)


def _efficiency_of(instance: Instance, segs: dict) -> tuple[int, int, float]:
    if not segs:
        return 0, 0, 0.0
    total = auto = 0
    first, last = math.inf, -math.inf
    for key, ss in segs.items():
        run = sum(s.end - s.start for s in ss)
        total += run
        if instance.action(key).autonomous:
            auto += run
        first = min(first, ss[0].start)
        last = max(last, ss[-1].end)
    t_save = max(0, total - (last - first))
    return t_save, auto, (t_save / auto if auto else 0.0)


def efficiency(instance: Instance, transcript: Transcript) -> tuple[int, int, float]:
    """``(t_save, t_auto, efficiency)`` in seconds and as a fraction of ``t_auto``."""
    return _efficiency_of(instance, executed_segments(transcript))


def progress_rate(instance: Instance, transcript: Transcript) -> float:
    return len(completed_actions(transcript)) / instance.n_actions


def reference_prefix(reference: Transcript, k: int, order: str = "completion") -> list[ActionKey]:
    """The first ``k`` actions the reference run completed.

    ``order="completion"`` ranks by completion time (ties by key);
    ``order="command"`` ranks by the command that finished each action.
    """
    if order == "completion":
        return [key for _, key in completed_actions(reference)][:k]
    if order != "command":
        raise ValueError(f"unknown truncation order {order!r}")
    actions = reference.instance
    executed: dict[ActionKey, int] = {}
    keys = []
    for step in reference.state.history:
        executed[step.key] = executed.get(step.key, 0) + step.exec_time
        if executed[step.key] == actions.action(step.key).duration:
            keys.append(step.key)
    return keys[:k]


def reference_efficiency(instance: Instance, transcript: Transcript, reference: Transcript,
                         order: str = "completion") -> float:
    """Efficiency of the reference run restricted to as many actions as the agent completed."""
    if not reference.outcome.success:
        raise ValueError(f"reference run did not succeed ({reference.outcome})")
    keep = set(reference_prefix(reference, len(completed_actions(transcript)), order))
    segs = {key: s for key, s in executed_segments(reference).items() if key in keep}
    return _efficiency_of(instance, segs)[2]


def relative_efficiency(instance: Instance, transcript: Transcript, reference: Transcript,
                        order: str = "completion") -> float:
    """Agent efficiency over the efficiency of the reference run cut to the same progress.

    Not clamped: values above 1 are legal, and a zero reference against a
    positive agent efficiency gives ``inf``.
    """
    ref = reference_efficiency(instance, transcript, reference, order)
    agent = efficiency(instance, transcript)[2]
    return _ratio(agent, ref)


def _ratio(agent: float, ref: float) -> float:
    if ref == 0:
        return 1.0 if agent == 0 else math.inf
    return agent / ref


def multitask_score(success: bool | int, relative: float) -> float:
    return relative if success else 0.0


@dataclass(frozen=True)
class MetricsReport:
    instance: str
    outcome: str
    success: int
    progress_rate: float
    efficiency: float
    reference_efficiency: float
    relative_efficiency: float
    multitask_score: float
    t_save: int
    t_auto: int
    makespan: int
    completed_actions: int

    @property
    def infinite(self) -> bool:
        return math.isinf(self.relative_efficiency)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("relative_efficiency", "multitask_score"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_dict().items())

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        for k in ("relative_efficiency", "multitask_score"):
            if d[k] == "inf":
                d[k] = math.inf
        return cls(**d)


def evaluate(instance: Instance, transcript: Transcript, reference: Transcript,
             order: str = "completion") -> MetricsReport:
    """Every metric for one run, measured against a successful reference run."""
    t_save, t_auto, eff = efficiency(instance, transcript)
    k = len(completed_actions(transcript))
    ref_eff = reference_efficiency(instance, transcript, reference, order)
    rel = _ratio(eff, ref_eff)
    success = int(transcript.outcome.success)
    segs = executed_segments(transcript)
    makespan = max((s[-1].end for s in segs.values()), default=0)
    return MetricsReport(
        instance=instance.name, outcome=str(transcript.outcome), success=success,
        progress_rate=k / instance.n_actions, efficiency=eff, reference_efficiency=ref_eff,
        relative_efficiency=rel, multitask_score=multitask_score(success, rel),
        t_save=t_save, t_auto=t_auto, makespan=makespan, completed_actions=k)


@dataclass(frozen=True)
class Summary:
    """Means in percent, in table column order."""

    runs: int
    success: float
    progress: float
    relative_efficiency: float
    score: float
    infinite: int = 0

    def row(self) -> list[str]:
        return [f"{self.success:.1f}", f"{self.progress:.1f}", f"{self.relative_efficiency:.1f}",
                f"{self.score:.1f}"]


COLUMNS = ("Success", "Progress", "R-Efficiency", "S×E")


def aggregate(reports) -> Summary:
    """Mean success, progress, relative efficiency and multitask score, in percent.

    Relative efficiency is averaged over runs with a finite ratio; the number
    of runs with an infinite ratio is reported separately.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("aggregate needs at least one report")
    n = len(reports)
    finite = [r.relative_efficiency for r in reports if not math.isinf(r.relative_efficiency)]
    scores = [r.multitask_score for r in reports]
    return Summary(
        runs=n,
        success=100 * sum(r.success for r in reports) / n,
        progress=100 * sum(r.progress_rate for r in reports) / n,
        relative_efficiency=100 * sum(finite) / len(finite) if finite else math.inf,
        score=100 * sum(scores) / n if not any(math.isinf(s) for s in scores) else math.inf,
        infinite=n - len(finite),
    )


def render_table(rows: dict[str, Summary]) -> str:
    """Plain-text table: one row per label, columns in the usual order."""
    label_w = max([len("Method"), *map(len, rows)])
    head = ["Method".ljust(label_w)] + [c.rjust(12) for c in COLUMNS]
    lines = [" ".join(head)]
    for label, s in rows.items():
        lines.append(" ".join([label.ljust(label_w)] + [v.rjust(12) for v in s.row()]))
    return "\n".join(lines) + "\n"


def dumps_reports(reports, summary: Summary | None = None) -> str:
    doc = {"format": "tmsched-report", "version": 1, "runs": [r.to_dict() for r in reports]}
    if summary is not None:
        doc["summary"] = asdict(summary)
    return json.dumps(doc, indent=2, default=str) + "\n"
