"""Gantt charts of plans and transcripts, as fixed-width text or SVG."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .metrics import executed_segments
from .model import ActionKey, Instance, fmt_hms
from .schedulers import Plan
from .sim import Transcript


@dataclass(frozen=True)
class Bar:
    key: ActionKey
    autonomous: bool
    segments: tuple[tuple[int, int], ...]


def bars(instance: Instance, source: Plan | Transcript) -> list[Bar]:
    """One bar per action that ran, ordered by recipe then step."""
    runs: dict[ActionKey, list[tuple[int, int]]] = {}
    if isinstance(source, Plan):
        for e in source.entries:
            a = instance.action(e.key)
            end = e.start + (a.duration if a.autonomous else e.exec_time)
            runs.setdefault(e.key, []).append((e.start, end))
    else:
        for key, segs in executed_segments(source).items():
            runs[key] = [(s.start, s.end) for s in segs]
    order = {name: i for i, name in enumerate(instance.names)}
    keys = sorted(runs, key=lambda k: (order[k[0]], k[1]))
    return [Bar(k, instance.action(k).autonomous, tuple(sorted(runs[k]))) for k in keys]


def _deadlines(instance: Instance, rows: list[Bar]):
    ends = {b.key: b.segments[-1][1] for b in rows}
    for r in instance.recipes:
        for tc in r.time_constraints:
            x, y = (r.name, tc.pred), (r.name, tc.succ)
            if x in ends:
                yield x, y, ends[x], ends[x] + tc.max_gap


def render_text(instance: Instance, source: Plan | Transcript, quantum: int = 60) -> str:
    """ASCII chart: ``#`` continuous work, ``=`` autonomous work, one column per quantum."""
    rows = bars(instance, source)
    if not rows:
        raise ValueError("nothing to draw: no executed segments")
    span = max(b.segments[-1][1] for b in rows)
    cols = math.ceil(span / quantum)
    labels = [f"{k[0]} {k[1]}" for k in (b.key for b in rows)]
    width = max(map(len, labels))
    ruler = "".join("|" if c % 5 == 0 else "." for c in range(cols))
    lines = [f"{'':{width}} {ruler}"]
    for label, b in zip(labels, rows):
        cells = [" "] * cols
        mark = "=" if b.autonomous else "#"
        for s, e in b.segments:
            for c in range(s // quantum, math.ceil(e / quantum)):
                cells[c] = mark
        lines.append(f"{label:{width}} {''.join(cells)}")
    for x, y, done, deadline in _deadlines(instance, rows):
        lines.append(f"deadline {x[0]} {x[1]}->{y[1]}: start by {fmt_hms(deadline)} "
                     f"(finished {fmt_hms(done)})")
    lines.append(f"span {fmt_hms(span)}, {cols} columns of {quantum} s")
    return "\n".join(lines) + "\n"


ROW_H = 18
HEADER_H = 20


def render_svg(instance: Instance, source: Plan | Transcript, quantum: int = 60, px: float = 20) -> str:
    """SVG chart whose width is the span in quanta times ``px``."""
    rows = bars(instance, source)
    if not rows:
        raise ValueError("nothing to draw: no executed segments")
    span = max(b.segments[-1][1] for b in rows)
    scale = px / quantum
    width = span * scale
    height = HEADER_H + ROW_H * len(rows)
    y_of = {b.key: HEADER_H + i * ROW_H for i, b in enumerate(rows)}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height}" '
           f'viewBox="0 0 {width:g} {height}">']
    for q in range(0, math.ceil(span / quantum) + 1, 5):
        x = q * quantum * scale
        out.append(f'<line x1="{x:g}" y1="0" x2="{x:g}" y2="{height}" stroke="#ddd"/>')
        out.append(f'<text x="{x + 2:g}" y="12" font-size="10">{q}</text>')
    for b in rows:
        y = y_of[b.key]
        fill = "#f0a030" if b.autonomous else "#3070c0"
        cls = "autonomous" if b.autonomous else "continuous"
        for s, e in b.segments:
            out.append(f'<rect class="{cls}" x="{s * scale:g}" y="{y + 2}" width="{(e - s) * scale:g}" '
                       f'height="{ROW_H - 4}" fill="{fill}"/>')
        out.append(f'<text x="2" y="{y + ROW_H - 5}" font-size="10">{escape(b.key[0])} {b.key[1]}</text>')
    for x, y, done, deadline in _deadlines(instance, rows):
        if y not in y_of:
            continue
        x0, x1 = done * scale, deadline * scale
        y0, y1 = y_of[x] + ROW_H / 2, y_of[y] + ROW_H / 2
        out.append(f'<path class="deadline" d="M{x0:g},{y0:g} Q{(x0 + x1) / 2:g},{min(y0, y1) - ROW_H:g} '
                   f'{x1:g},{y1:g}" fill="none" stroke="#c03030" stroke-dasharray="3,2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_gantt(instance: Instance, source: Plan | Transcript, fmt: str = "text", **kw) -> str:
    if fmt == "text":
        return render_text(instance, source, **kw)
    if fmt == "svg":
        return render_svg(instance, source, **kw)
    raise ValueError(f"unknown format {fmt!r}")
