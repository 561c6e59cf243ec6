"""Recipe documents, the agent command grammar, and the JSON interchange format.

A recipe document looks like::

    ## Recipe 1:Baked-Potato
    Step 0 (10 min): Preheat the oven to 425 degrees.
    ...
    Interruptible steps: 1, 4.
    Autonomous actions: step 0, 2, 3.
    Action Dependency: 0->2, 1->2, 2->4, 3->5, 4->5.
    Time Constraints: 3->5 (2 min).
    Steps 0, 2 require oven, Steps 3 requires microwave.
    Resource Conditions: step 0 sets oven temperature=425; step 2 requires oven temperature=425.

The prose variants used in prompt-style descriptions ("Step 5 must be
performed within 2 min after Step 3 is finished.", "The agent can perform
autonomous actions step 0, 2, 3 ...") are accepted as well.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .model import (
    Action,
    Concurrency,
    Instance,
    Recipe,
    ResourceRequirement,
    TimeConstraint,
    fmt_hms,
    fmt_minutes,
)


class RecipeParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class CommandParseError(ValueError):
    pass


class RenderMode(str, Enum):
    FULL = "full"
    MASKED = "masked"


_HEADER = re.compile(r"^#+\s*Recipe(?:\s*\d+)?\s*:\s*(?P<name>\S.*?)\s*$")
_STEP = re.compile(r"^Step\s+(?P<idx>\d+)\s*\((?P<dur>\d+(?:\.\d+)?)\s*min\)\s*:\s*(?P<text>.*)$")
_INTERRUPT = re.compile(r"^Interr\w*\s+steps\s*:\s*(?P<body>.*)$", re.I)
_INTERRUPT_PROSE = re.compile(r"pause steps\s+(?P<body>[\d,\s]+?)\s+for\b", re.I)
_AUTO = re.compile(r"^Autonomous actions\s*:\s*(?P<body>.*)$", re.I)
_AUTO_PROSE = re.compile(r"autonomous actions\s+step\s+(?P<body>[\d,\s]+?)\s+in parallel", re.I)
_DEPS = re.compile(r"^Action Dependency\s*:\s*(?P<body>.*)$", re.I)
_DEPS_PROSE = re.compile(r"^The action before the arrow must be completed.*?:\s*(?P<body>.*)$", re.I)
_TC = re.compile(r"^Time Constraints\s*:\s*(?P<body>.*)$", re.I)
_TC_PROSE = re.compile(
    r"^Step\s+(?P<succ>\d+)\s+must be performed within\s+(?P<gap>\d+(?:\.\d+)?)\s*min\s+"
    r"after\s+Step\s+(?P<pred>\d+)\s+is finished\.?\s*$", re.I)
_RES = re.compile(r"^Steps?\s+[\d,\s]+\s+requires?\s+\S+")
_RES_PROSE = re.compile(r"^The following actions would occupy.*?:\s*(?P<body>Steps?\s+.*)$", re.I)
_RES_ITEM = re.compile(r"Steps?\s+(?P<steps>\d+(?:\s*,\s*\d+)*)\s+requires?\s+(?P<kind>[A-Za-z][\w-]*)")
_COND = re.compile(r"^Resource Conditions\s*:\s*(?P<body>.*)$", re.I)
_COND_ITEM = re.compile(
    r"^step\s+(?P<step>\d+)\s+(?P<verb>sets|requires)\s+(?P<kind>[A-Za-z][\w-]*)\s+(?P<props>.+)$", re.I)
_EDGE = re.compile(r"^(?P<a>\d+)\s*-+>?\s*(?P<b>\d+)(?:\s*\((?P<gap>\d+(?:\.\d+)?)\s*min\))?$")
_IGNORED = re.compile(
    r"^(-\s|You can minimize|Do not violate|Thoughts on the recipe|#)", re.I)


def _minutes_to_seconds(text: str, lineno: int, col: int) -> int:
    value = float(text) * 60
    if value != int(value):
        raise RecipeParseError(f"duration {text} min is not a whole number of seconds", lineno, col)
    return int(value)


def _int_list(body: str, lineno: int, col: int) -> list[int]:
    body = body.strip().rstrip(".")
    body = re.sub(r"^steps?\s+", "", body, flags=re.I)
    out = []
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        if not part.isdigit():
            raise RecipeParseError(f"expected a step number, got {part!r}", lineno, col)
        out.append(int(part))
    return out


def _edges(body: str, lineno: int, col: int, with_gap: bool):
    body = body.strip().rstrip(".")
    out = []
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        m = _EDGE.match(part)
        if not m or (with_gap and m["gap"] is None) or (not with_gap and m["gap"] is not None):
            raise RecipeParseError(f"malformed edge {part!r}", lineno, col + body.find(part))
        gap = _minutes_to_seconds(m["gap"], lineno, col) if with_gap else None
        out.append((int(m["a"]), int(m["b"]), gap))
    return out


def _props(text: str, lineno: int, col: int) -> dict[str, str]:
    out = {}
    for item in text.replace(",", " ").split():
        if "=" not in item:
            raise RecipeParseError(f"expected name=value, got {item!r}", lineno, col)
        k, v = item.split("=", 1)
        if not k or not v:
            raise RecipeParseError(f"expected name=value, got {item!r}", lineno, col)
        out[k] = v
    return out


def parse_recipe(text: str) -> Recipe:
    """Parse one recipe document into a :class:`Recipe`."""
    name = None
    steps: list[tuple[int, int, str, int]] = []
    interruptible: list[tuple[int, int]] = []
    autonomous: list[tuple[int, int]] = []
    deps: list[tuple[int, int, int]] = []
    tcs: list[tuple[int, int, int, int]] = []
    res: list[tuple[int, str, int]] = []
    conds: list[tuple[int, str, str, dict, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        col = len(raw) - len(raw.lstrip()) + 1
        if not line:
            continue
        if m := _HEADER.match(line):
            if name is not None:
                raise RecipeParseError("more than one recipe header", lineno, col)
            name = m["name"]
        elif m := _STEP.match(line):
            steps.append((int(m["idx"]), _minutes_to_seconds(m["dur"], lineno, col), m["text"].strip(), lineno))
        elif m := _INTERRUPT.match(line):
            interruptible += [(i, lineno) for i in _int_list(m["body"], lineno, col)]
        elif m := _AUTO.match(line):
            autonomous += [(i, lineno) for i in _int_list(m["body"], lineno, col)]
        elif m := (_DEPS.match(line) or _DEPS_PROSE.match(line)):
            deps += [(a, b, lineno) for a, b, _ in _edges(m["body"], lineno, col, with_gap=False)]
        elif m := _TC.match(line):
            tcs += [(a, b, g, lineno) for a, b, g in _edges(m["body"], lineno, col, with_gap=True)]
        elif m := _TC_PROSE.match(line):
            tcs.append((int(m["pred"]), int(m["succ"]), _minutes_to_seconds(m["gap"], lineno, col), lineno))
        elif m := _COND.match(line):
            for clause in m["body"].strip().rstrip(".").split(";"):
                clause = clause.strip()
                if not clause:
                    continue
                cm = _COND_ITEM.match(clause)
                if not cm:
                    raise RecipeParseError(f"malformed resource condition {clause!r}", lineno, col)
                conds.append((int(cm["step"]), cm["kind"], cm["verb"].lower(),
                              _props(cm["props"], lineno, col), lineno))
        elif _RES.match(line) or _RES_PROSE.match(line):
            body = line
            if pm := _RES_PROSE.match(line):
                body = pm["body"]
            items = list(_RES_ITEM.finditer(body))
            if not items:
                raise RecipeParseError("malformed resource line", lineno, col)
            for it in items:
                for s in _int_list(it["steps"], lineno, col):
                    res.append((s, it["kind"], lineno))
        elif m := _AUTO_PROSE.search(line):
            autonomous += [(i, lineno) for i in _int_list(m["body"], lineno, col)]
            if pm := _INTERRUPT_PROSE.search(line):
                interruptible += [(i, lineno) for i in _int_list(pm["body"], lineno, col)]
        elif m := _INTERRUPT_PROSE.search(line):
            interruptible += [(i, lineno) for i in _int_list(m["body"], lineno, col)]
        elif _IGNORED.match(line) or line.startswith("But other actions"):
            continue
        else:
            raise RecipeParseError(f"unrecognized line {line!r}", lineno, col)

    if name is None:
        raise RecipeParseError("missing recipe header", 1, 1)
    if any(c in name for c in "(),"):
        raise RecipeParseError(f"recipe name {name!r} may not contain parentheses or commas", 1, 1)
    if not steps:
        raise RecipeParseError("recipe has no steps", 1, 1)
    for pos, (idx, _, _, lineno) in enumerate(steps):
        if idx != pos:
            if idx < pos and any(s[0] == idx for s in steps[:pos]):
                raise RecipeParseError(f"duplicate step {idx}", lineno, 1)
            raise RecipeParseError(f"step numbering must be dense and ascending; expected {pos}, got {idx}",
                                   lineno, 1)
    n = len(steps)

    def check(i, lineno, what):
        if not 0 <= i < n:
            raise RecipeParseError(f"{what} refers to step {i} but the recipe has {n} steps", lineno, 1)

    for i, ln in interruptible:
        check(i, ln, "interruptible list")
    for i, ln in autonomous:
        check(i, ln, "autonomous list")
    for a, b, ln in deps:
        check(a, ln, "dependency")
        check(b, ln, "dependency")
    for a, b, _, ln in tcs:
        check(a, ln, "time constraint")
        check(b, ln, "time constraint")
    for s, _, ln in res:
        check(s, ln, "resource line")

    req: dict[int, dict[str, dict[str, dict]]] = {}
    for s, kind, _ in res:
        req.setdefault(s, {}).setdefault(kind, {"requires": {}, "sets": {}})
    for s, kind, verb, props, ln in conds:
        check(s, ln, "resource condition")
        if kind not in req.get(s, {}):
            raise RecipeParseError(f"resource condition for step {s} names {kind}, which the step does not require",
                                   ln, 1)
        req[s][kind][verb].update(props)

    auto = {i for i, _ in autonomous}
    intr = {i for i, _ in interruptible}
    actions = []
    for idx, dur, desc, _ in steps:
        reqs = tuple(
            ResourceRequirement.make(kind, c["requires"], c["sets"])
            for kind, c in req.get(idx, {}).items())
        actions.append(Action(
            index=idx, description=desc, duration=dur,
            concurrency=Concurrency.AUTONOMOUS if idx in auto else Concurrency.CONTINUOUS,
            interruptible=idx in intr, resources=reqs))
    return Recipe(
        name=name,
        actions=tuple(actions),
        dependencies=frozenset((a, b) for a, b, _ in deps),
        time_constraints=tuple(TimeConstraint(a, b, g) for a, b, g, _ in tcs),
    )


def _join(ints) -> str:
    return ", ".join(str(i) for i in ints)


def _fmt_props(pairs) -> str:
    return " ".join(f"{k}={v}" for k, v in pairs)


def render_recipe(recipe: Recipe, mode: RenderMode | str = RenderMode.FULL, number: int = 1) -> str:
    mode = RenderMode(mode)
    lines = [f"## Recipe {number}:{recipe.name}"]
    for a in recipe.actions:
        lines.append(f"Step {a.index} ({fmt_minutes(a.duration)} min): {a.description}")
    intr = [a.index for a in recipe.actions if a.interruptible]
    auto = [a.index for a in recipe.actions if a.autonomous]
    if intr:
        lines.append(f"Interruptible steps: {_join(intr)}.")
    if auto and mode is RenderMode.FULL:
        lines.append(f"Autonomous actions: step {_join(auto)}.")
    if recipe.dependencies:
        edges = sorted(recipe.dependencies, key=lambda e: (e[1], e[0]))
        lines.append("Action Dependency: " + ", ".join(f"{a}->{b}" for a, b in edges) + ".")
    if recipe.time_constraints:
        lines.append("Time Constraints: " + ", ".join(
            f"{c.pred}->{c.succ} ({fmt_minutes(c.max_gap)} min)" for c in recipe.time_constraints) + ".")
    if mode is RenderMode.FULL:
        by_kind: dict[str, list[int]] = {}
        conds = []
        for a in recipe.actions:
            for r in a.resources:
                by_kind.setdefault(r.kind, []).append(a.index)
                if r.establishes:
                    conds.append(f"step {a.index} sets {r.kind} {_fmt_props(r.establishes)}")
                if r.required:
                    conds.append(f"step {a.index} requires {r.kind} {_fmt_props(r.required)}")
        if by_kind:
            parts = []
            for kind, steps in by_kind.items():
                verb = "requires" if len(steps) == 1 else "require"
                parts.append(f"Steps {_join(steps)} {verb} {kind}")
            lines.append(", ".join(parts) + ".")
        if conds:
            lines.append("Resource Conditions: " + "; ".join(conds) + ".")
    return "\n".join(lines) + "\n"


def render_instance(instance: Instance, mode: RenderMode | str = RenderMode.FULL) -> str:
    return "\n".join(render_recipe(r, mode, i) for i, r in enumerate(instance.recipes, start=1))


# -- commands -----------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    recipe: str
    step: int
    exec_time: int
    at: int

    def __str__(self):
        return f"Step({self.step}, {self.recipe}, {fmt_hms(self.exec_time)}, {fmt_hms(self.at)})"

    @property
    def key(self):
        return (self.recipe, self.step)


@dataclass(frozen=True)
class Finish:
    def __str__(self):
        return "Finish"


Command = Step | Finish

_TS = r"\d+:\d{1,2}:\d{1,2}"
_CMD = re.compile(
    rf"^Step\(\s*(?P<step>-?\d+)\s*,\s*(?P<recipe>[^,()]*?)\s*,\s*(?P<exec>{_TS})\s*,\s*(?P<at>{_TS})\s*\)$")


def parse_timestamp(text: str) -> int:
    """``HH:MM:SS`` (padding optional, no day rollover) to seconds."""
    m = re.fullmatch(r"\s*(\d+):(\d{1,2}):(\d{1,2})\s*", text)
    if not m:
        raise CommandParseError(f"malformed timestamp {text!r}")
    h, mi, s = (int(g) for g in m.groups())
    if mi >= 60 or s >= 60:
        raise CommandParseError(f"malformed timestamp {text!r}")
    return h * 3600 + mi * 60 + s


def parse_command(text: str) -> Command:
    text = text.strip()
    if text == "Finish":
        return Finish()
    m = _CMD.match(text)
    if not m:
        raise CommandParseError(f"malformed command {text!r}; expected Step(step_num, recipe_name, time, timestamp)")
    if not m["recipe"]:
        raise CommandParseError("missing recipe name")
    exec_time = parse_timestamp(m["exec"])
    if exec_time <= 0:
        raise CommandParseError("execution time must be positive")
    return Step(recipe=m["recipe"], step=int(m["step"]), exec_time=exec_time, at=parse_timestamp(m["at"]))


def parse_plan_text(text: str) -> list[Command]:
    """One command per line; blank lines and ``#`` comments are skipped."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(parse_command(line))
        except CommandParseError as exc:
            raise CommandParseError(f"line {lineno}: {exc}") from None
    return out


# -- JSON interchange -----------------------------------------------------------

FORMAT_VERSION = 1


def recipe_to_dict(r: Recipe) -> dict:
    return {
        "name": r.name,
        "actions": [
            {
                "index": a.index,
                "description": a.description,
                "duration": a.duration,
                "concurrency": a.concurrency.value,
                "interruptible": a.interruptible,
                "resources": [
                    {"kind": q.kind, "requires": dict(q.required), "sets": dict(q.establishes)}
                    for q in a.resources
                ],
            }
            for a in r.actions
        ],
        "dependencies": [list(e) for e in sorted(r.dependencies)],
        "time_constraints": [
            {"pred": c.pred, "succ": c.succ, "max_gap": c.max_gap} for c in r.time_constraints
        ],
    }


def recipe_from_dict(d: dict) -> Recipe:
    return Recipe(
        name=d["name"],
        actions=tuple(
            Action(
                index=a["index"],
                description=a["description"],
                duration=int(a["duration"]),
                concurrency=Concurrency(a.get("concurrency", "continuous")),
                interruptible=bool(a.get("interruptible", False)),
                resources=tuple(
                    ResourceRequirement.make(q["kind"], q.get("requires"), q.get("sets"))
                    for q in a.get("resources", ())),
            )
            for a in d["actions"]),
        dependencies=frozenset(tuple(e) for e in d.get("dependencies", ())),
        time_constraints=tuple(
            TimeConstraint(c["pred"], c["succ"], int(c["max_gap"])) for c in d.get("time_constraints", ())),
    )


def instance_to_dict(inst: Instance) -> dict:
    return {
        "format": "tmsched-instance",
        "version": FORMAT_VERSION,
        "time_unit": "seconds",
        "recipes": [recipe_to_dict(r) for r in inst.recipes],
        "inventory": dict(inst.inventory),
    }


def instance_from_dict(d: dict) -> Instance:
    if d.get("format") != "tmsched-instance":
        raise ValueError("not an instance document")
    return Instance(tuple(recipe_from_dict(r) for r in d["recipes"]),
                    tuple(d.get("inventory", {}).items()))


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=False) + "\n"


def loads_instance(text: str) -> Instance:
    return instance_from_dict(json.loads(text))


def load_instance(path: str | Path) -> Instance:
    """Load an instance from a JSON document or from one or more DSL recipes.

    DSL files may hold several recipe documents, each starting with a
    ``## Recipe`` header.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return loads_instance(text)
    from .model import combine
    return combine(parse_recipes(text))


def parse_recipes(text: str) -> list[Recipe]:
    chunks: list[list[str]] = []
    for line in text.splitlines():
        if _HEADER.match(line.strip()):
            chunks.append([])
        if chunks:
            chunks[-1].append(line)
        elif line.strip():
            raise RecipeParseError("text before the first recipe header", 1, 1)
    if not chunks:
        raise RecipeParseError("missing recipe header", 1, 1)
    return [parse_recipe("\n".join(c)) for c in chunks]
