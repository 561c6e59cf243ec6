"""Discrete-event kitchen environment.

A session is an immutable :class:`SimState`; :func:`apply` returns a new state
plus the feedback for one agent command.  The agent clock only moves forward:
a Step command at time ``at`` first waits until ``at``; a continuous step then
occupies the agent until ``at + exec_time`` while an autonomous step leaves
the clock at ``at``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from .dsl import Command, CommandParseError, Finish, Step, parse_command
from .model import ActionKey, Instance, InvalidInstanceError, fmt_hms, fmt_minutes


class ErrorKind(str, Enum):
    WRONG_RECIPE = "WrongRecipe"
    WRONG_ACTION = "WrongAction"
    TIME_ERROR = "TimeError"
    INFEASIBLE_MULTITASK = "InfeasibleMultitask"
    OBJECT_OCCUPANCY = "ObjectOccupancy"
    OBJECT_CONDITION = "ObjectCondition"
    DEPENDENCY = "Dependency"
    REPEATED_ACTION = "RepeatedAction"
    TIME_CONSTRAINT = "TimeConstraint"
    ACTION_DURATION = "ActionDuration"
    INTERRUPTIBILITY = "Interruptibility"
    INCOMPLETE = "Incomplete"


class FailureReason(str, Enum):
    TIME_CONSTRAINT_VIOLATION = "TimeConstraintViolation"
    MAX_REVISIONS = "MaxRevisions"
    REPEAT_LOOP = "RepeatLoop"
    AGENT_ABORTED = "AgentAborted"


@dataclass(frozen=True)
class Outcome:
    status: str = "pending"  # pending | success | failure
    reason: FailureReason | None = None

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def decided(self) -> bool:
        return self.status != "pending"

    def __str__(self):
        if self.status == "failure":
            return f"Failure({self.reason.value})"
        return self.status.capitalize()


PENDING = Outcome()
SUCCESS = Outcome("success")


def failure(reason: FailureReason) -> Outcome:
    return Outcome("failure", reason)


@dataclass(frozen=True)
class SessionConfig:
    hints: bool = False
    max_revisions: int = 10
    repeat_limit: int = 3


@dataclass(frozen=True)
class Segment:
    start: int
    end: int

    def __len__(self):
        return self.end - self.start


@dataclass(frozen=True)
class Progress:
    executed: int = 0
    segments: tuple[Segment, ...] = ()
    completed_at: int | None = None

    @property
    def first_start(self) -> int | None:
        return self.segments[0].start if self.segments else None


@dataclass(frozen=True)
class Hold:
    kind: str
    start: int
    end: int
    key: ActionKey
    signature: tuple


class _Index:
    """Per-instance lookup tables shared by every state of a session."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.recipes = {r.name: r for r in instance.recipes}
        self.keys = instance.keys()
        self.actions = {k: instance.action(k) for k in self.keys}
        self.preds = {(r.name, a.index): [(r.name, p) for p in r.predecessors(a.index)]
                      for r in instance.recipes for a in r.actions}
        self.succs = {(r.name, a.index): r.successors(a.index)
                      for r in instance.recipes for a in r.actions}
        self.tcs = sorted(((r.name, c.pred), (r.name, c.succ), c.max_gap)
                          for r in instance.recipes for c in r.time_constraints)
        self.capacity = dict(instance.inventory)
        self.kinds = instance.kinds
        self.preheatable = {q.kind for a in self.actions.values() for q in a.resources if q.establishes}
        self.establishers = {}
        for k, a in self.actions.items():
            for q in a.resources:
                if q.establishes:
                    self.establishers.setdefault(q.kind, []).append(k)


@dataclass(frozen=True)
class SimState:
    index: _Index = field(repr=False, compare=False)
    config: SessionConfig
    clock: int = 0
    progress: dict = field(default_factory=dict)
    holds: tuple[Hold, ...] = ()
    revision_count: int = 0
    repeat_counts: dict = field(default_factory=dict)
    outcome: Outcome = PENDING
    history: tuple[Step, ...] = ()

    @property
    def instance(self) -> Instance:
        return self.index.instance

    def prog(self, key: ActionKey) -> Progress:
        return self.progress.get(key, _EMPTY)

    def remaining(self, key: ActionKey) -> int:
        return self.index.actions[key].duration - self.prog(key).executed

    def is_done(self, key: ActionKey) -> bool:
        return self.prog(key).completed_at is not None

    def completed_by(self, key: ActionKey, t: int) -> bool:
        c = self.prog(key).completed_at
        return c is not None and c <= t

    def all_done(self) -> bool:
        return all(self.is_done(k) for k in self.index.keys)

    def running_autonomous(self, t: int | None = None) -> list[tuple[ActionKey, int]]:
        t = self.clock if t is None else t
        out = []
        for k, p in self.progress.items():
            if self.index.actions[k].autonomous and p.segments:
                seg = p.segments[0]
                if seg.start <= t < seg.end:
                    out.append((seg.start, k, seg.end))
        return [(k, end) for _, k, end in sorted(out)]

    def makespan(self) -> int:
        return max((p.segments[-1].end for p in self.progress.values() if p.segments), default=0)

    def condition(self, kind: str, t: int) -> tuple:
        """Condition of ``kind`` established by actions completed at or before ``t``."""
        best = None
        for k in self.index.establishers.get(kind, ()):
            c = self.prog(k).completed_at
            if c is not None and c <= t and (best is None or (c, k) > best[:2]):
                best = (c, k, self.index.actions[k].requirement(kind).establishes)
        return best[2] if best else ()


_EMPTY = Progress()


@dataclass(frozen=True)
class Feedback:
    ok: bool
    message: str
    kind: ErrorKind | None = None
    observation: str = ""
    hint: str | None = None

    @property
    def text(self) -> str:
        if self.ok and self.observation:
            return f"{self.message} {self.observation}"
        return self.message


class SessionClosedError(RuntimeError):
    pass


def new_session(instance: Instance, config: SessionConfig | None = None) -> SimState:
    violations = instance.validate()
    if violations:
        raise InvalidInstanceError(violations)
    return SimState(index=_Index(instance), config=config or SessionConfig())


# -- rendering --------------------------------------------------------------------

def _fmt_value(v: str) -> str:
    try:
        return str(float(v))
    except ValueError:
        return v


def _fmt_condition(cond: tuple) -> str:
    if not cond:
        return "not preheated"
    return ", ".join(f"{k} {v}" for k, v in cond)


def _names(names: list[str]) -> str:
    if len(names) <= 1:
        return "".join(names)
    return ", ".join(names[:-1]) + " and " + names[-1]


def render_status(state: SimState, t: int | None = None) -> str:
    t = state.clock if t is None else t
    objs = []
    for kind in state.index.kinds:
        holders = [h for h in state.holds if h.kind == kind and h.start <= t < h.end]
        text = f"{kind} is {'' if holders else 'not '}occupied"
        cond = next((h.signature for h in holders if h.signature), None)
        if cond is None:
            cond = state.condition(kind, t)
        if cond:
            text += ", " + ", ".join(f"{k} is {_fmt_value(v)}" for k, v in cond)
        elif kind in state.index.preheatable:
            text += ", is not preheated"
        objs.append(text)
    out = f"The current timestamp is {fmt_hms(t, padded=False)}. Status of physical objects: " + "; ".join(objs)
    running = state.running_autonomous(t)
    if running:
        out += "; You are currently executing the following autonomous actions: " + ", ".join(
            f"step {k[1]} of {k[0]} (will finish at {fmt_hms(end, padded=False)})" for k, end in running)
    return out


def initial_observation(state: SimState) -> str:
    return render_status(state)


# -- checks -------------------------------------------------------------------------

def _occupancy_ok(state: SimState, kind: str, start: int, end: int, sig: tuple, key: ActionKey) -> bool:
    cap = state.index.capacity.get(kind, 1)
    overlapping = [h for h in state.holds if h.kind == kind and h.start < end and start < h.end and h.key != key]
    if not overlapping:
        return True
    points = {start} | {h.start for h in overlapping if start < h.start < end}
    for p in points:
        groups = set()
        for h in overlapping:
            if h.start <= p < h.end:
                groups.add(h.signature if h.signature else ("#", h.key))
        groups.add(sig if sig else ("#", key))
        if len(groups) > cap:
            return False
    return True


def _violation(state: SimState, cmd: Step) -> tuple[ErrorKind, str] | None:
    idx = state.index
    recipe = idx.recipes.get(cmd.recipe)
    if recipe is None:
        return ErrorKind.WRONG_RECIPE, (
            f"Recipe {cmd.recipe} is not one of our goals. Please select actions from our recipes "
            f"{_names(state.instance.names)}")
    if not 0 <= cmd.step < len(recipe.actions):
        return ErrorKind.WRONG_ACTION, f"There is no step {cmd.step} in recipe {cmd.recipe}."
    key = (cmd.recipe, cmd.step)
    action = idx.actions[key]
    if cmd.at < state.clock:
        if not action.autonomous:
            for k, p in state.progress.items():
                if idx.actions[k].autonomous:
                    continue
                for seg in p.segments:
                    if seg.start <= cmd.at < seg.end:
                        return ErrorKind.INFEASIBLE_MULTITASK, (
                            f"You can not perform step {cmd.step} of Recipe {cmd.recipe} and step {k[1]} "
                            f"of Recipe {k[0]} simultaneously since they are all continuous actions.")
        return ErrorKind.TIME_ERROR, (
            f"The current time is {fmt_hms(state.clock)}. "
            "You can not perform any actions before the current timestamp.")
    if state.is_done(key):
        succ = idx.succs[key]
        nxt = succ[0] if succ else cmd.step
        return ErrorKind.REPEATED_ACTION, (
            f"Prerequisite step {cmd.step} is already used for the next action step {nxt} in recipe "
            f"{cmd.recipe}. You should not execute the same step twice. If you insist, please complete all "
            "the previous steps first.")
    for p in idx.preds[key]:
        done = state.prog(p).completed_at
        if done is None or done > cmd.at:
            msg = (f"Step {cmd.step} of recipe {cmd.recipe} can not be performed because prerequisite step "
                   f"{p[1]} is not completed.")
            if done is not None:
                msg += f" (The expected finish time is {fmt_hms(done)})"
            return ErrorKind.DEPENDENCY, msg
    remaining = state.remaining(key)
    if cmd.exec_time > remaining:
        return ErrorKind.ACTION_DURATION, (
            f"Your plan execution time {fmt_minutes(cmd.exec_time)} min exceeds the time needed to perform "
            "the action.")
    if cmd.exec_time < remaining and not action.interruptible:
        return ErrorKind.INTERRUPTIBILITY, (
            f"Step {cmd.step} of Recipe {cmd.recipe} is not interruptable. You should finish the action in "
            "one go.")
    end = cmd.at + cmd.exec_time
    for req in action.resources:
        if not _occupancy_ok(state, req.kind, cmd.at, end, req.signature, key):
            return ErrorKind.OBJECT_OCCUPANCY, f"Object {req.kind} is currently occupied."
    for req in action.resources:
        if req.required:
            have = state.condition(req.kind, cmd.at)
            if not set(req.required) <= set(have):
                return ErrorKind.OBJECT_CONDITION, (
                    f"The Property of the Object is {_fmt_condition(have)}, but step {cmd.step} of recipe "
                    f"{cmd.recipe} needs {_fmt_condition(req.required)}.")
    return None


def _deadline_violation(state: SimState, now: int):
    for x, y, gap in state.index.tcs:
        done = state.prog(x).completed_at
        if done is None:
            continue
        start = state.prog(y).first_start
        deadline = done + gap
        if (start is not None and start > deadline) or (start is None and now > deadline):
            return x, y, gap
    return None


def _commit(state: SimState, cmd: Step) -> SimState:
    key = cmd.key
    action = state.index.actions[key]
    old = state.prog(key)
    end = cmd.at + cmd.exec_time
    executed = old.executed + cmd.exec_time
    progress = dict(state.progress)
    progress[key] = Progress(
        executed=executed,
        segments=old.segments + (Segment(cmd.at, end),),
        completed_at=end if executed == action.duration else None,
    )
    holds = state.holds + tuple(Hold(r.kind, cmd.at, end, key, r.signature) for r in action.resources)
    clock = cmd.at if action.autonomous else end
    return replace(state, clock=clock, progress=progress, holds=holds, history=state.history + (cmd,))


def try_step(state: SimState, cmd: Step) -> SimState | None:
    """Apply a Step if it is valid and breaks no deadline; otherwise ``None``.

    This is the fast path used by the schedulers: no feedback text is built.
    """
    if _violation(state, cmd) is not None:
        return None
    nxt = _commit(state, cmd)
    if _deadline_violation(nxt, nxt.clock) is not None:
        return None
    return nxt


def wait_violates(state: SimState, t: int) -> bool:
    """Would advancing the clock to ``t`` miss a deadline?"""
    return _deadline_violation(state, t) is not None


def finish_state(state: SimState) -> SimState:
    return replace(state, clock=max(state.clock, state.makespan()), outcome=SUCCESS)


def _reject(state: SimState, kind: ErrorKind, message: str, key=None) -> tuple[SimState, Feedback]:
    revisions = state.revision_count + 1
    repeats = dict(state.repeat_counts)
    outcome = PENDING
    if key is not None:
        repeats[key] = repeats.get(key, 0) + 1
    if revisions >= state.config.max_revisions:
        outcome = failure(FailureReason.MAX_REVISIONS)
    elif key is not None and repeats[key] >= state.config.repeat_limit:
        outcome = failure(FailureReason.REPEAT_LOOP)
    new = replace(state, revision_count=revisions, repeat_counts=repeats, outcome=outcome)
    return new, Feedback(ok=False, message=message, kind=kind)


def apply(state: SimState, command: Command) -> tuple[SimState, Feedback]:
    if state.outcome.decided:
        raise SessionClosedError(f"session already ended with {state.outcome}")
    if isinstance(command, Finish):
        missing = [k for k in state.index.keys if not state.is_done(k)]
        if missing:
            return _reject(state, ErrorKind.INCOMPLETE,
                           "You have not completed all the recipes. The following actions are not completed: "
                           + "; ".join(f"step {k[1]} of {k[0]}" for k in missing) + ".")
        new = finish_state(state)
        return new, Feedback(ok=True, message="All recipes are completed.", observation=render_status(new))
    v = _violation(state, command)
    if v is not None:
        return _reject(state, v[0], v[1], key=command.key)
    new = _commit(state, command)
    autonomous = state.index.actions[command.key].autonomous
    missed = _deadline_violation(new, new.clock)
    if missed is not None:
        x, y, gap = missed
        new = replace(new, outcome=failure(FailureReason.TIME_CONSTRAINT_VIOLATION))
        return new, Feedback(
            ok=False, kind=ErrorKind.TIME_CONSTRAINT,
            message=(f"The time interval between Step {x[1]} and Step {y[1]} in Recipe {x[0]} exceeds the "
                     f"allowed time limit {fmt_minutes(gap)} min."))
    msg = "Autonomous action started successfully." if autonomous else "Continuous action executed successfully."
    hint = render_hint(new) if state.config.hints else None
    return new, Feedback(ok=True, message=msg, observation=render_status(new), hint=hint)


def apply_text(state: SimState, line: str) -> tuple[SimState, Feedback, Command | None]:
    """Parse one raw agent line and apply it; unparseable lines count as revisions."""
    try:
        cmd = parse_command(line)
    except CommandParseError:
        new, fb = _reject(state, ErrorKind.WRONG_ACTION,
                          f"Your action {line.strip()!r} is not a valid action. Please write your action as "
                          "Step(step_num, recipe_name, time, timestamp) or Finish.")
        return new, fb, None
    new, fb = apply(state, cmd)
    return new, fb, cmd


# -- executable actions -------------------------------------------------------------

def executable_actions(state: SimState, at: int | None = None) -> list[tuple[ActionKey, int]]:
    """Unfinished, not running actions whose prerequisites are all scheduled, with earliest start."""
    at = state.clock if at is None else max(at, state.clock)
    idx = state.index
    out = []
    for key in idx.keys:
        if state.is_done(key):
            continue
        times = [state.prog(p).completed_at for p in idx.preds[key]]
        if any(t is None for t in times):
            continue
        est = max([at, *times])
        action = idx.actions[key]
        length = state.remaining(key)
        candidates = sorted({est} | {h.end for h in state.holds if h.end > est})
        start = None
        for s in candidates:
            if all(_occupancy_ok(state, r.kind, s, s + length, r.signature, key) for r in action.resources):
                start = s
                break
        if start is not None:
            out.append((key, start))
    out.sort(key=lambda kv: (kv[1], kv[0]))
    return out


def render_hint(state: SimState) -> str | None:
    ready = executable_actions(state)
    if not ready:
        return None
    groups: dict[int, list[ActionKey]] = {}
    for key, t in ready:
        groups.setdefault(t, []).append(key)
    return " ".join(
        f"The following actions are ready to be executed after {fmt_hms(t)}, "
        + ", ".join(f"Step {k[1]} of Recipe {k[0]}" for k in keys) + "."
        for t, keys in groups.items())


# -- replay -------------------------------------------------------------------------

@dataclass(frozen=True)
class Transcript:
    instance: Instance
    initial_observation: str
    entries: tuple[tuple[str, Feedback], ...]
    state: SimState

    @property
    def outcome(self) -> Outcome:
        return self.state.outcome

    @property
    def clock(self) -> int:
        return self.state.clock

    def render(self) -> str:
        lines = [f"OBS {self.initial_observation}"]
        for cmd, fb in self.entries:
            lines.append(f"CMD {cmd}")
            lines.append(("OK  " if fb.ok else f"ERR[{fb.kind.value}] ") + fb.text)
            if fb.hint:
                lines.append(f"HINT {fb.hint}")
        lines.append(f"END {self.outcome} at {fmt_hms(self.clock)}")
        return "\n".join(lines) + "\n"


def replay(instance: Instance, commands: Iterable[Command | str], config: SessionConfig | None = None) -> Transcript:
    state = new_session(instance, config)
    first = initial_observation(state)
    entries = []
    for cmd in commands:
        if state.outcome.decided:
            break
        if isinstance(cmd, str):
            state, fb, _ = apply_text(state, cmd)
        else:
            state, fb = apply(state, cmd)
        entries.append((str(cmd).strip(), fb))
    return Transcript(instance, first, tuple(entries), state)
