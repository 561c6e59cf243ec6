"""Schedulers: priority-list DFS heuristic, greedy baseline, and exact branch-and-bound.

All three search the same event-aligned space.  A search node is a simulator
state plus the agent-free time ``t``.  From a node the agent may

* start an autonomous action at ``t``,
* run a continuous action at ``t`` for its full remaining time, or, when it
  is interruptible, only until one of the upcoming event times,
* wait until the next event time.

Event times are completions of running autonomous actions, resource
releases, and "latest starts": for a pending constraint ``X -> Y`` with
``X`` not started, the latest start of ``X`` that still lets it finish when
``Y`` could otherwise begin.  Feasibility of every move is decided by
:func:`tmsched.sim.try_step`.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

from .dsl import Finish, Step, parse_plan_text
from .model import ActionKey, Instance, fmt_hms
from .sim import (
    FailureReason,
    Outcome,
    SessionConfig,
    SimState,
    Transcript,
    _violation,
    apply,
    failure,
    initial_observation,
    new_session,
    replay,
    try_step,
    wait_violates,
)


class NoFeasiblePlan(RuntimeError):
    def __init__(self, message="No feasible schedule found."):
        super().__init__(message)


class InstanceTooLarge(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    def __init__(self, best: "Plan | None"):
        self.best = best
        super().__init__("time budget exceeded" + (f"; best makespan so far {fmt_hms(best.makespan)}"
                                                   if best else ""))


@dataclass(frozen=True)
class ScheduleEntry:
    recipe: str
    step: int
    start: int
    exec_time: int

    @property
    def key(self) -> ActionKey:
        return (self.recipe, self.step)

    def command(self) -> Step:
        return Step(self.recipe, self.step, self.exec_time, self.start)

    @property
    def end(self) -> int:
        return self.start + self.exec_time


@dataclass(frozen=True)
class Plan:
    entries: tuple[ScheduleEntry, ...]
    makespan: int
    time_constraints: bool = True
    optimal: bool = False

    def commands(self):
        return [e.command() for e in self.entries] + [Finish()]

    def to_text(self) -> str:
        return "\n".join(str(c) for c in self.commands()) + "\n"

    def __len__(self):
        return len(self.entries)


def _entry_order(instance: Instance):
    def key(e: ScheduleEntry):
        return (e.start, not instance.action(e.key).autonomous, e.recipe, e.step)
    return key


def plan_from_steps(instance: Instance, steps, time_constraints: bool = True, optimal: bool = False) -> Plan:
    entries = [ScheduleEntry(s.recipe, s.step, s.at, s.exec_time) for s in steps]
    entries.sort(key=_entry_order(instance))
    makespan = 0
    for e in entries:
        a = instance.action(e.key)
        makespan = max(makespan, e.start + (a.duration if a.autonomous else e.exec_time))
    return Plan(tuple(entries), makespan, time_constraints, optimal)


def plan_from_text(instance: Instance, text: str, time_constraints: bool = True) -> Plan:
    steps = [c for c in parse_plan_text(text) if isinstance(c, Step)]
    return plan_from_steps(instance, steps, time_constraints)


def plan_from_transcript(transcript: Transcript) -> Plan:
    return plan_from_steps(transcript.instance, transcript.state.history)


@dataclass(frozen=True)
class CheckResult:
    outcome: Outcome
    transcript: Transcript

    @property
    def success(self) -> bool:
        return self.outcome.success


def check_plan(instance: Instance, plan: Plan, config: SessionConfig | None = None) -> CheckResult:
    """Replay ``plan`` through the simulator; the only arbiter of feasibility."""
    target = instance if plan.time_constraints else instance.without_time_constraints()
    tr = replay(target, plan.commands(), config)
    return CheckResult(tr.outcome, tr)


# -- search helpers ------------------------------------------------------------------

class _Searcher:
    def __init__(self, instance: Instance):
        self.instance = instance
        self.root = new_session(instance)
        idx = self.root.index
        self.idx = idx
        self.keys = idx.keys
        self.actions = idx.actions
        self.order = []
        for r in instance.recipes:
            self.order += [(r.name, i) for i in r.topological_order()]
        self.ancestors = {}
        for r in instance.recipes:
            for a in r.actions:
                self.ancestors[(r.name, a.index)] = [(r.name, p) for p in sorted(r.prerequisites(a.index))]
        self.cont_ancestors = {k: [p for p in v if not self.actions[p].autonomous]
                               for k, v in self.ancestors.items()}
        self.tcs = idx.tcs
        self.action_list = self._action_list()

    def _action_list(self) -> list[ActionKey]:
        autos = sorted((k for k in self.keys if self.actions[k].autonomous),
                       key=lambda k: (-self.actions[k].duration, k))
        conts = [k for k in self.keys if not self.actions[k].autonomous]
        topo_pos = {k: i for i, k in enumerate(self.order)}
        placed: set = set()
        out = []
        for a in autos + conts:
            if a in placed:
                continue
            for p in sorted(self.ancestors[a], key=topo_pos.__getitem__):
                if p not in placed:
                    placed.add(p)
                    out.append(p)
            placed.add(a)
            out.append(a)
        return out

    # earliest finish ignoring the single agent and resources: a lower bound
    def finishes(self, s: SimState, t: int) -> dict:
        ef = {}
        for k in self.order:
            p = s.prog(k)
            if p.completed_at is not None:
                ef[k] = p.completed_at
                continue
            es = t
            for q in self.idx.preds[k]:
                es = max(es, ef[q])
            ef[k] = es + self.actions[k].duration - p.executed
        return ef

    def pending_work(self, s: SimState, keys) -> int:
        return sum(s.remaining(k) for k in keys if s.prog(k).completed_at is None)

    def doomed(self, s: SimState, t: int, ef: dict) -> bool:
        """Necessary-condition check: can every started deadline still be met?"""
        for x, y, gap in self.tcs:
            if s.prog(y).segments:
                continue
            done = s.prog(x).completed_at
            if done is None:
                continue
            es = t
            for q in self.idx.preds[y]:
                es = max(es, ef[q])
            es = max(es, t + self.pending_work(s, self.cont_ancestors[y]))
            if es > done + gap:
                return True
        return False

    def events(self, s: SimState, t: int, ef: dict) -> list[int]:
        ev = set()
        for p in s.progress.values():
            if p.completed_at is not None and p.completed_at > t:
                ev.add(p.completed_at)
        for h in s.holds:
            if h.end > t:
                ev.add(h.end)
        for x, y, _ in self.tcs:
            if s.prog(x).segments or s.prog(y).segments:
                continue
            es = t
            for q in self.idx.preds[y]:
                if q != x:
                    es = max(es, ef[q])
            latest = es - s.remaining(x)
            if latest > t:
                ev.add(latest)
        return sorted(ev)

    def ready(self, s: SimState, key: ActionKey, t: int) -> bool:
        if s.prog(key).completed_at is not None:
            return False
        return all(s.completed_by(p, t) for p in self.idx.preds[key])

    def moves(self, s: SimState, t: int, events: list[int], order, min_auto=None):
        """Yield successor states in search order; waiting comes last."""
        for key in order:
            if not self.ready(s, key, t):
                continue
            a = self.actions[key]
            rem = s.remaining(key)
            if a.autonomous:
                if min_auto is not None and key <= min_auto:
                    continue
                lengths = [rem]
            elif a.interruptible:
                lengths = [e - t for e in events if t < e < t + rem] + [rem]
            else:
                lengths = [rem]
            for length in lengths:
                nxt = try_step(s, Step(key[0], key[1], length, t))
                if nxt is not None:
                    yield nxt, nxt.clock, (key if a.autonomous else None)
        # with nothing in flight, idling only shifts the rest of the plan later
        busy = any(h.end > t for h in s.holds) or any(
            p.completed_at is not None and p.completed_at > t for p in s.progress.values())
        for e in events[:1]:
            if busy and not wait_violates(s, e):
                yield s, e, None

    @staticmethod
    def signature(s: SimState, t: int, tc_keys) -> tuple:
        return (t, tuple(sorted(
            (k, p.executed, p.completed_at, p.first_start if k in tc_keys else None)
            for k, p in s.progress.items())))


def heuristic_schedule(instance: Instance, respect_time_constraints: bool = True) -> Plan:
    """Priority-list depth-first search returning the first feasible plan.

    The priority list puts autonomous actions first, longest first, each
    preceded by its not-yet-listed prerequisites, then the continuous
    actions.  The search backtracks over the full event-aligned space, so it
    only fails when no feasible plan exists there.

    Without time constraints the constrained plan is also tried, since it is
    feasible for the relaxed instance; the shorter of the two is returned.
    """
    if respect_time_constraints:
        final = _first_feasible(instance)
        if final is None:
            raise NoFeasiblePlan()
        return plan_from_steps(instance, final.history)
    relaxed = instance.without_time_constraints()
    final = _first_feasible(relaxed)
    if final is None:
        raise NoFeasiblePlan()
    best = plan_from_steps(relaxed, final.history, time_constraints=False)
    if any(r.time_constraints for r in instance.recipes):
        strict = _first_feasible(instance)
        if strict is not None and strict.makespan() < best.makespan:
            best = plan_from_steps(relaxed, strict.history, time_constraints=False)
    return best


def _first_feasible(instance: Instance) -> SimState | None:
    sr = _Searcher(instance)
    tc_keys = {y for _, y, _ in sr.tcs}
    failed: set = set()

    def dfs(s: SimState, t: int):
        if s.all_done():
            return s
        sig = sr.signature(s, t, tc_keys)
        if sig in failed:
            return None
        ef = sr.finishes(s, t)
        if not sr.doomed(s, t, ef):
            for nxt, t2, _ in sr.moves(s, t, sr.events(s, t, ef), sr.action_list):
                found = dfs(nxt, t2)
                if found is not None:
                    return found
        failed.add(sig)
        return None

    return dfs(sr.root, 0)


@dataclass
class GreedyResult:
    plan: Plan
    transcript: Transcript

    @property
    def outcome(self) -> Outcome:
        return self.transcript.outcome

    @property
    def success(self) -> bool:
        return self.outcome.success


def greedy_schedule(instance: Instance) -> GreedyResult:
    """Keep the agent busy: at each event start every runnable autonomous action,
    then the runnable continuous action with the smallest key, run to completion.
    No lookahead, so deadlines may be missed."""
    state = new_session(instance)
    first = initial_observation(state)
    entries = []
    keys = state.index.keys
    actions = state.index.actions
    t = 0

    def runnable(k):
        if state.prog(k).completed_at is not None:
            return False
        return all(state.completed_by(p, t) for p in state.index.preds[k])

    def run(cmd):
        nonlocal state
        state, fb = apply(state, cmd)
        entries.append((str(cmd), fb))

    while not state.outcome.decided:
        progressed = False
        for k in keys:
            if actions[k].autonomous and runnable(k):
                cand = Step(k[0], k[1], actions[k].duration, t)
                if _violation(state, cand) is None:
                    run(cand)
                    progressed = True
                    if state.outcome.decided:
                        break
        if state.outcome.decided:
            break
        for k in keys:
            if not actions[k].autonomous and runnable(k):
                cand = Step(k[0], k[1], state.remaining(k), t)
                if _violation(state, cand) is None:
                    run(cand)
                    t = state.clock
                    progressed = True
                    break
        if state.outcome.decided:
            break
        if state.all_done():
            run(Finish())
            break
        if not progressed:
            later = [p.completed_at for p in state.progress.values()
                     if p.completed_at is not None and p.completed_at > t]
            later += [h.end for h in state.holds if h.end > t]
            if not later:
                state = replace(state, outcome=failure(FailureReason.AGENT_ABORTED))
                break
            t = min(later)
    tr = Transcript(instance, first, tuple(entries), state)
    return GreedyResult(plan_from_steps(instance, state.history), tr)


def optimal_schedule(instance: Instance, max_actions: int = 12, max_branch: int | None = None,
                     time_budget: float = 60.0) -> Plan:
    """Exact minimum-makespan plan over the event-aligned space (branch-and-bound).

    The incumbent starts at the heuristic plan, so the result never exceeds
    it.  Lower bound at a node: the larger of the precedence-only earliest
    finish of every action and ``t`` plus all remaining continuous work.
    """
    n = instance.n_actions
    if n > max_actions:
        raise InstanceTooLarge(f"instance has {n} actions; the exact solver is limited to {max_actions}")
    sr = _Searcher(instance)
    conts = [k for k in sr.keys if not sr.actions[k].autonomous]
    tc_keys = {y for _, y, _ in sr.tcs}
    try:
        incumbent = heuristic_schedule(instance)
        best = [incumbent.makespan, incumbent]
    except NoFeasiblePlan:
        best = [float("inf"), None]
    exact = [True]
    seen: dict = {}
    deadline = time.monotonic() + time_budget
    counter = [0]

    def lower_bound(s, t, ef):
        lb = max(ef.values(), default=0)
        return max(lb, t + sr.pending_work(s, conts), s.makespan())

    def dfs(s: SimState, t: int, min_auto):
        counter[0] += 1
        if counter[0] % 256 == 0 and time.monotonic() > deadline:
            raise _Timeout()
        if s.all_done():
            ms = s.makespan()
            if ms < best[0]:
                best[0] = ms
                best[1] = plan_from_steps(instance, s.history, optimal=True)
            return
        ef = sr.finishes(s, t)
        if lower_bound(s, t, ef) >= best[0] or sr.doomed(s, t, ef):
            return
        sig = (sr.signature(s, t, tc_keys), min_auto, s.makespan())
        if sig in seen:
            return
        seen[sig] = True
        branches = 0
        for nxt, t2, auto_key in sr.moves(s, t, sr.events(s, t, ef), sr.action_list, min_auto):
            if max_branch is not None and branches >= max_branch:
                exact[0] = False
                break
            branches += 1
            # several autonomous starts at one instant are explored in key order only
            dfs(nxt, t2, auto_key if (auto_key is not None and t2 == t) else None)

    try:
        dfs(sr.root, 0, None)
    except _Timeout:
        raise BudgetExceeded(best[1]) from None
    if best[1] is None:
        raise NoFeasiblePlan()
    plan = best[1]
    return Plan(plan.entries, plan.makespan, True, optimal=exact[0])


class _Timeout(Exception):
    pass
