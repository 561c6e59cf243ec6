"""Domain types for recipes, actions, constraints and multi-recipe instances."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

#: Kinds every kitchen has, listed first (in this order) in every observation.
KITCHEN_KINDS = ("oven", "microwave", "stove")

ActionKey = tuple[str, int]


class Concurrency(str, Enum):
    AUTONOMOUS = "autonomous"
    CONTINUOUS = "continuous"


class NameCollisionError(ValueError):
    pass


class InvalidInstanceError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _frozen_map(m: Mapping[str, str] | None) -> tuple[tuple[str, str], ...]:
    if not m:
        return ()
    return tuple(sorted((str(k), str(v)) for k, v in dict(m).items()))


@dataclass(frozen=True)
class ResourceRequirement:
    """A resource an action holds while it executes.

    Condition maps are stored as sorted ``(name, value)`` tuples so that
    requirements stay hashable and compare structurally.
    """

    kind: str
    required: tuple[tuple[str, str], ...] = ()
    establishes: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(cls, kind, required=None, establishes=None) -> "ResourceRequirement":
        return cls(kind, _frozen_map(required), _frozen_map(establishes))

    @property
    def signature(self) -> tuple[tuple[str, str], ...]:
        # holders with the same non-empty signature may share one unit
        return tuple(sorted(set(self.required) | set(self.establishes)))


@dataclass(frozen=True)
class Action:
    index: int
    description: str
    duration: int  # seconds
    concurrency: Concurrency = Concurrency.CONTINUOUS
    interruptible: bool = False
    resources: tuple[ResourceRequirement, ...] = ()

    @property
    def autonomous(self) -> bool:
        return self.concurrency is Concurrency.AUTONOMOUS

    def requirement(self, kind: str) -> ResourceRequirement | None:
        for r in self.resources:
            if r.kind == kind:
                return r
        return None


@dataclass(frozen=True)
class TimeConstraint:
    """``succ`` must start at most ``max_gap`` seconds after ``pred`` finishes."""

    pred: int
    succ: int
    max_gap: int


@dataclass(frozen=True)
class Recipe:
    name: str
    actions: tuple[Action, ...]
    dependencies: frozenset[tuple[int, int]] = frozenset()
    time_constraints: tuple[TimeConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "dependencies", frozenset(self.dependencies))
        object.__setattr__(
            self, "time_constraints",
            tuple(sorted(self.time_constraints, key=lambda c: (c.pred, c.succ))))

    def __len__(self):
        return len(self.actions)

    def predecessors(self, index: int) -> list[int]:
        return sorted(p for p, s in self.dependencies if s == index)

    def successors(self, index: int) -> list[int]:
        return sorted(s for p, s in self.dependencies if p == index)

    def prerequisites(self, index: int) -> set[int]:
        return prerequisites(self, index)

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, smallest index first among ready nodes."""
        indeg = {a.index: 0 for a in self.actions}
        for _, s in self.dependencies:
            indeg[s] += 1
        ready = sorted(i for i, d in indeg.items() if d == 0)
        order = []
        while ready:
            i = ready.pop(0)
            order.append(i)
            for s in self.successors(i):
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
                    ready.sort()
        if len(order) != len(self.actions):
            raise ValueError(f"recipe {self.name} has a dependency cycle")
        return order

    def without_time_constraints(self) -> "Recipe":
        return Recipe(self.name, self.actions, self.dependencies, ())


def prerequisites(recipe: Recipe, action_index: int) -> set[int]:
    """All actions reachable backwards from ``action_index`` through dependency edges."""
    if not 0 <= action_index < len(recipe.actions):
        raise IndexError(f"no step {action_index} in recipe {recipe.name}")
    preds: dict[int, list[int]] = {}
    for p, s in recipe.dependencies:
        preds.setdefault(s, []).append(p)
    seen: set[int] = set()
    queue = deque(preds.get(action_index, ()))
    while queue:
        p = queue.popleft()
        if p in seen:
            continue
        seen.add(p)
        queue.extend(preds.get(p, ()))
    seen.discard(action_index)
    return seen


def validate_recipe(recipe: Recipe) -> list[str]:
    """Return a list of human-readable invariant violations; empty means valid."""
    out = []
    n = len(recipe.actions)
    if not recipe.name.strip():
        out.append("recipe name is empty")
    if any(c in recipe.name for c in "(),"):
        out.append(f"recipe name {recipe.name!r} contains a parenthesis or comma")
    if n == 0:
        out.append("recipe has no actions")
    for pos, a in enumerate(recipe.actions):
        if a.index != pos:
            out.append(f"step {a.index}: index out of sequence (expected {pos})")
        if a.duration <= 0:
            out.append(f"step {a.index}: duration must be positive")
        if a.interruptible and a.autonomous:
            out.append(f"step {a.index}: interruptible action must be continuous")
        kinds = [r.kind for r in a.resources]
        if len(kinds) != len(set(kinds)):
            out.append(f"step {a.index}: duplicate resource kind")
        for r in a.resources:
            if not r.kind:
                out.append(f"step {a.index}: resource kind is empty")
            overlap = {k for k, _ in r.required} & {k for k, _ in r.establishes}
            if overlap:
                out.append(f"step {a.index}: {r.kind} condition keys both required and established: "
                           + ", ".join(sorted(overlap)))
    for p, s in sorted(recipe.dependencies):
        if not (0 <= p < n and 0 <= s < n):
            out.append(f"dependency {p}->{s}: endpoint out of range")
        elif p == s:
            out.append(f"dependency {p}->{s}: cycle (self-loop)")
    if not any("out of range" in v or "self-loop" in v for v in out):
        try:
            recipe.topological_order()
        except ValueError:
            out.append("dependency graph contains a cycle")
    seen = set()
    for tc in recipe.time_constraints:
        if (tc.pred, tc.succ) not in recipe.dependencies:
            out.append(f"time constraint {tc.pred}->{tc.succ}: time constraint without dependency")
        if tc.max_gap < 0:
            out.append(f"time constraint {tc.pred}->{tc.succ}: negative gap")
        if (tc.pred, tc.succ) in seen:
            out.append(f"time constraint {tc.pred}->{tc.succ}: duplicate")
        seen.add((tc.pred, tc.succ))
    return out


@dataclass(frozen=True)
class Instance:
    recipes: tuple[Recipe, ...]
    inventory: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "recipes", tuple(self.recipes))
        inv = dict(self.inventory)
        for kind in default_kinds(self.recipes):
            inv.setdefault(kind, 1)
        object.__setattr__(self, "inventory", tuple(sorted(inv.items(), key=lambda kv: _kind_order(kv[0]))))

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.recipes]

    @property
    def name(self) -> str:
        return "+".join(self.names)

    def recipe(self, name: str) -> Recipe:
        for r in self.recipes:
            if r.name == name:
                return r
        raise KeyError(name)

    def action(self, key: ActionKey) -> Action:
        return self.recipe(key[0]).actions[key[1]]

    def keys(self) -> list[ActionKey]:
        """Every action key, sorted lexicographically by (recipe name, step)."""
        return sorted((r.name, a.index) for r in self.recipes for a in r.actions)

    def capacity(self, kind: str) -> int:
        return dict(self.inventory).get(kind, 1)

    @property
    def kinds(self) -> list[str]:
        return [k for k, _ in self.inventory]

    def without_time_constraints(self) -> "Instance":
        return Instance(tuple(r.without_time_constraints() for r in self.recipes), self.inventory)

    def validate(self) -> list[str]:
        out = []
        if not self.recipes:
            out.append("instance has no recipes")
        names = self.names
        for n in sorted({n for n in names if names.count(n) > 1}):
            out.append(f"duplicate recipe name {n}")
        for r in self.recipes:
            out.extend(f"{r.name}: {v}" for v in validate_recipe(r))
        for kind, count in self.inventory:
            if count < 1:
                out.append(f"inventory {kind}: count must be at least 1")
        return out

    @property
    def n_actions(self) -> int:
        return sum(len(r.actions) for r in self.recipes)


def _kind_order(kind: str):
    if kind in KITCHEN_KINDS:
        return (0, KITCHEN_KINDS.index(kind), kind)
    return (1, 0, kind)


def default_kinds(recipes: Iterable[Recipe]) -> list[str]:
    kinds = set(KITCHEN_KINDS)
    for r in recipes:
        for a in r.actions:
            kinds.update(req.kind for req in a.resources)
    return sorted(kinds, key=_kind_order)


def combine(recipes: Iterable[Recipe], inventory: Mapping[str, int] | None = None) -> Instance:
    recipes = tuple(recipes)
    seen = set()
    for r in recipes:
        if r.name in seen:
            raise NameCollisionError(f"duplicate recipe name {r.name}")
        seen.add(r.name)
    return Instance(recipes, tuple((inventory or {}).items()))


def duration_totals(obj: Recipe | Instance) -> tuple[int, int]:
    """``(total, autonomous_total)`` in seconds over all actions."""
    recipes = obj.recipes if isinstance(obj, Instance) else (obj,)
    total = auto = 0
    for r in recipes:
        for a in r.actions:
            total += a.duration
            if a.autonomous:
                auto += a.duration
    return total, auto


def fmt_hms(seconds: int, padded: bool = True) -> str:
    h, rem = divmod(int(seconds), 3600)
    m, s = divmod(rem, 60)
    if padded:
        return f"{h:02d}:{m:02d}:{s:02d}"
    return f"{h}:{m}:{s}"


def fmt_minutes(seconds: int) -> str:
    if seconds % 60 == 0:
        return str(seconds // 60)
    return f"{seconds / 60:g}"
