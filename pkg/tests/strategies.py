"""Hypothesis strategies for random recipes, instances and sessions."""
from hypothesis import strategies as st

from tmsched.dsl import Finish, Step
from tmsched.model import Action, Concurrency, Recipe, ResourceRequirement, TimeConstraint, combine
from tmsched.sim import apply

KINDS = ("oven", "microwave", "stove")


@st.composite
def recipes(draw, name="R", max_actions=5, with_conditions=True):
    n = draw(st.integers(1, max_actions))
    actions = []
    for i in range(n):
        auto = draw(st.booleans())
        res = ()
        if draw(st.integers(0, 2)) == 0:
            kind = draw(st.sampled_from(KINDS))
            sets = requires = None
            if with_conditions and kind == "oven":
                mode = draw(st.sampled_from(["none", "sets", "requires"]))
                temp = draw(st.sampled_from(["350", "425"]))
                if mode == "sets":
                    sets = {"temperature": temp}
                elif mode == "requires":
                    requires = {"temperature": temp}
            res = (ResourceRequirement.make(kind, requires, sets),)
        actions.append(Action(
            index=i, description=f"Do thing {i}.", duration=60 * draw(st.integers(1, 8)),
            concurrency=Concurrency.AUTONOMOUS if auto else Concurrency.CONTINUOUS,
            interruptible=(not auto) and draw(st.booleans()), resources=res))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    deps = frozenset(draw(st.lists(st.sampled_from(pairs), unique=True, max_size=n + 1))) if pairs else frozenset()
    tcs = []
    for d in sorted(deps):
        if draw(st.integers(0, 3)) == 0:
            tcs.append(TimeConstraint(d[0], d[1], 60 * draw(st.integers(0, 4))))
    return Recipe(name, tuple(actions), deps, tuple(tcs))


@st.composite
def instances(draw, max_recipes=2, max_actions=5, with_conditions=True):
    k = draw(st.integers(1, max_recipes))
    return combine([draw(recipes(name=f"R{i}", max_actions=max_actions, with_conditions=with_conditions))
                    for i in range(k)])


@st.composite
def sessions(draw, state, max_commands=14):
    """Drive ``state`` with random, mostly plausible commands; returns the command list."""
    keys = state.index.keys
    sent = []
    for _ in range(draw(st.integers(0, max_commands))):
        if state.outcome.decided:
            break
        if draw(st.integers(0, 12)) == 0:
            cmd = Finish()
        else:
            key = draw(st.sampled_from(keys))
            rem = state.remaining(key)
            action = state.index.actions[key]
            if rem <= 0 or action.autonomous:
                length = action.duration
            else:
                length = draw(st.sampled_from(sorted({rem, max(60, rem // 2), 60})))
            at = state.clock + 60 * draw(st.integers(-1, 3))
            cmd = Step(key[0], key[1], length, max(0, at))
        state, _ = apply(state, cmd)
        sent.append(cmd)
    return sent, state
