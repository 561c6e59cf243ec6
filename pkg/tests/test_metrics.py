import json
import math

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from tmsched.fixtures import list_instances, load_fixture
from tmsched.metrics import (
    MetricsReport,
    aggregate,
    dumps_reports,
    efficiency,
    evaluate,
    multitask_score,
    progress_rate,
    reference_prefix,
    relative_efficiency,
    render_table,
)
from tmsched.model import Action, Concurrency, Recipe, combine, fmt_hms
from tmsched.schedulers import check_plan, heuristic_schedule
from tmsched.sim import Transcript, initial_observation, new_session, replay

from .conftest import SOLO_COMMANDS
from .strategies import instances, sessions

MIN = 60


def _report(success=1, progress=1.0, rel=1.0):
    return MetricsReport(instance="x", outcome="Success" if success else "Failure(AgentAborted)",
                         success=success, progress_rate=progress, efficiency=0.5,
                         reference_efficiency=0.5, relative_efficiency=rel,
                         multitask_score=multitask_score(success, rel), t_save=1, t_auto=2,
                         makespan=3, completed_actions=1)


def _reference(inst):
    return check_plan(inst, heuristic_schedule(inst)).transcript


def test_potato_efficiency(potato):
    tr = replay(potato, SOLO_COMMANDS)
    assert tr.outcome.success
    assert efficiency(potato, tr) == (3 * MIN, 16 * MIN, 0.1875)


def test_potato_heuristic_efficiency(potato):
    assert efficiency(potato, _reference(potato)) == (3 * MIN, 16 * MIN, 0.1875)


def test_sequential_run_saves_nothing(potato):
    tr = replay(potato, ["Step(0, Baked-Potato, 00:10:00, 00:00:00)",
                         "Step(1, Baked-Potato, 00:02:00, 00:10:00)"])
    assert efficiency(potato, tr)[0] == 0
    assert efficiency(potato, tr)[2] == 0


def test_no_autonomous_work_scores_zero():
    r = Recipe("Chop", (Action(0, "Chop.", 7 * MIN, Concurrency.CONTINUOUS),), frozenset(), ())
    inst = combine([r])
    tr = replay(inst, ["Step(0, Chop, 00:07:00, 00:00:00)", "Finish"])
    assert efficiency(inst, tr) == (0, 0, 0.0)


def test_early_abort_calibration(toast):
    full = _reference(toast)
    assert efficiency(toast, full)[2] == 0.875
    short = replay(toast, ["Step(0, Garlic-Toast, 00:04:00, 00:00:00)",
                           "Step(1, Garlic-Toast, 00:04:00, 00:00:00)"])
    assert efficiency(toast, short)[2] == 1.0
    assert relative_efficiency(toast, short, full) == 1.0
    assert evaluate(toast, short, full).multitask_score == 0.0


def test_failed_run_is_clipped_at_its_clock(potato):
    # the preheat would end at 10 min but the run stops at 2
    tr = replay(potato, ["Step(0, Baked-Potato, 00:10:00, 00:00:00)",
                         "Step(1, Baked-Potato, 00:02:00, 00:00:00)"])
    assert efficiency(potato, tr) == (2 * MIN, 2 * MIN, 1.0)
    assert progress_rate(potato, tr) == 1 / 6


@pytest.mark.parametrize("name", list_instances())
def test_self_ratio_is_one(name):
    inst = load_fixture(name)
    ref = _reference(inst)
    rep = evaluate(inst, ref, ref)
    assert rep.relative_efficiency == 1.0
    assert rep.multitask_score == 1.0
    assert rep.progress_rate == 1.0


def test_multitask_score():
    assert multitask_score(0, 0.95) == 0
    assert multitask_score(1, 1.0) == 1.0
    for x in (0.0, 0.3, 1.095, math.inf):
        assert multitask_score(0, x) == 0
        assert multitask_score(1, x) == x


def test_progress_half(potato):
    tr = replay(potato, ["Step(0, Baked-Potato, 00:10:00, 00:00:00)",
                         "Step(1, Baked-Potato, 00:02:00, 00:00:00)",
                         "Step(3, Baked-Potato, 00:01:00, 00:02:00)",
                         "Step(2, Baked-Potato, 00:05:00, 00:10:00)"])
    assert progress_rate(potato, tr) == 0.5


def test_zero_reference_gives_inf(toast):
    # the reference's first completion is a lone continuous step: zero saving
    inst = toast
    ref = replay(inst, ["Step(1, Garlic-Toast, 00:04:00, 00:00:00)",
                        "Step(3, Garlic-Toast, 00:03:00, 00:04:00)",
                        "Step(0, Garlic-Toast, 00:04:00, 00:07:00)",
                        "Step(2, Garlic-Toast, 00:04:00, 00:07:00)",
                        "Finish"])
    assert ref.outcome.success
    agent = replay(inst, ["Step(0, Garlic-Toast, 00:04:00, 00:00:00)",
                          "Step(1, Garlic-Toast, 00:04:00, 00:00:00)"])
    rep = evaluate(inst, agent, ref)
    assert rep.relative_efficiency == math.inf and rep.infinite
    assert rep.multitask_score == 0.0
    assert relative_efficiency(inst, replay(inst, []), ref) == 1.0


def test_command_order_prefix(potato):
    ref = replay(potato, SOLO_COMMANDS)
    by_completion = reference_prefix(ref, 6)
    by_command = reference_prefix(ref, 6, order="command")
    assert sorted(by_completion) == sorted(by_command)
    assert by_completion[:2] == [("Baked-Potato", 1), ("Baked-Potato", 0)]
    assert by_command[:2] == [("Baked-Potato", 0), ("Baked-Potato", 1)]
    with pytest.raises(ValueError):
        reference_prefix(ref, 1, order="alphabetical")


def test_reference_must_succeed(potato):
    bad = replay(potato, [])
    with pytest.raises(ValueError):
        relative_efficiency(potato, bad, bad)


def test_aggregate_examples():
    with pytest.raises(ValueError):
        aggregate([])
    s = aggregate([_report(1, 1.0, 1.0), _report(0, 0.5, 0.9)])
    assert s.score == 50.0
    assert s.success == 50.0
    assert s.progress == 75.0
    one = aggregate([_report(0, 0.5, 0.9)])
    assert one.success == 0 and one.score == 0


def test_aggregate_heuristic_row():
    reports = []
    for name in list_instances():
        inst = load_fixture(name)
        ref = _reference(inst)
        reports.append(evaluate(inst, ref, ref))
    s = aggregate(reports)
    assert (s.success, s.progress, s.relative_efficiency, s.score) == (100, 100, 100, 100)
    assert render_table({"Heuristics": s}).splitlines()[1].split()[1:] == ["100.0"] * 4


def test_aggregate_skips_infinite_ratio():
    s = aggregate([_report(0, 0.5, math.inf), _report(1, 1.0, 0.8)])
    assert s.infinite == 1
    assert s.relative_efficiency == pytest.approx(80.0)


def test_report_serialization():
    rep = _report(0, 0.5, math.inf)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["relative_efficiency"] == "inf"
    assert MetricsReport.from_dict(d) == rep
    assert "success=0\n" in rep.to_text()
    doc = json.loads(dumps_reports([rep], aggregate([rep])))
    assert doc["runs"][0]["instance"] == "x" and doc["summary"]["infinite"] == 1


def _rescale(inst, k):
    recipes = []
    for r in inst.recipes:
        acts = tuple(Action(a.index, a.description, a.duration * k, a.concurrency, a.interruptible, a.resources)
                     for a in r.actions)
        tcs = tuple(type(tc)(tc.pred, tc.succ, tc.max_gap * k) for tc in r.time_constraints)
        recipes.append(Recipe(r.name, acts, r.dependencies, tcs))
    return combine(recipes, dict(inst.inventory))


@pytest.mark.parametrize("name", ["baked-potato", "garlic-toast", "vada+daikon-radish"])
def test_efficiency_ignores_time_unit(name):
    inst = load_fixture(name)
    plan = heuristic_schedule(inst)
    big = _rescale(inst, 3)
    cmds = [f"Step({e.step}, {e.recipe}, {fmt_hms(e.exec_time * 3)}, {fmt_hms(e.start * 3)})" for e in plan.entries]
    tr = replay(big, cmds + ["Finish"])
    assert tr.outcome.success
    assert efficiency(big, tr)[2] == efficiency(inst, _reference(inst))[2]


@st.composite
def _runs(draw):
    inst = draw(instances(max_recipes=2, max_actions=5))
    state = new_session(inst)
    _, state = draw(sessions(state, max_commands=16))
    return inst, Transcript(inst, initial_observation(new_session(inst)), (), state)


@given(_runs())
@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_efficiency_is_a_fraction(run):
    inst, tr = run
    t_save, t_auto, eff = efficiency(inst, tr)
    assert 0 <= t_save <= t_auto
    assert 0 <= eff <= 1


@given(instances(max_recipes=2, max_actions=5), st.data())
@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_progress_is_monotone(inst, data):
    cmds, _ = data.draw(sessions(new_session(inst)))
    last = 0.0
    for n in range(len(cmds) + 1):
        p = progress_rate(inst, replay(inst, cmds[:n]))
        assert p >= last
        last = p
