import time

import pytest
from hypothesis import HealthCheck, given, settings

from tmsched.dsl import parse_recipe
from tmsched.fixtures import list_instances, load_fixture
from tmsched.model import combine, duration_totals
from tmsched.schedulers import (
    BudgetExceeded,
    InstanceTooLarge,
    NoFeasiblePlan,
    Plan,
    check_plan,
    greedy_schedule,
    heuristic_schedule,
    optimal_schedule,
    plan_from_text,
)
from tmsched.sim import FailureReason

from .strategies import instances

MIN = 60
SMALL = [n for n in list_instances() if load_fixture(n).n_actions <= 12]


@pytest.mark.parametrize("name", list_instances())
def test_heuristic_plans_check_out(name):
    inst = load_fixture(name)
    plan = heuristic_schedule(inst)
    assert check_plan(inst, plan).success
    assert plan.makespan == check_plan(inst, plan).transcript.state.makespan()


def test_heuristic_potato_26(potato):
    assert heuristic_schedule(potato).makespan == 26 * MIN


def test_chain_makespan_is_sum():
    inst = load_fixture("knead-chain")
    assert heuristic_schedule(inst).makespan == duration_totals(inst)[0]
    assert optimal_schedule(inst).makespan == duration_totals(inst)[0]


def test_single_action():
    assert optimal_schedule(load_fixture("slice-apple")).makespan == 7 * MIN


def test_heuristic_defers_vada_oil(vada_daikon):
    plan = heuristic_schedule(vada_daikon)
    start = {e.key: e.start for e in plan.entries}
    shape_done = max(e.end for e in plan.entries if e.key == ("Vada", 6))
    assert start[("Vada", 5)] > 0
    assert start[("Vada", 5)] + 5 * MIN == shape_done


def test_greedy_fails_on_vada(vada_daikon):
    res = greedy_schedule(vada_daikon)
    assert res.outcome.reason is FailureReason.TIME_CONSTRAINT_VIOLATION
    assert "Step 5 and Step 7 in Recipe Vada" in res.transcript.entries[-1][1].message
    assert not check_plan(vada_daikon, res.plan).success


def test_greedy_fails_on_potato(potato):
    res = greedy_schedule(potato)
    assert res.outcome.reason is FailureReason.TIME_CONSTRAINT_VIOLATION
    assert res.plan.entries[0].start == 0
    assert {(e.step, e.start) for e in res.plan.entries} >= {(3, 0)}


def test_greedy_without_deadlines_succeeds(potato):
    assert greedy_schedule(potato.without_time_constraints()).success


def test_optimal_potato_26(potato):
    plan = optimal_schedule(potato)
    assert plan.makespan == 26 * MIN and plan.optimal
    assert check_plan(potato, plan).success


@pytest.mark.parametrize("name", SMALL)
def test_optimal_dominates_heuristic(name):
    inst = load_fixture(name)
    opt = optimal_schedule(inst)
    assert check_plan(inst, opt).success
    assert opt.makespan <= heuristic_schedule(inst).makespan <= duration_totals(inst)[0]


def test_optimal_size_limit(vada_daikon):
    with pytest.raises(InstanceTooLarge):
        optimal_schedule(vada_daikon)


def test_optimal_budget(potato_sandwich):
    with pytest.raises(BudgetExceeded) as exc:
        optimal_schedule(potato_sandwich, time_budget=0.0)
    assert exc.value.best is None or exc.value.best.makespan >= 27 * MIN


def test_no_feasible_plan():
    r = parse_recipe("## Recipe 1:Tight\nStep 0 (5 min): Heat.\nStep 1 (5 min): Chop.\nStep 2 (1 min): Serve.\n"
                     "Autonomous actions: step 0.\nAction Dependency: 0->1, 0->2, 1->2.\n"
                     "Time Constraints: 0->2 (0 min).\n")
    inst = combine([r])
    with pytest.raises(NoFeasiblePlan, match="No feasible schedule found."):
        heuristic_schedule(inst)
    with pytest.raises(NoFeasiblePlan):
        optimal_schedule(inst)
    assert heuristic_schedule(inst, respect_time_constraints=False).makespan == 11 * MIN


def test_empty_plan_is_rejected(potato):
    res = check_plan(potato, Plan((), 0))
    assert not res.success
    assert res.transcript.entries[-1][1].kind.value == "Incomplete"


@pytest.mark.parametrize("name", list_instances())
def test_relaxation_dominance(name):
    inst = load_fixture(name)
    relaxed = heuristic_schedule(inst, respect_time_constraints=False)
    assert relaxed.makespan <= heuristic_schedule(inst).makespan
    assert check_plan(inst, relaxed).success  # checked against the relaxed instance


def test_deterministic_plan_bytes(vada_daikon):
    assert heuristic_schedule(vada_daikon).to_text() == heuristic_schedule(vada_daikon).to_text()


def test_plan_text_round_trip(potato):
    plan = heuristic_schedule(potato)
    again = plan_from_text(potato, plan.to_text())
    assert again.entries == plan.entries and again.makespan == plan.makespan


def test_plan_entry_order(potato_sandwich):
    plan = heuristic_schedule(potato_sandwich)
    starts = [e.start for e in plan.entries]
    assert starts == sorted(starts)
    assert plan.to_text().endswith("Finish\n")


@pytest.mark.parametrize("name", list_instances())
def test_heuristic_is_fast(name):
    inst = load_fixture(name)
    t0 = time.perf_counter()
    heuristic_schedule(inst)
    assert time.perf_counter() - t0 < 1.0


def _critical_path(inst):
    ef = {}
    for r in inst.recipes:
        for i in r.topological_order():
            ef[(r.name, i)] = max([ef[(r.name, p)] for p in r.predecessors(i)], default=0) + r.actions[i].duration
    return max(ef.values())


@given(instances(max_recipes=2, max_actions=4))
@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_random_instances_solver_agreement(inst):
    try:
        heur = heuristic_schedule(inst)
    except NoFeasiblePlan:
        with pytest.raises(NoFeasiblePlan):
            optimal_schedule(inst)
        return
    assert check_plan(inst, heur).success
    opt = optimal_schedule(inst, time_budget=30)
    assert check_plan(inst, opt).success
    cont = sum(a.duration for r in inst.recipes for a in r.actions if not a.autonomous)
    assert max(_critical_path(inst), cont) <= opt.makespan <= heur.makespan <= duration_totals(inst)[0]
    relaxed = heuristic_schedule(inst, respect_time_constraints=False)
    assert relaxed.makespan <= heur.makespan
