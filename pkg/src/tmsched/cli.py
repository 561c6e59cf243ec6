"""``tmsched`` command line."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from . import fixtures
from .bench import (
    RUNNERS,
    BenchConfig,
    InstanceFilterCriteria,
    atomic_write,
    run_bench,
    score_pairs,
    write_run,
)
from .bridge import BridgeConfig, serve_stdio, serve_tcp
from .dsl import (
    CommandParseError,
    RecipeParseError,
    RenderMode,
    dumps_instance,
    load_instance,
    parse_plan_text,
    parse_recipes,
)
from .gantt import render_gantt
from .metrics import evaluate
from .model import Instance, InvalidInstanceError, NameCollisionError, combine, fmt_hms
from .schedulers import (
    BudgetExceeded,
    InstanceTooLarge,
    NoFeasiblePlan,
    check_plan,
    greedy_schedule,
    heuristic_schedule,
    optimal_schedule,
)
from .sim import SessionConfig, replay

_USER_ERRORS = (RecipeParseError, CommandParseError, InvalidInstanceError, NameCollisionError,
                NoFeasiblePlan, InstanceTooLarge, BudgetExceeded, FileNotFoundError, ValueError)


def resolve_instance(ref: str) -> Instance:
    """A path to a JSON or recipe file, or the name of a bundled fixture."""
    p = Path(ref)
    if p.exists():
        return load_instance(p)
    return fixtures.load_fixture(ref)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except _USER_ERRORS as e:
            _fail(str(e))


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """Multitask scheduling environment, solvers and benchmark harness.

    INSTANCE arguments accept a file path or a bundled fixture name; set
    TMSCHED_FIXTURES to add a fixture directory.
    """


@main.command()
@click.argument("path")
def validate(path):
    """Check a recipe file or instance and list every violation."""
    inst = resolve_instance(path)
    problems = inst.validate()
    if problems:
        for v in problems:
            click.echo(v)
        sys.exit(1)
    click.echo(f"OK {inst.name}: {len(inst.recipes)} recipe(s), {inst.n_actions} actions")


@main.command()
@click.option("--solver", type=click.Choice(["heuristic", "greedy", "optimal"]), default="heuristic")
@click.option("--no-time-constraints", is_flag=True, help="Ignore deadlines (heuristic only).")
@click.option("--max-actions", type=int, default=12, show_default=True)
@click.option("--budget", type=float, default=60.0, show_default=True, help="Optimal solver time budget, seconds.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write the plan file here.")
@click.argument("instance")
def solve(solver, no_time_constraints, max_actions, budget, output, instance):
    """Compute a plan and print it as a replayable command script."""
    inst = resolve_instance(instance)
    if solver == "heuristic":
        plan = heuristic_schedule(inst, respect_time_constraints=not no_time_constraints)
        status = str(check_plan(inst, plan).outcome)
    elif solver == "optimal":
        target = inst.without_time_constraints() if no_time_constraints else inst
        plan = optimal_schedule(target, max_actions=max_actions, time_budget=budget)
        status = str(check_plan(target, plan).outcome) + ("" if plan.optimal else " (not proven optimal)")
    else:
        res = greedy_schedule(inst.without_time_constraints() if no_time_constraints else inst)
        plan, status = res.plan, str(res.outcome)
    text = plan.to_text()
    if output:
        atomic_write(Path(output), text)
    else:
        click.echo(text, nl=False)
    click.echo(f"{solver}: {status}, makespan {fmt_hms(plan.makespan)}", err=True)


def _read_commands(path: str) -> list[str]:
    """Commands from a plan file or from a rendered transcript (its CMD lines)."""
    lines = Path(path).read_text().splitlines()
    if any(l.startswith("CMD ") for l in lines):
        return [l[4:] for l in lines if l.startswith("CMD ")]
    return [str(c) for c in parse_plan_text("\n".join(lines))]


@main.command()
@click.option("--hints", is_flag=True)
@click.argument("instance")
@click.argument("plan", type=click.Path(exists=True, dir_okay=False))
def simulate(hints, instance, plan):
    """Replay a plan through the environment and print the transcript and metrics."""
    inst = resolve_instance(instance)
    tr = replay(inst, _read_commands(plan), SessionConfig(hints=hints))
    click.echo(tr.render(), nl=False)
    try:
        reference = check_plan(inst, heuristic_schedule(inst)).transcript
    except NoFeasiblePlan:
        return
    click.echo(evaluate(inst, tr, reference).to_text(), nl=False)


@main.command()
@click.option("--masked/--full", default=True, help="Hide autonomy and resource lines (default) or show them.")
@click.option("--hints", is_flag=True, help="Send executable actions after each accepted command.")
@click.option("--tcp", metavar="HOST:PORT", help="Listen on a TCP socket instead of stdio.")
@click.option("--sessions", type=int, help="With --tcp, stop after this many connections.")
@click.argument("instance")
def serve(masked, hints, tcp, sessions, instance):
    """Serve a session to an agent over the line protocol."""
    inst = resolve_instance(instance)
    config = BridgeConfig(mode=RenderMode.MASKED if masked else RenderMode.FULL, hints=hints)
    if tcp:
        host, _, port = tcp.rpartition(":")
        serve_tcp(inst, host or "127.0.0.1", int(port), config, sessions,
                  on_ready=lambda a: click.echo(f"listening on {a[0]}:{a[1]}", err=True))
    else:
        serve_stdio(inst, config)


def _load_dir(path: Path) -> list[Instance]:
    if path.is_file():
        return [load_instance(path)]
    files = sorted(path.glob("*.json")) or sorted(path.glob("*.recipe"))
    if not files:
        raise FileNotFoundError(f"no instances in {path}")
    return [load_instance(f) for f in files]


@main.command()
@click.option("--runner", type=click.Choice(RUNNERS), default="heuristic", show_default=True)
@click.option("--with-tc/--without-tc", default=True, help="Evaluate with or without time constraints.")
@click.option("--scripts", type=click.Path(file_okay=False), help="agent-script: directory of <instance>.plan files.")
@click.option("--agent-cmd", help="serve: agent program to launch per instance.")
@click.option("--masked/--full", default=True)
@click.option("--hints", is_flag=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), help="Write a timestamped run directory here.")
@click.argument("instance_dir", required=False)
def bench(runner, with_tc, scripts, agent_cmd, masked, hints, workers, out, instance_dir):
    """Run a solver or agent over a directory of instances and print the table."""
    import shlex
    if instance_dir:
        instances = _load_dir(Path(instance_dir))
    else:
        instances = [fixtures.load_fixture(n) for n in fixtures.list_instances()]
    config = BenchConfig(
        with_time_constraints=with_tc, script_dir=Path(scripts) if scripts else None,
        agent_command=shlex.split(agent_cmd) if agent_cmd else None,
        bridge=BridgeConfig(mode=RenderMode.MASKED if masked else RenderMode.FULL, hints=hints),
        workers=workers)
    result = run_bench(instances, runner, config)
    click.echo(result.table(), nl=False)
    for rec in result.records:
        if rec.error:
            click.echo(f"{rec.report.instance}: {rec.error}", err=True)
    if out:
        click.echo(f"wrote {write_run(Path(out), result)}", err=True)


@main.command()
@click.option("--min-eff", type=float, default=0.80, show_default=True)
@click.option("--require-drop/--no-require-drop", default=True, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), help="Write kept instances as JSON here.")
@click.argument("recipe_dir", type=click.Path(exists=True, file_okay=False))
def gen(min_eff, require_drop, out, recipe_dir):
    """Select recipe pairs that multitask well and lose efficiency under deadlines."""
    criteria = InstanceFilterCriteria(min_eff, require_drop)
    recipes = []
    for f in sorted(Path(recipe_dir).glob("*.recipe")):
        recipes.extend(parse_recipes(f.read_text()))
    by_name = {r.name: r for r in recipes}
    for s in score_pairs(recipes):
        if not s.kept(criteria):
            continue
        with_tc = "infeasible" if s.eff_with is None else f"{s.eff_with:.4f}"
        click.echo(f"{'+'.join(s.names)}\t{s.eff_without:.4f}\t{with_tc}")
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
            inst = combine([by_name[n] for n in s.names])
            atomic_write(Path(out) / f"{inst.name.lower()}.json", dumps_instance(inst))


@main.command()
@click.option("--svg", is_flag=True)
@click.option("--quantum", type=int, default=60, show_default=True, help="Seconds per column or grid unit.")
@click.option("--px", type=float, default=20, show_default=True, help="SVG pixels per quantum.")
@click.argument("instance")
@click.argument("plan", type=click.Path(exists=True, dir_okay=False))
def gantt(svg, quantum, px, instance, plan):
    """Draw a plan or transcript as a Gantt chart."""
    inst = resolve_instance(instance)
    tr = replay(inst, _read_commands(plan))
    if svg:
        click.echo(render_gantt(inst, tr, "svg", quantum=quantum, px=px), nl=False)
    else:
        click.echo(render_gantt(inst, tr, "text", quantum=quantum), nl=False)


if __name__ == "__main__":
    main()
