"""Bundled recipes and instances.

``TMSCHED_FIXTURES`` may point at another directory with the same layout
(``recipes/*.recipe`` and ``instances/*.json``); it takes precedence.
"""
from __future__ import annotations

import os
from pathlib import Path

from ..dsl import load_instance, parse_recipe
from ..model import Instance, Recipe

ENV_VAR = "TMSCHED_FIXTURES"
_BUILTIN = Path(__file__).resolve().parent


def fixture_dirs() -> list[Path]:
    dirs = []
    extra = os.environ.get(ENV_VAR)
    if extra:
        dirs.append(Path(extra))
    dirs.append(_BUILTIN)
    return dirs


def recipe_path(name: str) -> Path:
    for d in fixture_dirs():
        p = d / "recipes" / f"{name}.recipe"
        if p.exists():
            return p
    raise FileNotFoundError(f"no recipe fixture named {name!r}")


def load_recipe(name: str) -> Recipe:
    return parse_recipe(recipe_path(name).read_text())


def list_instances() -> list[str]:
    names = set()
    for d in fixture_dirs():
        names.update(p.stem for p in (d / "instances").glob("*.json"))
    return sorted(names)


def instance_path(name: str) -> Path:
    for d in fixture_dirs():
        p = d / "instances" / f"{name}.json"
        if p.exists():
            return p
    raise FileNotFoundError(f"no instance fixture named {name!r}")


def load_fixture(name: str) -> Instance:
    """Load a bundled instance by name, e.g. ``"baked-potato+cheese-sandwich"``."""
    return load_instance(instance_path(name))
