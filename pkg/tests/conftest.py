import pytest

from tmsched.fixtures import load_fixture

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def potato():
    return load_fixture("baked-potato")


@pytest.fixture(scope="session")
def potato_sandwich():
    return load_fixture("baked-potato+cheese-sandwich")


@pytest.fixture(scope="session")
def vada_daikon():
    return load_fixture("vada+daikon-radish")


@pytest.fixture(scope="session")
def toast():
    return load_fixture("garlic-toast")


SOLO_COMMANDS = [
    "Step(0, Baked-Potato, 00:10:00, 00:00:00)",
    "Step(1, Baked-Potato, 00:02:00, 00:02:00)",
    "Step(2, Baked-Potato, 00:05:00, 00:10:00)",
    "Step(4, Baked-Potato, 00:09:00, 00:15:00)",
    "Step(3, Baked-Potato, 00:01:00, 00:24:00)",
    "Step(4, Baked-Potato, 00:01:00, 00:24:00)",
    "Step(5, Baked-Potato, 00:01:00, 00:25:00)",
    "Finish",
]

PAIR_COMMANDS = [
    "Step(0, Baked-Potato, 00:10:00, 00:00:00)",
    "Step(0, Cheese-Sandwich, 00:10:00, 00:00:00)",
    "Step(1, Baked-Potato, 00:02:00, 00:00:00)",
    "Step(1, Cheese-Sandwich, 00:02:00, 00:02:00)",
    "Step(2, Cheese-Sandwich, 00:01:00, 00:04:00)",
    "Step(2, Baked-Potato, 00:05:00, 00:10:00)",
    "Step(3, Cheese-Sandwich, 00:05:00, 00:10:00)",
    "Step(4, Cheese-Sandwich, 00:05:00, 00:15:00)",
    "Step(4, Baked-Potato, 00:05:00, 00:15:00)",
    "Step(5, Cheese-Sandwich, 00:01:00, 00:20:00)",
    "Step(4, Baked-Potato, 00:04:00, 00:21:00)",
    "Step(3, Baked-Potato, 00:01:00, 00:25:00)",
    "Step(4, Baked-Potato, 00:01:00, 00:25:00)",
    "Step(5, Baked-Potato, 00:01:00, 00:26:00)",
    "Finish",
]
