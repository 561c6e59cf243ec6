"""Byte-exact replays of the two worked example sessions."""
from pathlib import Path

import pytest

from tmsched.sim import replay

from .conftest import PAIR_COMMANDS, SOLO_COMMANDS

GOLDEN = Path(__file__).parent / "golden"

# Observation lines as they appear verbatim in the published example sessions.
PAIR_AT_5 = ("Continuous action executed successfully. The current timestamp is 0:5:0. Status of physical "
             "objects: oven is occupied, temperature is 425.0; microwave is not occupied; stove is not occupied; "
             "You are currently executing the following autonomous actions: step 0 of Baked-Potato (will finish "
             "at 0:10:0), step 0 of Cheese-Sandwich (will finish at 0:10:0)")
PAIR_AT_15 = ("Autonomous action started successfully. The current timestamp is 0:15:0. Status of physical "
              "objects: oven is occupied, temperature is 425.0; microwave is not occupied; stove is not occupied; "
              "You are currently executing the following autonomous actions: step 4 of Cheese-Sandwich (will "
              "finish at 0:20:0)")
SOLO_START = ("The current timestamp is 0:0:0. Status of physical objects: oven is not occupied, is not "
              "preheated; microwave is not occupied; stove is not occupied")
SOLO_AFTER_PREHEAT = ("The current timestamp is 0:0:0. Status of physical objects: oven is occupied, "
                      "temperature is 425.0; microwave is not occupied; stove is not occupied; You are currently "
                      "executing the following autonomous actions: step 0 of Baked-Potato (will finish at 0:10:0)")
SOLO_AT_10 = ("The current timestamp is 0:10:0. Status of physical objects: oven is occupied, temperature is "
              "425.0; microwave is not occupied; stove is not occupied; You are currently executing the following "
              "autonomous actions: step 2 of Baked-Potato (will finish at 0:15:0)")
SOLO_END = ("The current timestamp is 0:26:0. Status of physical objects: oven is not occupied, temperature is "
            "425.0; microwave is not occupied; stove is not occupied")


def test_solo_session_matches_golden(potato):
    tr = replay(potato, SOLO_COMMANDS)
    assert tr.render() == (GOLDEN / "baked-potato.txt").read_text()
    assert str(tr.outcome) == "Success" and tr.clock == 26 * 60


def test_pair_session_matches_golden(potato_sandwich):
    tr = replay(potato_sandwich, PAIR_COMMANDS)
    assert tr.render() == (GOLDEN / "baked-potato+cheese-sandwich.txt").read_text()
    assert str(tr.outcome) == "Success" and tr.clock == 27 * 60


def test_solo_observations_match_published_lines(potato):
    tr = replay(potato, SOLO_COMMANDS)
    obs = [fb.observation for _, fb in tr.entries]
    assert tr.initial_observation == SOLO_START
    assert obs[0] == SOLO_AFTER_PREHEAT
    assert obs[2] == SOLO_AT_10
    assert obs[-1] == SOLO_END


@pytest.mark.parametrize("index,expected", [(4, PAIR_AT_5), (7, PAIR_AT_15)])
def test_pair_feedback_matches_published_lines(potato_sandwich, index, expected):
    tr = replay(potato_sandwich, PAIR_COMMANDS)
    assert tr.entries[index][1].text == expected
