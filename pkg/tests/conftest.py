from __future__ import annotations

import pytest

from ravenkit.abt import ABT, RAVEN
from ravenkit.generate import generate_puzzles
from ravenkit.model import CONFIG_NAMES


@pytest.fixture(scope="session")
def abt_puzzles():
    return generate_puzzles(140, CONFIG_NAMES, ABT, master_seed=101)


@pytest.fixture(scope="session")
def raven_puzzles():
    return generate_puzzles(140, CONFIG_NAMES, RAVEN, master_seed=202)
