"""End-to-end puzzle generation with the uniqueness gate."""
from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .abt import generate_answer_set
from .model import CONFIG_NAMES, CONFIGURATIONS
from .oracle import columns_viable, verify_unique
from .puzzle import PuzzleRecord
from .rules import GenerationError, generate_context, sample_assignment

ANSWER_RETRIES = 20
CONTEXT_RETRIES = 200
# consecutive column-solvable contexts tolerated before the assignment is redrawn
COLUMN_RETRIES = 10


def derive_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, dtype=np.uint64)[0] >> 1)


def generate_puzzle(
    config: str, style: str, seed: int, puzzle_id: str = "", row_only: bool = True
) -> PuzzleRecord:
    """One verified puzzle.

    Contexts whose columns also admit a full rule assignment are redrawn (the
    assignment too, after COLUMN_RETRIES in a row). The answer set is redrawn
    up to ANSWER_RETRIES times when the oracle finds it ambiguous; after that
    the whole context is redrawn.
    """
    cfg = CONFIGURATIONS[config]
    rng = random.Random(seed)
    asg = sample_assignment(cfg, rng)
    column_hits = 0
    for _ in range(CONTEXT_RETRIES):
        context, correct = generate_context(asg, cfg, rng)
        if row_only and columns_viable(PuzzleRecord(puzzle_id, config, asg, context, None, seed)):
            column_hits += 1
            if column_hits >= COLUMN_RETRIES:
                asg = sample_assignment(cfg, rng)
                column_hits = 0
            continue
        column_hits = 0
        for _ in range(ANSWER_RETRIES):
            answers = generate_answer_set(style, correct, asg, cfg, rng)
            puzzle = PuzzleRecord(puzzle_id, config, asg, context, answers, seed)
            if verify_unique(puzzle):
                return puzzle
    raise GenerationError(f"no unambiguous puzzle for seed {seed} after {CONTEXT_RETRIES} contexts")


def config_schedule(configs, count: int) -> list:
    """Round-robin over the requested configurations."""
    return [configs[i % len(configs)] for i in range(count)]


def _job(args):
    config, style, seed, pid = args
    return generate_puzzle(config, style, seed, pid)


def generate_puzzles(count: int, configs=CONFIG_NAMES, style: str = "abt", master_seed: int = 0, jobs: int = 1) -> list:
    if isinstance(configs, str):
        configs = (configs,)
    schedule = config_schedule(list(configs), count)
    tasks = [(cfg, style, derive_seed(master_seed, i), f"{i:07d}") for i, cfg in enumerate(schedule)]
    if jobs <= 1 or count < 64:
        return [_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_job, tasks, chunksize=64))
