from __future__ import annotations

from dataclasses import dataclass

from .abt import AnswerSet
from .model import CONFIGURATIONS, FigureConfiguration, Panel
from .rules import RuleAssignment


@dataclass(frozen=True)
class PuzzleRecord:
    """One question: eight context panels (row-major, (3,3) blank) and its answer set."""

    id: str
    config: str
    assignment: RuleAssignment
    context: tuple
    answers: AnswerSet
    seed: int

    @property
    def cfg(self) -> FigureConfiguration:
        return CONFIGURATIONS[self.config]

    @property
    def candidates(self) -> tuple:
        return self.answers.candidates

    @property
    def target(self) -> int:
        return self.answers.target

    def rows(self) -> tuple:
        c = self.context
        return (c[0:3], c[3:6], c[6:8])

    def completed(self, k: int) -> tuple:
        """All nine panels with candidate k at (3,3)."""
        return tuple(self.context) + (self.candidates[k],)

    def with_candidates(self, candidates, target) -> "PuzzleRecord":
        ans = AnswerSet(
            tuple(candidates), target, self.answers.style, self.answers.changes, self.answers.labels
        )
        return PuzzleRecord(self.id, self.config, self.assignment, self.context, ans, self.seed)


def panel_at(puzzle: PuzzleRecord, row: int, col: int, k: int | None = None) -> Panel:
    if (row, col) == (2, 2):
        return puzzle.candidates[k]
    return puzzle.context[row * 3 + col]
