# models.py - value types passed across the domain barrier
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Tuple, Union

import pandas as pd

from errors import InvalidParameter

DEFAULT_INTENSITY = 0.2
DEFAULT_DEPTH = 0.2


class HeuristicKind(Enum):
    MUTATION = "mutation"
    RUIN_RECREATE = "ruin_recreate"
    LOCAL_SEARCH = "local_search"
    CROSSOVER = "crossover"


class BudgetMode(Enum):
    WALL_CLOCK = "wall_clock"  # limit in milliseconds
    EVALUATIONS = "evaluations"  # limit in objective evaluations


def _check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise InvalidParameter(f"{name} must lie in [0, 1], got {value}")
    return value


class SearchParameters:
    """The two operator knobs every domain exposes; values outside [0, 1] are rejected."""

    def __init__(
        self,
        intensity_of_mutation: float = DEFAULT_INTENSITY,
        depth_of_search: float = DEFAULT_DEPTH,
    ):
        self.intensity_of_mutation = intensity_of_mutation
        self.depth_of_search = depth_of_search

    @property
    def intensity_of_mutation(self) -> float:
        return self._intensity

    @intensity_of_mutation.setter
    def intensity_of_mutation(self, value: float) -> None:
        self._intensity = _check_unit_interval("intensity_of_mutation", value)

    @property
    def depth_of_search(self) -> float:
        return self._depth

    @depth_of_search.setter
    def depth_of_search(self, value: float) -> None:
        self._depth = _check_unit_interval("depth_of_search", value)

    def to_dict(self):
        return {
            "intensity_of_mutation": self.intensity_of_mutation,
            "depth_of_search": self.depth_of_search,
        }


@dataclass(frozen=True)
class HeuristicDescriptor:
    """Identity and class of one low-level heuristic."""

    id: int
    name: str
    kind: HeuristicKind
    description: str = ""

    @property
    def arity(self) -> int:
        return 2 if self.kind is HeuristicKind.CROSSOVER else 1


def build_catalog(
    entries: List[Tuple[str, HeuristicKind, str]]
) -> Tuple[HeuristicDescriptor, ...]:
    """Number (name, kind, description) entries contiguously from 0."""
    return tuple(
        HeuristicDescriptor(i, name, kind, description)
        for i, (name, kind, description) in enumerate(entries)
    )


@dataclass(frozen=True)
class RunBudget:
    mode: BudgetMode
    limit: int

    @classmethod
    def evaluations(cls, count: int) -> "RunBudget":
        return cls(BudgetMode.EVALUATIONS, int(count))

    @classmethod
    def wall_clock(cls, milliseconds: int) -> "RunBudget":
        return cls(BudgetMode.WALL_CLOCK, int(milliseconds))

    def to_dict(self):
        return {"mode": self.mode.value, "limit": self.limit}

    @classmethod
    def from_dict(cls, data: dict) -> "RunBudget":
        return cls(BudgetMode(data["mode"]), int(data["limit"]))


Consumed = Union[int, float]


@dataclass
class FitnessTrace:
    """Best-so-far objective values against budget consumed."""

    points: List[Tuple[Consumed, float]] = field(default_factory=list)

    def record(self, consumed: Consumed, value: float) -> None:
        if self.points and value > self.points[-1][1]:
            raise ValueError("fitness trace must be non-increasing")
        self.points.append((consumed, value))

    @property
    def best(self) -> float:
        return self.points[-1][1] if self.points else math.inf

    def __len__(self) -> int:
        return len(self.points)

    def to_list(self) -> List[List[Consumed]]:
        return [[consumed, value] for consumed, value in self.points]

    def write_csv(self, path: Union[str, Path]) -> None:
        pd.DataFrame(self.points, columns=["consumed", "value"]).to_csv(path, index=False)


@dataclass
class RunResult:
    domain: str
    instance: str
    algorithm: str
    seed: int
    budget: RunBudget
    best_value: float
    evaluations_used: int
    trace: FitnessTrace

    def to_dict(self):
        return {
            "domain": self.domain,
            "instance": self.instance,
            "algorithm": self.algorithm,
            "seed": self.seed,
            "budget": self.budget.to_dict(),
            "best_value": self.best_value,
            "evaluations_used": self.evaluations_used,
            "trace": self.trace.to_list(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(
            domain=data["domain"],
            instance=data["instance"],
            algorithm=data["algorithm"],
            seed=int(data["seed"]),
            budget=RunBudget.from_dict(data["budget"]),
            best_value=float(data["best_value"]),
            evaluations_used=int(data["evaluations_used"]),
            trace=FitnessTrace([(c, v) for c, v in data["trace"]]),
        )
