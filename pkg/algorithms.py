"""
Search strategies that see a domain only through the barrier in ``core``.

  - RandomHyperHeuristic: uniform heuristic choice, accept improvements and
    half of everything else.
  - IteratedLocalSearch: perturb, then the best of all local searches,
    accept strict improvements.
  - TabuSearchAdaptiveAcceptance: value-ranked heuristic choice with a tabu
    list and an acceptance rate that adapts to stagnation.
  - MemeticAlgorithm: steady-state population of 10 with tournaments,
    crossover, mutation and local search or ruin-recreate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Type

from core import HyperHeuristic, ProblemDomain
from errors import UnsupportedDomain
from models import BudgetMode, HeuristicKind

logger = logging.getLogger(__name__)

ACCEPT_WORSE_PROBABILITY = 0.5
TABU_VALUE_STEP = 1
ACCEPTANCE_STEP = 5
ACCEPTANCE_WINDOW_MS = 100
ACCEPTANCE_WINDOW_FRACTION = 0.01
POPULATION_SIZE = 10
MUTATION_PROBABILITY = 0.1
LOCAL_SEARCH_PROBABILITY = 0.5


def _unary_heuristics(problem: ProblemDomain) -> List[int]:
    return [h.id for h in problem.heuristics if h.kind is not HeuristicKind.CROSSOVER]


class RandomHyperHeuristic(HyperHeuristic):
    name = "random"

    def accepts(self, delta: float) -> bool:
        """delta = current - proposed; improvements always pass."""
        return delta > 0 or self.rng.random() < ACCEPT_WORSE_PROBABILITY

    def solve(self, problem: ProblemDomain) -> None:
        pool = _unary_heuristics(problem)
        current = problem.initialise_solution(0)
        while not self.has_time_expired():
            h = pool[int(self.rng.integers(len(pool)))]
            proposed = problem.apply_heuristic(h, 0, 1)
            if self.accepts(current - proposed):
                problem.copy_solution(1, 0)
                current = proposed


class IteratedLocalSearch(HyperHeuristic):
    """Slots: 0 incumbent, 1 perturbed, 2 local search scratch."""

    name = "ils"

    def solve(self, problem: ProblemDomain) -> None:
        problem.set_memory_size(3)
        perturbations = problem.get_heuristics_of_type(
            HeuristicKind.MUTATION
        ) + problem.get_heuristics_of_type(HeuristicKind.RUIN_RECREATE)
        local_searches = problem.get_heuristics_of_type(HeuristicKind.LOCAL_SEARCH)
        if not perturbations:
            raise UnsupportedDomain(f"{problem.domain_id} offers no perturbation heuristic")
        if not local_searches:
            logger.warning(
                "%s has no local search heuristic; ILS falls back to greedy perturbation",
                problem.domain_id,
            )

        self.incumbent = problem.initialise_solution(1)
        problem.copy_solution(1, 0)
        self._local_search(problem, local_searches)
        while not self.has_time_expired():
            h = perturbations[int(self.rng.integers(len(perturbations)))]
            perturbed = problem.apply_heuristic(h, 0, 1)
            if local_searches:
                self._local_search(problem, local_searches)
            elif perturbed < self.incumbent:
                problem.copy_solution(1, 0)
                self.incumbent = perturbed

    def _local_search(self, problem: ProblemDomain, local_searches: List[int]) -> None:
        """Every local search from slot 1; the best strict improvement replaces slot 0."""
        for h in local_searches:
            if self.has_time_expired():
                return
            value = problem.apply_heuristic(h, 1, 2)
            if value < self.incumbent:
                problem.copy_solution(2, 0)
                self.incumbent = value


@dataclass
class HeuristicScores:
    """Per-heuristic values plus the tabu list (heuristic -> iteration it entered)."""

    values: Dict[int, int]
    tenure: int
    tabu: Dict[int, int] = field(default_factory=dict)

    @classmethod
    def for_heuristics(cls, heuristics: List[int]) -> "HeuristicScores":
        return cls(values={h: 0 for h in heuristics}, tenure=len(heuristics) - 1)

    def candidates(self) -> List[int]:
        """Non-tabu heuristics of the highest value."""
        free = [h for h in self.values if h not in self.tabu]
        if not free:
            oldest = min(self.tabu, key=self.tabu.get)
            del self.tabu[oldest]
            free = [oldest]
        best = max(self.values[h] for h in free)
        return [h for h in free if self.values[h] == best]

    def improved(self, h: int) -> None:
        self.values[h] += TABU_VALUE_STEP

    def worsened(self, h: int, iteration: int) -> None:
        self.tabu.clear()
        self.values[h] -= TABU_VALUE_STEP
        self.tabu[h] = iteration

    def unchanged(self, h: int, iteration: int) -> None:
        self.tabu[h] = iteration
        self.tabu = {k: i for k, i in self.tabu.items() if iteration - i <= self.tenure}


@dataclass
class AdaptiveAcceptance:
    """Chance (in percent) of accepting a non-improving move, revised once per window."""

    window: float
    beta: int = 0
    window_start: float = 0
    last_improvement: Optional[float] = None
    last_worsening: Optional[float] = None
    _improved: bool = False
    _worsened: bool = False

    def record(self, consumed: float, improved: bool, worsened: bool) -> None:
        if improved:
            self._improved = True
            self.last_improvement = consumed
        if worsened:
            self._worsened = True
            self.last_worsening = consumed

    def advance(self, consumed: float) -> None:
        """Close every window that ``consumed`` has passed."""
        while consumed - self.window_start >= self.window:
            if not self._improved:
                self.beta += ACCEPTANCE_STEP
            elif not self._worsened:
                self.beta -= ACCEPTANCE_STEP
            self.beta = min(100, max(0, self.beta))
            self._improved = self._worsened = False
            self.window_start += self.window


class TabuSearchAdaptiveAcceptance(HyperHeuristic):
    """Slots: 0 incumbent, 1 candidate."""

    name = "tsaa"

    def _window(self) -> float:
        budget = self.clock.budget
        if budget.mode is BudgetMode.WALL_CLOCK:
            return ACCEPTANCE_WINDOW_MS
        return max(1, math.floor(budget.limit * ACCEPTANCE_WINDOW_FRACTION))

    def accepts_worse(self) -> bool:
        """Accept a non-improving move with probability beta percent."""
        return int(self.rng.integers(1, 101)) <= self.acceptance.beta

    def solve(self, problem: ProblemDomain) -> None:
        pool = _unary_heuristics(problem)
        if not pool:
            raise UnsupportedDomain(f"{problem.domain_id} offers no unary heuristic")
        self.scores = HeuristicScores.for_heuristics(pool)
        self.acceptance = AdaptiveAcceptance(window=self._window())

        current = problem.initialise_solution(0)
        iteration = 0
        while not self.has_time_expired():
            iteration += 1
            candidates = self.scores.candidates()
            h = candidates[int(self.rng.integers(len(candidates)))]
            proposed = problem.apply_heuristic(h, 0, 1)

            if proposed < current:
                self.scores.improved(h)
            elif proposed > current:
                self.scores.worsened(h, iteration)
            else:
                self.scores.unchanged(h, iteration)

            if proposed < current or self.accepts_worse():
                problem.copy_solution(1, 0)
                self.acceptance.record(self.elapsed(), proposed < current, proposed > current)
                current = proposed
            self.acceptance.advance(self.elapsed())


class MemeticAlgorithm(HyperHeuristic):
    """Slots 0-9 hold the population, slot 10 the offspring."""

    name = "ma"

    def __init__(self, seed: int = 0):
        super().__init__(seed)
        self.iterations = 0
        self.mutations = 0

    def tournament_winner(self, values: List[float]) -> int:
        first, second = (int(i) for i in self.rng.choice(len(values), size=2, replace=False))
        return second if values[second] < values[first] else first

    def _pick(self, pool: List[int]) -> int:
        return pool[int(self.rng.integers(len(pool)))]

    def solve(self, problem: ProblemDomain) -> None:
        crossovers = problem.get_heuristics_of_type(HeuristicKind.CROSSOVER)
        if not crossovers:
            raise UnsupportedDomain(f"{problem.domain_id} offers no crossover heuristic")
        mutations = problem.get_heuristics_of_type(HeuristicKind.MUTATION)
        local_searches = problem.get_heuristics_of_type(HeuristicKind.LOCAL_SEARCH)
        ruins = problem.get_heuristics_of_type(HeuristicKind.RUIN_RECREATE)

        offspring = POPULATION_SIZE
        problem.set_memory_size(POPULATION_SIZE + 1)
        self.population: List[float] = []
        for slot in range(POPULATION_SIZE):
            if self.has_time_expired():
                return
            self.population.append(problem.initialise_solution(slot))

        while not self.has_time_expired():
            self.iterations += 1
            first = self.tournament_winner(self.population)
            second = self.tournament_winner(self.population)
            value = problem.apply_heuristic2(self._pick(crossovers), first, second, offspring)

            if mutations and self.rng.random() < MUTATION_PROBABILITY:
                if self.has_time_expired():
                    break
                self.mutations += 1
                value = problem.apply_heuristic(self._pick(mutations), offspring, offspring)

            improvers = local_searches if self.rng.random() < LOCAL_SEARCH_PROBABILITY else ruins
            improvers = improvers or local_searches or ruins
            if improvers:
                if self.has_time_expired():
                    break
                value = problem.apply_heuristic(self._pick(improvers), offspring, offspring)

            worse = first if self.population[first] > self.population[second] else second
            if value <= self.population[worse]:
                problem.copy_solution(offspring, worse)
                self.population[worse] = value


ALGORITHMS: Dict[str, Type[HyperHeuristic]] = {
    cls.name: cls
    for cls in (
        RandomHyperHeuristic,
        IteratedLocalSearch,
        TabuSearchAdaptiveAcceptance,
        MemeticAlgorithm,
    )
}


def make_algorithm(name: str, seed: int = 0) -> HyperHeuristic:
    try:
        return ALGORITHMS[name](seed)
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
