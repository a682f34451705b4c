"""
Framework kernel: the domain barrier, the algorithm contract and the run loop.

A ProblemDomain owns everything problem specific (solutions, operators,
objective) and hands out only heuristic ids, memory slot indexes and
objective values. A HyperHeuristic drives the search through that narrow
interface. ``run`` wires the two together under a budget and a seed.
"""

from __future__ import annotations

import logging
import math
import time
from abc import ABC, abstractmethod
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    BudgetEmpty,
    DomainError,
    IndexOutOfRange,
    InvalidParameter,
    NoInstanceLoaded,
    NoMoveAvailable,
    RunFailed,
    UninitializedSlot,
    UnknownHeuristic,
    WrongArity,
)
from models import (
    BudgetMode,
    FitnessTrace,
    HeuristicDescriptor,
    HeuristicKind,
    RunBudget,
    RunResult,
    SearchParameters,
)

logger = logging.getLogger(__name__)

DEFAULT_MEMORY_SIZE = 2


class SolutionMemory:
    """Indexed, resizable population of domain-opaque solutions."""

    def __init__(self, size: int = DEFAULT_MEMORY_SIZE):
        if size < 1:
            raise InvalidParameter(f"memory size must be positive, got {size}")
        self._slots: List[Optional[Any]] = [None] * size

    def __len__(self) -> int:
        return len(self._slots)

    def resize(self, size: int) -> None:
        if size < 1:
            raise InvalidParameter(f"memory size must be positive, got {size}")
        kept = self._slots[:size]
        self._slots = kept + [None] * (size - len(kept))

    def check_index(self, index: int) -> None:
        if not 0 <= index < len(self._slots):
            raise IndexOutOfRange(
                f"slot {index} outside memory of size {len(self._slots)}"
            )

    def is_initialised(self, index: int) -> bool:
        self.check_index(index)
        return self._slots[index] is not None

    def get(self, index: int) -> Any:
        self.check_index(index)
        solution = self._slots[index]
        if solution is None:
            raise UninitializedSlot(f"slot {index} holds no solution")
        return solution

    def put(self, index: int, solution: Any) -> None:
        self.check_index(index)
        self._slots[index] = solution

    def clear(self) -> None:
        self._slots = [None] * len(self._slots)


class BudgetClock:
    """Tracks consumption of a RunBudget; expiry latches."""

    def __init__(self, budget: RunBudget):
        self.budget = budget
        self.evaluations = 0
        self._started = time.perf_counter()
        self._expired = False

    def tick(self) -> None:
        self.evaluations += 1

    def elapsed_ms(self) -> float:
        return (time.perf_counter() - self._started) * 1000.0

    @property
    def consumed(self):
        if self.budget.mode is BudgetMode.EVALUATIONS:
            return self.evaluations
        return self.elapsed_ms()

    def has_expired(self) -> bool:
        if not self._expired:
            self._expired = self.consumed >= self.budget.limit
        return self._expired


Operator = Callable[..., Any]


class ProblemDomain(ABC):
    """The domain barrier. Subclasses supply solutions and operators.

    Subclass hooks:
      - ``heuristics``: class-level catalog of HeuristicDescriptor
      - ``_prepare_instance(instance)``: validate and index a loaded instance
      - ``_initial_solution()``: a fresh randomised solution
      - ``_operators()``: callables aligned with ``heuristics``; unary ones take
        a private copy of the source and return the result, crossovers take
        two read-only parents and return a new solution
      - ``_objective(solution)``: the (cached) objective value

    Solutions must provide ``copy()``, ``__eq__`` and ``__str__``.
    """

    domain_id = "domain"
    heuristics: Tuple[HeuristicDescriptor, ...] = ()

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.parameters = SearchParameters()
        self.memory = SolutionMemory()
        self.instance: Any = None
        self.instance_id = ""
        self.clock: Optional[BudgetClock] = None
        self._ops: Optional[Sequence[Operator]] = None
        self._reset_bookkeeping()

    # ---------- hooks ----------
    @abstractmethod
    def _prepare_instance(self, instance: Any) -> Any: ...

    @abstractmethod
    def _initial_solution(self) -> Any: ...

    @abstractmethod
    def _operators(self) -> Sequence[Operator]: ...

    @abstractmethod
    def _objective(self, solution: Any) -> float: ...

    # ---------- run lifecycle ----------
    def _reset_bookkeeping(self) -> None:
        self.evaluations = 0
        self._best_value = math.inf
        self._best_solution: Any = None
        self.trace = FitnessTrace()
        self.heuristic_call_counts = [0] * len(self.heuristics)

    def begin_run(self, rng: np.random.Generator, clock: BudgetClock) -> None:
        """Attach the run's domain sub-stream and clock; clear run state."""
        self._require_instance()
        self.rng = rng
        self.clock = clock
        self.memory.clear()
        self._reset_bookkeeping()

    def finish_run(self) -> None:
        """Append the terminal trace point at budget exhaustion."""
        if self.trace.points:
            self.trace.record(self._consumed(), self._best_value)

    def _consumed(self):
        return self.clock.consumed if self.clock is not None else self.evaluations

    # ---------- barrier ----------
    def load_instance(self, instance: Any, instance_id: str = "") -> None:
        self.instance = self._prepare_instance(instance)
        self.instance_id = instance_id or getattr(instance, "name", "") or "instance"
        self.memory.clear()
        self._reset_bookkeeping()

    def set_memory_size(self, size: int) -> None:
        self.memory.resize(size)

    def set_intensity_of_mutation(self, value: float) -> None:
        self.parameters.intensity_of_mutation = value

    def set_depth_of_search(self, value: float) -> None:
        self.parameters.depth_of_search = value

    @property
    def number_of_heuristics(self) -> int:
        return len(self.heuristics)

    def get_heuristics_of_type(self, kind: HeuristicKind) -> List[int]:
        return [h.id for h in self.heuristics if h.kind is kind]

    def initialise_solution(self, index: int) -> float:
        self._require_instance()
        self.memory.check_index(index)
        solution = self._initial_solution()
        self.memory.put(index, solution)
        return self._record(solution)

    def apply_heuristic(self, heuristic: int, source: int, destination: int) -> float:
        self._require_instance()
        descriptor = self._descriptor(heuristic)
        if descriptor.arity != 1:
            raise WrongArity(f"{descriptor.name} needs two parents")
        parent = self.memory.get(source)
        self.memory.check_index(destination)
        try:
            result = self._operator(heuristic)(parent.copy())
        except NoMoveAvailable as exc:
            logger.debug("%s: %s made no move (%s)", self.domain_id, descriptor.name, exc)
            result = parent.copy()
        self.memory.put(destination, result)
        self.heuristic_call_counts[heuristic] += 1
        return self._record(result)

    def apply_heuristic2(
        self, heuristic: int, source1: int, source2: int, destination: int
    ) -> float:
        self._require_instance()
        descriptor = self._descriptor(heuristic)
        if descriptor.arity != 2:
            raise WrongArity(f"{descriptor.name} takes a single parent")
        first = self.memory.get(source1)
        second = self.memory.get(source2)
        self.memory.check_index(destination)
        try:
            result = self._operator(heuristic)(first, second)
        except NoMoveAvailable as exc:
            logger.debug("%s: %s made no move (%s)", self.domain_id, descriptor.name, exc)
            result = first.copy()
        self.memory.put(destination, result)
        self.heuristic_call_counts[heuristic] += 1
        return self._record(result)

    def copy_solution(self, source: int, destination: int) -> None:
        solution = self.memory.get(source)
        self.memory.check_index(destination)
        self.memory.put(destination, solution.copy())

    def get_function_value(self, index: int) -> float:
        return float(self._objective(self.memory.get(index)))

    def get_best_solution_value(self) -> float:
        return self._best_value

    def compare_solutions(self, first: int, second: int) -> bool:
        return self.memory.get(first) == self.memory.get(second)

    def solution_to_string(self, index: int) -> str:
        return str(self.memory.get(index))

    def best_solution_to_string(self) -> str:
        return "" if self._best_solution is None else str(self._best_solution)

    def get_solution(self, index: int) -> Any:
        """Read-only view for inspection; search strategies never call this."""
        return self.memory.get(index)

    # ---------- internals ----------
    def _require_instance(self) -> None:
        if self.instance is None:
            raise NoInstanceLoaded(f"{self.domain_id}: load an instance first")

    def _descriptor(self, heuristic: int) -> HeuristicDescriptor:
        if not 0 <= heuristic < len(self.heuristics):
            raise UnknownHeuristic(
                f"{self.domain_id} has no heuristic {heuristic} "
                f"(0..{len(self.heuristics) - 1})"
            )
        return self.heuristics[heuristic]

    def _operator(self, heuristic: int) -> Operator:
        if self._ops is None:
            self._ops = tuple(self._operators())
            assert len(self._ops) == len(self.heuristics)
        return self._ops[heuristic]

    def _record(self, solution: Any) -> float:
        value = float(self._objective(solution))
        self.evaluations += 1
        if self.clock is not None:
            self.clock.tick()
        if value < self._best_value:
            self._best_value = value
            self._best_solution = solution.copy()
            self.trace.record(self._consumed(), value)
        return value

    def _pick(self, items: Sequence[Any]) -> Any:
        return items[int(self.rng.integers(len(items)))]

    def _wall_clock_deadline(self, seconds: float) -> Optional[float]:
        """perf_counter deadline for time-boxed operators in wall-clock runs."""
        if self.clock is None or self.clock.budget.mode is not BudgetMode.WALL_CLOCK:
            return None
        return time.perf_counter() + seconds


class HyperHeuristic(ABC):
    """A search strategy that sees domains only through the barrier."""

    name = "hyper-heuristic"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.clock: Optional[BudgetClock] = None
        self.problem: Optional[ProblemDomain] = None

    def begin_run(self, rng: np.random.Generator, clock: BudgetClock) -> None:
        self.rng = rng
        self.clock = clock

    def has_time_expired(self) -> bool:
        return self.clock is None or self.clock.has_expired()

    def elapsed(self):
        """Budget consumed so far, in the budget's own unit."""
        return 0 if self.clock is None else self.clock.consumed

    def best_value(self) -> float:
        return math.inf if self.problem is None else self.problem.get_best_solution_value()

    @abstractmethod
    def solve(self, problem: ProblemDomain) -> None: ...

    def __str__(self) -> str:
        return self.name


def run(
    algorithm: HyperHeuristic,
    domain: ProblemDomain,
    budget: RunBudget,
    seed: int,
) -> RunResult:
    """Run ``algorithm`` on the loaded instance of ``domain`` until ``budget`` expires.

    One seed fixes the whole run: it is split into a domain sub-stream and a
    hyper-heuristic sub-stream.
    """
    if budget.limit <= 0:
        raise BudgetEmpty(f"budget {budget.to_dict()} leaves nothing to spend")
    if domain.instance is None:
        raise NoInstanceLoaded(f"{domain.domain_id}: load an instance before run()")

    domain_stream, algorithm_stream = np.random.SeedSequence(seed).spawn(2)
    clock = BudgetClock(budget)
    domain.begin_run(np.random.default_rng(domain_stream), clock)
    algorithm.begin_run(np.random.default_rng(algorithm_stream), clock)
    algorithm.problem = domain

    logger.info(
        "run %s on %s/%s seed=%d budget=%s",
        algorithm.name,
        domain.domain_id,
        domain.instance_id,
        seed,
        budget.to_dict(),
    )
    try:
        algorithm.solve(domain)
    except DomainError as exc:
        raise RunFailed(
            f"{type(exc).__name__}: {exc}",
            {
                "domain": domain.domain_id,
                "instance": domain.instance_id,
                "algorithm": algorithm.name,
                "seed": seed,
                "evaluations": domain.evaluations,
            },
        ) from exc
    domain.finish_run()

    result = RunResult(
        domain=domain.domain_id,
        instance=domain.instance_id,
        algorithm=algorithm.name,
        seed=seed,
        budget=budget,
        best_value=domain.get_best_solution_value(),
        evaluations_used=domain.evaluations,
        trace=domain.trace,
    )
    logger.info(
        "finished %s on %s/%s: best=%s after %d evaluations",
        algorithm.name,
        domain.domain_id,
        domain.instance_id,
        result.best_value,
        result.evaluations_used,
    )
    return result
