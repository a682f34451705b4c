"""
MAX-SAT domain: minimise the number of broken clauses of a CNF formula.

Assignments keep incremental bookkeeping (true-literal counts per clause, the
list of broken clauses, positive/negative gains and flip ages per variable)
so that flips and gain queries never rescan the whole formula.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from core import ProblemDomain
from errors import (
    EmptyClause,
    InstanceFormatError,
    LiteralOutOfRange,
    MalformedHeader,
    NoBrokenClause,
    NoMoveAvailable,
    UnterminatedClause,
)
from models import HeuristicKind, build_catalog

logger = logging.getLogger(__name__)

Literal = Tuple[int, bool]  # (variable index, positive polarity)

WALK_PROBABILITY = 0.5
NOVELTY_NOISE = 0.3


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: Tuple[Tuple[Literal, ...], ...]
    name: str = ""

    def __post_init__(self):
        for index, clause in enumerate(self.clauses):
            if not clause:
                raise EmptyClause(f"clause {index} is empty")
            for variable, _ in clause:
                if not 0 <= variable < self.num_vars:
                    raise LiteralOutOfRange(
                        f"clause {index} uses variable {variable} of {self.num_vars}"
                    )

    @classmethod
    def from_dimacs(
        cls, num_vars: int, clauses: Sequence[Sequence[int]], name: str = ""
    ) -> "CnfFormula":
        """Build from signed 1-based literals; repeated literals collapse."""
        converted = []
        for clause in clauses:
            literals = []
            for lit in clause:
                literal = (abs(lit) - 1, lit > 0)
                if literal not in literals:
                    literals.append(literal)
            converted.append(tuple(literals))
        return cls(num_vars, tuple(converted), name)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @cached_property
    def occurrences(self) -> List[List[int]]:
        """Clause indexes mentioning each variable, each clause listed once."""
        occ: List[List[int]] = [[] for _ in range(self.num_vars)]
        for index, clause in enumerate(self.clauses):
            for variable in dict.fromkeys(v for v, _ in clause):
                occ[variable].append(index)
        return occ

    @cached_property
    def tautologies(self) -> List[bool]:
        flags = []
        for clause in self.clauses:
            seen = {}
            taut = False
            for variable, positive in clause:
                if seen.setdefault(variable, positive) != positive:
                    taut = True
            flags.append(taut)
        return flags

    def clause_variables(self, index: int) -> List[int]:
        return list(dict.fromkeys(v for v, _ in self.clauses[index]))

    def broken(self, values: Sequence[bool]) -> int:
        """Broken-clause count by full re-scan."""
        return sum(
            1
            for clause in self.clauses
            if not any(values[v] == positive for v, positive in clause)
        )

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {self.num_clauses}"]
        for clause in self.clauses:
            lits = [str(v + 1 if positive else -(v + 1)) for v, positive in clause]
            lines.append(" ".join(lits + ["0"]))
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str, name: str = "") -> CnfFormula:
    header = None
    clauses: List[List[int]] = []
    current: List[int] = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            if header is not None:
                raise MalformedHeader(f"line {lineno}: second problem line")
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise MalformedHeader(f"line {lineno}: invalid problem line {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise MalformedHeader(f"line {lineno}: invalid problem line {line!r}")
            if header[0] < 0 or header[1] < 0:
                raise MalformedHeader(f"line {lineno}: negative counts in {line!r}")
            continue
        if header is None:
            raise MalformedHeader(f"line {lineno}: clause before the problem line")

        for token in line.split():
            try:
                literal = int(token)
            except ValueError:
                raise InstanceFormatError(f"line {lineno}: bad literal {token!r}")
            if literal == 0:
                if not current:
                    raise EmptyClause(f"line {lineno}: empty clause")
                clauses.append(current)
                current = []
            elif abs(literal) > header[0]:
                raise LiteralOutOfRange(
                    f"line {lineno}: literal {literal} exceeds {header[0]} variables"
                )
            else:
                current.append(literal)

    if header is None:
        raise MalformedHeader("missing 'p cnf' problem line")
    if current:
        raise UnterminatedClause(f"last clause {current} lacks its terminating 0")
    if len(clauses) != header[1]:
        raise MalformedHeader(
            f"header declares {header[1]} clauses, found {len(clauses)}"
        )
    return CnfFormula.from_dimacs(header[0], clauses, name)


def read_dimacs(path: Union[str, Path]) -> CnfFormula:
    path = Path(path)
    return parse_dimacs(path.read_text(encoding="utf-8"), name=path.stem)


def write_dimacs(formula: CnfFormula, path: Union[str, Path]) -> None:
    Path(path).write_text(formula.to_dimacs(), encoding="utf-8")


def generate_random_ksat(
    num_vars: int, clause_ratio: float = 4.26, k: int = 3, seed: int = 0
) -> CnfFormula:
    """Uniform random k-SAT: distinct variables per clause, fair polarities."""
    rng = np.random.default_rng(seed)
    num_clauses = max(1, int(round(clause_ratio * num_vars)))
    width = min(k, num_vars)
    clauses = []
    for _ in range(num_clauses):
        variables = rng.choice(num_vars, size=width, replace=False)
        signs = rng.random(width) < 0.5
        clauses.append(
            [int(v) + 1 if s else -(int(v) + 1) for v, s in zip(variables, signs)]
        )
    return CnfFormula.from_dimacs(
        num_vars, clauses, name=f"rand{k}sat-v{num_vars}-r{clause_ratio:g}-s{seed}"
    )


class Assignment:
    """Truth values plus incrementally maintained gain bookkeeping."""

    __slots__ = (
        "formula",
        "values",
        "true_count",
        "broken",
        "_broken_at",
        "positive",
        "negative",
        "flips",
        "last_flip",
    )

    def __init__(self, formula: CnfFormula, values: Sequence[bool]):
        self.formula = formula
        self.values = [bool(v) for v in values]
        n, m = formula.num_vars, formula.num_clauses
        self.positive = [0] * n
        self.negative = [0] * n
        self.flips = 0
        self.last_flip = [0] * n
        self.true_count = [0] * m
        self.broken: List[int] = []
        self._broken_at = [-1] * m
        for index, clause in enumerate(formula.clauses):
            count = sum(1 for v, positive in clause if self.values[v] == positive)
            self.true_count[index] = count
            if count == 0:
                self._mark_broken(index)
            self._add_contribution(index)

    def copy(self) -> "Assignment":
        clone = Assignment.__new__(Assignment)
        clone.formula = self.formula
        clone.values = self.values[:]
        clone.true_count = self.true_count[:]
        clone.broken = self.broken[:]
        clone._broken_at = self._broken_at[:]
        clone.positive = self.positive[:]
        clone.negative = self.negative[:]
        clone.flips = self.flips
        clone.last_flip = self.last_flip[:]
        return clone

    @property
    def broken_count(self) -> int:
        return len(self.broken)

    def net_gain(self, variable: int) -> int:
        return self.positive[variable] - self.negative[variable]

    def net_gains(self) -> List[int]:
        return [p - q for p, q in zip(self.positive, self.negative)]

    def age(self, variable: int) -> int:
        return self.flips - self.last_flip[variable]

    def flip(self, variable: int) -> None:
        clauses = self.formula.clauses
        touched = self.formula.occurrences[variable]
        for index in touched:
            self._remove_contribution(index)
        value = not self.values[variable]
        self.values[variable] = value
        for index in touched:
            count = self.true_count[index]
            for v, positive in clauses[index]:
                if v == variable:
                    count += 1 if value == positive else -1
            was_broken = self.true_count[index] == 0
            self.true_count[index] = count
            if was_broken and count > 0:
                self._unmark_broken(index)
            elif not was_broken and count == 0:
                self._mark_broken(index)
            self._add_contribution(index)
        self.flips += 1
        self.last_flip[variable] = self.flips

    # ---------- bookkeeping ----------
    def _mark_broken(self, index: int) -> None:
        self._broken_at[index] = len(self.broken)
        self.broken.append(index)

    def _unmark_broken(self, index: int) -> None:
        slot = self._broken_at[index]
        last = self.broken.pop()
        if last != index:
            self.broken[slot] = last
            self._broken_at[last] = slot
        self._broken_at[index] = -1

    def _contribution(self, index: int, sign: int) -> None:
        if self.formula.tautologies[index]:
            return
        clause = self.formula.clauses[index]
        count = self.true_count[index]
        if count == 0:
            for variable in dict.fromkeys(v for v, _ in clause):
                self.positive[variable] += sign
        elif count == 1:
            for variable, positive in clause:
                if self.values[variable] == positive:
                    self.negative[variable] += sign
                    break

    def _add_contribution(self, index: int) -> None:
        self._contribution(index, 1)

    def _remove_contribution(self, index: int) -> None:
        self._contribution(index, -1)

    def __eq__(self, other) -> bool:
        return isinstance(other, Assignment) and self.values == other.values

    def __str__(self) -> str:
        return "".join("1" if v else "0" for v in self.values)


HEURISTICS = build_catalog(
    [
        ("gsat", HeuristicKind.MUTATION, "Flip the variable of highest net gain, ties random"),
        ("hsat", HeuristicKind.MUTATION, "As GSAT, ties broken by highest age"),
        ("walksat", HeuristicKind.MUTATION, "Flip a variable of a random broken clause, preferring zero negative gain"),
        ("novelty", HeuristicKind.MUTATION, "Best net gain in a random broken clause unless it is the youngest"),
        ("reinitialise", HeuristicKind.RUIN_RECREATE, "Re-randomise a proportion of the variables"),
        ("random_flip_descent", HeuristicKind.LOCAL_SEARCH, "First-improvement flips of random variables"),
        ("broken_clause_descent", HeuristicKind.LOCAL_SEARCH, "First-improvement flips from random broken clauses"),
        ("one_point_crossover", HeuristicKind.CROSSOVER, "One point crossover on the truth values"),
        ("two_point_crossover", HeuristicKind.CROSSOVER, "Two point crossover on the truth values"),
    ]
)


class MaxSat(ProblemDomain):
    domain_id = "maxsat"
    heuristics = HEURISTICS

    def _prepare_instance(self, formula: CnfFormula) -> CnfFormula:
        if not isinstance(formula, CnfFormula):
            raise TypeError(f"expected a CnfFormula, got {type(formula).__name__}")
        return formula

    def _random_values(self) -> List[bool]:
        return [bool(b) for b in self.rng.random(self.instance.num_vars) < 0.5]

    def _initial_solution(self) -> Assignment:
        return Assignment(self.instance, self._random_values())

    def _objective(self, assignment: Assignment) -> float:
        return assignment.broken_count

    def _operators(self):
        return (
            self._gsat,
            self._hsat,
            self._walksat,
            self._novelty,
            self._reinitialise,
            self._random_flip_descent,
            self._broken_clause_descent,
            self._one_point_crossover,
            self._two_point_crossover,
        )

    # ---------- mutation ----------
    def _gsat(self, a: Assignment) -> Assignment:
        gains = a.net_gains()
        best = max(gains)
        a.flip(self._pick([v for v, g in enumerate(gains) if g == best]))
        return a

    def _hsat(self, a: Assignment) -> Assignment:
        gains = a.net_gains()
        best = max(gains)
        candidates = [v for v, g in enumerate(gains) if g == best]
        a.flip(max(candidates, key=lambda v: (a.age(v), -v)))
        return a

    def _random_broken_clause(self, a: Assignment) -> List[int]:
        if not a.broken:
            raise NoBrokenClause("formula is satisfied")
        return self.instance.clause_variables(self._pick(a.broken))

    def _walksat(self, a: Assignment) -> Assignment:
        variables = self._random_broken_clause(a)
        free = [v for v in variables if a.negative[v] == 0]
        if free:
            a.flip(self._pick(free))
        elif self.rng.random() < WALK_PROBABILITY:
            a.flip(self._pick(variables))
        else:
            a.flip(min(variables, key=lambda v: a.negative[v]))
        return a

    def _novelty(self, a: Assignment) -> Assignment:
        variables = self._random_broken_clause(a)
        ranked = sorted(variables, key=lambda v: (-a.net_gain(v), v))
        best = ranked[0]
        youngest = min(a.age(v) for v in variables)
        if a.age(best) == youngest and len(ranked) > 1:
            if self.rng.random() >= NOVELTY_NOISE:
                best = ranked[1]
        a.flip(best)
        return a

    # ---------- ruin-recreate ----------
    def _reinitialise(self, a: Assignment) -> Assignment:
        n = self.instance.num_vars
        count = math.ceil(self.parameters.intensity_of_mutation * n)
        if count == 0:
            raise NoMoveAvailable("intensity of mutation selects no variable")
        if count >= n:
            return Assignment(self.instance, self._random_values())
        chosen = self.rng.choice(n, size=count, replace=False)
        fresh = self.rng.random(count) < 0.5
        for variable, value in zip(chosen, fresh):
            if a.values[variable] != bool(value):
                a.flip(int(variable))
        return a

    # ---------- local search ----------
    def _descent(self, a: Assignment, pick: Callable[[Assignment], int]) -> Assignment:
        n = self.instance.num_vars
        attempts = math.ceil((1 + self.parameters.depth_of_search * 9) * n)
        stale = 0
        for _ in range(attempts):
            if not a.broken:
                break
            variable = pick(a)
            if a.net_gain(variable) > 0:
                a.flip(variable)
                stale = 0
            else:
                stale += 1
                if stale >= n:
                    break
        return a

    def _random_flip_descent(self, a: Assignment) -> Assignment:
        n = self.instance.num_vars
        return self._descent(a, lambda _: int(self.rng.integers(n)))

    def _broken_clause_descent(self, a: Assignment) -> Assignment:
        if not a.broken:
            raise NoBrokenClause("formula is satisfied")
        return self._descent(a, lambda s: self._pick(self._random_broken_clause(s)))

    # ---------- crossover ----------
    def _one_point_crossover(self, first: Assignment, second: Assignment) -> Assignment:
        n = self.instance.num_vars
        if n < 2:
            raise NoMoveAvailable("a single variable has no crossover point")
        point = int(self.rng.integers(1, n))
        return Assignment(self.instance, first.values[:point] + second.values[point:])

    def _two_point_crossover(self, first: Assignment, second: Assignment) -> Assignment:
        n = self.instance.num_vars
        if n < 3:
            return self._one_point_crossover(first, second)
        low, high = sorted(int(p) for p in self.rng.choice(np.arange(1, n), size=2, replace=False))
        values = first.values[:low] + second.values[low:high] + first.values[high:]
        return Assignment(self.instance, values)
