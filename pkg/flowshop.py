"""
Permutation flow shop domain: order n jobs through m machines to minimise
the makespan.

Insertion-based operators evaluate every insertion position of a job in one
sweep using head/tail completion matrices, so an NEH step costs O(k*m)
instead of O(k^2*m).
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from core import ProblemDomain
from errors import InstanceFormatError, MalformedHeader, NoMoveAvailable
from models import HeuristicKind, build_catalog

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FlowShopInstance:
    processing: np.ndarray  # processing[job, machine]
    name: str = ""

    def __post_init__(self):
        matrix = np.asarray(self.processing, dtype=np.int64)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise InstanceFormatError(f"expected a jobs x machines matrix, got shape {matrix.shape}")
        if (matrix < 0).any():
            raise InstanceFormatError("processing times must be non-negative")
        matrix.setflags(write=False)
        object.__setattr__(self, "processing", matrix)

    @property
    def num_jobs(self) -> int:
        return self.processing.shape[0]

    @property
    def num_machines(self) -> int:
        return self.processing.shape[1]

    def to_text(self) -> str:
        buffer = io.StringIO()
        buffer.write(f"{self.num_jobs} {self.num_machines}\n")
        np.savetxt(buffer, self.processing, fmt="%d")
        return buffer.getvalue()


def parse_flowshop(text: str, name: str = "") -> FlowShopInstance:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise MalformedHeader("empty instance file")
    try:
        n, m = (int(t) for t in lines[0].split())
    except ValueError:
        raise MalformedHeader(f"expected 'n m' on the first line, got {lines[0]!r}")
    try:
        matrix = np.loadtxt(io.StringIO("\n".join(lines[1:])), dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise InstanceFormatError(f"bad processing time row: {exc}")
    if matrix.shape != (n, m):
        raise MalformedHeader(f"header declares {n}x{m}, found {matrix.shape[0]}x{matrix.shape[1]}")
    return FlowShopInstance(matrix, name)


def parse_taillard(text: str, name: str = "") -> FlowShopInstance:
    """Read the first instance of a Taillard benchmark file.

    Layout: a header text line, a numeric line starting with ``n m``, a
    ``processing times :`` line, then m rows of n times (machine-major).
    """
    numeric = []
    for line in text.splitlines():
        tokens = line.split()
        if tokens and all(t.lstrip("-").isdigit() for t in tokens):
            numeric.append(tokens)
    if not numeric or len(numeric[0]) < 2:
        raise MalformedHeader("no 'n m ...' header line found")
    n, m = int(numeric[0][0]), int(numeric[0][1])
    rows = numeric[1 : 1 + m]
    matrix = np.loadtxt(io.StringIO("\n".join(" ".join(r) for r in rows)), dtype=np.int64, ndmin=2)
    if matrix.shape != (m, n):
        raise MalformedHeader(f"expected {m} rows of {n} times, found shape {matrix.shape}")
    return FlowShopInstance(matrix.transpose(), name)


def read_flowshop(path: Union[str, Path]) -> FlowShopInstance:
    path = Path(path)
    return parse_flowshop(path.read_text(encoding="utf-8"), name=path.stem)


def write_flowshop(instance: FlowShopInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(instance.to_text(), encoding="utf-8")


def generate_uniform(num_jobs: int, num_machines: int, pmax: int = 99, seed: int = 0) -> FlowShopInstance:
    rng = np.random.default_rng(seed)
    matrix = rng.integers(1, pmax + 1, size=(num_jobs, num_machines))
    return FlowShopInstance(matrix, f"fs{num_jobs}x{num_machines}-p{pmax}-s{seed}")


# ---------- evaluation ----------
def _next_completion(previous: np.ndarray, times: np.ndarray) -> np.ndarray:
    """completion[j] = max(completion[j-1], previous[j]) + times[j], vectorised.

    Works row-wise when ``previous`` is 2-D.
    """
    total = np.cumsum(times)
    return total + np.maximum.accumulate(previous - (total - times), axis=-1)


def makespan(instance: FlowShopInstance, sequence: Sequence[int]) -> int:
    completion = np.zeros(instance.num_machines, dtype=np.int64)
    for job in sequence:
        completion = _next_completion(completion, instance.processing[job])
    return int(completion[-1])


def heads(instance: FlowShopInstance, sequence: Sequence[int]) -> np.ndarray:
    """Row i: completion times of the first i jobs on every machine."""
    table = np.zeros((len(sequence) + 1, instance.num_machines), dtype=np.int64)
    for i, job in enumerate(sequence):
        table[i + 1] = _next_completion(table[i], instance.processing[job])
    return table


def tails(instance: FlowShopInstance, sequence: Sequence[int]) -> np.ndarray:
    """Row i: longest path from machine j of job sequence[i] to the end."""
    table = np.zeros((len(sequence) + 1, instance.num_machines), dtype=np.int64)
    for i in range(len(sequence) - 1, -1, -1):
        reversed_times = instance.processing[sequence[i]][::-1]
        table[i] = _next_completion(table[i + 1][::-1], reversed_times)[::-1]
    return table


def insertion_makespans(instance: FlowShopInstance, sequence: Sequence[int], job: int) -> np.ndarray:
    """Makespan of inserting ``job`` at each position 0..len(sequence)."""
    head = heads(instance, sequence)
    tail = tails(instance, sequence)
    inserted = _next_completion(head, instance.processing[job])
    return (inserted + tail).max(axis=1)


def best_insertion(instance: FlowShopInstance, sequence: Sequence[int], job: int):
    """Leftmost position of minimal makespan and that makespan."""
    costs = insertion_makespans(instance, sequence, job)
    position = int(np.argmin(costs))
    return position, int(costs[position])


def neh(instance: FlowShopInstance, rank_order: Sequence[int]) -> List[int]:
    sequence = [int(rank_order[0])]
    for job in rank_order[1:]:
        position, _ = best_insertion(instance, sequence, int(job))
        sequence.insert(position, int(job))
    return sequence


class JobPermutation:
    __slots__ = ("instance", "order", "span")

    def __init__(self, instance: FlowShopInstance, order: Sequence[int], span: Optional[int] = None):
        self.instance = instance
        self.order = [int(j) for j in order]
        self.span = makespan(instance, self.order) if span is None else span

    def copy(self) -> "JobPermutation":
        return JobPermutation(self.instance, self.order, self.span)

    def __eq__(self, other) -> bool:
        return isinstance(other, JobPermutation) and self.order == other.order

    def __str__(self) -> str:
        return " ".join(str(j) for j in self.order)


def neh_init(instance: FlowShopInstance, rank_order: Sequence[int]) -> JobPermutation:
    return JobPermutation(instance, neh(instance, rank_order))


# ---------- crossovers ----------
def order_crossover(first: Sequence[int], second: Sequence[int], low: int, high: int) -> List[int]:
    n = len(first)
    child: List[Optional[int]] = [None] * n
    child[low:high] = first[low:high]
    kept = set(first[low:high])
    donors = [second[(high + k) % n] for k in range(n)]
    fill = iter(j for j in donors if j not in kept)
    for k in range(n):
        position = (high + k) % n
        if child[position] is None:
            child[position] = next(fill)
    return child


def partially_mapped_crossover(first: Sequence[int], second: Sequence[int], low: int, high: int) -> List[int]:
    segment = set(first[low:high])
    where_first = {job: i for i, job in enumerate(first)}
    child = list(second)
    child[low:high] = first[low:high]
    for i in list(range(low)) + list(range(high, len(first))):
        job = second[i]
        while job in segment:
            job = second[where_first[job]]
        child[i] = job
    return child


def precedence_preservative_crossover(first: Sequence[int], second: Sequence[int], mask: Sequence[bool]) -> List[int]:
    remaining = [list(first), list(second)]
    child = []
    for take_first in mask:
        job = remaining[0 if take_first else 1][0]
        child.append(job)
        remaining[0].remove(job)
        remaining[1].remove(job)
    return child


def one_point_crossover(first: Sequence[int], second: Sequence[int], point: int) -> List[int]:
    head = list(first[:point])
    taken = set(head)
    return head + [j for j in second if j not in taken]


HEURISTICS = build_catalog(
    [
        ("reinsert", HeuristicKind.MUTATION, "Move a random job to a random position"),
        ("swap", HeuristicKind.MUTATION, "Swap two random jobs"),
        ("shuffle", HeuristicKind.MUTATION, "Shuffle the whole permutation"),
        ("neh_rebuild", HeuristicKind.MUTATION, "NEH construction ranked by the current order"),
        ("shuffle_subset", HeuristicKind.MUTATION, "Shuffle k randomly chosen positions"),
        ("ruin_recreate", HeuristicKind.RUIN_RECREATE, "Remove l jobs and reinsert each at its best position"),
        ("ruin_recreate_beam", HeuristicKind.RUIN_RECREATE, "Remove l jobs and reinsert keeping the q best partial sequences"),
        ("steepest_reinsertion", HeuristicKind.LOCAL_SEARCH, "Best-position reinsertion passes until no improvement"),
        ("first_reinsertion", HeuristicKind.LOCAL_SEARCH, "First improving reinsertion passes until no improvement"),
        ("random_steepest_pass", HeuristicKind.LOCAL_SEARCH, "Best-position reinsertion of r random jobs, once"),
        ("random_first_pass", HeuristicKind.LOCAL_SEARCH, "First improving reinsertion of r random jobs, once"),
        ("order_crossover", HeuristicKind.CROSSOVER, "Order crossover (OX)"),
        ("partially_mapped_crossover", HeuristicKind.CROSSOVER, "Partially mapped crossover (PMX)"),
        ("precedence_preservative_crossover", HeuristicKind.CROSSOVER, "Precedence preservative crossover (PPX)"),
        ("one_point_crossover", HeuristicKind.CROSSOVER, "Prefix of one parent, rest in the other's order"),
    ]
)


class FlowShop(ProblemDomain):
    domain_id = "flowshop"
    heuristics = HEURISTICS

    def _prepare_instance(self, instance: FlowShopInstance) -> FlowShopInstance:
        if not isinstance(instance, FlowShopInstance):
            raise TypeError(f"expected a FlowShopInstance, got {type(instance).__name__}")
        return instance

    def _initial_solution(self) -> JobPermutation:
        return neh_init(self.instance, self.rng.permutation(self.instance.num_jobs))

    def _objective(self, solution: JobPermutation) -> float:
        return solution.span

    def _operators(self):
        return (
            self._reinsert,
            self._swap,
            self._shuffle,
            self._neh_rebuild,
            self._shuffle_subset,
            self._ruin_recreate,
            self._ruin_recreate_beam,
            self._steepest_reinsertion,
            self._first_reinsertion,
            self._random_steepest_pass,
            self._random_first_pass,
            self._order_crossover,
            self._partially_mapped_crossover,
            self._precedence_preservative_crossover,
            self._one_point_crossover,
        )

    @property
    def _n(self) -> int:
        return self.instance.num_jobs

    def _require_two_jobs(self) -> None:
        if self._n < 2:
            raise NoMoveAvailable("a single job has only one order")

    def _sweep_size(self) -> int:
        return int(math.floor(self.parameters.depth_of_search * (self._n - 1))) + 1

    # ---------- mutation ----------
    def _reinsert(self, s: JobPermutation) -> JobPermutation:
        self._require_two_jobs()
        order = s.order
        job = order.pop(int(self.rng.integers(self._n)))
        order.insert(int(self.rng.integers(self._n)), job)
        return JobPermutation(self.instance, order)

    def _swap(self, s: JobPermutation) -> JobPermutation:
        self._require_two_jobs()
        i, j = (int(k) for k in self.rng.choice(self._n, size=2, replace=False))
        order = s.order
        order[i], order[j] = order[j], order[i]
        return JobPermutation(self.instance, order)

    def _shuffle(self, s: JobPermutation) -> JobPermutation:
        return JobPermutation(self.instance, self.rng.permutation(s.order))

    def _neh_rebuild(self, s: JobPermutation) -> JobPermutation:
        return neh_init(self.instance, s.order)

    def _shuffle_subset(self, s: JobPermutation) -> JobPermutation:
        self._require_two_jobs()
        alpha = self.parameters.intensity_of_mutation
        k = min(2 + int(math.floor(alpha * (self._n - 2))), self._n)
        positions = np.sort(self.rng.choice(self._n, size=k, replace=False))
        order = np.asarray(s.order)
        order[positions] = self.rng.permutation(order[positions])
        return JobPermutation(self.instance, order)

    # ---------- ruin-recreate ----------
    def _ruin(self, s: JobPermutation):
        removed_count = int(math.floor(self.parameters.intensity_of_mutation * (self._n - 1)))
        if removed_count == 0:
            raise NoMoveAvailable("intensity of mutation removes no job")
        positions = [int(p) for p in self.rng.choice(self._n, size=removed_count, replace=False)]
        removed = [s.order[p] for p in positions]
        doomed = set(positions)
        kept = [job for p, job in enumerate(s.order) if p not in doomed]
        return kept, removed

    def _ruin_recreate(self, s: JobPermutation) -> JobPermutation:
        sequence, removed = self._ruin(s)
        span = None
        for job in removed:
            position, span = best_insertion(self.instance, sequence, job)
            sequence.insert(position, job)
        return JobPermutation(self.instance, sequence, span)

    def _ruin_recreate_beam(self, s: JobPermutation) -> JobPermutation:
        sequence, removed = self._ruin(s)
        width = int(math.floor(self.parameters.depth_of_search * (len(removed) - 1))) + 1
        beam = [(0, sequence)]
        for job in removed:
            expansions = []
            for rank, (_, partial) in enumerate(beam):
                costs = insertion_makespans(self.instance, partial, job)
                for position, cost in enumerate(costs):
                    expansions.append((int(cost), rank, position, partial))
            expansions.sort(key=lambda e: e[:3])
            beam = [
                (cost, partial[:position] + [job] + partial[position:])
                for cost, _, position, partial in expansions[:width]
            ]
        span, best = beam[0]
        return JobPermutation(self.instance, best, span)

    # ---------- local search ----------
    def _improve_job(self, sequence: List[int], span: int, job: int, first: bool) -> int:
        """Move ``job`` to a strictly better position if there is one; return the new makespan."""
        origin = sequence.index(job)
        del sequence[origin]
        costs = insertion_makespans(self.instance, sequence, job)
        if first:
            better = np.flatnonzero(costs < span)
            position = int(better[0]) if better.size else origin
        else:
            position = int(np.argmin(costs))
            if costs[position] >= span:
                position = origin
        sequence.insert(position, job)
        return int(costs[position]) if position != origin else span

    def _descend(self, s: JobPermutation, first: bool) -> JobPermutation:
        sequence, span = s.order, s.span
        improved = True
        while improved:
            improved = False
            for job in list(sequence):
                new_span = self._improve_job(sequence, span, job, first)
                if new_span < span:
                    span, improved = new_span, True
        return JobPermutation(self.instance, sequence, span)

    def _single_pass(self, s: JobPermutation, first: bool) -> JobPermutation:
        sequence, span = s.order, s.span
        for job in self.rng.choice(s.order, size=self._sweep_size(), replace=False):
            span = self._improve_job(sequence, span, int(job), first)
        return JobPermutation(self.instance, sequence, span)

    def _steepest_reinsertion(self, s: JobPermutation) -> JobPermutation:
        return self._descend(s, first=False)

    def _first_reinsertion(self, s: JobPermutation) -> JobPermutation:
        return self._descend(s, first=True)

    def _random_steepest_pass(self, s: JobPermutation) -> JobPermutation:
        return self._single_pass(s, first=False)

    def _random_first_pass(self, s: JobPermutation) -> JobPermutation:
        return self._single_pass(s, first=True)

    # ---------- crossover ----------
    def _cut_points(self):
        self._require_two_jobs()
        low, high = sorted(int(c) for c in self.rng.choice(self._n + 1, size=2, replace=False))
        return low, high

    def _order_crossover(self, first: JobPermutation, second: JobPermutation) -> JobPermutation:
        low, high = self._cut_points()
        return JobPermutation(self.instance, order_crossover(first.order, second.order, low, high))

    def _partially_mapped_crossover(self, first: JobPermutation, second: JobPermutation) -> JobPermutation:
        low, high = self._cut_points()
        return JobPermutation(
            self.instance, partially_mapped_crossover(first.order, second.order, low, high)
        )

    def _precedence_preservative_crossover(self, first: JobPermutation, second: JobPermutation) -> JobPermutation:
        mask = self.rng.random(self._n) < 0.5
        return JobPermutation(
            self.instance, precedence_preservative_crossover(first.order, second.order, mask)
        )

    def _one_point_crossover(self, first: JobPermutation, second: JobPermutation) -> JobPermutation:
        self._require_two_jobs()
        point = int(self.rng.integers(1, self._n))
        return JobPermutation(self.instance, one_point_crossover(first.order, second.order, point))
