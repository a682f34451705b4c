"""
One-dimensional bin packing domain.

Objective: 1 - mean((fullness / capacity) ** 2) over the bins in use, which
rewards completely full bins. Construction is first-fit on a random piece
order; ruin operators repack with best-fit in decreasing weight order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core import ProblemDomain
from errors import InstanceFormatError, MalformedHeader, NoMoveAvailable
from models import HeuristicKind, build_catalog

logger = logging.getLogger(__name__)

MAX_RUINED_BINS = 6  # h4/h5 remove between 1 and this many bins


@dataclass(frozen=True)
class PackingInstance:
    capacity: int
    weights: Tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        if self.capacity <= 0:
            raise InstanceFormatError(f"capacity must be positive, got {self.capacity}")
        if not self.weights:
            raise InstanceFormatError("instance has no pieces")
        for j, w in enumerate(self.weights):
            if not 0 < w <= self.capacity:
                raise InstanceFormatError(
                    f"piece {j} weighs {w}, outside (0, {self.capacity}]"
                )

    @property
    def num_pieces(self) -> int:
        return len(self.weights)

    def to_text(self) -> str:
        lines = [f"{self.num_pieces} {self.capacity}"]
        lines.extend(str(w) for w in self.weights)
        return "\n".join(lines) + "\n"


def parse_packing(text: str, name: str = "") -> PackingInstance:
    tokens = text.split()
    if len(tokens) < 2:
        raise MalformedHeader("expected 'n C' on the first line")
    try:
        numbers = [int(t) for t in tokens]
    except ValueError as exc:
        raise InstanceFormatError(f"non-integer token: {exc}")
    count, capacity = numbers[0], numbers[1]
    weights = numbers[2:]
    if len(weights) != count:
        raise MalformedHeader(f"header declares {count} pieces, found {len(weights)}")
    return PackingInstance(capacity, tuple(weights), name)


def read_packing(path: Union[str, Path]) -> PackingInstance:
    path = Path(path)
    return parse_packing(path.read_text(encoding="utf-8"), name=path.stem)


def write_packing(instance: PackingInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(instance.to_text(), encoding="utf-8")


def generate_uniform(
    num_pieces: int, capacity: int = 150, low: int = 20, high: int = 100, seed: int = 0
) -> PackingInstance:
    rng = np.random.default_rng(seed)
    high = min(high, capacity)
    weights = rng.integers(low, high + 1, size=num_pieces)
    return PackingInstance(
        capacity, tuple(int(w) for w in weights), f"u{num_pieces}-c{capacity}-s{seed}"
    )


def generate_triplet(num_pieces: int, capacity: int = 1000, seed: int = 0) -> PackingInstance:
    """Triplets that fill a bin exactly; the optimum uses num_pieces / 3 bins."""
    rng = np.random.default_rng(seed)
    triplets = max(1, num_pieces // 3)
    weights: List[int] = []
    for _ in range(triplets):
        first = int(rng.integers(int(0.38 * capacity), int(0.49 * capacity) + 1))
        second = int(rng.integers(int(0.25 * capacity), (capacity - first) // 2 + 1))
        weights.extend([first, second, capacity - first - second])
    weights = [weights[i] for i in rng.permutation(len(weights))]
    return PackingInstance(capacity, tuple(weights), f"t{len(weights)}-c{capacity}-s{seed}")


class Packing:
    """Bins of piece indexes with cached fullness per bin."""

    __slots__ = ("instance", "bins", "fullness")

    def __init__(self, instance: PackingInstance, bins: Iterable[Sequence[int]] = ()):
        self.instance = instance
        self.bins: List[List[int]] = [list(b) for b in bins]
        self.fullness: List[int] = [
            sum(instance.weights[p] for p in b) for b in self.bins
        ]

    def copy(self) -> "Packing":
        clone = Packing.__new__(Packing)
        clone.instance = self.instance
        clone.bins = [b[:] for b in self.bins]
        clone.fullness = self.fullness[:]
        return clone

    def __len__(self) -> int:
        return len(self.bins)

    def fitness(self) -> float:
        ratios = np.asarray(self.fullness, dtype=float) / self.instance.capacity
        return float(1.0 - np.mean(np.square(ratios)))

    def residual(self, index: int) -> int:
        return self.instance.capacity - self.fullness[index]

    def fits(self, index: int, piece: int) -> bool:
        return self.instance.weights[piece] <= self.residual(index)

    def add(self, index: int, piece: int) -> None:
        self.bins[index].append(piece)
        self.fullness[index] += self.instance.weights[piece]

    def remove(self, index: int, piece: int) -> None:
        self.bins[index].remove(piece)
        self.fullness[index] -= self.instance.weights[piece]

    def open_bin(self, piece: int) -> int:
        self.bins.append([piece])
        self.fullness.append(self.instance.weights[piece])
        return len(self.bins) - 1

    def take_bins(self, indexes: Iterable[int]) -> List[int]:
        """Remove whole bins and return their pieces."""
        doomed = set(indexes)
        pieces = [p for i in sorted(doomed) for p in self.bins[i]]
        self.bins = [b for i, b in enumerate(self.bins) if i not in doomed]
        self.fullness = [f for i, f in enumerate(self.fullness) if i not in doomed]
        return pieces

    def drop_empty(self) -> None:
        self.take_bins([i for i, b in enumerate(self.bins) if not b])

    def owners(self) -> List[int]:
        owner = [-1] * self.instance.num_pieces
        for index, pieces in enumerate(self.bins):
            for piece in pieces:
                owner[piece] = index
        return owner

    def canonical(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(sorted(tuple(sorted(b)) for b in self.bins))

    def __eq__(self, other) -> bool:
        return isinstance(other, Packing) and self.canonical() == other.canonical()

    def __str__(self) -> str:
        return " | ".join(" ".join(str(p) for p in b) for b in self.bins)


def first_fit(instance: PackingInstance, order: Iterable[int]) -> Packing:
    packing = Packing(instance)
    for piece in order:
        piece = int(piece)
        for index in range(len(packing)):
            if packing.fits(index, piece):
                packing.add(index, piece)
                break
        else:
            packing.open_bin(piece)
    return packing


def _best_fit_bin(packing: Packing, piece: int) -> Optional[int]:
    weight = packing.instance.weights[piece]
    best, best_room = None, None
    for index in range(len(packing)):
        room = packing.residual(index) - weight
        if room >= 0 and (best_room is None or room < best_room):
            best, best_room = index, room
    return best


def best_fit_insert(packing: Packing, piece: int) -> Packing:
    index = _best_fit_bin(packing, piece)
    if index is None:
        packing.open_bin(piece)
    else:
        packing.add(index, piece)
    return packing


def decreasing(instance: PackingInstance, pieces: Iterable[int]) -> List[int]:
    return sorted(pieces, key=lambda p: (-instance.weights[p], p))


def _repack(packing: Packing, pieces: Iterable[int]) -> Packing:
    for piece in decreasing(packing.instance, pieces):
        best_fit_insert(packing, piece)
    return packing


HEURISTICS = build_catalog(
    [
        ("swap", HeuristicKind.MUTATION, "Swap two random pieces, overflowing into a new bin"),
        ("split", HeuristicKind.MUTATION, "Split a more-populated-than-average bin in two"),
        ("repack_lowest", HeuristicKind.MUTATION, "Best-fit repack the lowest filled bin"),
        ("ruin_highest", HeuristicKind.RUIN_RECREATE, "Empty the x highest filled bins and repack"),
        ("ruin_lowest", HeuristicKind.RUIN_RECREATE, "Empty the x lowest filled bins and repack"),
        ("swap_descent", HeuristicKind.LOCAL_SEARCH, "Random swaps kept when fitness does not worsen"),
        ("exchange_largest", HeuristicKind.LOCAL_SEARCH, "Trade the lowest bin's largest piece for smaller ones"),
        ("exon_shuffling", HeuristicKind.CROSSOVER, "Fullest mutually exclusive bins of both parents first"),
    ]
)


class BinPacking(ProblemDomain):
    domain_id = "binpacking"
    heuristics = HEURISTICS

    def _prepare_instance(self, instance: PackingInstance) -> PackingInstance:
        if not isinstance(instance, PackingInstance):
            raise TypeError(f"expected a PackingInstance, got {type(instance).__name__}")
        return instance

    def _initial_solution(self) -> Packing:
        return first_fit(self.instance, self.rng.permutation(self.instance.num_pieces))

    def _objective(self, packing: Packing) -> float:
        return packing.fitness()

    def _operators(self):
        return (
            self._swap,
            self._split,
            self._repack_lowest,
            self._ruin_highest,
            self._ruin_lowest,
            self._swap_descent,
            self._exchange_largest,
            self._exon_shuffling,
        )

    def _ruined_bin_count(self, packing: Packing) -> int:
        alpha = self.parameters.intensity_of_mutation
        return min(1 + int(math.floor(alpha * (MAX_RUINED_BINS - 1))), len(packing))

    # ---------- mutation ----------
    def _swap(self, packing: Packing) -> Packing:
        n = self.instance.num_pieces
        if n < 2:
            raise NoMoveAvailable("a single piece cannot be swapped")
        a, b = sorted(int(p) for p in self.rng.choice(n, size=2, replace=False))
        owner = packing.owners()
        home_a, home_b = owner[a], owner[b]
        if home_a == home_b:
            raise NoMoveAvailable(f"pieces {a} and {b} share bin {home_a}")
        packing.remove(home_a, a)
        packing.remove(home_b, b)
        if packing.fits(home_b, a):
            packing.add(home_b, a)
        else:
            packing.open_bin(a)
        if packing.fits(home_a, b):
            packing.add(home_a, b)
        else:
            packing.open_bin(b)
        packing.drop_empty()
        return packing

    def _split(self, packing: Packing) -> Packing:
        average = self.instance.num_pieces / len(packing)
        crowded = [i for i, b in enumerate(packing.bins) if len(b) > average]
        if not crowded:
            raise NoMoveAvailable("every bin holds the average number of pieces")
        index = self._pick(crowded)
        moved = packing.bins[index][1::2]
        for piece in moved:
            packing.remove(index, piece)
        packing.bins.append(moved)
        packing.fullness.append(sum(self.instance.weights[p] for p in moved))
        return packing

    def _repack_lowest(self, packing: Packing) -> Packing:
        lowest = int(np.argmin(packing.fullness))
        return _repack(packing, packing.take_bins([lowest]))

    # ---------- ruin-recreate ----------
    def _ruin(self, packing: Packing, highest: bool) -> Packing:
        x = self._ruined_bin_count(packing)
        order = sorted(
            range(len(packing)),
            key=lambda i: (-packing.fullness[i] if highest else packing.fullness[i], i),
        )
        return _repack(packing, packing.take_bins(order[:x]))

    def _ruin_highest(self, packing: Packing) -> Packing:
        return self._ruin(packing, highest=True)

    def _ruin_lowest(self, packing: Packing) -> Packing:
        return self._ruin(packing, highest=False)

    # ---------- local search ----------
    def _swap_descent(self, packing: Packing) -> Packing:
        n = self.instance.num_pieces
        if n < 2:
            raise NoMoveAvailable("a single piece cannot be swapped")
        weights = self.instance.weights
        capacity = self.instance.capacity
        owner = packing.owners()
        attempts = math.ceil((1 + self.parameters.depth_of_search * 9) * n)
        stale = 0
        for _ in range(attempts):
            a, b = (int(p) for p in self.rng.choice(n, size=2, replace=False))
            home_a, home_b = owner[a], owner[b]
            improved = False
            if home_a != home_b:
                fa = packing.fullness[home_a] - weights[a] + weights[b]
                fb = packing.fullness[home_b] - weights[b] + weights[a]
                if fa <= capacity and fb <= capacity:
                    gain = fa * fa + fb * fb - packing.fullness[home_a] ** 2 - packing.fullness[home_b] ** 2
                    if gain >= 0:
                        packing.remove(home_a, a)
                        packing.remove(home_b, b)
                        packing.add(home_a, b)
                        packing.add(home_b, a)
                        owner[a], owner[b] = home_b, home_a
                        improved = gain > 0
            if improved:
                stale = 0
            else:
                stale += 1
                if stale >= n:
                    break
        return packing

    def _exchange_largest(self, packing: Packing) -> Packing:
        if len(packing) < 2:
            raise NoMoveAvailable("a single bin has nothing to exchange with")
        weights = self.instance.weights
        attempts = math.ceil((1 + self.parameters.depth_of_search * 9) * len(packing))
        stale = 0
        for _ in range(attempts):
            lowest = int(np.argmin(packing.fullness))
            largest = max(packing.bins[lowest], key=lambda p: (weights[p], -p))
            other = int(self.rng.integers(len(packing) - 1))
            if other >= lowest:
                other += 1
            if self._exchange(packing, lowest, largest, other):
                stale = 0
            else:
                stale += 1
                if stale >= len(packing):
                    break
        return packing

    def _exchange(self, packing: Packing, lowest: int, piece: int, other: int) -> bool:
        """Move ``piece`` into ``other`` in return for one or two lighter pieces."""
        weights = self.instance.weights
        room = packing.residual(other)
        target = packing.bins[other]
        for q in target:
            if weights[q] < weights[piece] and weights[piece] - weights[q] <= room:
                packing.remove(other, q)
                packing.remove(lowest, piece)
                packing.add(other, piece)
                packing.add(lowest, q)
                return True
        for i, q in enumerate(target):
            for r in target[i + 1 :]:
                pair = weights[q] + weights[r]
                if pair < weights[piece] and weights[piece] - pair <= room:
                    packing.remove(other, q)
                    packing.remove(other, r)
                    packing.remove(lowest, piece)
                    packing.add(other, piece)
                    packing.add(lowest, q)
                    packing.add(lowest, r)
                    return True
        return False

    # ---------- crossover ----------
    def _exon_shuffling(self, first: Packing, second: Packing) -> Packing:
        capacity = self.instance.capacity
        ranked = sorted(
            [(capacity - f, b) for f, b in zip(first.fullness, first.bins)]
            + [(capacity - f, b) for f, b in zip(second.fullness, second.bins)],
            key=lambda entry: entry[0],
        )
        used = set()
        child_bins: List[List[int]] = []
        leftovers: List[List[int]] = []
        for _, pieces in ranked:
            if used.isdisjoint(pieces):
                child_bins.append(list(pieces))
                used.update(pieces)
            else:
                leftovers.append(pieces)
        for pieces in leftovers:
            remainder = [p for p in pieces if p not in used]
            if remainder:
                child_bins.append(remainder)
                used.update(remainder)
        return Packing(self.instance, child_bins)
