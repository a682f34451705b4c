"""
Personnel scheduling domain over a compact soft-constraint roster model.

A roster assigns each (employee, day) cell one shift type or OFF. The
penalty sums weighted violations of five families: cover deviation, unmet
requests, workload bounds, consecutive working days and forbidden shift
successions. All weights are integers, so incremental deltas and
from-scratch recomputation agree exactly.
"""

from __future__ import annotations

import json
import logging
import math
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core import ProblemDomain
from errors import InstanceFormatError, NoMoveAvailable
from models import HeuristicKind, build_catalog

logger = logging.getLogger(__name__)

OFF = -1
MAX_SWAP_BLOCK = 3
EJECTION_SECONDS = 5.0  # wall-clock cap per ejection-chain call, scaled by depth of search

DEFAULT_SHIFT_NAMES = ("E", "D", "L", "N")


@dataclass(frozen=True)
class ShiftRequest:
    """``on`` asks for the shift (any shift when ``shift`` is None); otherwise asks to avoid it."""

    employee: int
    day: int
    shift: Optional[int]
    weight: int
    on: bool = True

    def unmet(self, value: int) -> bool:
        if self.shift is None:
            return (value == OFF) if self.on else (value != OFF)
        return (value != self.shift) if self.on else (value == self.shift)


def _tupled(rows) -> Tuple[Tuple[int, ...], ...]:
    return tuple(tuple(int(v) for v in row) for row in rows)


@dataclass(frozen=True)
class RosterInstance:
    employees: int
    days: int
    shift_types: int
    cover: Tuple[Tuple[int, ...], ...]
    w_cover: int = 1
    requests: Tuple[ShiftRequest, ...] = ()
    max_shifts: Tuple[int, ...] = ()
    min_shifts: Tuple[int, ...] = ()
    w_load: int = 1
    max_consecutive: int = 0
    w_consec: int = 0
    forbidden_successions: Tuple[Tuple[int, int], ...] = ()
    w_succ: int = 0
    shift_names: Tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        # normalise JSON lists into tuples so instances stay hashable
        names = tuple(self.shift_names)
        if not names:
            if self.shift_types <= len(DEFAULT_SHIFT_NAMES):
                names = DEFAULT_SHIFT_NAMES[: self.shift_types]
            else:
                names = tuple(f"S{s}" for s in range(self.shift_types))
        normalised = {
            "cover": _tupled(self.cover),
            "requests": tuple(
                r if isinstance(r, ShiftRequest) else ShiftRequest(**r) for r in self.requests
            ),
            "max_shifts": tuple(self.max_shifts) or (self.days,) * self.employees,
            "min_shifts": tuple(self.min_shifts) or (0,) * self.employees,
            "forbidden_successions": tuple(tuple(p) for p in self.forbidden_successions),
            "shift_names": names,
        }
        for key, value in normalised.items():
            object.__setattr__(self, key, value)
        self._validate()

    def _validate(self) -> None:
        if min(self.employees, self.days, self.shift_types) < 1:
            raise InstanceFormatError("employees, days and shift_types must be positive")
        if len(self.cover) != self.days or any(len(row) != self.shift_types for row in self.cover):
            raise InstanceFormatError(f"cover must be {self.days} x {self.shift_types}")
        if any(not 0 <= c <= self.employees for row in self.cover for c in row):
            raise InstanceFormatError(f"cover requirements must lie in [0, {self.employees}]")
        if len(self.max_shifts) != self.employees or len(self.min_shifts) != self.employees:
            raise InstanceFormatError("workload bounds need one entry per employee")
        if min(self.w_cover, self.w_load, self.w_consec, self.w_succ) < 0:
            raise InstanceFormatError("weights must be non-negative")
        for r in self.requests:
            if not (0 <= r.employee < self.employees and 0 <= r.day < self.days):
                raise InstanceFormatError(f"request {r} outside the roster")
            if r.shift is not None and not 0 <= r.shift < self.shift_types:
                raise InstanceFormatError(f"request {r} names an unknown shift")
            if r.weight < 0:
                raise InstanceFormatError(f"request {r} has a negative weight")
        for first, second in self.forbidden_successions:
            if not (0 <= first < self.shift_types and 0 <= second < self.shift_types):
                raise InstanceFormatError(f"forbidden succession {(first, second)} names an unknown shift")
        if len(self.shift_names) != self.shift_types:
            raise InstanceFormatError("shift_names needs one name per shift type")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["requests"] = [asdict(r) for r in self.requests]
        data["cover"] = [list(row) for row in self.cover]
        data["forbidden_successions"] = [list(p) for p in self.forbidden_successions]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RosterInstance":
        try:
            return cls(**data)
        except TypeError as exc:
            raise InstanceFormatError(f"bad roster document: {exc}")


def read_roster(path: Union[str, Path]) -> RosterInstance:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: {exc}")
    data.setdefault("name", path.stem)
    return RosterInstance.from_dict(data)


def write_roster(instance: RosterInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n", encoding="utf-8")


def generate_roster(employees: int, days: int, shift_types: int = 3, seed: int = 0) -> RosterInstance:
    rng = np.random.default_rng(seed)
    per_shift = max(1, employees // (shift_types + 1))
    cover = rng.integers(0, per_shift + 1, size=(days, shift_types))
    requests = []
    for _ in range(max(1, employees * days // 10)):
        on = bool(rng.random() < 0.5)
        shift = int(rng.integers(shift_types)) if rng.random() < 0.5 else None
        requests.append(
            ShiftRequest(int(rng.integers(employees)), int(rng.integers(days)), shift, int(rng.integers(1, 4)), on)
        )
    upper = max(1, round(days * 5 / 7))
    return RosterInstance(
        employees=employees,
        days=days,
        shift_types=shift_types,
        cover=cover.tolist(),
        w_cover=10,
        requests=tuple(requests),
        max_shifts=(upper,) * employees,
        min_shifts=(round(days * 3 / 7),) * employees,
        w_load=5,
        max_consecutive=5,
        w_consec=5,
        forbidden_successions=((shift_types - 1, 0),) if shift_types > 1 else (),
        w_succ=10,
        name=f"roster-e{employees}-d{days}-s{shift_types}-s{seed}",
    )


# ---------- penalty ----------
def _over(length: int, cap: int) -> int:
    return max(0, length - cap)


def _load_violation(assigned: int, low: int, high: int) -> int:
    return max(0, assigned - high) + max(0, low - assigned)


def row_penalty(instance: RosterInstance, employee: int, row: Sequence[int]) -> int:
    total = 0
    for r in instance.requests:
        if r.employee == employee and r.unmet(row[r.day]):
            total += r.weight
    assigned = sum(1 for v in row if v != OFF)
    total += instance.w_load * _load_violation(assigned, instance.min_shifts[employee], instance.max_shifts[employee])
    if instance.w_consec:
        run = 0
        for v in list(row) + [OFF]:
            if v == OFF:
                total += instance.w_consec * _over(run, instance.max_consecutive)
                run = 0
            else:
                run += 1
    forbidden = set(instance.forbidden_successions)
    total += instance.w_succ * sum(1 for a, b in zip(row, row[1:]) if (a, b) in forbidden)
    return total


def penalty(instance: RosterInstance, cells: Sequence[Sequence[int]]) -> int:
    """Weighted violation count, recomputed from scratch."""
    grid = np.asarray(cells, dtype=np.int64).reshape(instance.employees, instance.days)
    counts = np.stack([(grid == s).sum(axis=0) for s in range(instance.shift_types)], axis=1)
    total = instance.w_cover * int(np.abs(counts - np.asarray(instance.cover)).sum())
    return total + sum(row_penalty(instance, e, grid[e].tolist()) for e in range(instance.employees))


class Roster:
    """Cells plus cover counts and a running penalty kept in step by ``assign``."""

    __slots__ = ("instance", "cells", "counts", "assigned", "penalty", "_requests", "_forbidden")

    def __init__(self, instance: RosterInstance, cells: Optional[Sequence[Sequence[int]]] = None):
        self.instance = instance
        if cells is None:
            cells = [[OFF] * instance.days for _ in range(instance.employees)]
        self.cells = [list(row) for row in cells]
        self.counts = [[0] * instance.shift_types for _ in range(instance.days)]
        for row in self.cells:
            for d, v in enumerate(row):
                if v != OFF:
                    self.counts[d][v] += 1
        self.assigned = [sum(1 for v in row if v != OFF) for row in self.cells]
        self.penalty = penalty(instance, self.cells)
        self._requests, self._forbidden = _indexes(instance)

    def copy(self) -> "Roster":
        clone = Roster.__new__(Roster)
        clone.instance = self.instance
        clone.cells = [row[:] for row in self.cells]
        clone.counts = [row[:] for row in self.counts]
        clone.assigned = self.assigned[:]
        clone.penalty = self.penalty
        clone._requests = self._requests
        clone._forbidden = self._forbidden
        return clone

    def assignments(self) -> List[Tuple[int, int, int]]:
        return [(e, d, v) for e, row in enumerate(self.cells) for d, v in enumerate(row) if v != OFF]

    def delta(self, employee: int, day: int, value: int) -> int:
        """Penalty change of setting one cell, without applying it."""
        inst = self.instance
        row = self.cells[employee]
        old = row[day]
        if value == old:
            return 0
        change = 0
        if old != OFF:
            c, req = self.counts[day][old], inst.cover[day][old]
            change += inst.w_cover * (abs(c - 1 - req) - abs(c - req))
        if value != OFF:
            c, req = self.counts[day][value], inst.cover[day][value]
            change += inst.w_cover * (abs(c + 1 - req) - abs(c - req))
        for r in self._requests.get((employee, day), ()):
            change += r.weight * (r.unmet(value) - r.unmet(old))
        if (old == OFF) != (value == OFF):
            sign = 1 if old == OFF else -1
            a = self.assigned[employee]
            low, high = inst.min_shifts[employee], inst.max_shifts[employee]
            change += inst.w_load * (_load_violation(a + sign, low, high) - _load_violation(a, low, high))
            if inst.w_consec:
                left = 0
                while day - left - 1 >= 0 and row[day - left - 1] != OFF:
                    left += 1
                right = 0
                while day + right + 1 < inst.days and row[day + right + 1] != OFF:
                    right += 1
                cap = inst.max_consecutive
                joined = _over(left + right + 1, cap) - _over(left, cap) - _over(right, cap)
                change += sign * inst.w_consec * joined
        if self._forbidden:
            before = row[day - 1] if day > 0 else OFF
            after = row[day + 1] if day + 1 < inst.days else OFF
            pairs = ((before, value), (value, after))
            previous = ((before, old), (old, after))
            change += inst.w_succ * (
                sum(p in self._forbidden for p in pairs) - sum(p in self._forbidden for p in previous)
            )
        return change

    def assign(self, employee: int, day: int, value: int) -> int:
        """Set one cell and return the penalty change."""
        change = self.delta(employee, day, value)
        old = self.cells[employee][day]
        if value == old:
            return 0
        if old != OFF:
            self.counts[day][old] -= 1
            self.assigned[employee] -= 1
        if value != OFF:
            self.counts[day][value] += 1
            self.assigned[employee] += 1
        self.cells[employee][day] = value
        self.penalty += change
        return change

    def clear_row(self, employee: int) -> None:
        for day in range(self.instance.days):
            self.assign(employee, day, OFF)

    def __eq__(self, other) -> bool:
        return isinstance(other, Roster) and self.cells == other.cells

    def __str__(self) -> str:
        names = self.instance.shift_names
        return "\n".join("".join("." if v == OFF else names[v][0] for v in row) for row in self.cells)


def _indexes(instance: RosterInstance):
    requests: Dict[Tuple[int, int], List[ShiftRequest]] = defaultdict(list)
    for r in instance.requests:
        requests[(r.employee, r.day)].append(r)
    return dict(requests), frozenset(instance.forbidden_successions)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


HEURISTICS = build_catalog(
    [
        ("unassign", HeuristicKind.MUTATION, "Un-assign a proportion of the assigned shifts"),
        ("rebuild_some", HeuristicKind.RUIN_RECREATE, "Rebuild round(4 alpha) + 2 employee schedules"),
        ("rebuild_many", HeuristicKind.RUIN_RECREATE, "Rebuild round(alpha * employees) schedules"),
        ("rebuild_one", HeuristicKind.RUIN_RECREATE, "Rebuild a single employee schedule"),
        ("greedy_add", HeuristicKind.LOCAL_SEARCH, "Add shifts while the penalty drops"),
        ("swap_between", HeuristicKind.LOCAL_SEARCH, "Swap shift blocks between two employees"),
        ("swap_within", HeuristicKind.LOCAL_SEARCH, "Swap two days of one employee"),
        ("ejection_chain", HeuristicKind.LOCAL_SEARCH, "Pass shifts along a chain of employees"),
        ("ejection_chain_regenerate", HeuristicKind.LOCAL_SEARCH, "Ejection chain then greedy regeneration"),
        ("best_assignments", HeuristicKind.CROSSOVER, "Transplant each parent's most valuable assignments"),
        ("alternate_assignments", HeuristicKind.CROSSOVER, "Common assignments then alternate while cover is short"),
        ("common_assignments", HeuristicKind.CROSSOVER, "Assignments present in both parents"),
    ]
)


class PersonnelScheduling(ProblemDomain):
    domain_id = "personnel"
    heuristics = HEURISTICS

    def _prepare_instance(self, instance: RosterInstance) -> RosterInstance:
        if not isinstance(instance, RosterInstance):
            raise TypeError(f"expected a RosterInstance, got {type(instance).__name__}")
        self._blank = Roster(instance)
        self._wanted: Dict[int, List[ShiftRequest]] = defaultdict(list)
        for r in instance.requests:
            if r.on:
                self._wanted[r.employee].append(r)
        return instance

    def _empty_roster(self) -> Roster:
        return self._blank.copy()

    def _initial_solution(self) -> Roster:
        return self._greedy_add(self._empty_roster())

    def _objective(self, roster: Roster) -> float:
        return roster.penalty

    def _operators(self):
        return (
            self._unassign,
            self._rebuild_some,
            self._rebuild_many,
            self._rebuild_one,
            self._greedy_add,
            self._swap_between,
            self._swap_within,
            self._ejection_chain,
            self._ejection_chain_regenerate,
            self._best_assignments,
            self._alternate_assignments,
            self._common_assignments,
        )

    def _attempt_budget(self) -> int:
        cells = self.instance.employees * self.instance.days
        return math.ceil((1 + self.parameters.depth_of_search * 9) * cells)

    # ---------- mutation ----------
    def _unassign(self, roster: Roster) -> Roster:
        taken = roster.assignments()
        count = math.ceil(self.parameters.intensity_of_mutation * len(taken))
        if count == 0:
            raise NoMoveAvailable("no assigned shift to remove")
        for k in self.rng.choice(len(taken), size=count, replace=False):
            e, d, _ = taken[k]
            roster.assign(e, d, OFF)
        return roster

    # ---------- ruin-recreate ----------
    def _best_value_for(self, roster: Roster, employee: int, day: int, shifts) -> Tuple[int, int]:
        return min(((roster.delta(employee, day, s), s) for s in shifts), default=(0, OFF))

    def _rebuild_row(self, roster: Roster, employee: int) -> None:
        """Requests first, then first-improvement greedy adds over the row."""
        roster.clear_row(employee)
        every_shift = range(self.instance.shift_types)
        for r in self._wanted.get(employee, ()):
            shifts = every_shift if r.shift is None else (r.shift,)
            change, shift = self._best_value_for(roster, employee, r.day, shifts)
            if change < 0:
                roster.assign(employee, r.day, shift)
        improved = True
        while improved:
            improved = False
            for day in range(self.instance.days):
                if roster.cells[employee][day] != OFF:
                    continue
                for shift in every_shift:
                    if roster.delta(employee, day, shift) < 0:
                        roster.assign(employee, day, shift)
                        improved = True
                        break

    def _rebuild(self, roster: Roster, count: int) -> Roster:
        count = min(count, self.instance.employees)
        if count <= 0:
            raise NoMoveAvailable("no employee selected for rebuilding")
        for employee in self.rng.choice(self.instance.employees, size=count, replace=False):
            self._rebuild_row(roster, int(employee))
        return roster

    def _rebuild_some(self, roster: Roster) -> Roster:
        return self._rebuild(roster, _round_half_up(self.parameters.intensity_of_mutation * 4) + 2)

    def _rebuild_many(self, roster: Roster) -> Roster:
        alpha = self.parameters.intensity_of_mutation
        return self._rebuild(roster, _round_half_up(alpha * self.instance.employees))

    def _rebuild_one(self, roster: Roster) -> Roster:
        return self._rebuild(roster, 1)

    # ---------- local search ----------
    def _greedy_add(self, roster: Roster) -> Roster:
        """Add the best shift to empty cells while that lowers the penalty.

        A cell's delta depends only on its row and its day, so passes after
        the first revisit just the rows and days that gained an assignment.
        """
        inst = self.instance
        shifts = range(inst.shift_types)
        rows, days = set(range(inst.employees)), set(range(inst.days))
        while rows or days:
            touched_rows, touched_days = set(), set()
            for k in self.rng.permutation(inst.employees * inst.days):
                e, d = divmod(int(k), inst.days)
                if roster.cells[e][d] != OFF or (e not in rows and d not in days):
                    continue
                change, shift = self._best_value_for(roster, e, d, shifts)
                if change < 0:
                    roster.assign(e, d, shift)
                    touched_rows.add(e)
                    touched_days.add(d)
            rows, days = touched_rows, touched_days
        return roster

    def _try_moves(self, roster: Roster, moves: List[Tuple[int, int, int]]) -> bool:
        """Apply cell moves; keep them only if the penalty strictly drops."""
        undo = []
        change = 0
        for e, d, v in moves:
            undo.append((e, d, roster.cells[e][d]))
            change += roster.assign(e, d, v)
        if change < 0:
            return True
        for e, d, v in reversed(undo):
            roster.assign(e, d, v)
        return False

    def _swap_descent(self, roster: Roster, propose) -> Roster:
        patience = self.instance.employees * self.instance.days
        stale = 0
        for _ in range(self._attempt_budget()):
            moves = propose(roster)
            if moves and self._try_moves(roster, moves):
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
        return roster

    def _swap_between(self, roster: Roster) -> Roster:
        inst = self.instance
        if inst.employees < 2:
            raise NoMoveAvailable("a single employee has nobody to swap with")

        def propose(r: Roster):
            first, second = (int(e) for e in self.rng.choice(inst.employees, size=2, replace=False))
            length = int(self.rng.integers(1, min(MAX_SWAP_BLOCK, inst.days) + 1))
            start = int(self.rng.integers(inst.days - length + 1))
            days = range(start, start + length)
            if all(r.cells[first][d] == r.cells[second][d] for d in days):
                return []
            a = [r.cells[first][d] for d in days]
            b = [r.cells[second][d] for d in days]
            return [(first, d, v) for d, v in zip(days, b)] + [(second, d, v) for d, v in zip(days, a)]

        return self._swap_descent(roster, propose)

    def _swap_within(self, roster: Roster) -> Roster:
        inst = self.instance
        if inst.days < 2:
            raise NoMoveAvailable("a single day has nothing to swap")

        def propose(r: Roster):
            e = int(self.rng.integers(inst.employees))
            d1, d2 = (int(d) for d in self.rng.choice(inst.days, size=2, replace=False))
            row = r.cells[e]
            if row[d1] == row[d2]:
                return []
            return [(e, d1, row[d2]), (e, d2, row[d1])]

        return self._swap_descent(roster, propose)

    def _chain(self, roster: Roster, employee: int, day: int) -> int:
        """One ejection chain from (employee, day); keeps the best prefix, returns its change."""
        inst = self.instance
        length = 1 + int(math.floor(self.parameters.depth_of_search * 9))
        pending = roster.cells[employee][day]
        undo = [(employee, day, pending)]
        total = roster.assign(employee, day, OFF)
        best, best_len = total, 1
        visited = {employee}
        for _ in range(length):
            candidates = [e for e in range(inst.employees) if e not in visited]
            if not candidates or pending == OFF:
                break
            target = min(candidates, key=lambda e: (roster.delta(e, day, pending), e))
            displaced = roster.cells[target][day]
            undo.append((target, day, displaced))
            total += roster.assign(target, day, pending)
            visited.add(target)
            pending = displaced
            if total < best:
                best, best_len = total, len(undo)
        if best >= 0:
            best_len = 0
        for e, d, v in reversed(undo[best_len:]):
            roster.assign(e, d, v)
        return min(best, 0)

    def _ejection_chains(self, roster: Roster, regenerate: bool) -> Roster:
        inst = self.instance
        starts = max(1, math.ceil(self.parameters.depth_of_search * inst.employees * inst.days))
        cap = self.parameters.depth_of_search * EJECTION_SECONDS
        deadline = self._wall_clock_deadline(cap) if cap > 0 else None
        for _ in range(starts):
            if deadline is not None and time.perf_counter() > deadline:
                logger.warning("ejection chain stopped at its wall-clock cap")
                break
            taken = roster.assignments()
            if not taken:
                break
            employee, day, _ = taken[int(self.rng.integers(len(taken)))]
            self._chain(roster, employee, day)
            if regenerate:
                self._regenerate(roster, employee)
        return roster

    def _regenerate(self, roster: Roster, employee: int) -> None:
        before = roster.penalty
        saved = roster.cells[employee][:]
        self._rebuild_row(roster, employee)
        if roster.penalty >= before:
            for day, value in enumerate(saved):
                roster.assign(employee, day, value)

    def _ejection_chain(self, roster: Roster) -> Roster:
        return self._ejection_chains(roster, regenerate=False)

    def _ejection_chain_regenerate(self, roster: Roster) -> Roster:
        return self._ejection_chains(roster, regenerate=True)

    # ---------- crossover ----------
    def _most_valuable(self, parent: Roster, count: int) -> List[Tuple[int, int, int]]:
        scored = [(-parent.delta(e, d, OFF), e, d, v) for e, d, v in parent.assignments()]
        scored.sort(key=lambda s: (s[0], s[1], s[2]))
        return [(e, d, v) for _, e, d, v in scored[:count]]

    def _best_assignments(self, first: Roster, second: Roster) -> Roster:
        count = 4 + _round_half_up((1 - self.parameters.intensity_of_mutation) * 16)
        child = self._empty_roster()
        for parent in (first, second):
            for e, d, v in self._most_valuable(parent, count):
                if child.cells[e][d] == OFF:
                    child.assign(e, d, v)
        return child

    def _alternate_assignments(self, first: Roster, second: Roster) -> Roster:
        child = self._empty_roster()
        pools = []
        for parent, other in ((first, second), (second, first)):
            own = [(e, d, v) for e, d, v in parent.assignments() if other.cells[e][d] != v]
            pools.append([own[int(k)] for k in self.rng.permutation(len(own))])
        for e, d, v in first.assignments():
            if second.cells[e][d] == v:
                child.assign(e, d, v)
        for k in range(max(len(p) for p in pools)):
            for pool in pools:
                if k >= len(pool):
                    continue
                e, d, v = pool[k]
                if child.cells[e][d] == OFF and child.counts[d][v] < self.instance.cover[d][v]:
                    child.assign(e, d, v)
        return child

    def _common_assignments(self, first: Roster, second: Roster) -> Roster:
        child = self._empty_roster()
        for e, d, v in first.assignments():
            if second.cells[e][d] == v:
                child.assign(e, d, v)
        return child
