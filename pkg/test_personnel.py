#!/usr/bin/env python3
"""
Tests for the personnel scheduling domain: the penalty model, incremental
deltas against full recomputation, and the heuristic guarantees.
"""

import logging

import numpy as np
import pytest

from core import BudgetClock
from errors import InstanceFormatError
from models import RunBudget
from personnel import (
    OFF,
    PersonnelScheduling,
    Roster,
    RosterInstance,
    ShiftRequest,
    generate_roster,
    penalty,
    read_roster,
    write_roster,
)

LOCAL_SEARCHES = [4, 5, 6, 7, 8]
CROSSOVERS = [9, 10, 11]


def loaded(instance, seed=0):
    domain = PersonnelScheduling(seed)
    domain.load_instance(instance)
    return domain


def cover_only(cover, employees=3):
    return RosterInstance(employees=employees, days=len(cover), shift_types=len(cover[0]), cover=cover, w_cover=2)


def assignment_set(roster):
    return set(roster.assignments())


# ---------- instances ----------
def test_json_round_trip(tmp_path):
    instance = generate_roster(5, 14, seed=3)
    path = tmp_path / "ward.json"
    write_roster(instance, path)
    again = read_roster(path)
    assert again == instance


def test_read_rejects_broken_documents(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(InstanceFormatError):
        read_roster(path)
    path.write_text('{"employees": 2}', encoding="utf-8")
    with pytest.raises(InstanceFormatError):
        read_roster(path)


@pytest.mark.parametrize(
    "overrides",
    [
        {"cover": [[1, 1]]},
        {"cover": [[3], [0]]},
        {"w_cover": -1},
        {"requests": [ShiftRequest(5, 0, None, 1)]},
        {"forbidden_successions": [(0, 4)]},
    ],
)
def test_invalid_instances_are_rejected(overrides):
    fields = dict(employees=2, days=2, shift_types=1, cover=[[1], [1]])
    fields.update(overrides)
    with pytest.raises(InstanceFormatError):
        RosterInstance(**fields)


def test_generated_instances_are_seeded():
    assert generate_roster(6, 28, seed=1) == generate_roster(6, 28, seed=1)
    assert generate_roster(6, 28, seed=1) != generate_roster(6, 28, seed=2)


# ---------- penalty ----------
def test_empty_roster_pays_for_all_missing_cover():
    instance = cover_only([[1, 2], [0, 1], [2, 2]])
    assert Roster(instance).penalty == 2 * 8


def test_exact_cover_costs_nothing():
    instance = cover_only([[1, 0], [0, 2]])
    roster = Roster(instance, [[0, 1], [OFF, 1], [OFF, OFF]])
    assert roster.penalty == 0


def test_forbidden_succession_costs_its_weight():
    instance = RosterInstance(
        employees=1,
        days=2,
        shift_types=2,
        cover=[[0, 0], [0, 0]],
        w_cover=0,
        forbidden_successions=[(1, 0)],
        w_succ=10,
        shift_names=("E", "N"),
    )
    assert Roster(instance, [[1, 0]]).penalty == 10
    assert Roster(instance, [[0, 1]]).penalty == 0


def test_each_constraint_family_is_counted():
    instance = RosterInstance(
        employees=1,
        days=4,
        shift_types=1,
        cover=[[0]] * 4,
        w_cover=1,
        requests=[ShiftRequest(0, 0, None, 3, on=False), ShiftRequest(0, 3, 0, 2, on=True)],
        max_shifts=[2],
        min_shifts=[0],
        w_load=5,
        max_consecutive=2,
        w_consec=7,
    )
    # cover excess 3, both requests unmet, load over by 1, run of 3 over by 1
    assert Roster(instance, [[0, 0, 0, OFF]]).penalty == 3 + 3 + 2 + 5 + 7


@pytest.mark.parametrize("seed", range(5))
def test_incremental_deltas_match_recomputation(seed):
    instance = generate_roster(6, 14, shift_types=3, seed=seed)
    roster = Roster(instance)
    rng = np.random.default_rng(seed)
    for _ in range(500):
        e, d = int(rng.integers(6)), int(rng.integers(14))
        value = int(rng.integers(-1, 3))
        predicted = roster.delta(e, d, value)
        before = roster.penalty
        assert roster.assign(e, d, value) == predicted
        assert roster.penalty == before + predicted == penalty(instance, roster.cells)


# ---------- heuristics ----------
def test_rebuild_one_touches_at_most_one_row():
    instance = generate_roster(8, 14, seed=4)
    domain = loaded(instance, 4)
    for _ in range(20):
        domain.initialise_solution(0)
        domain.apply_heuristic(0, 0, 0)
        domain.apply_heuristic(3, 0, 1)
        before = domain.get_solution(0).cells
        after = domain.get_solution(1).cells
        assert sum(1 for a, b in zip(before, after) if a != b) <= 1


def test_rebuild_some_rebuilds_four_rows_at_half_intensity(monkeypatch):
    instance = generate_roster(8, 14, seed=5)
    domain = loaded(instance, 5)
    domain.set_intensity_of_mutation(0.5)
    rebuilt = []
    monkeypatch.setattr(domain, "_rebuild_row", lambda roster, e: rebuilt.append(e))
    domain.initialise_solution(0)
    domain.apply_heuristic(1, 0, 1)
    assert len(rebuilt) == len(set(rebuilt)) == 4


def test_rebuild_many_is_capped_by_the_staff_size(monkeypatch):
    instance = generate_roster(3, 7, seed=5)
    domain = loaded(instance, 5)
    domain.set_intensity_of_mutation(1.0)
    rebuilt = []
    monkeypatch.setattr(domain, "_rebuild_row", lambda roster, e: rebuilt.append(e))
    domain.initialise_solution(0)
    domain.apply_heuristic(2, 0, 1)
    assert sorted(rebuilt) == [0, 1, 2]


def test_common_assignments_of_identical_parents_is_the_parent():
    instance = generate_roster(5, 14, seed=6)
    domain = loaded(instance, 6)
    domain.set_memory_size(3)
    domain.initialise_solution(0)
    domain.copy_solution(0, 1)
    domain.apply_heuristic2(11, 0, 1, 2)
    assert domain.compare_solutions(0, 2)


@pytest.mark.parametrize("heuristic", CROSSOVERS)
def test_children_only_inherit_parent_assignments(heuristic):
    instance = generate_roster(6, 14, seed=heuristic)
    domain = loaded(instance, heuristic)
    domain.set_memory_size(3)
    rng = np.random.default_rng(heuristic)
    for _ in range(30):
        domain.set_intensity_of_mutation(float(rng.random()))
        domain.initialise_solution(0)
        domain.initialise_solution(1)
        domain.apply_heuristic(2, 1, 1)
        value = domain.apply_heuristic2(heuristic, 0, 1, 2)
        first = assignment_set(domain.get_solution(0))
        second = assignment_set(domain.get_solution(1))
        child = assignment_set(domain.get_solution(2))
        assert child <= first | second
        if heuristic == 11:
            assert child <= first & second
        assert value == penalty(instance, domain.get_solution(2).cells)


@pytest.mark.slow
@pytest.mark.parametrize("heuristic", LOCAL_SEARCHES)
def test_local_search_never_worsens(heuristic):
    instance = generate_roster(5, 14, seed=heuristic)
    domain = loaded(instance, heuristic)
    rng = np.random.default_rng(heuristic)
    for _ in range(1000):
        domain.set_depth_of_search(float(rng.random()) * 0.3)
        domain.set_intensity_of_mutation(float(rng.random()))
        domain.initialise_solution(0)
        before = domain.apply_heuristic(2, 0, 0)
        after = domain.apply_heuristic(heuristic, 0, 1)
        assert after <= before
        assert after == penalty(instance, domain.get_solution(1).cells)


def test_greedy_add_stops_when_no_add_helps():
    instance = generate_roster(5, 14, seed=9)
    domain = loaded(instance, 9)
    domain.initialise_solution(0)
    roster = domain.get_solution(0)
    for e in range(instance.employees):
        for d in range(instance.days):
            if roster.cells[e][d] == OFF:
                assert all(roster.delta(e, d, s) >= 0 for s in range(instance.shift_types))


def test_fuzzed_operators_keep_penalties_exact():
    instance = generate_roster(5, 14, seed=10)
    domain = loaded(instance, 10)
    domain.set_memory_size(3)
    domain.initialise_solution(0)
    domain.initialise_solution(1)
    rng = np.random.default_rng(10)
    for _ in range(300):
        domain.set_intensity_of_mutation(float(rng.random()))
        domain.set_depth_of_search(float(rng.random()) * 0.2)
        h = int(rng.integers(domain.number_of_heuristics))
        if h in CROSSOVERS:
            value = domain.apply_heuristic2(h, 0, 1, 2)
        else:
            value = domain.apply_heuristic(h, int(rng.integers(2)), 2)
        roster = domain.get_solution(2)
        assert value == roster.penalty == penalty(instance, roster.cells)
        assert all(v == OFF or 0 <= v < instance.shift_types for row in roster.cells for v in row)
        domain.copy_solution(2, int(rng.integers(2)))


def test_blank_rosters_start_from_the_empty_penalty():
    instance = generate_roster(6, 14, seed=11)
    domain = loaded(instance, 11)
    empty = [[OFF] * instance.days for _ in range(instance.employees)]
    first = domain._empty_roster()
    assert first.penalty == penalty(instance, empty)
    first.assign(0, 0, 0)
    second = domain._empty_roster()
    assert second.cells == empty
    assert second.penalty == penalty(instance, empty)


@pytest.mark.parametrize("seed", range(5))
def test_greedy_add_reaches_a_local_optimum_from_a_partial_roster(seed):
    instance = generate_roster(6, 14, seed=seed)
    domain = loaded(instance, seed)
    domain.initialise_solution(0)
    roster = domain.get_solution(0).copy()
    rng = np.random.default_rng(seed)
    for e, d, _ in roster.assignments():
        if rng.random() < 0.5:
            roster.assign(e, d, OFF)
    domain._greedy_add(roster)
    assert roster.penalty == penalty(instance, roster.cells)
    for e in range(instance.employees):
        for d in range(instance.days):
            if roster.cells[e][d] == OFF:
                assert all(roster.delta(e, d, s) >= 0 for s in range(instance.shift_types))


@pytest.mark.parametrize("heuristic", [7, 8])
def test_zero_depth_ejection_chain_is_not_capped_in_wall_clock_runs(heuristic, caplog):
    instance = generate_roster(5, 14, seed=12)
    domain = loaded(instance, 12)
    domain.begin_run(np.random.default_rng(12), BudgetClock(RunBudget.wall_clock(60_000)))
    domain.set_depth_of_search(0.0)
    domain.set_memory_size(2)
    domain.initialise_solution(0)
    with caplog.at_level(logging.WARNING, logger="personnel"):
        for _ in range(20):
            before = domain.get_function_value(0)
            after = domain.apply_heuristic(heuristic, 0, 1)
            assert after <= before
            domain.copy_solution(1, 0)
    assert "wall-clock cap" not in caplog.text
