#!/usr/bin/env python3
"""
Tests for the MAX-SAT domain: DIMACS parsing, incremental gain bookkeeping
against a brute-force oracle, and the heuristic catalog.
"""

import re

import numpy as np
import pytest

from errors import EmptyClause, LiteralOutOfRange, MalformedHeader, UnterminatedClause
from maxsat import (
    Assignment,
    CnfFormula,
    MaxSat,
    generate_random_ksat,
    parse_dimacs,
    read_dimacs,
    write_dimacs,
)

EXAMPLE = "c three clauses\np cnf 4 3\n1 -2 -3 0\n-1 3 4 0\n2 -3 -4 0\n"


def brute_gains(formula, values):
    """(positive, negative) gains per variable by direct clause inspection."""
    n = formula.num_vars
    positive, negative = [0] * n, [0] * n
    for clause in formula.clauses:
        true_vars = [v for v, pos in clause if values[v] == pos]
        if not true_vars:
            for v in {v for v, _ in clause}:
                positive[v] += 1
        elif len(true_vars) == 1:
            negative[true_vars[0]] += 1
    return positive, negative


def loaded(formula, seed=0):
    domain = MaxSat(seed)
    domain.load_instance(formula)
    return domain


# ---------- parsing ----------
def test_parse_minimal_formula():
    formula = parse_dimacs("p cnf 2 1\n1 -2 0")
    assert formula.num_vars == 2
    assert formula.clauses == (((0, True), (1, False)),)


def test_parse_three_clause_example():
    formula = parse_dimacs(EXAMPLE)
    assert formula.num_vars == 4
    assert formula.num_clauses == 3


def test_parse_stops_at_percent_and_spans_lines():
    formula = parse_dimacs("p cnf 3 2\n1 2\n 3 0 -1\n0\n%\n0\n")
    assert formula.clauses == (((0, True), (1, True), (2, True)), ((0, False),))


def test_duplicate_literals_collapse():
    formula = parse_dimacs("p cnf 2 1\n1 1 -2 0")
    assert formula.clauses == (((0, True), (1, False)),)


@pytest.mark.parametrize(
    "text, error",
    [
        ("p cnf 2 2\n1 -2 0", MalformedHeader),
        ("1 -2 0", MalformedHeader),
        ("p cnf 2 1\np cnf 2 1\n1 0", MalformedHeader),
        ("p dnf 2 1\n1 0", MalformedHeader),
        ("p cnf 2 1\n1 3 0", LiteralOutOfRange),
        ("p cnf 2 1\n1 -2", UnterminatedClause),
        ("p cnf 2 2\n1 0\n0", EmptyClause),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_dimacs(text)


def test_dimacs_file_round_trip(tmp_path):
    formula = generate_random_ksat(20, 4.0, seed=5)
    path = tmp_path / "f.cnf"
    write_dimacs(formula, path)
    again = read_dimacs(path)
    assert again.clauses == formula.clauses
    assert again.name == "f"


def test_generator_is_seeded():
    first = generate_random_ksat(30, 4.26, seed=2)
    assert first.clauses == generate_random_ksat(30, 4.26, seed=2).clauses
    assert first.num_clauses == 128
    assert all(len({v for v, _ in c}) == 3 for c in first.clauses)


# ---------- evaluation ----------
def test_evaluate_example_formula():
    formula = parse_dimacs(EXAMPLE)
    assert Assignment(formula, [False, False, True, False]).broken_count == 0
    assert Assignment(formula, [True] * 4).broken_count == 1


def test_repeated_clause_counts_each_copy():
    formula = CnfFormula.from_dimacs(1, [[1]] * 5)
    assert Assignment(formula, [False]).broken_count == 5


def test_tautologies_never_break():
    formula = CnfFormula.from_dimacs(2, [[1, -1], [2]])
    a = Assignment(formula, [False, False])
    assert a.broken_count == 1
    assert a.net_gain(0) == 0
    a.flip(0)
    assert a.broken_count == 1


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_incremental_bookkeeping_matches_brute_force(seed):
    formula = generate_random_ksat(60, 4.26, seed=seed)
    rng = np.random.default_rng(seed)
    a = Assignment(formula, rng.random(60) < 0.5)
    for step in range(1000):
        v = int(rng.integers(60))
        expected_gain = formula.broken(a.values) - formula.broken(
            [not x if i == v else x for i, x in enumerate(a.values)]
        )
        assert a.net_gain(v) == expected_gain
        a.flip(v)
        assert a.broken_count == formula.broken(a.values)
        assert a.age(v) == 0
        if step % 100 == 0:
            assert (a.positive, a.negative) == brute_gains(formula, a.values)
            assert sorted(a.broken) == [
                c for c, clause in enumerate(formula.clauses)
                if not any(a.values[x] == pos for x, pos in clause)
            ]


def test_ages_count_flips_since_last_flip():
    formula = CnfFormula.from_dimacs(3, [[1, 2, 3]])
    a = Assignment(formula, [False] * 3)
    a.flip(0)
    a.flip(1)
    a.flip(1)
    assert (a.age(0), a.age(1), a.age(2)) == (2, 0, 3)


# ---------- heuristics ----------
def test_gsat_flips_the_best_variable():
    formula = CnfFormula.from_dimacs(2, [[1], [1], [-2]])
    domain = loaded(formula)
    domain.memory.put(0, Assignment(formula, [False, False]))
    # x1 is the only true literal of the third clause
    assert domain.memory.get(0).net_gains() == [2, -1]
    assert domain.apply_heuristic(0, 0, 1) == 0
    assert domain.solution_to_string(1) == "10"


def test_hsat_breaks_ties_by_age_then_lowest_index():
    formula = CnfFormula.from_dimacs(3, [[1], [2], [3]])
    domain = loaded(formula)
    domain.memory.put(0, Assignment(formula, [False] * 3))
    domain.apply_heuristic(1, 0, 1)
    assert domain.solution_to_string(1) == "100"
    aged = Assignment(formula, [False] * 3)
    aged.flip(0)
    aged.flip(0)
    domain.memory.put(0, aged)
    domain.apply_heuristic(1, 0, 1)
    assert domain.solution_to_string(1) == "010"

def test_full_reinitialisation_matches_a_fresh_random_start():
    formula = generate_random_ksat(40, 4.26, seed=1)
    mutated, fresh = loaded(formula, 9), loaded(formula, 9)
    mutated.set_intensity_of_mutation(1.0)
    mutated.initialise_solution(0)
    mutated.apply_heuristic(4, 0, 1)
    fresh.initialise_solution(0)
    fresh.initialise_solution(1)
    assert mutated.solution_to_string(1) == fresh.solution_to_string(1)


def test_one_point_crossover_splits_at_one_point():
    formula = generate_random_ksat(30, 3.0, seed=3)
    domain = loaded(formula, 4)
    domain.set_memory_size(3)
    domain.memory.put(0, Assignment(formula, [False] * 30))
    domain.memory.put(1, Assignment(formula, [True] * 30))
    for _ in range(20):
        domain.apply_heuristic2(7, 0, 1, 2)
        assert re.fullmatch(r"0+1+", domain.solution_to_string(2))


def test_two_point_crossover_takes_a_middle_segment():
    formula = generate_random_ksat(30, 3.0, seed=3)
    domain = loaded(formula, 5)
    domain.set_memory_size(3)
    domain.memory.put(0, Assignment(formula, [False] * 30))
    domain.memory.put(1, Assignment(formula, [True] * 30))
    for _ in range(20):
        domain.apply_heuristic2(8, 0, 1, 2)
        assert re.fullmatch(r"0+1+0+", domain.solution_to_string(2))


@pytest.mark.slow
@pytest.mark.parametrize("heuristic", [5, 6])
def test_local_search_never_worsens(heuristic):
    formula = generate_random_ksat(50, 4.26, seed=heuristic)
    domain = loaded(formula, heuristic)
    for trial in range(1000):
        domain.set_depth_of_search(trial / 1000)
        before = domain.initialise_solution(0)
        after = domain.apply_heuristic(heuristic, 0, 1)
        assert after <= before
        assert after == formula.broken(domain.get_solution(1).values)


def test_walksat_with_a_free_variable_never_worsens():
    formula = CnfFormula.from_dimacs(3, [[1, 2], [3]])
    domain = loaded(formula, 11)
    for _ in range(20):
        domain.memory.put(0, Assignment(formula, [False, False, False]))
        a = domain.get_solution(0)
        assert sorted(a.broken) == [0, 1]
        assert all(any(a.negative[v] == 0 for v in formula.clause_variables(c)) for c in a.broken)
        assert domain.apply_heuristic(2, 0, 1) < 2


@pytest.mark.parametrize("heuristic", [2, 3, 6])
def test_satisfied_formula_makes_broken_clause_heuristics_copy(heuristic):
    formula = CnfFormula.from_dimacs(2, [[1], [2]])
    domain = loaded(formula)
    domain.memory.put(0, Assignment(formula, [True, True]))
    assert domain.apply_heuristic(heuristic, 0, 1) == 0
    assert domain.compare_solutions(0, 1)


def test_all_operators_keep_bookkeeping_consistent():
    formula = generate_random_ksat(40, 4.26, seed=21)
    domain = loaded(formula, 21)
    domain.set_memory_size(3)
    domain.initialise_solution(0)
    domain.initialise_solution(1)
    rng = np.random.default_rng(0)
    for _ in range(300):
        h = int(rng.integers(domain.number_of_heuristics))
        if h in (7, 8):
            value = domain.apply_heuristic2(h, 0, 1, 2)
        else:
            value = domain.apply_heuristic(h, int(rng.integers(2)), 2)
        a = domain.get_solution(2)
        assert value == formula.broken(a.values)
        assert (a.positive, a.negative) == brute_gains(formula, a.values)
        domain.copy_solution(2, int(rng.integers(2)))
