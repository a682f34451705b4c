#!/usr/bin/env python3
"""
Tests for the search strategies: tabu and acceptance bookkeeping, the
memetic tournament, degraded modes, and short seeded runs on every domain.
"""

import logging
import math
from itertools import permutations

import numpy as np
import pytest
from scipy.stats import chisquare

from algorithms import (
    ACCEPTANCE_STEP,
    ALGORITHMS,
    AdaptiveAcceptance,
    HeuristicScores,
    IteratedLocalSearch,
    MemeticAlgorithm,
    RandomHyperHeuristic,
    TabuSearchAdaptiveAcceptance,
    make_algorithm,
)
from binpacking import BinPacking
from binpacking import generate_uniform as generate_packing
from core import BudgetClock, ProblemDomain, run
from errors import UnsupportedDomain
from flowshop import FlowShop, makespan
from flowshop import generate_uniform as generate_flowshop
from maxsat import MaxSat, generate_random_ksat
from models import HeuristicKind, RunBudget, build_catalog
from personnel import PersonnelScheduling, generate_roster

DOMAINS = {
    "maxsat": lambda: (MaxSat, generate_random_ksat(50, 4.26, seed=1)),
    "binpacking": lambda: (BinPacking, generate_packing(40, seed=1)),
    "flowshop": lambda: (FlowShop, generate_flowshop(10, 5, seed=1)),
    "personnel": lambda: (PersonnelScheduling, generate_roster(5, 14, seed=1)),
}


class Score:
    def __init__(self, value):
        self.value = value

    def copy(self):
        return Score(self.value)

    def __eq__(self, other):
        return isinstance(other, Score) and self.value == other.value

    def __str__(self):
        return str(self.value)


class Plateau(ProblemDomain):
    """Mutation only: no local search, no crossover."""

    domain_id = "plateau"
    heuristics = build_catalog([("nudge", HeuristicKind.MUTATION, "")])

    def _prepare_instance(self, instance):
        return int(instance)

    def _initial_solution(self):
        return Score(self.instance)

    def _objective(self, solution):
        return solution.value

    def _operators(self):
        return (self._nudge,)

    def _nudge(self, s):
        s.value = max(0, s.value + int(self.rng.integers(-1, 2)))
        return s



class Still(Plateau):
    """A single heuristic that returns its input unchanged."""

    domain_id = "still"
    heuristics = build_catalog([("keep", HeuristicKind.MUTATION, "")])

    def _operators(self):
        return (lambda s: s,)


class Toolbox(Plateau):
    """Three mutations, a ruin, a descent and a crossover over one integer."""

    domain_id = "toolbox"
    heuristics = build_catalog(
        [
            ("up", HeuristicKind.MUTATION, ""),
            ("down", HeuristicKind.MUTATION, ""),
            ("jump", HeuristicKind.MUTATION, ""),
            ("reset", HeuristicKind.RUIN_RECREATE, ""),
            ("descend", HeuristicKind.LOCAL_SEARCH, ""),
            ("lower", HeuristicKind.CROSSOVER, ""),
        ]
    )

    def _operators(self):
        return (self._up, self._down, self._jump, self._reset, self._descend, self._lower)

    def _up(self, s):
        s.value += 1
        return s

    def _down(self, s):
        s.value = max(0, s.value - 1)
        return s

    def _jump(self, s):
        s.value = int(self.rng.integers(self.instance + 1))
        return s

    def _reset(self, s):
        return Score(self.instance)

    def _descend(self, s):
        s.value = max(0, s.value - 1)
        return s

    def _lower(self, first, second):
        return Score(min(first.value, second.value))


def loaded(name, seed=0):
    domain_class, instance = DOMAINS[name]()
    domain = domain_class(seed)
    domain.load_instance(instance)
    return domain


# ---------- random hyper-heuristic ----------
def test_random_always_accepts_an_improvement():
    algorithm = RandomHyperHeuristic(seed=1)
    assert all(algorithm.accepts(0.5) for _ in range(1000))


def test_random_accepts_half_of_the_non_improving_moves():
    algorithm = RandomHyperHeuristic(seed=1)
    accepted = sum(algorithm.accepts(-1.0) for _ in range(10_000))
    assert accepted / 10_000 == pytest.approx(0.5, abs=0.02)


def test_random_keeps_the_incumbent_under_an_identity_heuristic():
    domain = Still()
    domain.load_instance(7)
    result = run(RandomHyperHeuristic(), domain, RunBudget.evaluations(500), seed=4)
    assert {value for _, value in result.trace.points} == {7}
    assert domain.get_function_value(0) == 7
    assert result.evaluations_used == 500


# ---------- tabu scores ----------
def test_tabu_tenure_is_one_less_than_the_heuristic_count():
    scores = HeuristicScores.for_heuristics([0, 1, 2, 3, 4])
    assert scores.tenure == 4
    assert scores.values == {0: 0, 1: 0, 2: 0, 3: 0, 4: 0}


def test_candidates_are_the_best_valued_free_heuristics():
    scores = HeuristicScores.for_heuristics([0, 1, 2])
    scores.improved(1)
    scores.improved(2)
    assert scores.candidates() == [1, 2]
    scores.unchanged(2, iteration=1)
    assert scores.candidates() == [1]


def test_worsening_empties_the_tabu_list_then_bans_the_culprit():
    scores = HeuristicScores.for_heuristics([0, 1, 2, 3])
    scores.unchanged(0, iteration=1)
    scores.unchanged(1, iteration=2)
    scores.worsened(2, iteration=3)
    assert scores.tabu == {2: 3}
    assert scores.values[2] == -1


def test_tabu_entries_expire_after_the_tenure():
    scores = HeuristicScores.for_heuristics([0, 1, 2])
    scores.unchanged(0, iteration=1)
    scores.unchanged(1, iteration=3)
    assert 0 in scores.tabu
    scores.unchanged(1, iteration=4)
    assert 0 not in scores.tabu


def test_oldest_tabu_entry_is_released_when_everything_is_tabu():
    scores = HeuristicScores.for_heuristics([0, 1])
    scores.unchanged(0, iteration=1)
    scores.unchanged(1, iteration=2)
    assert scores.candidates() == [0]
    assert 0 not in scores.tabu


# ---------- acceptance ----------
def test_windows_without_improvement_raise_the_acceptance_rate():
    acceptance = AdaptiveAcceptance(window=10)
    acceptance.advance(9)
    assert acceptance.beta == 0
    acceptance.advance(10)
    assert acceptance.beta == ACCEPTANCE_STEP
    acceptance.advance(35)
    assert acceptance.beta == 3 * ACCEPTANCE_STEP
    assert acceptance.window_start == 30


def test_improving_windows_without_worsening_lower_the_rate():
    acceptance = AdaptiveAcceptance(window=10, beta=10)
    acceptance.record(3, improved=True, worsened=False)
    acceptance.advance(10)
    assert acceptance.beta == 10 - ACCEPTANCE_STEP
    acceptance.record(12, improved=True, worsened=True)
    acceptance.advance(20)
    assert acceptance.beta == 10 - ACCEPTANCE_STEP
    assert acceptance.last_improvement == 12
    assert acceptance.last_worsening == 12


def test_acceptance_rate_is_clamped():
    acceptance = AdaptiveAcceptance(window=1, beta=95)
    acceptance.advance(5)
    assert acceptance.beta == 100
    low = AdaptiveAcceptance(window=1)
    low.record(0, improved=True, worsened=False)
    low.advance(1)
    assert low.beta == 0


@pytest.mark.parametrize(
    "budget, window",
    [
        (RunBudget.evaluations(50_000), 500),
        (RunBudget.evaluations(50), 1),
        (RunBudget.wall_clock(600_000), 100),
    ],
)
def test_acceptance_window_follows_the_budget(budget, window):
    algorithm = TabuSearchAdaptiveAcceptance()
    algorithm.begin_run(np.random.default_rng(0), BudgetClock(budget))
    assert algorithm._window() == window


@pytest.mark.parametrize("beta, low, high", [(0, 0.0, 0.0), (5, 0.044, 0.056), (100, 1.0, 1.0)])
def test_non_improving_moves_pass_at_beta_percent(beta, low, high):
    algorithm = TabuSearchAdaptiveAcceptance(seed=beta)
    algorithm.acceptance = AdaptiveAcceptance(window=1, beta=beta)
    accepted = sum(algorithm.accepts_worse() for _ in range(20_000))
    assert low <= accepted / 20_000 <= high


# ---------- memetic algorithm ----------
def test_tournament_prefers_the_lower_value():
    algorithm = MemeticAlgorithm(seed=3)
    for _ in range(20):
        assert algorithm.tournament_winner([5.0, 1.0]) == 1


def test_population_values_match_memory_after_a_run():
    domain = loaded("binpacking", 2)
    algorithm = MemeticAlgorithm()
    run(algorithm, domain, RunBudget.evaluations(500), seed=2)
    assert len(algorithm.population) == 10
    for slot, value in enumerate(algorithm.population):
        assert domain.get_function_value(slot) == value
    assert algorithm.iterations > 0


def test_memetic_mutates_about_one_offspring_in_ten():
    domain = loaded("maxsat", 3)
    algorithm = MemeticAlgorithm()
    run(algorithm, domain, RunBudget.evaluations(30_000), seed=3)
    assert algorithm.iterations > 5000
    assert 0.09 <= algorithm.mutations / algorithm.iterations <= 0.11


def test_memetic_algorithm_needs_a_crossover():
    domain = Plateau()
    domain.load_instance(10)
    with pytest.raises(UnsupportedDomain):
        run(MemeticAlgorithm(), domain, RunBudget.evaluations(100), seed=0)


# ---------- iterated local search ----------
def test_ils_without_local_search_warns_and_stays_greedy(caplog):
    domain = Plateau()
    domain.load_instance(10)
    algorithm = IteratedLocalSearch()
    with caplog.at_level(logging.WARNING, logger="algorithms"):
        result = run(algorithm, domain, RunBudget.evaluations(300), seed=5)
    assert "no local search" in caplog.text
    assert algorithm.incumbent == domain.get_function_value(0)
    assert result.best_value == algorithm.incumbent


def test_ils_incumbent_lives_in_slot_zero():
    domain = loaded("maxsat", 1)
    algorithm = IteratedLocalSearch()
    run(algorithm, domain, RunBudget.evaluations(2000), seed=1)
    assert algorithm.incumbent == domain.get_function_value(0)


def test_ils_finds_the_optimum_of_a_small_flow_shop():
    instance = generate_flowshop(6, 3, seed=7)
    optimum = min(makespan(instance, p) for p in permutations(range(6)))
    hits = 0
    for seed in range(10):
        domain = FlowShop()
        domain.load_instance(instance)
        hits += run(IteratedLocalSearch(), domain, RunBudget.evaluations(5000), seed=seed).best_value == optimum
    assert hits >= 8


def test_ils_draws_perturbations_uniformly():
    domain = Toolbox()
    domain.load_instance(50)
    run(IteratedLocalSearch(), domain, RunBudget.evaluations(25_000), seed=8)
    perturbations = domain.get_heuristics_of_type(HeuristicKind.MUTATION) + domain.get_heuristics_of_type(
        HeuristicKind.RUIN_RECREATE
    )
    counts = [domain.heuristic_call_counts[h] for h in perturbations]
    assert sum(counts) >= 10_000
    assert chisquare(counts).pvalue > 0.01
    assert domain.heuristic_call_counts[5] == 0


# ---------- tabu search ----------
@pytest.mark.parametrize("domain_name", sorted(DOMAINS))
def test_tabu_search_never_applies_a_tabu_or_crossover_heuristic(domain_name, monkeypatch):
    domain = loaded(domain_name)
    algorithm = TabuSearchAdaptiveAcceptance()
    crossovers = set(domain.get_heuristics_of_type(HeuristicKind.CROSSOVER))
    apply = domain.apply_heuristic
    chosen = []

    def checked(h, source, destination):
        assert h not in crossovers
        assert h not in algorithm.scores.tabu
        chosen.append(h)
        return apply(h, source, destination)

    monkeypatch.setattr(domain, "apply_heuristic", checked)
    run(algorithm, domain, RunBudget.evaluations(2000), seed=0)
    assert len(chosen) == 1999
    assert len(set(chosen)) > 1


# ---------- every algorithm on every domain ----------
def test_registry_names():
    assert sorted(ALGORITHMS) == ["ils", "ma", "random", "tsaa"]
    assert str(make_algorithm("tsaa", 1)) == "tsaa"
    with pytest.raises(ValueError):
        make_algorithm("annealing")


@pytest.mark.parametrize("domain_name", sorted(DOMAINS))
@pytest.mark.parametrize("algorithm_name", sorted(ALGORITHMS))
def test_short_runs_never_lose_the_initial_value(domain_name, algorithm_name):
    improved = 0
    for seed in range(2):
        domain = loaded(domain_name)
        result = run(make_algorithm(algorithm_name), domain, RunBudget.evaluations(1500), seed=seed)
        first = result.trace.points[0][1]
        assert result.best_value <= first
        assert result.evaluations_used == 1500
        assert result.trace.points[-1] == (1500, result.best_value)
        improved += result.best_value < first
    assert improved >= 1


@pytest.mark.parametrize("algorithm_name", sorted(ALGORITHMS))
def test_runs_are_reproducible(algorithm_name):
    outputs = []
    for _ in range(2):
        domain = loaded("flowshop")
        outputs.append(run(make_algorithm(algorithm_name), domain, RunBudget.evaluations(800), seed=42).to_json())
    assert outputs[0] == outputs[1]


SMALL_FLOWSHOP = generate_flowshop(6, 3, seed=7)
SANITY = {
    "maxsat": DOMAINS["maxsat"],
    "binpacking": DOMAINS["binpacking"],
    "flowshop": lambda: (FlowShop, SMALL_FLOWSHOP),
    "personnel": DOMAINS["personnel"],
}


@pytest.mark.slow
@pytest.mark.parametrize("domain_name", sorted(SANITY))
@pytest.mark.parametrize("algorithm_name", sorted(ALGORITHMS))
def test_nearly_every_seed_improves_on_its_start(domain_name, algorithm_name):
    optimum = min(makespan(SMALL_FLOWSHOP, p) for p in permutations(range(6)))
    improved = eligible = 0
    for seed in range(20):
        domain_class, instance = SANITY[domain_name]()
        domain = domain_class(seed)
        domain.load_instance(instance)
        result = run(make_algorithm(algorithm_name), domain, RunBudget.evaluations(5000), seed=seed)
        first = result.trace.points[0][1]
        assert result.best_value <= first
        if domain_name == "flowshop" and first == optimum:
            continue
        eligible += 1
        improved += result.best_value < first
    assert improved >= math.ceil(0.95 * eligible)
