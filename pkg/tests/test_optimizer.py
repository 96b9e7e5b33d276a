import math

import pytest

from purikit.bellstate import Basis, ErrorModel
from purikit.circuit import Circuit, Gate, Measure, builtin, is_canonical
from purikit.errors import DomainError, PurikitError
from purikit.evaluator import EvalReport, evaluate
from purikit.montecarlo import McConfig, simulate_runs
from purikit.optimizer import (
    GaConfig,
    _rng,
    crossover,
    cross_evaluate,
    exhaustive_best,
    fitness,
    mutate,
    random_circuit,
    run_ga,
)

SMALL = {
    "width": 2,
    "max_length": 4,
    "population_size": 10,
    "survivors": 3,
    "children_per_survivor": 2,
    "generations": 3,
    "seed": 5,
}


class TestGaConfig:
    def test_defaults(self):
        cfg = GaConfig.from_mapping({})
        assert cfg.width == 3
        assert cfg.max_length == 17
        assert cfg.initial_length == 8
        assert cfg.population_size == 200
        assert cfg.success_floor is None
        assert cfg.mutation_weights == (1.0,) * 5

    def test_initial_length_is_capped(self):
        assert GaConfig.from_mapping({"max_length": 6, "initial_length": 40}).initial_length == 6

    def test_partial_mutation_weights(self):
        cfg = GaConfig.from_mapping({"mutation_weights": {"tweak": 3.0}})
        assert cfg.mutation_weights == (1.0, 1.0, 1.0, 3.0, 1.0)

    def test_survivors_exceed_population(self):
        with pytest.raises(DomainError, match="population_size"):
            GaConfig.from_mapping({"population_size": 5, "survivors": 10})

    def test_unknown_mutation_kind(self):
        with pytest.raises(DomainError, match="flip"):
            GaConfig.from_mapping({"mutation_weights": {"flip": 1.0}})

    def test_invalid_documents(self):
        with pytest.raises(PurikitError):
            GaConfig.from_mapping({"width": 1})
        with pytest.raises(PurikitError):
            GaConfig.from_mapping({"mode": "warm"})
        with pytest.raises(PurikitError):
            GaConfig.from_mapping({"bogus": 1})

    def test_to_mapping(self):
        doc = GaConfig.from_mapping({"seed": 3}).to_mapping()
        assert doc["seed"] == 3
        assert doc["mutation_weights"]["swap_adjacent"] == 1.0
        assert GaConfig.from_mapping(doc) == GaConfig.from_mapping({"seed": 3})


class TestGenes:
    @pytest.mark.parametrize("mode", ["standard", "hot_cold"])
    def test_random_circuits_are_canonical(self, mode):
        cfg = GaConfig.from_mapping({"width": 3, "max_length": 9, "mode": mode})
        rng = _rng(1)
        for _ in range(20):
            c = random_circuit(cfg, rng)
            assert c.width == 3
            assert c.mode == mode
            assert c.length <= cfg.max_length
            assert is_canonical(c)

    def test_mutation_and_crossover_stay_canonical(self):
        cfg = GaConfig.from_mapping({"width": 3, "max_length": 10})
        rng = _rng(2)
        a, b = random_circuit(cfg, rng), random_circuit(cfg, rng)
        for _ in range(20):
            child = mutate(a, cfg, rng)
            assert child.length <= cfg.max_length
            assert is_canonical(child)
            mixed = crossover(a, b, cfg, rng)
            assert mixed.length <= cfg.max_length
            assert is_canonical(mixed)
            a = child

    def test_no_room_for_a_circuit(self):
        cfg = GaConfig.from_mapping({"width": 5, "max_length": 3})
        with pytest.raises(DomainError, match="No valid circuit"):
            random_circuit(cfg, _rng(0))


class TestFitness:
    def test_equals_fidelity_with_unit_weights(self):
        cfg = GaConfig.from_mapping({})
        report = evaluate(builtin("fig1"), ErrorModel.werner(0.9))
        assert fitness(report, cfg) == pytest.approx(report.final.fidelity)

    def test_weighted_components(self):
        cfg = GaConfig.from_mapping({"fitness_weights": [0.0, 0.0, 2.0]})
        report = evaluate(builtin("fig1"), ErrorModel.werner(0.9, 0.97, 0.97))
        assert fitness(report, cfg) == pytest.approx(1.0 - 2.0 * report.final.p_d)

    def test_undefined_output(self):
        report = EvalReport(None, 0.0, 2, 2, (0.0, 0.0, 0.0))
        assert fitness(report, GaConfig.from_mapping({})) == -math.inf

    def test_success_floor(self):
        report = evaluate(builtin("fig1"), ErrorModel.werner(0.9, 1.0, 1.0))
        assert fitness(report, GaConfig.from_mapping({"success_floor": 0.9})) == -math.inf
        assert fitness(report, GaConfig.from_mapping({"success_floor": 0.8})) > 0.9


class TestRunGa:
    def test_deterministic_and_elitist(self):
        cfg = GaConfig.from_mapping(SMALL)
        em = ErrorModel.werner(0.9, 0.99, 0.99)
        seen = []
        first = run_ga(cfg, em, on_generation=lambda record, population: seen.append(len(population)))
        second = run_ga(cfg, em)
        assert [r.best.circuit.key() for r in first.trace] == [r.best.circuit.key() for r in second.trace]
        assert len(first.trace) == cfg.generations + 1
        assert seen == [cfg.population_size] * (cfg.generations + 1)
        best = [r.best.fitness for r in first.trace]
        assert best == sorted(best)
        assert first.best.fitness == first.population[0].fitness

    def test_population_is_sorted_and_unique(self):
        run = run_ga(GaConfig.from_mapping(SMALL), ErrorModel.werner(0.85, 0.98, 0.98))
        keys = [s.circuit.key() for s in run.population]
        assert len(keys) == len(set(keys))
        values = [s.fitness for s in run.population]
        assert values == sorted(values, reverse=True)

    def test_zero_generations(self):
        run = run_ga(GaConfig.from_mapping({**SMALL, "generations": 0}), ErrorModel.werner(0.9))
        assert len(run.trace) == 1


class TestExhaustive:
    def test_picks_the_best_candidate(self):
        em = ErrorModel.werner(0.9, 0.99, 0.99)
        cfg = GaConfig.from_mapping({"width": 2})
        candidates = [
            Circuit(2, (Gate(0, 1, a, b), Measure(1, basis, reset=False)))
            for a in ("BCD", "DCB")
            for b in ("BCD", "CBD")
            for basis in Basis
        ]
        best = exhaustive_best(cfg, em, candidates)
        assert best.fitness == max(fitness(evaluate(c, em), cfg) for c in candidates)

    def test_rejected_candidates_only(self):
        c = Circuit(2, (Measure(1, Basis.COIN_Z), Gate(0, 1), Measure(1, Basis.COIN_Z, reset=False)))
        with pytest.raises(DomainError):
            exhaustive_best(GaConfig.from_mapping({"width": 2}), ErrorModel.werner(0.9), [c])

    def test_cross_evaluate(self):
        circuits = {"single": builtin("single_selection"), "double": builtin("double_selection")}
        models = {"clean": ErrorModel.werner(0.9, 1.0, 1.0), "noisy": ErrorModel.werner(0.9, 0.97, 0.97)}
        matrix = cross_evaluate(circuits, models)
        assert set(matrix) == {"single", "double"}
        assert matrix["single"]["clean"] == pytest.approx(evaluate(circuits["single"], models["clean"]).final.fidelity)
        assert matrix["double"]["noisy"] < matrix["double"]["clean"]


@pytest.mark.slow
def test_ga_finds_a_low_error_circuit():
    em = ErrorModel.werner(0.9, 0.99, 0.99)
    cfg = GaConfig.from_mapping({"width": 3, "max_length": 17, "success_floor": 0.2, "seed": 1})
    best = run_ga(cfg, em).best
    assert best.report.infidelity <= 0.01
    assert best.report.success_prob >= 0.2
    report = simulate_runs(best.circuit, em, McConfig.from_mapping({"trials": 20000, "seed": 1}))
    assert report.mean_pairs <= 26


@pytest.mark.slow
def test_nothing_beats_the_gate_error_floor():
    em = ErrorModel.werner(0.9, 0.99, 0.99)
    cfg = GaConfig.from_mapping({"width": 3, "max_length": 17, "seed": 2, "generations": 100})
    run = run_ga(cfg, em)
    assert all(s.report.infidelity >= 0.0045 for s in run.population)


def test_ga_converges_to_single_selection_in_the_smallest_space():
    cfg = GaConfig.from_mapping(
        {"width": 2, "max_length": 3, "population_size": 30, "survivors": 8, "generations": 15, "seed": 4}
    )
    best = run_ga(cfg, ErrorModel.werner(0.9, 1.0, 1.0)).best
    assert best.fitness == pytest.approx(365 / 394, abs=1e-9)
    assert best.report.final.fidelity == pytest.approx(0.926395, abs=1e-6)


@pytest.mark.slow
def test_ga_results_depend_on_the_error_regime():
    models = {"clean": ErrorModel.werner(0.9, 1.0, 1.0), "noisy": ErrorModel.werner(0.9, 0.9, 0.9)}
    cfg = GaConfig.from_mapping(
        {"width": 2, "max_length": 4, "population_size": 60, "survivors": 15, "generations": 40, "seed": 8}
    )
    found = {name: run_ga(cfg, em).best.circuit for name, em in models.items()}
    matrix = cross_evaluate(found, models)
    assert set(matrix) == {"clean", "noisy"}
    assert all(set(row) == {"clean", "noisy"} for row in matrix.values())
    # each circuit is at least as good as the other one in the regime it was searched in
    assert matrix["clean"]["clean"] >= matrix["noisy"]["clean"] - 1e-12
    assert matrix["noisy"]["noisy"] >= matrix["clean"]["noisy"] - 1e-12
    assert matrix["clean"]["clean"] > 365 / 394 + 1e-6
    assert matrix["clean"]["noisy"] < matrix["clean"]["clean"]


@pytest.mark.slow
def test_long_circuits_approach_the_gate_error_floor():
    em = ErrorModel.werner(0.9, 0.99, 0.99)
    cfg = GaConfig.from_mapping({"width": 4, "max_length": 40, "seed": 3})
    run = run_ga(cfg, em)
    assert 0.005 <= run.best.report.infidelity <= 0.009
    assert all(s.report.infidelity >= 0.0045 for s in run.population)
