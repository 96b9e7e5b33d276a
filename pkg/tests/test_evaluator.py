import math

import pytest

from purikit.bellstate import Basis, ErrorModel, PairQuadruple, werner_raw
from purikit.circuit import Circuit, FinalBcd, Gate, Measure, builtin, load_circuit
from purikit.errors import DomainError, StructuralError
from purikit.evaluator import (
    entropy,
    evaluate,
    first_order_ratio,
    hashing_yield,
    relative_components,
    sweep,
    werner_hashing_threshold,
)

F0 = 0.9
Q = (1 - F0) / 3
PERFECT = ErrorModel.werner(F0, 1.0, 1.0)


class TestSingleSelection:
    def test_closed_form(self):
        report = evaluate(builtin("fig1"), PERFECT)
        expected = (F0 ** 2 + Q ** 2) / (F0 ** 2 + 5 * Q ** 2 + 2 * F0 * Q)
        assert report.final.fidelity == pytest.approx(expected, abs=1e-9)
        assert report.final.fidelity == pytest.approx(0.9263959, abs=1e-7)
        assert report.success_prob == pytest.approx(0.8755556, abs=1e-7)
        assert report.op_count == 2
        assert report.raw_pairs_best_case == 2

    def test_single_selection_alias(self):
        assert evaluate(builtin("single_selection"), PERFECT) == evaluate(builtin("fig1"), PERFECT)

    def test_perfect_inputs_stay_perfect(self):
        report = evaluate(builtin("double_selection"), ErrorModel.werner(1.0, 1.0, 1.0))
        assert report.final.fidelity == 1.0
        assert report.success_prob == 1.0
        assert report.infidelity_components == (0.0, 0.0, 0.0)


class TestFloors:
    def test_single_selection_first_order(self):
        assert 0.745 <= first_order_ratio(builtin("single_selection")) <= 0.755

    def test_double_selection_first_order(self):
        assert 0.370 <= first_order_ratio(builtin("double_selection")) <= 0.380

    def test_triple_selection_matches_double_to_first_order(self):
        double = first_order_ratio(builtin("double_selection"))
        triple = first_order_ratio(builtin("triple_selection"))
        assert abs(triple - double) <= 0.005

    def test_double_beats_single_under_noise(self):
        em = ErrorModel.werner(0.9, 0.99, 0.99)
        single = evaluate(builtin("single_selection"), em)
        double = evaluate(builtin("double_selection"), em)
        assert double.infidelity < single.infidelity

    def test_first_order_ratio_validates_epsilon(self):
        with pytest.raises(DomainError):
            first_order_ratio(builtin("fig1"), epsilon=0.0)


class TestReport:
    def test_relative_components_sum_to_one(self):
        report = evaluate(builtin("double_selection"), ErrorModel.werner(0.85, 0.98, 0.98))
        assert sum(report.infidelity_components) == pytest.approx(1.0)
        assert relative_components(PairQuadruple(1.0, 0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0)

    def test_zero_success_is_reported_not_raised(self):
        # with raw pairs that are pure D, the coinX check on a D target always fails
        raw = PairQuadruple(0.0, 0.0, 0.0, 1.0)
        c = Circuit(2, (Gate(0, 1), Measure(1, Basis.COIN_X, reset=False)))
        report = evaluate(c, ErrorModel(raw, 1.0, 1.0))
        assert report.final is None
        assert not report.defined
        assert report.success_prob == 0.0
        assert report.infidelity == 1.0
        assert report.to_mapping()["fidelity"] is None

    def test_final_bcd_relabels_the_output(self):
        em = ErrorModel.werner(0.9, 0.99, 0.99)
        plain = evaluate(builtin("fig1"), em)
        relabeled = evaluate(builtin("fig1").with_ops(builtin("fig1").ops + (FinalBcd("DCB"),)), em)
        assert relabeled.final.p_a == pytest.approx(plain.final.p_a)
        assert relabeled.final.p_d == pytest.approx(plain.final.p_b)
        assert relabeled.success_prob == pytest.approx(plain.success_prob)

    def test_measuring_the_output_pair_is_structural_error(self):
        c = Circuit(2, (Gate(0, 1), Measure(0, Basis.COIN_Z)))
        with pytest.raises(StructuralError):
            evaluate(c, PERFECT)

    def test_custom_raw_pair(self):
        em = ErrorModel(PairQuadruple(0.9, 0.1, 0.0, 0.0), 1.0, 1.0)
        report = evaluate(builtin("fig1"), em)
        # a pure B/A mixture: coinZ on the target rejects every B there
        assert report.success_prob == pytest.approx(0.9 * 0.9 + 0.1 * 0.1)
        assert 0.0 < report.final.p_a <= 1.0

    def test_example_circuits(self, circuits_dir):
        em = ErrorModel.werner(0.9, 0.99, 0.99)
        twice = evaluate(load_circuit(f"{circuits_dir}/double_selection_twice.json"), em)
        once = evaluate(builtin("double_selection"), em)
        assert twice.defined
        assert twice.success_prob < once.success_prob
        assert twice.raw_pairs_best_case == 5
        deutsch = evaluate(load_circuit(f"{circuits_dir}/deutsch.json"), em)
        assert deutsch.defined


class TestHashing:
    def test_entropy(self):
        assert entropy(PairQuadruple(1.0, 0.0, 0.0, 0.0)) == 0.0
        assert entropy(PairQuadruple(0.25, 0.25, 0.25, 0.25)) == pytest.approx(2.0)

    def test_werner_threshold(self):
        root = werner_hashing_threshold()
        assert root == pytest.approx(0.8107, abs=0.002)
        assert 1.0 - entropy(werner_raw(root)) == pytest.approx(0.0, abs=1e-9)

    def test_hashing_yield(self):
        report = evaluate(builtin("fig1"), PERFECT)
        expected = report.success_prob / 2 * (1.0 - entropy(report.final))
        assert hashing_yield(report) == pytest.approx(expected)
        raw = PairQuadruple(0.0, 0.0, 0.0, 1.0)
        c = Circuit(2, (Gate(0, 1), Measure(1, Basis.COIN_X, reset=False)))
        assert hashing_yield(evaluate(c, ErrorModel(raw, 1.0, 1.0))) == 0.0


class TestSweep:
    def test_coupled_eta(self):
        rows = sweep(builtin("double_selection"), ErrorModel.werner(0.9), [0.99, 0.999, 1.0])
        assert [r.eta for r in rows] == [0.99, 0.999, 1.0]
        assert rows[0].epsilon == pytest.approx(0.01)
        assert rows[0].infidelity > rows[1].infidelity > rows[2].infidelity
        assert set(rows[0].to_mapping()) == {"p2", "eta", "epsilon", "infidelity", "success_prob"}

    def test_fixed_eta(self):
        em = ErrorModel.werner(0.9, 0.99, 0.95)
        rows = sweep(builtin("fig1"), em, [0.99, 0.995], couple_eta=False)
        assert all(r.eta == 0.95 for r in rows)
        assert all(math.isfinite(r.success_prob) for r in rows)
