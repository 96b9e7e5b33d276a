import pytest
from sympy import Rational

from purikit.bellstate import Basis, ErrorModel
from purikit.circuit import Circuit, Gate, Measure, builtin
from purikit.errors import ResourceLimitError, StructuralError
from purikit.evaluator import evaluate
from purikit.symbolic import ETA, F0, P2, evaluate_symbolic, poly_terms


def test_single_selection_is_exact():
    report = evaluate_symbolic(builtin("fig1"))
    point = {F0: Rational(9, 10), P2: 1, ETA: 1}
    assert report.success_poly.eval(point) == Rational(197, 225)
    assert report.unnormalized[0].eval(point) == Rational(73, 90)


def test_single_selection_first_order():
    report = evaluate_symbolic(builtin("single_selection"))
    assert report.first_order == {"f0": Rational(2, 3), "p2": Rational(3, 4), "eta": 0}


def test_substitute_matches_numeric_evaluation():
    report = evaluate_symbolic(builtin("double_selection"))
    final, success = report.substitute(0.85, 0.97, 0.98)
    numeric = evaluate(builtin("double_selection"), ErrorModel.werner(0.85, 0.97, 0.98))
    assert success == pytest.approx(numeric.success_prob, abs=1e-12)
    assert final.p_a == pytest.approx(numeric.final.p_a, abs=1e-12)
    assert final.p_d == pytest.approx(numeric.final.p_d, abs=1e-12)


def test_double_selection_first_order_in_gate_error():
    report = evaluate_symbolic(builtin("double_selection"))
    assert 0.370 <= float(report.first_order["p2"]) <= 0.380


def test_mapping_dump():
    doc = evaluate_symbolic(builtin("fig1")).to_mapping()
    assert doc["variables"] == ["f0", "p2", "eta"]
    assert set(doc["unnormalized"]) == {"A", "B", "C", "D"}
    monom, coeff = doc["success"][0]
    assert len(monom) == 3
    assert isinstance(coeff, str)
    assert doc["first_order"]["p2"] == "3/4"


def test_poly_terms_are_sorted():
    terms = poly_terms(evaluate_symbolic(builtin("fig1")).success_poly)
    assert [t[0] for t in terms] == sorted(t[0] for t in terms)


def test_width_guard():
    with pytest.raises(ResourceLimitError, match="width <= 4"):
        evaluate_symbolic(Circuit(5, ()))


def test_length_guard():
    ops = tuple(Gate(0, 1) for _ in range(21))
    with pytest.raises(ResourceLimitError, match="length <= 20"):
        evaluate_symbolic(Circuit(2, ops))


def test_measuring_the_output_pair_is_structural_error():
    with pytest.raises(StructuralError):
        evaluate_symbolic(Circuit(2, (Gate(0, 1), Measure(0, Basis.COIN_Z))))
