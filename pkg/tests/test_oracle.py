import numpy as np
import pytest

from purikit.bellstate import Basis, ErrorModel, PairQuadruple
from purikit.circuit import Circuit, FinalBcd, Gate, Measure, Swap, builtin
from purikit.errors import StructuralError, UnsupportedError
from purikit.evaluator import evaluate, run_branch
from purikit.optimizer import GaConfig, _rng, random_circuit
from purikit.oracle import BELL_VECTORS, bell_density, oracle_diagonal, oracle_evaluate


def _assert_agree(c, em, tol=1e-12):
    fast, slow = evaluate(c, em), oracle_evaluate(c, em)
    assert slow.success_prob == pytest.approx(fast.success_prob, abs=tol)
    assert np.allclose(slow.final.as_tuple(), fast.final.as_tuple(), atol=tol, rtol=0.0)


def test_bell_vectors_are_orthonormal():
    gram = BELL_VECTORS.conj() @ BELL_VECTORS.T
    assert np.allclose(gram, np.eye(4))


def test_bell_density_is_diagonal_in_the_bell_basis():
    rho = bell_density(PairQuadruple(0.7, 0.1, 0.15, 0.05))
    assert np.trace(rho).real == pytest.approx(1.0)
    weights = np.einsum("si,ij,sj->s", BELL_VECTORS.conj(), rho, BELL_VECTORS).real
    assert np.allclose(weights, [0.7, 0.1, 0.15, 0.05])


@pytest.mark.parametrize("name", ["fig1", "double_selection"])
def test_builtins_agree(name):
    _assert_agree(builtin(name), ErrorModel.werner(0.87, 0.96, 0.93))


@pytest.mark.parametrize("perm", ["BDC", "DCB", "CDB", "DBC", "CBD"])
def test_relabeled_gates_agree(perm):
    c = Circuit(2, (Gate(0, 1, perm, "BCD"), Gate(1, 0, "BCD", perm), Measure(1, Basis.ANTI_Y, reset=False), ))
    _assert_agree(c, ErrorModel(PairQuadruple(0.8, 0.1, 0.06, 0.04), 0.97, 0.95))


@pytest.mark.parametrize("perm", ["BDC", "CDB"])
def test_final_bcd_agrees(perm):
    c = builtin("fig1").with_ops(builtin("fig1").ops + (FinalBcd(perm),))
    _assert_agree(c, ErrorModel(PairQuadruple(0.8, 0.1, 0.06, 0.04), 0.98, 0.97))


def test_swap_and_reset_agree():
    c = Circuit(
        3,
        (
            Gate(1, 2),
            Measure(2, Basis.COIN_X, reset=True),
            Swap(1, 2),
            Gate(0, 1),
            Gate(2, 1),
            Measure(2, Basis.COIN_Z, reset=False),
            Measure(1, Basis.COIN_Z, reset=False),
        ),
    )
    _assert_agree(c, ErrorModel.werner(0.9, 0.95, 0.9))


@pytest.mark.parametrize("mode", ["standard", "hot_cold"])
def test_random_canonical_circuits_agree(mode):
    rng = _rng(2024, 7)
    for i in range(30):
        width = 2 + i % 2
        cfg = GaConfig.from_mapping({"width": width, "max_length": 10, "initial_length": 10, "mode": mode})
        c = random_circuit(cfg, rng)
        f0, p2, eta = rng.uniform(0.8, 1.0, size=3)
        _assert_agree(c, ErrorModel.werner(float(f0), float(p2), float(eta)))


@pytest.mark.slow
def test_two_hundred_random_circuits_agree():
    rng = _rng(99)
    for i in range(200):
        width = 2 + i % 2
        mode = "hot_cold" if i % 5 == 0 else "standard"
        cfg = GaConfig.from_mapping({"width": width, "max_length": 10, "initial_length": 10, "mode": mode})
        c = random_circuit(cfg, rng)
        f0, p2, eta = rng.uniform(0.8, 1.0, size=3)
        _assert_agree(c, ErrorModel.werner(float(f0), float(p2), float(eta)))


def test_width_limit():
    c = Circuit(4, (Gate(0, 1), Gate(0, 2), Gate(0, 3), Measure(1, Basis.COIN_Z), Measure(2, Basis.COIN_Z), Measure(3, Basis.COIN_Z)))
    with pytest.raises(UnsupportedError, match="width <= 3"):
        oracle_evaluate(c, ErrorModel.werner(0.9))


def test_measuring_the_output_pair_is_structural_error():
    c = Circuit(2, (Gate(0, 1), Measure(0, Basis.COIN_Z)))
    with pytest.raises(StructuralError):
        oracle_evaluate(c, ErrorModel.werner(0.9))


def _assert_diagonal_agrees(c, em, tol=1e-12):
    fast, slow = run_branch(c, em), oracle_diagonal(c, em)
    assert slow.weights.shape == (4,) * c.width
    assert np.allclose(slow.weights, fast.weights, atol=tol, rtol=0.0)


def test_full_diagonal_of_a_single_selection():
    em = ErrorModel.werner(0.9, 1.0, 1.0)
    slow = oracle_diagonal(builtin("fig1"), em)
    assert slow.total == pytest.approx(197 / 225, abs=1e-12)
    assert slow.marginal(0)[0] / slow.total == pytest.approx(365 / 394, abs=1e-12)
    _assert_diagonal_agrees(builtin("fig1"), em)


def test_full_diagonal_with_swap_reset_and_vacancies():
    c = Circuit(
        3,
        (
            Gate(1, 2, "DCB", "BCD"),
            Measure(2, Basis.ANTI_Y, reset=True),
            Swap(1, 2),
            Gate(0, 1),
            Measure(1, Basis.COIN_X, reset=False),
        ),
    )
    _assert_diagonal_agrees(c, ErrorModel(PairQuadruple(0.8, 0.1, 0.06, 0.04), 0.96, 0.94))


@pytest.mark.parametrize("mode", ["standard", "hot_cold"])
def test_random_canonical_circuits_agree_on_every_bell_string(mode):
    rng = _rng(31, 4)
    for i in range(20):
        width = 2 + i % 2
        cfg = GaConfig.from_mapping({"width": width, "max_length": 10, "initial_length": 10, "mode": mode})
        c = random_circuit(cfg, rng)
        f0, p2, eta = rng.uniform(0.8, 1.0, size=3)
        _assert_diagonal_agrees(c, ErrorModel.werner(float(f0), float(p2), float(eta)))
