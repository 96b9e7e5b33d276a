import numpy as np
import pytest

from purikit.bellstate import (
    BCD_NAMES,
    Basis,
    apply_bilateral_gate,
    apply_measurement,
    bell_index,
    identity_perm,
    init_distribution,
    mirrored_cnot_perm,
    swap_perm,
    werner_raw,
)
from purikit.errors import DomainError, StructuralError
from purikit.permgroup import (
    IDENTITY,
    BellPermutation,
    CliffordOp2,
    bilateral_mapping,
    classify,
    cnot_bcd_generated,
    compatible,
    compatible_symplectic_pairs,
    compile_bcd_perm,
    count_compatible_symplectic_pairs,
    enumerate_bell_permutations,
    enumerate_c2,
    enumeration_counts,
    expand_gate_string,
    gate_string_unitary,
    symplectic_matrices,
)

CNOT = CliffordOp2((1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1), (0, 0, 0, 0))
SWAP = CliffordOp2((0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0), (0, 0, 0, 0))


@pytest.fixture(scope="module")
def enumeration():
    return enumerate_bell_permutations()


@pytest.fixture(scope="module")
def flags(enumeration):
    return classify(enumeration.permutations)


def test_symplectic_group_order():
    assert symplectic_matrices().shape == (720, 4, 4)
    assert count_compatible_symplectic_pairs() == 720


def test_conjugation_check_pairs_only_equal_symplectic_parts():
    pairs = compatible_symplectic_pairs()
    assert len(pairs) == 720
    assert np.array_equal(pairs[:, 0], pairs[:, 1])


def test_bilateral_count_is_compatible_pairs_times_phases(enumeration):
    assert count_compatible_symplectic_pairs() * 16 * 16 == enumeration.bilateral_count == 184320


def test_compatible_rejects_mismatched_symplectic_parts():
    assert compatible(CNOT, CNOT)
    assert compatible(SWAP, SWAP)
    assert not compatible(CNOT, SWAP)
    assert not compatible(IDENTITY, CNOT)
    # phases alone never break compatibility
    assert compatible(CNOT, CliffordOp2(CNOT.symplectic, (1, 0, 1, 1)))



def test_c2_size_and_order_is_deterministic():
    ops = enumerate_c2()
    assert len(ops) == 11520
    assert len(set(ops)) == 11520
    assert ops == enumerate_c2()


def test_clifford_inverse():
    op = enumerate_c2()[4321]
    assert op.then(op.inverse()) == IDENTITY
    assert IDENTITY.then(op) == op


def test_bilateral_mapping_of_known_gates():
    assert bilateral_mapping(IDENTITY, IDENTITY) == identity_perm()
    assert bilateral_mapping(CNOT, CNOT) == mirrored_cnot_perm()
    assert bilateral_mapping(SWAP, SWAP) == swap_perm()
    with pytest.raises(StructuralError, match="does not permute"):
        bilateral_mapping(CNOT, SWAP)


def test_enumeration_counts(enumeration, flags):
    assert enumeration.bilateral_count == 184320
    assert len(enumeration) == 11520
    values = list(flags.values())
    assert sum(f.is_a_preserving for f in values) == 720
    assert sum(f.is_fidelity_trivial for f in values) == 72
    assert sum(f.is_useful for f in values) == 648
    assert sum(f.requires_swap for f in values) == 324
    assert sum(f.generated_by_cnot_bcd for f in values) == 324


def test_every_permutation_has_sixteen_realizers(enumeration):
    assert {len(p.realizers) for p in enumeration.permutations} == {16}


def test_classification_of_known_permutations(enumeration, flags):
    mappings = enumeration.mappings()
    assert mirrored_cnot_perm() in mappings
    cnot = flags[mirrored_cnot_perm()]
    assert cnot.is_useful and cnot.generated_by_cnot_bcd and not cnot.requires_swap
    assert flags[identity_perm()].is_fidelity_trivial
    assert flags[swap_perm()].is_fidelity_trivial


def test_cnot_bcd_generated_is_useful(flags):
    generated = cnot_bcd_generated()
    assert len(generated) == 324
    assert all(flags[m].is_useful for m in generated)


def test_classify_needs_the_full_set():
    with pytest.raises(StructuralError, match="full set"):
        classify([BellPermutation(identity_perm())])


def test_enumeration_counts_summary():
    assert enumeration_counts() == {
        "c2": 11520,
        "bilateral": 184320,
        "permutations": 11520,
        "a_preserving": 720,
        "fidelity_trivial": 72,
        "useful": 648,
        "useful_requires_swap": 324,
    }


def test_permutation_table():
    table = BellPermutation(mirrored_cnot_perm()).table()
    assert table["AB"] == "DB"
    assert len(table) == 16


def test_expand_gate_string():
    assert expand_gate_string("H(PH)^2") == "HPHPH"
    assert expand_gate_string("(HP)^4") == "HPHPHPHP"
    assert expand_gate_string("") == ""
    with pytest.raises(DomainError):
        expand_gate_string("HX")


@pytest.mark.parametrize("name", BCD_NAMES)
def test_compiled_bcd_gates_are_unitary(name):
    alice, bob = compile_bcd_perm(name)
    for gates in (alice, bob):
        u = gate_string_unitary(gates)
        assert np.allclose(u @ u.conj().T, np.eye(2))


def test_compile_bcd_rejects_unknown_names():
    with pytest.raises(DomainError):
        compile_bcd_perm("BBB")


def test_swap_moves_labels_between_pairs():
    assert swap_perm()[bell_index("CD")] == bell_index("DC")


def _single_round_fidelity(f: float) -> float:
    e = (1.0 - f) / 3.0
    return (f * f + e * e) / (f * f + 2.0 * f * e + 5.0 * e * e)


@pytest.mark.parametrize("f0", [0.55, 0.7, 0.9, 0.99])
def test_every_useful_permutation_purifies_werner_pairs(enumeration, flags, f0):
    raw = werner_raw(f0)
    start = init_distribution(2, raw)
    useful = [p.mapping for p in enumeration.permutations if flags[p.mapping].is_useful]
    assert len(useful) == 648
    for mapping in useful:
        gated = apply_bilateral_gate(start, mapping, 0, 1, 1.0)
        best = max(
            apply_measurement(gated, 1, basis, 1.0, raw, reset=False)[0].output().fidelity
            for basis in Basis
        )
        assert best > f0
        assert best == pytest.approx(_single_round_fidelity(f0), abs=1e-12)
