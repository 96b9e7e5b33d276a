"""
密度行列による独立な検証用シミュレータ。

Bell 対角表現を経由せず、全量子ビットの密度行列に CNOT・単一量子ビット Clifford・
Pauli ツワールによる脱分極・射影測定を直接施します。ペア k の Alice 側が量子ビット 2k、
Bob 側が 2k+1 です。幅 3 (6 量子ビット) までに限ります。
"""
import itertools
import logging
from functools import reduce
from typing import List, Sequence

import numpy as np

from .bellstate import Basis, BellDistribution, ErrorModel, PairQuadruple
from .circuit import Circuit, FinalBcd, Gate, Measure, Swap
from .errors import StructuralError, UnsupportedError
from .evaluator import EvalReport, report_from_marginal
from .permgroup import compile_bcd_perm, gate_string_unitary

logger = logging.getLogger(__name__)

MAX_ORACLE_WIDTH = 3

_SQRT_HALF = 1.0 / np.sqrt(2.0)
# |A>=|phi+>, |B>=|psi->, |C>=|psi+>, |D>=|phi-> over (Alice, Bob) qubits
BELL_VECTORS = np.array(
    [
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, -1.0, 0.0],
        [0.0, 1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, -1.0],
    ],
    dtype=np.complex128,
) * _SQRT_HALF

_I = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_PAULIS = (_I, _X, _Y, _Z)
_TWO_QUBIT_PAULIS = [np.kron(a, b) for a, b in itertools.product(_PAULIS, repeat=2)]

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    dtype=np.complex128,
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
    dtype=np.complex128,
)
_OBSERVABLES = {Basis.COIN_Z: _Z, Basis.COIN_X: _X, Basis.ANTI_Y: _Y}


def bell_density(p: PairQuadruple) -> np.ndarray:
    """Bell 対角な 1 ペアの 4x4 密度行列。"""
    weights = p.as_array()
    return np.einsum("s,si,sj->ij", weights, BELL_VECTORS, BELL_VECTORS.conj())


class _Register:
    """(2,)*2Q 形のテンソルとして保持する Q 量子ビットの密度行列。"""

    def __init__(self, rho: np.ndarray, n_qubits: int) -> None:
        self.rho = rho.reshape((2,) * (2 * n_qubits))
        self.n = n_qubits

    @classmethod
    def from_pairs(cls, raw: PairQuadruple, width: int) -> "_Register":
        sigma = bell_density(raw)
        return cls(reduce(np.kron, [sigma] * width), 2 * width)

    def apply(self, matrix: np.ndarray, qubits: Sequence[int]) -> None:
        """rho -> M rho M^dagger (M は qubits 上の作用素)。"""
        m = len(qubits)
        op = matrix.reshape((2,) * (2 * m))
        inputs = list(range(m, 2 * m))
        rho = np.tensordot(op, self.rho, axes=(inputs, list(qubits)))
        rho = np.moveaxis(rho, list(range(m)), list(qubits))
        bras = [self.n + q for q in qubits]
        rho = np.tensordot(rho, op.conj(), axes=(bras, inputs))
        self.rho = np.moveaxis(rho, list(range(2 * self.n - m, 2 * self.n)), bras)

    def mixture(self, matrices: Sequence[np.ndarray], qubits: Sequence[int]) -> np.ndarray:
        total = np.zeros_like(self.rho)
        base = self.rho
        for matrix in matrices:
            self.rho = base
            self.apply(matrix, qubits)
            total = total + self.rho
        self.rho = base
        return total

    def depolarize(self, qubits: Sequence[int], p: float) -> None:
        # with probability 1-p the two qubits are fully depolarized (uniform Pauli twirl)
        twirled = self.mixture(_TWO_QUBIT_PAULIS, qubits) / 16.0
        self.rho = p * self.rho + (1.0 - p) * twirled

    def partial_trace(self, keep: Sequence[int]) -> np.ndarray:
        n = self.n
        labels = list(range(2 * n))
        for q in range(n):
            if q not in keep:
                labels[n + q] = q
        out = list(keep) + [n + q for q in keep]
        return np.einsum(self.rho, labels, out)

    def replace_pair(self, qubits: Sequence[int], sigma: np.ndarray) -> None:
        """qubits をトレースアウトし、代わりに 2 量子ビット状態 sigma を置きます。"""
        n = self.n
        rest = [q for q in range(n) if q not in qubits]
        reduced = self.partial_trace(rest)
        full = np.multiply.outer(reduced, sigma.reshape((2, 2, 2, 2)))
        current = [("k", q) for q in rest] + [("b", q) for q in rest]
        current += [("k", qubits[0]), ("k", qubits[1]), ("b", qubits[0]), ("b", qubits[1])]
        target = [("k", q) for q in range(n)] + [("b", q) for q in range(n)]
        self.rho = np.transpose(full, [current.index(t) for t in target])

    def pair_matrix(self, qubits: Sequence[int]) -> np.ndarray:
        return self.partial_trace(list(qubits)).reshape(4, 4)


def _projectors(basis: Basis) -> List[np.ndarray]:
    sigma = _OBSERVABLES[basis]
    return [(_I + sigma) / 2.0, (_I - sigma) / 2.0]


def _measure(reg: _Register, pair: int, basis: Basis, eta: float, refill: np.ndarray) -> None:
    agree = eta * eta + (1.0 - eta) * (1.0 - eta)
    flip = 2.0 * eta * (1.0 - eta)
    anti = basis is Basis.ANTI_Y
    projs = _projectors(basis)
    qubits = (2 * pair, 2 * pair + 1)
    base = reg.rho
    total = np.zeros_like(base)
    for a, b in itertools.product(range(2), repeat=2):
        reported_ok = (a != b) if anti else (a == b)
        weight = agree if reported_ok else flip
        if weight == 0.0:
            continue
        reg.rho = base
        reg.apply(np.kron(projs[a], projs[b]), qubits)
        total = total + weight * reg.rho
    reg.rho = total
    reg.replace_pair(qubits, refill)


def _local_pair_gate(reg: _Register, matrix: np.ndarray, i: int, j: int, p2: float) -> None:
    alice, bob = (2 * i, 2 * j), (2 * i + 1, 2 * j + 1)
    reg.apply(matrix, alice)
    reg.apply(matrix, bob)
    reg.depolarize(alice, p2)
    reg.depolarize(bob, p2)


def _relabel(reg: _Register, pair: int, perm: str) -> None:
    alice_gates, bob_gates = compile_bcd_perm(perm)
    reg.apply(gate_string_unitary(alice_gates), (2 * pair,))
    reg.apply(gate_string_unitary(bob_gates), (2 * pair + 1,))


def _simulate(c: Circuit, em: ErrorModel) -> _Register:
    if c.width > MAX_ORACLE_WIDTH:
        raise UnsupportedError(f"Oracle supports width <= {MAX_ORACLE_WIDTH}, got {c.width}")
    reg = _Register.from_pairs(em.raw, c.width)
    raw_sigma = bell_density(em.raw)
    vacant_sigma = np.eye(4, dtype=np.complex128) / 4.0
    for op in c.ops:
        if isinstance(op, Gate):
            for pair, perm in ((op.src, op.bcd_src), (op.dst, op.bcd_dst)):
                if perm != "BCD":
                    _relabel(reg, pair, perm)
            _local_pair_gate(reg, _CNOT, op.src, op.dst, em.p2)
        elif isinstance(op, Swap):
            _local_pair_gate(reg, _SWAP, op.a, op.b, em.p2)
        elif isinstance(op, Measure):
            if op.pair == 0:
                raise StructuralError("The output pair 0 is never measured")
            _measure(reg, op.pair, op.basis, em.eta, raw_sigma if op.reset else vacant_sigma)
        elif isinstance(op, FinalBcd):
            _relabel(reg, 0, op.perm)
    return reg


def oracle_evaluate(c: Circuit, em: ErrorModel) -> EvalReport:
    """
    密度行列シミュレーションで回路を評価します (``evaluate`` と独立な実装)。

    Raises:
        UnsupportedError: 幅が 3 を超える場合。
        StructuralError: ペア 0 の測定。
    """
    rho0 = _simulate(c, em).pair_matrix((0, 1))
    marginal = np.einsum("si,ij,sj->s", BELL_VECTORS.conj(), rho0, BELL_VECTORS).real
    return report_from_marginal(c, np.clip(marginal, 0.0, None))


def oracle_diagonal(c: Circuit, em: ErrorModel) -> BellDistribution:
    """
    全成功分岐の最終状態を n ペアの Bell 基底に射影した対角成分 (4**n 個)。

    ``run_branch`` の重みテンソルと要素ごとに比較するためのものです。
    """
    reg = _simulate(c, em)
    dim = 2 ** reg.n
    rho = reg.rho.reshape(dim, dim)
    # pair 0 is the most significant factor, matching the (4,)*n tensor layout
    basis = reduce(np.kron, [BELL_VECTORS] * c.width)
    diagonal = np.einsum("si,ij,sj->s", basis.conj(), rho, basis).real
    return BellDistribution(np.clip(diagonal, 0.0, None).reshape((4,) * c.width))
