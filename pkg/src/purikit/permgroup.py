"""
2 ペア Bell 基底を置換する局所 Clifford 操作の列挙と分類。

2量子ビット Clifford 群の元は、Pauli 生成子 (X1, X2, Z1, Z2) の像を与える
GF(2) 上の 4x4 シンプレクティック行列と、各像の符号ビット 4 つで表します。
ベクトルの座標順は (x1, x2, z1, z2) で、量子ビット k は Bell ペア k の片側です。

双方向操作 U_A ⊗ U_B が Bell 基底の置換になるのは、安定化群
{X_A X_B, Z_A Z_B (各ペア)} を自身に写すとき、すなわち両者のシンプレクティック部分が
一致するときに限ります (``compatible_symplectic_pairs`` が共役による総当たりで確認します)。このとき Bob 側の Pauli フレーム e は S(e ⊕ q) に写ります。
"""
from dataclasses import dataclass
import logging
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from .bellstate import (
    BCD_NAMES,
    LABEL_BITS,
    Perm16,
    bcd_image,
    mirrored_cnot_perm,
    relabel_pair_perm,
    compose_perms,
)
from .errors import DomainError, StructuralError

logger = logging.getLogger(__name__)

Bits4 = Tuple[int, int, int, int]

OMEGA = np.array(
    [[0, 0, 1, 0],
     [0, 0, 0, 1],
     [1, 0, 0, 0],
     [0, 1, 0, 0]],
    dtype=np.uint8,
)

C2_ORDER = 11520
SP4_ORDER = 720
BILATERAL_ORDER = 184320


def _bits(value: int) -> Bits4:
    return ((value >> 3) & 1, (value >> 2) & 1, (value >> 1) & 1, value & 1)


def _frame_index(vec: Sequence[int]) -> int:
    """Bob 側 Pauli フレーム (x1, x2, z1, z2) を 2 ペアの Bell 基底番号に変換します。"""
    x1, x2, z1, z2 = (int(b) for b in vec)
    return 4 * LABEL_BITS.index((x1, z1)) + LABEL_BITS.index((x2, z2))


# all 16 frames, ordered by their Bell index
_FRAMES: Tuple[Bits4, ...] = tuple(
    sorted((_bits(val) for val in range(16)), key=_frame_index)
)


@dataclass(frozen=True, order=True)
class CliffordOp2:
    """
    2量子ビット Clifford 操作 (大域位相を除く)。

    Attributes:
        symplectic: 4x4 行列を行優先で並べた 16 ビット。列 k が生成子 k の像。
        phase: 生成子 (X1, X2, Z1, Z2) の像の符号ビット。
    """

    symplectic: Tuple[int, ...]
    phase: Bits4

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.symplectic, dtype=np.uint8).reshape(4, 4)

    def image(self, k: int) -> Tuple[Bits4, int]:
        """生成子 k の像 (Pauli ベクトル, 符号ビット)。"""
        m = self.symplectic
        col: Bits4 = (m[k], m[4 + k], m[8 + k], m[12 + k])
        return col, self.phase[k]

    def conjugate(self, pauli: "Pauli") -> "Pauli":
        """U P U† を計算します。"""
        x1, x2, z1, z2 = pauli.vec
        result = Pauli((0, 0, 0, 0), pauli.k)
        for k, bit in enumerate((x1, x2, z1, z2)):
            if bit:
                vec, sign = self.image(k)
                result = result * Pauli.hermitian(vec, sign)
        return result

    def then(self, other: "CliffordOp2") -> "CliffordOp2":
        """self を適用した後に other を適用する操作 (other ∘ self)。"""
        matrix = (other.matrix @ self.matrix) % 2
        phase = []
        for k in range(4):
            vec, sign = self.image(k)
            phase.append(other.conjugate(Pauli.hermitian(vec, sign)).sign)
        return CliffordOp2(tuple(int(b) for b in matrix.reshape(-1)), tuple(phase))  # type: ignore[arg-type]

    def inverse(self) -> "CliffordOp2":
        matrix = (OMEGA @ self.matrix.T @ OMEGA) % 2
        symplectic = tuple(int(b) for b in matrix.reshape(-1))
        for value in range(16):
            candidate = CliffordOp2(symplectic, _bits(value))
            if self.then(candidate) == IDENTITY:
                return candidate
        raise StructuralError("Clifford operation has no inverse; symplectic matrix is invalid")

    def conj_sign_flips(self) -> Bits4:
        """複素共役をとったときに反転する像の符号 (像に含まれる Y の個数の偶奇)。"""
        flips = []
        for k in range(4):
            (x1, x2, z1, z2), _ = self.image(k)
            flips.append((x1 * z1 + x2 * z2) % 2)
        return tuple(flips)  # type: ignore[return-value]


@dataclass(frozen=True)
class Pauli:
    """i**k X^x Z^z (x, z は 2 量子ビット分のビット)。"""

    vec: Bits4
    k: int

    @classmethod
    def hermitian(cls, vec: Bits4, sign: int) -> "Pauli":
        x1, x2, z1, z2 = vec
        return cls(vec, ((x1 * z1 + x2 * z2) + 2 * sign) % 4)

    def __mul__(self, other: "Pauli") -> "Pauli":
        x1, x2, z1, z2 = self.vec
        u1, u2, w1, w2 = other.vec
        # Z^z X^x = (-1)^{z.x} X^x Z^z
        k = (self.k + other.k + 2 * (z1 * u1 + z2 * u2)) % 4
        return Pauli((x1 ^ u1, x2 ^ u2, z1 ^ w1, z2 ^ w2), k)

    @property
    def sign(self) -> int:
        x1, x2, z1, z2 = self.vec
        return ((self.k - (x1 * z1 + x2 * z2)) % 4) // 2


IDENTITY = CliffordOp2(tuple(int(b) for b in np.eye(4, dtype=np.uint8).reshape(-1)), (0, 0, 0, 0))


def symplectic_matrices() -> np.ndarray:
    """Sp(4, 2) の全元 (720 個) を形状 (720, 4, 4) の配列で返します。"""
    codes = np.arange(1 << 16, dtype=np.uint32)
    mats = ((codes[:, None] >> np.arange(15, -1, -1, dtype=np.uint32)) & 1).astype(np.uint8).reshape(-1, 4, 4)
    forms = np.einsum("nji,jk,nkl->nil", mats.astype(np.int64), OMEGA.astype(np.int64), mats.astype(np.int64)) % 2
    keep = np.all(forms == OMEGA, axis=(1, 2))
    return mats[keep]


def enumerate_c2() -> Tuple[CliffordOp2, ...]:
    """2量子ビット Clifford 群 (大域位相を除く 11520 元) を決定的な順序で返します。"""
    ops = []
    for mat in symplectic_matrices():
        symplectic = tuple(int(b) for b in mat.reshape(-1))
        for value in range(16):
            ops.append(CliffordOp2(symplectic, _bits(value)))
    logger.debug("enumerated %d two-qubit Clifford operations", len(ops))
    return tuple(ops)


def _pack(bits: Sequence[int]) -> int:
    code = 0
    for b in bits:
        code = (code << 1) | int(b)
    return code


def _stabilizer_generators() -> np.ndarray:
    """各ペアの X_A X_B, Z_A Z_B を (Alice 4 ビット, Bob 4 ビット) の 8 ビットベクトルで並べた (4, 8) 配列。"""
    gens = np.zeros((4, 8), dtype=np.uint8)
    for pair in range(2):
        for row, offset in ((pair, 0), (pair + 2, 2)):
            gens[row, offset + pair] = 1
            gens[row, 4 + offset + pair] = 1
    return gens


def _stabilizer_group_mask() -> np.ndarray:
    """符号を除いた安定化群 (16 元) に属する 8 ビット Pauli コードで True になる長さ 256 の表。"""
    elements = {0}
    for g in _stabilizer_generators():
        code = _pack(g)
        elements |= {e ^ code for e in elements}
    mask = np.zeros(256, dtype=bool)
    mask[sorted(elements)] = True
    return mask


_STABILIZER_GENERATORS = _stabilizer_generators()
_STABILIZER_MASK = _stabilizer_group_mask()


def compatible(alice: CliffordOp2, bob: CliffordOp2) -> bool:
    """
    U_A ⊗ U_B が各ペアの安定化生成子 X_A X_B, Z_A Z_B の生成する群を (符号を除いて) 保つかどうか。

    生成子ごとに両側で共役をとり、像が再び群に入るかを調べます。
    """
    for g in _STABILIZER_GENERATORS:
        a = alice.conjugate(Pauli.hermitian(tuple(int(b) for b in g[:4]), 0))  # type: ignore[arg-type]
        b = bob.conjugate(Pauli.hermitian(tuple(int(x) for x in g[4:]), 0))  # type: ignore[arg-type]
        if not _STABILIZER_MASK[(_pack(a.vec) << 4) | _pack(b.vec)]:
            return False
    return True


def bilateral_mapping(alice: CliffordOp2, bob: CliffordOp2) -> Perm16:
    """双方向操作が誘導する 2 ペア Bell 基底の置換。互換でない組には StructuralError。"""
    if not compatible(alice, bob):
        raise StructuralError("Bilateral operation does not permute the Bell basis")
    delta = tuple(a ^ b for a, b in zip(alice.phase, bob.phase))
    return _mapping(alice.symplectic, delta, alice.conj_sign_flips())


def _mapping(symplectic: Tuple[int, ...], delta: Sequence[int], flips: Sequence[int]) -> Perm16:
    mat = np.array(symplectic, dtype=np.uint8).reshape(4, 4)
    d = np.array([x ^ y for x, y in zip(delta, flips)], dtype=np.uint8)
    shift = (OMEGA @ d) % 2
    perm = [0] * 16
    for frame in _FRAMES:
        moved = (mat @ ((np.array(frame, dtype=np.uint8) + shift) % 2)) % 2
        perm[_frame_index(frame)] = _frame_index(moved)
    return tuple(perm)


@dataclass(frozen=True)
class BellPermutation:
    """Bell 基底の置換と、それを実現する (Alice, Bob) Clifford 操作の組。"""

    mapping: Perm16
    realizers: Tuple[Tuple[CliffordOp2, CliffordOp2], ...] = ()

    def __post_init__(self) -> None:
        if sorted(self.mapping) != list(range(16)):
            raise StructuralError("Bell permutation mapping must be a bijection on 16 labels")

    def then(self, other: "BellPermutation") -> "BellPermutation":
        return BellPermutation(compose_perms(self.mapping, other.mapping))

    def table(self) -> Dict[str, str]:
        from .bellstate import bell_string

        return {bell_string(s, 2): bell_string(t, 2) for s, t in enumerate(self.mapping)}


@dataclass(frozen=True)
class Enumeration:
    """列挙の結果。``bilateral_count`` は大域位相の商をとる前の双方向操作数。"""

    bilateral_count: int
    permutations: Tuple[BellPermutation, ...]

    def __len__(self) -> int:
        return len(self.permutations)

    def mappings(self) -> FrozenSet[Perm16]:
        return frozenset(p.mapping for p in self.permutations)


def enumerate_bell_permutations(c2: Sequence[CliffordOp2] = ()) -> Enumeration:
    """
    C2 x C2 の双方向操作のうち Bell 基底の置換として働くものを数え、置換ごとにまとめます。

    Alice 側の操作ごとに、互換な Bob 側の操作 (同じシンプレクティック部分を持つ 16 個) を
    直接求める枝刈り走査です。置換は写像の辞書順に並びます。
    """
    ops = tuple(c2) or enumerate_c2()
    by_symplectic: Dict[Tuple[int, ...], List[CliffordOp2]] = {}
    for op in ops:
        by_symplectic.setdefault(op.symplectic, []).append(op)

    cache: Dict[Tuple[Tuple[int, ...], Bits4], Perm16] = {}
    # signs never affect membership, so one conjugation check per symplectic part suffices
    checked: Dict[Tuple[int, ...], bool] = {}
    realizers: Dict[Perm16, List[Tuple[CliffordOp2, CliffordOp2]]] = {}
    count = 0
    for alice in ops:
        flips = alice.conj_sign_flips()
        for bob in by_symplectic[alice.symplectic]:
            ok = checked.get(alice.symplectic)
            if ok is None:
                ok = checked[alice.symplectic] = compatible(alice, bob)
            if not ok:
                continue
            delta: Bits4 = tuple(a ^ b for a, b in zip(alice.phase, bob.phase))  # type: ignore[assignment]
            key = (alice.symplectic, delta)
            mapping = cache.get(key)
            if mapping is None:
                mapping = cache[key] = _mapping(alice.symplectic, delta, flips)
            realizers.setdefault(mapping, []).append((alice, bob))
            count += 1

    perms = tuple(
        BellPermutation(mapping, tuple(realizers[mapping]))
        for mapping in sorted(realizers)
    )
    logger.debug("bilateral operations=%d distinct permutations=%d", count, len(perms))
    return Enumeration(count, perms)


def compatible_symplectic_pairs() -> np.ndarray:
    """
    全 720 x 720 のシンプレクティック組を共役で総当たり検査し、互換な (Alice, Bob) 添字の組を返します。

    各生成子の像 (S_A g_A, S_B g_B) が安定化群に入る組だけを残す照合用の走査です。
    """
    mats = symplectic_matrices().astype(np.int64)
    gens = _STABILIZER_GENERATORS.astype(np.int64)
    weights = 1 << np.arange(3, -1, -1)
    # (n, k): 4-bit code of the image of generator k on one side
    alice = (np.einsum("nij,kj->nki", mats, gens[:, :4]) % 2) @ weights
    bob = (np.einsum("nij,kj->nki", mats, gens[:, 4:]) % 2) @ weights
    codes = (alice[:, None, :] << 4) | bob[None, :, :]
    ok = np.all(_STABILIZER_MASK[codes], axis=2)
    return np.argwhere(ok)


def count_compatible_symplectic_pairs() -> int:
    return len(compatible_symplectic_pairs())


@dataclass(frozen=True)
class PermClassification:
    is_a_preserving: bool
    is_fidelity_trivial: bool
    generated_by_cnot_bcd: bool
    requires_swap: bool

    @property
    def is_useful(self) -> bool:
        return self.is_a_preserving and not self.is_fidelity_trivial


def _factorizes(mapping: Perm16) -> bool:
    """写像がペアごとの置換 (必要なら SWAP 付き) の積かどうか。"""
    for swapped in (False, True):
        ok = True
        first: Dict[int, int] = {}
        second: Dict[int, int] = {}
        for s, t in enumerate(mapping):
            a, b = divmod(s, 4)
            if swapped:
                a, b = b, a
            ta, tb = divmod(t, 4)
            if first.setdefault(a, ta) != ta or second.setdefault(b, tb) != tb:
                ok = False
                break
        if ok:
            return True
    return False


def cnot_bcd_generated() -> FrozenSet[Perm16]:
    """ミラー CNOT の前後に各ペアの BCD 置換を施して得られる置換の集合。"""
    cnot = mirrored_cnot_perm()
    relabels = [relabel_pair_perm(a, b) for a in BCD_NAMES for b in BCD_NAMES]
    generated = set()
    for before in relabels:
        head = compose_perms(before, cnot)
        for after in relabels:
            generated.add(compose_perms(head, after))
    return frozenset(generated)


def classify(perms: Iterable[BellPermutation]) -> Dict[Perm16, PermClassification]:
    """全 11520 個の置換を分類します。"""
    perms = tuple(perms)
    if len(perms) != C2_ORDER:
        raise StructuralError(f"classify expects the full set of {C2_ORDER} permutations, got {len(perms)}")
    generated = cnot_bcd_generated()
    result: Dict[Perm16, PermClassification] = {}
    for perm in perms:
        mapping = perm.mapping
        a_preserving = mapping[0] == 0
        trivial = a_preserving and _factorizes(mapping)
        useful = a_preserving and not trivial
        by_cnot = useful and mapping in generated
        result[mapping] = PermClassification(
            is_a_preserving=a_preserving,
            is_fidelity_trivial=trivial,
            generated_by_cnot_bcd=by_cnot,
            requires_swap=useful and not by_cnot,
        )
    return result


def enumeration_counts() -> Dict[str, int]:
    """列挙に関する 6 つの数をまとめて返します。"""
    c2 = enumerate_c2()
    enum = enumerate_bell_permutations(c2)
    flags = classify(enum.permutations).values()
    return {
        "c2": len(c2),
        "bilateral": enum.bilateral_count,
        "permutations": len(enum),
        "a_preserving": sum(f.is_a_preserving for f in flags),
        "fidelity_trivial": sum(f.is_fidelity_trivial for f in flags),
        "useful": sum(f.is_useful for f in flags),
        "useful_requires_swap": sum(f.requires_swap for f in flags),
    }


# --- BCD permutation compilation -------------------------------------------------

# (Alice, Bob) H/P strings; a string is an operator product, the rightmost gate acts first.
_BCD_GATES: Dict[str, Tuple[str, str]] = {
    "BCD": ("", ""),
    "BDC": ("H", "H"),
    "DCB": ("HPH", "PHP"),
    "CDB": ("PH", "(HP)^2"),
    "DBC": ("(PH)^2", "(HP)^4"),
    "CBD": ("H(PH)^2", "H(HP)^4"),
}

_SINGLE_GATES = {
    "H": np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
    "P": np.array([[1, 0], [0, 1j]], dtype=np.complex128),
}


def compile_bcd_perm(perm: str) -> Tuple[str, str]:
    """BCD 置換を実現する Alice 側・Bob 側の H/P ゲート列を返します。"""
    bcd_image(perm)
    return _BCD_GATES[perm]


def expand_gate_string(gates: str) -> str:
    """``"H(PH)^2"`` のような表記を ``"HPHPH"`` に展開します。"""
    out = []
    i = 0
    while i < len(gates):
        ch = gates[i]
        if ch in "HP":
            out.append(ch)
            i += 1
        elif ch == "(":
            close = gates.index(")", i)
            body = expand_gate_string(gates[i + 1:close])
            power = 1
            rest = close + 1
            if rest < len(gates) and gates[rest] == "^":
                end = rest + 1
                while end < len(gates) and gates[end].isdigit():
                    end += 1
                power = int(gates[rest + 1:end])
                rest = end
            out.append(body * power)
            i = rest
        else:
            raise DomainError(f"Unexpected character '{ch}' in gate string '{gates}'")
    return "".join(out)


def gate_string_unitary(gates: str) -> np.ndarray:
    """ゲート列の 2x2 ユニタリ (書かれた順の行列積)。"""
    u = np.eye(2, dtype=np.complex128)
    for ch in expand_gate_string(gates):
        u = u @ _SINGLE_GATES[ch]
    return u


def useful_permutations() -> List[Tuple[BellPermutation, PermClassification]]:
    """忠実度を変える 648 個の置換とその分類を、写像の辞書順で返します。"""
    enum = enumerate_bell_permutations()
    flags = classify(enum.permutations)
    return [(p, flags[p.mapping]) for p in enum.permutations if flags[p.mapping].is_useful]
