"""
Bell 対角表現による状態と誤差チャネル。

n 個の Bell ペアの状態は形状 ``(4,) * n`` の非負重みテンソルで表します。軸 k がペア k、
成分の並びは A, B, C, D (A=|φ+⟩, B=|ψ-⟩, C=|ψ+⟩, D=|φ-⟩) です。重みは正規化せず、
全体の和がそれまでの分岐の成功確率になります。

下位のカーネル (``_permute_pairs`` など) は dtype に依存しない書き方をしており、
``purikit.symbolic`` が sympy の多項式を要素に持つ object 配列で同じ畳み込みを行います。
"""
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import reduce
from typing import Any, Dict, FrozenSet, Sequence, Tuple

import numpy as np

from .errors import DomainError, StructuralError


Perm16 = Tuple[int, ...]

WEIGHT_TOL = 1e-12
# raw pairs typed in by hand (e.g. 0.9, 0.05, ...) rarely sum to 1 within 1e-12
INPUT_SUM_TOL = 1e-9


class BellLabel(IntEnum):
    A = 0
    B = 1
    C = 2
    D = 3


# Pauli-frame bits (x, z) of each label: A=I, B=Y, C=X, D=Z.
LABEL_BITS: Tuple[Tuple[int, int], ...] = ((0, 0), (1, 1), (1, 0), (0, 1))


class Basis(str, Enum):
    """同時 (反同時) 測定の基底。値は受理される Bell 成分の集合を決めます。"""

    COIN_Z = "coinZ"
    COIN_X = "coinX"
    ANTI_Y = "antiY"

    @property
    def accept(self) -> FrozenSet[int]:
        return _ACCEPT_SETS[self]


_ACCEPT_SETS: Dict[Basis, FrozenSet[int]] = {
    Basis.COIN_Z: frozenset({BellLabel.A, BellLabel.D}),
    Basis.COIN_X: frozenset({BellLabel.A, BellLabel.C}),
    Basis.ANTI_Y: frozenset({BellLabel.A, BellLabel.B}),
}

# BCD permutations are named by the image of (B, C, D).
BCD_NAMES: Tuple[str, ...] = ("BCD", "BDC", "DCB", "CDB", "DBC", "CBD")
IDENTITY_BCD = "BCD"


def bcd_image(name: str) -> Tuple[int, int, int, int]:
    """BCD 置換名 (例: ``"CDB"``) を A を固定した 4 要素の像に変換します。"""
    if name not in BCD_NAMES:
        raise DomainError(f"Unknown BCD permutation '{name}', expected one of {list(BCD_NAMES)}")
    return (BellLabel.A,) + tuple(BellLabel[ch].value for ch in name)  # type: ignore[return-value]


def bcd_name(image: Sequence[int]) -> str:
    if len(image) != 4 or image[0] != BellLabel.A or sorted(image) != [0, 1, 2, 3]:
        raise DomainError(f"{tuple(image)} is not a permutation of B, C, D fixing A")
    return "".join(BellLabel(i).name for i in image[1:])


def compose_bcd(first: str, then: str) -> str:
    """``first`` を適用した後に ``then`` を適用する合成置換の名前を返します。"""
    a, b = bcd_image(first), bcd_image(then)
    return bcd_name([b[a[s]] for s in range(4)])


def invert_bcd(name: str) -> str:
    image = bcd_image(name)
    inv = [0] * 4
    for s, t in enumerate(image):
        inv[t] = s
    return bcd_name(inv)


def bell_string(index: int, n_pairs: int) -> str:
    """基底番号を Bell 文字列 (ペア 0 が最上位桁) に変換します。"""
    if not 0 <= index < 4 ** n_pairs:
        raise DomainError(f"Index {index} out of range for {n_pairs} pairs")
    digits = []
    for _ in range(n_pairs):
        index, d = divmod(index, 4)
        digits.append(BellLabel(d).name)
    return "".join(reversed(digits))


def bell_index(labels: str) -> int:
    """Bell 文字列 (例: ``"AB"``) を基底番号に変換します。"""
    index = 0
    for ch in labels:
        index = index * 4 + BellLabel[ch].value
    return index


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or np.isnan(value):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class PairQuadruple:
    """1 ペアの Bell 成分確率 (p_A, p_B, p_C, p_D)。"""

    p_a: float
    p_b: float
    p_c: float
    p_d: float

    def __post_init__(self) -> None:
        for name, value in zip(("p_a", "p_b", "p_c", "p_d"), self.as_tuple()):
            if value < -WEIGHT_TOL or np.isnan(value):
                raise DomainError(f"{name} must be nonnegative, got {value}")

    @classmethod
    def from_sequence(cls, values: Sequence[float], normalized: bool = True) -> "PairQuadruple":
        if len(values) != 4:
            raise DomainError(f"A pair quadruple needs 4 entries, got {len(values)}")
        quad = cls(*(max(float(x), 0.0) for x in values))
        if normalized and abs(sum(quad.as_tuple()) - 1.0) > INPUT_SUM_TOL:
            raise DomainError(f"Pair probabilities must sum to 1, got {sum(quad.as_tuple())}")
        return quad

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.p_a, self.p_b, self.p_c, self.p_d)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @property
    def fidelity(self) -> float:
        return self.p_a

    @property
    def infidelity(self) -> float:
        return 1.0 - self.p_a


def werner_raw(f0: float) -> PairQuadruple:
    """Werner 形の生ペア (F0, q, q, q), q=(1-F0)/3 を返します。"""
    f0 = _check_prob("f0", f0)
    q = (1.0 - f0) / 3.0
    return PairQuadruple(f0, q, q, q)


@dataclass(frozen=True)
class ErrorModel:
    """
    操作誤差モデル。

    Attributes:
        raw: 生ペアの Bell 成分 (既定は Werner 形)。
        p2: 2量子ビットゲートが正しく働く確率 (Alice と Bob それぞれ)。
        eta: 1量子ビット測定が正しく報告される確率。
    """

    raw: PairQuadruple
    p2: float = 1.0
    eta: float = 1.0

    def __post_init__(self) -> None:
        _check_prob("p2", self.p2)
        _check_prob("eta", self.eta)
        if abs(sum(self.raw.as_tuple()) - 1.0) > INPUT_SUM_TOL:
            raise DomainError("raw pair probabilities must sum to 1")

    @classmethod
    def werner(cls, f0: float, p2: float = 1.0, eta: float = 1.0) -> "ErrorModel":
        """Werner 生ペアのモデル。p2, eta を省略すると完全な操作になります (CLI と設定ファイルの既定 0.99 とは異なります)。"""
        return cls(werner_raw(f0), float(p2), float(eta))

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "ErrorModel":
        """JSON 由来の dict を検証して ErrorModel を構築します。"""
        from .config import ERROR_MODEL_SCHEMA
        from .validator import validate

        doc = validate(data, ERROR_MODEL_SCHEMA)
        raw = PairQuadruple.from_sequence(doc["raw"]) if doc.get("raw") is not None else werner_raw(doc["f0"])
        return cls(raw, doc["p2"], doc["eta"])

    def to_mapping(self) -> Dict[str, Any]:
        return {"raw": list(self.raw.as_tuple()), "f0": self.raw.p_a, "p2": self.p2, "eta": self.eta}

    @property
    def epsilon(self) -> float:
        return 1.0 - self.p2


@dataclass(frozen=True, eq=False)
class BellDistribution:
    """n ペアの Bell 文字列上の非正規化重み。"""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim < 1 or w.shape != (4,) * w.ndim:
            raise StructuralError(f"Weights must have shape (4,)*n, got {w.shape}")
        if np.any(w < -WEIGHT_TOL):
            raise DomainError("Bell weights must be nonnegative")
        if w.sum() > 1.0 + WEIGHT_TOL:
            raise DomainError(f"Total weight {w.sum()} exceeds 1")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_pairs(self) -> int:
        return int(self.weights.ndim)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def weight(self, labels: str) -> float:
        """Bell 文字列 (例: ``"AB"``) の重みを返します。"""
        if len(labels) != self.n_pairs:
            raise StructuralError(f"Expected {self.n_pairs} labels, got '{labels}'")
        return float(self.weights[tuple(BellLabel[ch].value for ch in labels)])

    def flat(self) -> np.ndarray:
        return self.weights.reshape(-1)

    def marginal(self, pair: int = 0) -> np.ndarray:
        """ペア ``pair`` の非正規化周辺分布。"""
        _check_pair(pair, self.n_pairs)
        axes = tuple(ax for ax in range(self.n_pairs) if ax != pair)
        return np.asarray(self.weights.sum(axis=axes), dtype=np.float64)

    def output(self) -> PairQuadruple:
        """ペア 0 の正規化された Bell 成分。全重みが 0 の場合は DomainError。"""
        m = self.marginal(0)
        total = m.sum()
        if total <= 0.0:
            raise DomainError("Branch has zero weight; the output pair is undefined")
        return PairQuadruple(*(float(x) for x in m / total))


def _check_pair(pair: int, n_pairs: int) -> None:
    if not 0 <= pair < n_pairs:
        raise StructuralError(f"Pair index {pair} out of range for {n_pairs} pairs")


def init_distribution(n_pairs: int, raw: PairQuadruple) -> BellDistribution:
    """``n_pairs`` 個の独立な生ペアのテンソル積を返します。"""
    if n_pairs < 1:
        raise StructuralError(f"n_pairs must be at least 1, got {n_pairs}")
    return BellDistribution(_raw_tensor(n_pairs, raw.as_array()))


def _raw_tensor(n_pairs: int, raw: np.ndarray) -> np.ndarray:
    return reduce(np.multiply.outer, [raw] * n_pairs)


# --- permutations of the two-pair basis ---------------------------------------

_CNOT_TABLE = (
    "AA:AA AB:DB AC:AC AD:DD BA:BC BB:CD BC:BA BD:CB "
    "CA:CC CB:BD CC:CA CD:BB DA:DA DB:AB DC:DC DD:AD"
)


def _perm_from_table(table: str) -> Perm16:
    perm = [0] * 16
    for entry in table.split():
        src, dst = entry.split(":")
        perm[bell_index(src)] = bell_index(dst)
    return tuple(perm)


def mirrored_cnot_perm() -> Perm16:
    """
    双方が同じ CNOT を適用したときの 2 ペア基底の置換を返します。

    1 文字目が保存側 (制御) ペア、2 文字目が犠牲側 (標的) ペアです。
    """
    return _MIRRORED_CNOT


_MIRRORED_CNOT = _perm_from_table(_CNOT_TABLE)


def identity_perm() -> Perm16:
    return tuple(range(16))


def swap_perm() -> Perm16:
    return tuple(4 * (s % 4) + s // 4 for s in range(16))


def is_bijection(perm: Sequence[int]) -> bool:
    return len(perm) == 16 and sorted(perm) == list(range(16))


def compose_perms(first: Sequence[int], then: Sequence[int]) -> Perm16:
    return tuple(then[first[s]] for s in range(16))


def relabel_pair_perm(bcd_first: str, bcd_second: str) -> Perm16:
    a, b = bcd_image(bcd_first), bcd_image(bcd_second)
    return tuple(4 * a[s // 4] + b[s % 4] for s in range(16))


def permuted_cnot_perm(bcd_src: str = IDENTITY_BCD, bcd_dst: str = IDENTITY_BCD) -> Perm16:
    """BCD 置換を各ペアに施してからミラー CNOT を適用する合成置換。"""
    return compose_perms(relabel_pair_perm(bcd_src, bcd_dst), _MIRRORED_CNOT)


# --- dtype-agnostic kernels ------------------------------------------------------

def _permute_pairs(w: np.ndarray, perm: Sequence[int], i: int, j: int) -> np.ndarray:
    moved = np.moveaxis(w, (i, j), (0, 1))
    rest = moved.shape[2:]
    flat = moved.reshape((16,) + rest)
    out = np.empty_like(flat)
    out[np.asarray(perm, dtype=np.intp)] = flat
    return np.moveaxis(out.reshape((4, 4) + rest), (0, 1), (i, j))


def _depolarize(w: np.ndarray, i: int, j: int, keep: Any, spread: Any) -> np.ndarray:
    # keep * w + spread * marginal, with spread = (1 - keep) / 16
    marginal = w.sum(axis=(i, j), keepdims=True)
    return w * keep + marginal * spread


def _measure(w: np.ndarray, k: int, accept: Sequence[Any]) -> np.ndarray:
    out = np.take(w, 0, axis=k) * accept[0]
    for s in range(1, 4):
        out = out + np.take(w, s, axis=k) * accept[s]
    return out


def _insert(w: np.ndarray, k: int, pair: np.ndarray) -> np.ndarray:
    shape = [1] * (w.ndim + 1)
    shape[k] = 4
    return np.expand_dims(w, k) * pair.reshape(shape)


def _relabel(w: np.ndarray, k: int, image: Sequence[int]) -> np.ndarray:
    inverse = [0] * 4
    for s, t in enumerate(image):
        inverse[t] = s
    return np.take(w, inverse, axis=k)


def readout_weights(basis: Basis, eta: Any) -> Tuple[Any, Any, Any, Any]:
    """Bell 成分ごとの報告成功確率 r(s)。両者の読み出しがそれぞれ確率 1-eta で反転します。"""
    agree = eta * eta + (1 - eta) * (1 - eta)
    flip = 2 * eta * (1 - eta)
    return tuple(agree if s in basis.accept else flip for s in range(4))  # type: ignore[return-value]


# --- public channels ---------------------------------------------------------------

def apply_bilateral_gate(
    state: BellDistribution,
    perm: Sequence[int],
    pair_i: int,
    pair_j: int,
    p2: float,
) -> BellDistribution:
    """
    ペア i, j に双方向ゲート (2 ペア基底の置換) を適用します。

    Alice と Bob がそれぞれ確率 1-p2 で完全脱分極するため、正しく働く確率は p2**2、
    それ以外では関与した 2 ペアが Bell 基底上で一様になります。
    """
    n = state.n_pairs
    _check_pair(pair_i, n)
    _check_pair(pair_j, n)
    if pair_i == pair_j:
        raise StructuralError(f"Gate needs two distinct pairs, got {pair_i} twice")
    if not is_bijection(perm):
        raise StructuralError("Gate permutation is not a bijection on the 16 two-pair labels")
    p2 = _check_prob("p2", p2)
    keep = p2 * p2
    w = _permute_pairs(state.weights, perm, pair_i, pair_j)
    return BellDistribution(_depolarize(w, pair_i, pair_j, keep, (1.0 - keep) / 16.0))


def apply_measurement(
    state: BellDistribution,
    pair_k: int,
    basis: Basis,
    eta: float,
    raw: PairQuadruple,
    reset: bool = True,
    allow_output_pair: bool = False,
) -> Tuple[BellDistribution, float]:
    """
    ペア k に同時測定を行い、成功分岐の状態と成功重みを返します。

    ``reset`` が True の場合、ペア k には新しい生ペアが入ります。False の場合は
    ペアが消費された空きスロットとなり、一様分布 (1/4, 1/4, 1/4, 1/4) で埋めておきます。
    全重みは変わらないので分岐確率の記録には影響しません。
    """
    _check_pair(pair_k, state.n_pairs)
    if pair_k == 0 and not allow_output_pair:
        raise StructuralError("The output pair 0 is never measured")
    eta = _check_prob("eta", eta)
    before = state.total
    rest = _measure(state.weights, pair_k, readout_weights(Basis(basis), eta))
    after = float(rest.sum())
    fill = raw.as_array() if reset else np.full(4, 0.25)
    if state.n_pairs == 1:
        new = fill * after
    else:
        new = _insert(rest, pair_k, fill)
    success = after / before if before > 0.0 else 0.0
    return BellDistribution(new), success


def bcd_perm_single(state: BellDistribution, pair_k: int, perm: str) -> BellDistribution:
    """ペア k の Bell 成分を BCD 置換で付け替えます (誤差なし)。"""
    _check_pair(pair_k, state.n_pairs)
    return BellDistribution(_relabel(state.weights, pair_k, bcd_image(perm)))

