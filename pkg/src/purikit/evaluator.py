"""
Bell 対角表現による回路の厳密な数値評価と派生指標。

``evaluate`` は全測定が成功した分岐をたどり、最終ペアの成分・成功確率・生ペア数を返します::

    from purikit.bellstate import ErrorModel
    from purikit.circuit import builtin
    from purikit.evaluator import evaluate

    report = evaluate(builtin("fig1"), ErrorModel.werner(0.9))
    report.final.fidelity   # 0.92639...
    report.success_prob     # 0.87555...
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .bellstate import (
    BellDistribution,
    ErrorModel,
    PairQuadruple,
    apply_bilateral_gate,
    apply_measurement,
    bcd_perm_single,
    init_distribution,
    permuted_cnot_perm,
    swap_perm,
    werner_raw,
)
from .circuit import Circuit, FinalBcd, Gate, Measure, Swap, raw_pairs_best_case
from .errors import DomainError

logger = logging.getLogger(__name__)

Components = Tuple[float, float, float]


@dataclass(frozen=True)
class EvalReport:
    """
    全成功分岐の評価結果。

    Attributes:
        final: 正規化された最終ペア 0 の成分。成功重みが 0 のときは None。
        success_prob: 全測定が成功する確率 (単発実行)。
        op_count: 操作数。
        raw_pairs_best_case: 最良の場合に消費する生ペア数 N。
        infidelity_components: 非忠実度に占める B, C, D の割合 (1 - p_A = 0 のときは 0, 0, 0)。
    """

    final: Optional[PairQuadruple]
    success_prob: float
    op_count: int
    raw_pairs_best_case: int
    infidelity_components: Components

    @property
    def defined(self) -> bool:
        return self.final is not None

    @property
    def infidelity(self) -> float:
        return self.final.infidelity if self.final is not None else 1.0

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "final": list(self.final.as_tuple()) if self.final is not None else None,
            "defined": self.defined,
            "fidelity": self.final.fidelity if self.final is not None else None,
            "infidelity": self.infidelity,
            "success_prob": self.success_prob,
            "op_count": self.op_count,
            "raw_pairs_best_case": self.raw_pairs_best_case,
            "infidelity_components": list(self.infidelity_components),
        }


def relative_components(p: PairQuadruple) -> Components:
    """(p_B, p_C, p_D) / (1 - p_A)。非忠実度が 0 なら (0, 0, 0)。"""
    rest = p.p_b + p.p_c + p.p_d
    if rest <= 0.0:
        return (0.0, 0.0, 0.0)
    return (p.p_b / rest, p.p_c / rest, p.p_d / rest)


def apply_op(state: BellDistribution, op: Any, em: ErrorModel) -> BellDistribution:
    """1 つの操作を成功分岐に適用します。"""
    if isinstance(op, Gate):
        return apply_bilateral_gate(state, permuted_cnot_perm(op.bcd_src, op.bcd_dst), op.src, op.dst, em.p2)
    if isinstance(op, Swap):
        return apply_bilateral_gate(state, swap_perm(), op.a, op.b, em.p2)
    if isinstance(op, Measure):
        new_state, _ = apply_measurement(state, op.pair, op.basis, em.eta, em.raw, reset=op.reset)
        return new_state
    if isinstance(op, FinalBcd):
        return bcd_perm_single(state, 0, op.perm)
    raise TypeError(f"Unknown op {op!r}")


def run_branch(c: Circuit, em: ErrorModel) -> BellDistribution:
    """全成功分岐の非正規化状態 (全重み = 成功確率)。"""
    state = init_distribution(c.width, em.raw)
    for op in c.ops:
        state = apply_op(state, op, em)
    return state


def report_from_marginal(c: Circuit, marginal: Sequence[float]) -> EvalReport:
    m = np.asarray(marginal, dtype=np.float64)
    success = float(m.sum())
    final: Optional[PairQuadruple] = None
    components: Components = (0.0, 0.0, 0.0)
    if success > 0.0:
        final = PairQuadruple(*(float(x) for x in m / success))
        components = relative_components(final)
    return EvalReport(final, min(max(success, 0.0), 1.0), c.length, raw_pairs_best_case(c), components)


def evaluate(c: Circuit, em: ErrorModel) -> EvalReport:
    """
    回路を誤差モデルのもとで厳密に評価します。

    成功重みが 0 の場合は例外にせず、``final=None``, ``success_prob=0`` を返します。

    Raises:
        StructuralError: ペア 0 の測定など、評価できない回路。
    """
    return report_from_marginal(c, run_branch(c, em).marginal(0))


def entropy(p: PairQuadruple) -> float:
    """Bell 成分のシャノンエントロピー (ビット)。0 log 0 = 0。"""
    probs = p.as_array()
    probs = probs[probs > 0.0]
    return float(-(probs * np.log2(probs)).sum())


def hashing_yield(report: EvalReport) -> float:
    """
    ハッシング法に出力を渡した場合の収率 (P / N)(1 - H(final))。

    完全な局所操作を前提とした下限値です。出力が未定義なら 0。
    """
    if report.final is None:
        return 0.0
    return report.success_prob / report.raw_pairs_best_case * (1.0 - entropy(report.final))


def werner_hashing_threshold(tol: float = 1e-12) -> float:
    """ハッシング単体の収率 1 - H(Werner F) が 0 になる F (約 0.8107)。"""
    return float(brentq(lambda f: 1.0 - entropy(werner_raw(f)), 0.5, 1.0 - 1e-9, xtol=tol))


@dataclass(frozen=True)
class SweepRow:
    p2: float
    eta: float
    infidelity: float
    success_prob: float

    @property
    def epsilon(self) -> float:
        return 1.0 - self.p2

    def to_mapping(self) -> Dict[str, float]:
        return {
            "p2": self.p2,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "infidelity": self.infidelity,
            "success_prob": self.success_prob,
        }


def sweep(c: Circuit, em: ErrorModel, p2_values: Sequence[float], couple_eta: bool = True) -> List[SweepRow]:
    """
    ゲート忠実度 p2 を振って回路を評価します。

    ``couple_eta`` が True なら eta = p2 (単一の誤差率 eps)、False なら ``em.eta`` を固定します。
    """
    rows = []
    for p2 in p2_values:
        eta = p2 if couple_eta else em.eta
        report = evaluate(c, ErrorModel(em.raw, p2, eta))
        rows.append(SweepRow(p2, eta, report.infidelity, report.success_prob))
    logger.debug("sweep over %d gate fidelities done", len(rows))
    return rows


def first_order_ratio(c: Circuit, epsilon: float = 1e-4, f0: float = 1.0) -> float:
    """完全な入力と測定のもとで、ゲート誤差 eps に対する非忠実度の比 (infidelity / eps)。"""
    if not 0.0 < epsilon < 1.0 or math.isnan(epsilon):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    report = evaluate(c, ErrorModel.werner(f0, 1.0 - epsilon, 1.0))
    return report.infidelity / epsilon
