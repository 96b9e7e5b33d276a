"""
有理数係数の多項式による記号評価。

数値評価と同じ畳み込みを、変数 F0 (Werner 生ペア), p2, eta の多項式 (``sympy.Poly``、
係数体 QQ) の object 配列に対して行います。正規化は最後まで行わないので、結果は
非正規化の多項式写像です。
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
import sympy
from sympy import QQ, Poly, Rational

from .bellstate import (
    PairQuadruple,
    _depolarize,
    _insert,
    _measure,
    _permute_pairs,
    _raw_tensor,
    _relabel,
    bcd_image,
    permuted_cnot_perm,
    readout_weights,
    swap_perm,
)
from .circuit import Circuit, FinalBcd, Gate, Measure, Swap
from .errors import ResourceLimitError, StructuralError

logger = logging.getLogger(__name__)

F0, P2, ETA = sympy.symbols("F0 p2 eta")
GENS = (F0, P2, ETA)
VARIABLE_NAMES = ("f0", "p2", "eta")

MAX_WIDTH = 4
MAX_LENGTH = 20
MAX_TERMS = 200_000


def poly(expr: Any) -> Poly:
    return Poly(expr, *GENS, domain=QQ)


@dataclass(frozen=True)
class SymbolicReport:
    """
    Attributes:
        unnormalized: ペア 0 の (A, B, C, D) 成分の非正規化多項式。
        success_poly: 成功確率の多項式 (4 成分の和)。
        first_order: 非忠実度の 1 次係数。キーは ``"f0"``, ``"p2"``, ``"eta"`` で、
            それぞれ (1-F0), (1-p2), (1-eta) に対する係数 (点 (1, 1, 1) の周り)。
    """

    unnormalized: Tuple[Poly, Poly, Poly, Poly]
    success_poly: Poly
    first_order: Dict[str, Rational]

    def substitute(self, f0: float, p2: float, eta: float) -> Tuple[PairQuadruple, float]:
        """数値を代入して (正規化された最終ペア, 成功確率) を返します。"""
        point = dict(zip(GENS, (Rational(f0), Rational(p2), Rational(eta))))
        values = [_eval(p, point) for p in self.unnormalized]
        total = sum(values)
        if total <= 0:
            return PairQuadruple(0.0, 0.0, 0.0, 0.0), 0.0
        return PairQuadruple(*(float(x / total) for x in values)), float(total)

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "variables": list(VARIABLE_NAMES),
            "unnormalized": {label: poly_terms(p) for label, p in zip("ABCD", self.unnormalized)},
            "success": poly_terms(self.success_poly),
            "first_order": {k: str(v) for k, v in self.first_order.items()},
        }


def _eval(p: Poly, point: Dict[Any, Any]) -> Any:
    return p.eval(point)


def poly_terms(p: Poly) -> List[List[Any]]:
    """指数ベクトルと有理数係数文字列の組のリスト (次数の辞書順)。"""
    return [[list(monom), str(coeff)] for monom, coeff in sorted(p.terms())]


def _term_count(w: np.ndarray) -> int:
    return sum(len(p.terms()) for p in w.reshape(-1))


def evaluate_symbolic(c: Circuit) -> SymbolicReport:
    """
    回路を多項式で評価します (Werner 生ペア)。

    Raises:
        ResourceLimitError: 幅が 4 を超える、長さが 20 を超える、または項数が上限を超えた場合。
        StructuralError: ペア 0 の測定。
    """
    if c.width > MAX_WIDTH or c.length > MAX_LENGTH:
        raise ResourceLimitError(
            f"Symbolic evaluation is limited to width <= {MAX_WIDTH} and length <= {MAX_LENGTH}, "
            f"got width {c.width}, length {c.length}"
        )
    q = poly((1 - F0) / 3)
    raw = np.array([poly(F0), q, q, q], dtype=object)
    vacant = np.array([poly(Rational(1, 4))] * 4, dtype=object)
    keep = poly(P2 ** 2)
    spread = poly((1 - P2 ** 2) / 16)
    eta = poly(ETA)

    w = _raw_tensor(c.width, raw)
    for idx, op in enumerate(c.ops):
        if isinstance(op, Gate):
            w = _permute_pairs(w, permuted_cnot_perm(op.bcd_src, op.bcd_dst), op.src, op.dst)
            w = _depolarize(w, op.src, op.dst, keep, spread)
        elif isinstance(op, Swap):
            w = _permute_pairs(w, swap_perm(), op.a, op.b)
            w = _depolarize(w, op.a, op.b, keep, spread)
        elif isinstance(op, Measure):
            if op.pair == 0:
                raise StructuralError("The output pair 0 is never measured")
            rest = _measure(w, op.pair, readout_weights(op.basis, eta))
            w = _insert(rest, op.pair, raw if op.reset else vacant)
        elif isinstance(op, FinalBcd):
            w = _relabel(w, 0, bcd_image(op.perm))
        terms = _term_count(w)
        if terms > MAX_TERMS:
            raise ResourceLimitError(f"ops[{idx}]: {terms} polynomial terms exceed the limit {MAX_TERMS}")

    others = tuple(range(1, c.width))
    marginal = w.sum(axis=others) if others else w
    unnormalized = tuple(marginal[s] for s in range(4))
    success = unnormalized[0] + unnormalized[1] + unnormalized[2] + unnormalized[3]
    logger.debug("symbolic evaluation: %d terms in the success polynomial", len(success.terms()))
    return SymbolicReport(unnormalized, success, first_order(unnormalized[0], success))  # type: ignore[arg-type]


def first_order(fidelity: Poly, success: Poly) -> Dict[str, Rational]:
    """
    非忠実度 (S - A) / S の点 (F0, p2, eta) = (1, 1, 1) の周りの 1 次係数。

    変数 x = 1 - v に対する係数なので、偏微分の符号を反転したものです。
    """
    point = {g: 1 for g in GENS}
    numerator = success - fidelity
    s0 = Rational(success.eval(point))
    if s0 == 0:
        raise StructuralError("Success probability vanishes at perfect parameters")
    n0 = Rational(numerator.eval(point))
    out: Dict[str, Rational] = {}
    for name, gen in zip(VARIABLE_NAMES, GENS):
        dn = -Rational(numerator.diff(gen).eval(point))
        ds = -Rational(success.diff(gen).eval(point))
        out[name] = (dn * s0 - n0 * ds) / (s0 * s0)
    return out
