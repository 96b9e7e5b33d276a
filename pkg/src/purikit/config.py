"""
設定ドキュメントと回路ドキュメントのスキーマ定義。

各スキーマの ``.default()`` と ``.description()`` は、dataclass の既定値、
CLI のヘルプ文、``optimize --config-template`` の出力の唯一の情報源です。
"""
from typing import Any, Dict

from .bellstate import BCD_NAMES, Basis
from .v import v
from .validator import Schema

MODES = ("standard", "hot_cold")
CIRCUIT_FORMAT_VERSION = 1


def _some_positive_weight(weights: Dict[str, Any]) -> Dict[str, Any]:
    if all(w == 0 for w in weights.values()):
        raise ValueError("At least one weight must be positive")
    return weights


ERROR_MODEL_SCHEMA: Schema[Dict[str, Any]] = Schema({
    "f0": v.prob().default(0.9).description("Werner 生ペアの忠実度 F0"),
    "p2": v.prob().default(0.99).description("2量子ビットゲートの成功確率 p2。ErrorModel.werner を直接呼ぶ場合の既定は 1.0"),
    "eta": v.prob().default(0.99).description("1量子ビット測定の成功確率 eta。ErrorModel.werner を直接呼ぶ場合の既定は 1.0"),
    "raw": v.list(v.prob()).length(4).optional().description("任意の生ペア (p_A, p_B, p_C, p_D)。指定時は f0 より優先"),
})

MUTATION_KINDS = ("insert", "delete", "replace", "tweak", "swap_adjacent")

GA_CONFIG_SCHEMA: Schema[Dict[str, Any]] = Schema({
    "width": v.int().range(2, 8).default(3).description("回路幅 (Bell ペア数)"),
    "max_length": v.int().range(2, 60).default(17).description("回路の最大操作数"),
    "initial_length": v.int().min(2).optional().description("初期個体の最大操作数 (既定は max_length の半分)"),
    "population_size": v.int().min(1).default(200).description("世代ごとの個体数"),
    "survivors": v.int().min(1).default(40).description("次世代に残す個体数"),
    "children_per_survivor": v.int().min(0).default(5).description("生存個体あたりの子の数"),
    "mutation_weights": v.dict(str, v.float().min(0.0)).custom(_some_positive_weight).default(
        {"insert": 1.0, "delete": 1.0, "replace": 1.0, "tweak": 1.0, "swap_adjacent": 1.0}
    ).description("突然変異の種類ごとの重み"),
    "generations": v.int().min(0).default(200).description("世代数"),
    "seed": v.int().min(0).default(0).description("乱数シード"),
    "mode": v.oneof(MODES).default("standard").description("レジスタモード"),
    "fitness_weights": v.list(v.float().min(0.0)).length(3).default([1.0, 1.0, 1.0]).description(
        "最終ペアの B, C, D 成分への重み"
    ),
    "success_floor": v.prob().optional().description("成功確率の下限 (下回る個体の適応度は -inf)"),
    "max_mutation_attempts": v.int().min(1).default(20).description("棄却された変異の再試行上限"),
    "crossover_rate": v.prob().default(0.0).description("一点交叉を行う確率"),
    "allow_final_bcd": v.bool().default(True).description("末尾の BCD 置換を遺伝子として許可"),
    "workers": v.int().min(1).default(1).description("適応度評価のプロセス数"),
})

MC_CONFIG_SCHEMA: Schema[Dict[str, Any]] = Schema({
    "trials": v.int().min(1).default(100000).description("試行回数"),
    "seed": v.int().min(0).default(0).description("乱数シード"),
    "max_restarts_per_trial": v.int().min(0).default(10000).description("1試行あたりの再起動上限"),
    "restart_policy": v.oneof(("subcircuit", "full")).default("subcircuit").description(
        "失敗時に部分回路のみを再実行するか、回路全体を再実行するか"
    ),
    "workers": v.int().min(1).default(1).description("試行を分担するプロセス数"),
})

_BASES = [b.value for b in Basis]

OP_SCHEMAS: Dict[str, Schema[Dict[str, Any]]] = {
    "gate": Schema({
        "op": v.oneof(["gate"]),
        "src": v.pair(),
        "dst": v.pair(),
        "bcd_src": v.oneof(BCD_NAMES).default("BCD"),
        "bcd_dst": v.oneof(BCD_NAMES).default("BCD"),
    }),
    "measure": Schema({
        "op": v.oneof(["measure"]),
        "pair": v.pair(),
        "basis": v.oneof(_BASES),
        "reset": v.bool().default(True),
    }),
    "swap": Schema({
        "op": v.oneof(["swap"]),
        "a": v.pair(),
        "b": v.pair(),
    }),
    "final_bcd": Schema({
        "op": v.oneof(["final_bcd"]),
        "perm": v.oneof(BCD_NAMES),
    }),
}

CIRCUIT_SCHEMA: Schema[Dict[str, Any]] = Schema({
    "version": v.oneof([CIRCUIT_FORMAT_VERSION]),
    "width": v.int().min(1),
    "mode": v.oneof(MODES).default("standard"),
    "ops": v.list(v.dict(str, v.any())),
    "metadata": v.dict(str, v.any()).default({}),
})
