import sys
import os
import io

# Handle UTF-8 output on Windows
if sys.platform == "win32":
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8')

# Add src to path to import purikit
sys.path.append(os.path.join(os.path.dirname(__file__), "src"))

from purikit import (
    Basis,
    Circuit,
    ErrorModel,
    GaConfig,
    Gate,
    McConfig,
    Measure,
    PurikitError,
    ValidationResult,
    builtin,
    canonicalize,
    evaluate,
    run_ga,
    simulate_runs,
    validate,
)
from purikit.config import GA_CONFIG_SCHEMA
from purikit.evaluator import first_order_ratio, werner_hashing_threshold
from purikit.symbolic import evaluate_symbolic


def header(text: str):
    print(f"\n{'='*20} {text} {'='*20}")

def log_success(msg: str):
    print(f"✅ SUCCESS: {msg}")

# ==========================================
# 1. 単一選択の厳密評価
# ==========================================
header("1. 単一選択の厳密評価")

em = ErrorModel.werner(0.9, p2=1.0, eta=1.0)
report = evaluate(builtin("single_selection"), em)
print(f"忠実度 {report.final.fidelity:.7f} / 成功確率 {report.success_prob:.7f}")
assert abs(report.final.fidelity - 365 / 394) < 1e-12
assert abs(report.success_prob - 197 / 225) < 1e-12
log_success("閉じた式と一致しました。")

sym = evaluate_symbolic(builtin("single_selection"))
print(f"1 次係数: {sym.first_order}")
log_success("多項式評価から 1 次の誤差係数を求めました。")

# ==========================================
# 2. ゲート誤差による下限
# ==========================================
header("2. ゲート誤差による下限")

for name in ("single_selection", "double_selection", "triple_selection"):
    print(f"  {name:<18} infidelity / eps = {first_order_ratio(builtin(name)):.4f}")
print(f"  ハッシング閾値 F = {werner_hashing_threshold():.4f}")
log_success("単一選択 6/8、二重選択 3/8 付近になります。")

# ==========================================
# 3. 正準化
# ==========================================
header("3. 正準化")

raw = Circuit(2, (Gate(1, 0), Measure(1, Basis.COIN_Z, reset=True)))
canon = canonicalize(raw)
print(f"  {raw.ops}\n  -> {canon.ops}")
assert canon.ops[-1].reset is False
log_success("後で使われないリセットが取り除かれました。")

try:
    canonicalize(Circuit(2, (Measure(1, Basis.COIN_Z), Gate(0, 1), Measure(1, Basis.COIN_Z, reset=False))))
except PurikitError as e:
    print(f"  ❌ 棄却: {e}")
log_success("先頭が測定の回路は棄却されます。")

# ==========================================
# 4. 設定の検証
# ==========================================
header("4. 設定の検証")

res: ValidationResult = validate({"width": 1, "mode": "warm"}, GA_CONFIG_SCHEMA, collect_errors=True)
for err in res.errors:
    print(f"  ❌ {err.path}: {err.message} (入力値: {err.value})")
assert res.error_count == 2
log_success("すべての不備を一度に捕捉しました。")

# ==========================================
# 5. 小さな GA とモンテカルロ
# ==========================================
header("5. 小さな GA とモンテカルロ")

noisy = ErrorModel.werner(0.9, p2=0.99, eta=0.99)
cfg = GaConfig.from_mapping({"width": 3, "max_length": 8, "population_size": 30, "survivors": 6, "generations": 5})
best = run_ga(cfg, noisy).best
print(f"  最良: infidelity {best.report.infidelity:.4%} success {best.report.success_prob:.2%}")

mc = simulate_runs(best.circuit, noisy, McConfig.from_mapping({"trials": 2000, "seed": 7}))
print(f"  N = {mc.raw_pairs_best_case}, N_avg = {mc.mean_pairs:.2f}")
log_success("探索した回路の平均生ペア消費数を見積もりました。")
