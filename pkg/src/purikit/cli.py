"""
purikit のコマンドラインインターフェース。

サブコマンド::

    purikit enumerate --counts-only
    purikit evaluate --builtin single_selection --f0 0.9
    purikit optimize --width 3 --max-length 17 --out-dir runs/l17
    purikit montecarlo --builtin fig1 --trials 100000 --out-dir runs/mc
    purikit canonicalize my_circuit.json
    purikit compare a.json b.json --builtin double_selection
    purikit sweep --builtin double_selection --p2-values 0.99 0.995 0.999

出力はすべてキー順固定の JSON と CSV で、同じ入力とシードに対してバイト単位で安定です。
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from .bellstate import ErrorModel
from .circuit import BUILTIN_NAMES, Circuit, builtin, canonicalize, describe, load_circuit, write_circuit
from .config import ERROR_MODEL_SCHEMA, GA_CONFIG_SCHEMA, MC_CONFIG_SCHEMA, MODES
from .errors import AllTrialsAborted, PurikitError
from .evaluator import evaluate, hashing_yield, sweep
from .montecarlo import McConfig, McReport, simulate_runs
from .optimizer import GaConfig, GaRun, run_ga
from .oracle import oracle_evaluate
from .permgroup import enumeration_counts, useful_permutations
from .symbolic import evaluate_symbolic

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

COMPARE_COLUMNS = ("id", "width", "length", "infidelity", "success_prob", "N", "N_avg", "b_rel", "c_rel", "d_rel")


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if x is None else x for x in row])
    return buf.getvalue()


def _finite(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def _log_config(command: str, doc: Dict[str, Any]) -> None:
    logger.info("%s config: %s", command, json.dumps(doc, sort_keys=True))


# --- shared arguments -------------------------------------------------------------

def _help(schema: Any, key: str) -> str:
    return schema.fields[key].help_text


def _add_error_model(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("error model")
    group.add_argument("--f0", type=float, help=_help(ERROR_MODEL_SCHEMA, "f0"))
    group.add_argument("--p2", type=float, help=_help(ERROR_MODEL_SCHEMA, "p2"))
    group.add_argument("--eta", type=float, help=_help(ERROR_MODEL_SCHEMA, "eta"))
    group.add_argument(
        "--raw", type=float, nargs=4, metavar=("PA", "PB", "PC", "PD"), help=_help(ERROR_MODEL_SCHEMA, "raw")
    )


def _add_circuit_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("circuit", nargs="?", help="回路 JSON ファイル")
    parser.add_argument("--builtin", choices=BUILTIN_NAMES, help="組み込み回路の名前")


def _error_model(args: argparse.Namespace) -> ErrorModel:
    doc = {key: getattr(args, key) for key in ("f0", "p2", "eta", "raw") if getattr(args, key) is not None}
    return ErrorModel.from_mapping(doc)


def _circuit(args: argparse.Namespace) -> Circuit:
    if args.builtin is not None and args.circuit is not None:
        raise PurikitError("Give either a circuit file or --builtin, not both")
    if args.builtin is not None:
        return builtin(args.builtin)
    if args.circuit is None:
        raise PurikitError("A circuit file or --builtin is required")
    return load_circuit(args.circuit)


def _overrides(args: argparse.Namespace, keys: Sequence[str]) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}


def _read_json(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise PurikitError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise PurikitError(f"{path}: expected a JSON object")
    return doc


# --- enumerate --------------------------------------------------------------------

def _permutation_doc(perm: Any, flags: Any) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "mapping": perm.table(),
        "a_preserving": flags.is_a_preserving,
        "fidelity_trivial": flags.is_fidelity_trivial,
        "generated_by_cnot_bcd": flags.generated_by_cnot_bcd,
        "requires_swap": flags.requires_swap,
        "realizers": len(perm.realizers),
    }
    if perm.realizers:
        alice, bob = perm.realizers[0]
        doc["realizer"] = {
            "alice": {"symplectic": list(alice.symplectic), "phase": list(alice.phase)},
            "bob": {"symplectic": list(bob.symplectic), "phase": list(bob.phase)},
        }
    return doc


def cmd_enumerate(args: argparse.Namespace) -> int:
    _log_config("enumerate", {"counts_only": args.counts_only, "output": args.output})
    counts = enumeration_counts()
    sys.stdout.write(_dumps(counts))
    if args.output is not None and not args.counts_only:
        perms = [_permutation_doc(p, f) for p, f in useful_permutations()]
        _emit(_dumps({"counts": counts, "permutations": perms}), args.output)
        logger.info("wrote %d useful permutations to %s", len(perms), args.output)
    return 0


# --- evaluate ---------------------------------------------------------------------

def cmd_evaluate(args: argparse.Namespace) -> int:
    c = _circuit(args)
    em = _error_model(args)
    _log_config("evaluate", {"error_model": em.to_mapping(), "circuit": c.key(), "symbolic": args.symbolic, "oracle": args.oracle})
    report = evaluate(c, em)
    doc: Dict[str, Any] = {"error_model": em.to_mapping(), "report": report.to_mapping()}
    # the yield bound assumes perfect local operations
    doc["hashing_yield"] = hashing_yield(report) if em.p2 == 1.0 and em.eta == 1.0 else None
    if args.oracle:
        doc["oracle"] = oracle_evaluate(c, em).to_mapping()
    if args.symbolic:
        doc["symbolic"] = evaluate_symbolic(c).to_mapping()
    _emit(_dumps(doc), args.output)
    return 0


# --- optimize ---------------------------------------------------------------------

_GA_FLAGS = (
    "width",
    "max_length",
    "population_size",
    "survivors",
    "children_per_survivor",
    "generations",
    "seed",
    "mode",
    "workers",
    "success_floor",
    "crossover_rate",
)


def _annotated(s: Any, source: str, extra: Optional[Dict[str, Any]] = None) -> Circuit:
    metadata = dict(s.circuit.metadata)
    metadata.update(
        {
            "source": source,
            "fitness": _finite(s.fitness),
            "infidelity": s.report.infidelity,
            "success_prob": s.report.success_prob,
            "raw_pairs_best_case": s.report.raw_pairs_best_case,
        }
    )
    metadata.update(extra or {})
    return Circuit(s.circuit.width, s.circuit.ops, s.circuit.mode, metadata)


def _write_ga_outputs(run: GaRun, em: ErrorModel, out_dir: str) -> None:
    os.makedirs(os.path.join(out_dir, "population"), exist_ok=True)
    extra = {"seed": run.config.seed, "error_model": em.to_mapping()}
    _emit(write_circuit(_annotated(run.best, "optimize", extra)), os.path.join(out_dir, "best.json"))
    rows = [(r.generation, _finite(r.best.fitness), r.best.report.success_prob) for r in run.trace]
    _emit(_csv_text(("generation", "best_fitness", "best_success"), rows), os.path.join(out_dir, "trace.csv"))
    for rank, s in enumerate(run.population):
        path = os.path.join(out_dir, "population", f"{rank:03d}.json")
        _emit(write_circuit(_annotated(s, "optimize", {"rank": rank})), path)


def cmd_optimize(args: argparse.Namespace) -> int:
    if args.config_template:
        sys.stdout.write(_dumps(GA_CONFIG_SCHEMA.generate_sample()))
        return 0
    if args.out_dir is None:
        raise PurikitError("--out-dir is required")
    doc = _read_json(args.config)
    doc.update(_overrides(args, _GA_FLAGS))
    cfg = GaConfig.from_mapping(doc)
    em = _error_model(args)
    _log_config("optimize", {"ga": cfg.to_mapping(), "error_model": em.to_mapping(), "out_dir": args.out_dir})
    run = run_ga(cfg, em)
    _write_ga_outputs(run, em, args.out_dir)
    sys.stdout.write(_dumps({"best": run.best.report.to_mapping(), "fitness": _finite(run.best.fitness)}))
    return 0


# --- montecarlo -------------------------------------------------------------------

_MC_FLAGS = ("trials", "seed", "max_restarts_per_trial", "restart_policy", "workers")


def _mc_report_doc(report: McReport, cfg: McConfig, em: ErrorModel) -> Dict[str, Any]:
    doc = report.to_mapping()
    doc["config"] = cfg.to_mapping()
    doc["error_model"] = em.to_mapping()
    return doc


def cmd_montecarlo(args: argparse.Namespace) -> int:
    c = _circuit(args)
    em = _error_model(args)
    doc = _read_json(args.config)
    doc.update(_overrides(args, _MC_FLAGS))
    cfg = McConfig.from_mapping(doc)
    _log_config("montecarlo", {"mc": cfg.to_mapping(), "error_model": em.to_mapping(), "circuit": c.key()})
    report = simulate_runs(c, em, cfg)
    result = _mc_report_doc(report, cfg, em)
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        _emit(_dumps(result), os.path.join(args.out_dir, "report.json"))
        _emit(_csv_text(("pairs", "trials"), report.pairs_histogram), os.path.join(args.out_dir, "pairs_histogram.csv"))
        _emit(_csv_text(("ops", "trials"), report.ops_histogram), os.path.join(args.out_dir, "ops_histogram.csv"))
        _emit(_csv_text(("pairs", "cumulative"), report.cumulative()), os.path.join(args.out_dir, "cumulative.csv"))
    sys.stdout.write(_dumps(result))
    return 0


# --- canonicalize -----------------------------------------------------------------

def cmd_canonicalize(args: argparse.Namespace) -> int:
    c = _circuit(args)
    _log_config("canonicalize", {"circuit": c.key()})
    canon = canonicalize(c)
    _emit(describe(canon) + "\n" if args.describe else write_circuit(canon), args.output)
    return 0


# --- compare ----------------------------------------------------------------------

def _compare_row(name: str, c: Circuit, em: ErrorModel, mc: Optional[McConfig]) -> List[Any]:
    report = evaluate(c, em)
    n_avg: Optional[float] = None
    if mc is not None:
        try:
            n_avg = simulate_runs(c, em, mc).mean_pairs
        except AllTrialsAborted as e:
            logger.warning("%s: %s", name, e)
    b, cc, d = report.infidelity_components
    return [name, c.width, c.length, report.infidelity, report.success_prob, report.raw_pairs_best_case, n_avg, b, cc, d]


def cmd_compare(args: argparse.Namespace) -> int:
    em = _error_model(args)
    mc = McConfig.from_mapping(_overrides(args, ("trials", "seed"))) if args.with_mc else None
    _log_config(
        "compare",
        {"error_model": em.to_mapping(), "files": args.circuits, "builtins": args.builtin or [], "mc": mc.to_mapping() if mc else None},
    )
    sources: List[Any] = [(path, lambda p=path: load_circuit(p)) for path in args.circuits]
    sources += [(name, lambda n=name: builtin(n)) for name in args.builtin or []]
    rows = []
    failures = 0
    for name, load in sources:
        try:
            rows.append(_compare_row(name, canonicalize(load()), em, mc))
        except (PurikitError, OSError) as e:
            failures += 1
            logger.error("%s: %s", name, e)
    _emit(_csv_text(COMPARE_COLUMNS, rows), args.output)
    return 1 if failures else 0


# --- sweep ------------------------------------------------------------------------

def cmd_sweep(args: argparse.Namespace) -> int:
    c = _circuit(args)
    em = _error_model(args)
    _log_config(
        "sweep",
        {"error_model": em.to_mapping(), "circuit": c.key(), "p2_values": args.p2_values, "fixed_eta": args.fixed_eta},
    )
    rows = [
        (r.p2, r.eta, r.epsilon, r.infidelity, r.success_prob)
        for r in sweep(c, em, args.p2_values, couple_eta=not args.fixed_eta)
    ]
    _emit(_csv_text(("p2", "eta", "epsilon", "infidelity", "success_prob"), rows), args.output)
    return 0


# --- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="ログレベル (default: INFO)"
    )

    parser = argparse.ArgumentParser(prog="purikit", description="Bell ペア純化回路の評価・最適化ツール")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("enumerate", parents=[common], help="Clifford 操作と Bell 置換の列挙")
    p.add_argument("--counts-only", action="store_true", help="6 つの数だけを出力")
    p.add_argument("--output", help="有用な 648 置換の JSON を書き出すファイル")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("evaluate", parents=[common], help="回路の厳密評価")
    _add_circuit_source(p)
    _add_error_model(p)
    p.add_argument("--symbolic", action="store_true", help="多項式 (F0, p2, eta) も出力")
    p.add_argument("--oracle", action="store_true", help="密度行列オラクルの結果も出力 (幅 3 まで)")
    p.add_argument("--output", help="出力ファイル (既定は標準出力)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", parents=[common], help="遺伝的アルゴリズムによる回路探索")
    p.add_argument("--config", help="GA 設定 JSON")
    p.add_argument("--config-template", action="store_true", help="既定値入りの設定テンプレートを出力")
    p.add_argument("--out-dir", help="best.json, trace.csv, population/ の出力先")
    fields = GA_CONFIG_SCHEMA.fields
    p.add_argument("--width", type=int, help=fields["width"].help_text)
    p.add_argument("--max-length", dest="max_length", type=int, help=fields["max_length"].help_text)
    p.add_argument("--population-size", dest="population_size", type=int, help=fields["population_size"].help_text)
    p.add_argument("--survivors", type=int, help=fields["survivors"].help_text)
    p.add_argument(
        "--children-per-survivor", dest="children_per_survivor", type=int, help=fields["children_per_survivor"].help_text
    )
    p.add_argument("--generations", type=int, help=fields["generations"].help_text)
    p.add_argument("--seed", type=int, help=fields["seed"].help_text)
    p.add_argument("--mode", choices=MODES, help=fields["mode"].help_text)
    p.add_argument("--workers", type=int, help=fields["workers"].help_text)
    p.add_argument("--success-floor", dest="success_floor", type=float, help=fields["success_floor"].help_text)
    p.add_argument("--crossover-rate", dest="crossover_rate", type=float, help=fields["crossover_rate"].help_text)
    _add_error_model(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("montecarlo", parents=[common], help="再起動込みの実行のモンテカルロシミュレーション")
    _add_circuit_source(p)
    _add_error_model(p)
    fields = MC_CONFIG_SCHEMA.fields
    p.add_argument("--config", help="モンテカルロ設定 JSON")
    p.add_argument("--trials", type=int, help=fields["trials"].help_text)
    p.add_argument("--seed", type=int, help=fields["seed"].help_text)
    p.add_argument(
        "--max-restarts", dest="max_restarts_per_trial", type=int, help=fields["max_restarts_per_trial"].help_text
    )
    p.add_argument(
        "--restart-policy", dest="restart_policy", choices=("subcircuit", "full"), help=fields["restart_policy"].help_text
    )
    p.add_argument("--workers", type=int, help=fields["workers"].help_text)
    p.add_argument("--out-dir", help="report.json と CSV の出力先")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("canonicalize", parents=[common], help="回路を正準形に変換")
    _add_circuit_source(p)
    p.add_argument("--describe", action="store_true", help="JSON の代わりに 1 行 1 操作の表記で出力")
    p.add_argument("--output", help="出力ファイル (既定は標準出力)")
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("compare", parents=[common], help="複数の回路を評価して CSV に並べる")
    p.add_argument("circuits", nargs="*", help="回路 JSON ファイル")
    p.add_argument("--builtin", action="append", choices=BUILTIN_NAMES, help="組み込み回路 (複数指定可)")
    p.add_argument("--with-mc", action="store_true", help="モンテカルロで N_avg も求める")
    p.add_argument("--trials", type=int, help=MC_CONFIG_SCHEMA.fields["trials"].help_text)
    p.add_argument("--seed", type=int, help=MC_CONFIG_SCHEMA.fields["seed"].help_text)
    _add_error_model(p)
    p.add_argument("--output", help="出力 CSV (既定は標準出力)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", parents=[common], help="ゲート忠実度 p2 を振って評価")
    _add_circuit_source(p)
    _add_error_model(p)
    p.add_argument("--p2-values", dest="p2_values", type=float, nargs="+", required=True, help="評価する p2 の列")
    p.add_argument("--fixed-eta", action="store_true", help="eta を --eta に固定 (既定は eta = p2)")
    p.add_argument("--output", help="出力 CSV (既定は標準出力)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func: Optional[Callable[[argparse.Namespace], int]] = getattr(args, "func", None)
    if func is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger().setLevel(args.log_level)
    try:
        return func(args)
    except (PurikitError, OSError) as e:
        print(f"purikit {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
