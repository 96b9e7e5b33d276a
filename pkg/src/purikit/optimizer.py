"""
回路の遺伝的アルゴリズム。

固定の誤差モデルと幅・長さの制約のもとで、最終ペアの忠実度 (重み付き) を最大化します。
各世代は生存個体とその変異体からなる (mu + lambda) 方式で、正準形の直列化キーにより
重複を除きます。乱数は世代と個体ごとに ``SeedSequence`` から分岐させるので、
``workers`` の数に関係なく同じシードで同じ結果になります。
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .bellstate import BCD_NAMES, Basis, ErrorModel
from .circuit import Circuit, CircuitOp, FinalBcd, Gate, Measure, Swap, canonicalize
from .config import GA_CONFIG_SCHEMA, MODES, MUTATION_KINDS
from .errors import CanonicalRejection, DomainError, StructuralError
from .evaluator import EvalReport, evaluate
from .validator import validate

logger = logging.getLogger(__name__)

MAX_RANDOM_ATTEMPTS = 10_000
# chance that an insert mutation adds the final BCD permutation instead of a body op
FINAL_BCD_INSERT_RATE = 0.1


@dataclass(frozen=True)
class GaConfig:
    """
    遺伝的アルゴリズムの設定。既定値は ``config.GA_CONFIG_SCHEMA`` にあり、
    通常は ``GaConfig.from_mapping({...})`` で構築します。
    """

    width: int
    max_length: int
    population_size: int
    survivors: int
    children_per_survivor: int
    mutation_weights: Tuple[float, ...]
    generations: int
    seed: int
    mode: str
    fitness_weights: Tuple[float, float, float]
    success_floor: Optional[float]
    max_mutation_attempts: int
    crossover_rate: float
    allow_final_bcd: bool
    workers: int
    initial_length: int

    def __post_init__(self) -> None:
        if not self.population_size >= self.survivors >= 1:
            raise DomainError(
                f"Need population_size >= survivors >= 1, got {self.population_size} and {self.survivors}"
            )
        if len(self.mutation_weights) != len(MUTATION_KINDS) or any(w < 0 for w in self.mutation_weights):
            raise DomainError("Mutation weights must be nonnegative, one per mutation kind")
        if sum(self.mutation_weights) <= 0:
            raise DomainError("At least one mutation weight must be positive")
        if any(w < 0 for w in self.fitness_weights):
            raise DomainError("Fitness weights must be nonnegative")
        if self.mode not in MODES:
            raise DomainError(f"Unknown mode '{self.mode}'")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "GaConfig":
        """JSON 由来の dict を検証し、欠けている項目を既定値で補って GaConfig を作ります。"""
        doc = validate(dict(data), GA_CONFIG_SCHEMA)
        weights = dict.fromkeys(MUTATION_KINDS, 1.0)
        unknown = sorted(set(doc["mutation_weights"]) - set(MUTATION_KINDS))
        if unknown:
            raise DomainError(f"Unknown mutation kind '{unknown[0]}'; expected one of {list(MUTATION_KINDS)}")
        weights.update(doc["mutation_weights"])
        initial = doc.get("initial_length")
        return cls(
            width=doc["width"],
            max_length=doc["max_length"],
            population_size=doc["population_size"],
            survivors=doc["survivors"],
            children_per_survivor=doc["children_per_survivor"],
            mutation_weights=tuple(float(weights[k]) for k in MUTATION_KINDS),
            generations=doc["generations"],
            seed=doc["seed"],
            mode=doc["mode"],
            fitness_weights=tuple(doc["fitness_weights"]),  # type: ignore[arg-type]
            success_floor=doc.get("success_floor"),
            max_mutation_attempts=doc["max_mutation_attempts"],
            crossover_rate=doc["crossover_rate"],
            allow_final_bcd=doc["allow_final_bcd"],
            workers=doc["workers"],
            initial_length=min(initial if initial is not None else max(2, doc["max_length"] // 2), doc["max_length"]),
        )

    def to_mapping(self) -> Dict[str, Any]:
        doc = asdict(self)
        doc["mutation_weights"] = dict(zip(MUTATION_KINDS, self.mutation_weights))
        doc["fitness_weights"] = list(self.fitness_weights)
        return doc


@dataclass(frozen=True)
class Scored:
    fitness: float
    report: EvalReport
    circuit: Circuit


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best: Scored
    population_size: int


@dataclass(frozen=True)
class GaRun:
    """
    Attributes:
        trace: 世代ごとの最良個体 (適応度は非減少)。
        population: 最終世代の個体 (適応度の降順)。
    """

    config: GaConfig
    trace: Tuple[GenerationRecord, ...]
    population: Tuple[Scored, ...] = field(repr=False)

    @property
    def best(self) -> Scored:
        return self.trace[-1].best


# --- genes ------------------------------------------------------------------------

def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _choice(rng: np.random.Generator, items: Sequence[Any]) -> Any:
    return items[int(rng.integers(len(items)))]


def random_gate(width: int, mode: str, rng: np.random.Generator) -> Gate:
    if mode == "hot_cold":
        low = int(rng.integers(width - 1))
        src, dst = (low, low + 1) if rng.random() < 0.5 else (low + 1, low)
    else:
        src, dst = (int(x) for x in rng.choice(width, size=2, replace=False))
    return Gate(src, dst, _choice(rng, BCD_NAMES), _choice(rng, BCD_NAMES))


def random_measure(width: int, mode: str, rng: np.random.Generator, pair: Optional[int] = None) -> Measure:
    k = int(rng.integers(1, width)) if pair is None else pair
    reset = mode != "hot_cold" or k == width - 1
    return Measure(k, _choice(rng, list(Basis)), reset=reset)


def random_op(width: int, mode: str, rng: np.random.Generator) -> CircuitOp:
    """遺伝子集合から 1 操作を選びます。hot_cold では最近接の SWAP も候補です。"""
    roll = rng.random()
    if mode == "hot_cold" and roll < 0.2:
        low = int(rng.integers(width - 1))
        return Swap(low, low + 1)
    if roll < 0.6:
        return random_gate(width, mode, rng)
    return random_measure(width, mode, rng)


def random_circuit(cfg: GaConfig, rng: np.random.Generator) -> Circuit:
    """
    正準化を通る長さ ``max_length`` 以下のランダム回路を作ります。

    本体の操作列の後ろに、ペア 0 以外の全ペアを 1 回ずつ測定する末尾を付けます。
    """
    tail_len = cfg.width - 1
    body_max = max(1, cfg.initial_length - tail_len)
    for _ in range(MAX_RANDOM_ATTEMPTS):
        n_body = int(rng.integers(1, body_max + 1))
        ops: List[CircuitOp] = [random_gate(cfg.width, cfg.mode, rng)]
        ops += [random_op(cfg.width, cfg.mode, rng) for _ in range(n_body - 1)]
        ops += [random_measure(cfg.width, cfg.mode, rng, pair=int(k)) for k in rng.permutation(np.arange(1, cfg.width))]
        if cfg.allow_final_bcd and rng.random() < 0.5:
            ops.append(FinalBcd(_choice(rng, BCD_NAMES)))
        if len(ops) > cfg.max_length:
            continue
        try:
            return canonicalize(Circuit(cfg.width, tuple(ops), cfg.mode, {"source": "optimizer"}))
        except (StructuralError, CanonicalRejection):
            continue
    raise DomainError(
        f"No valid circuit found for width {cfg.width} within length {cfg.max_length} "
        f"after {MAX_RANDOM_ATTEMPTS} attempts"
    )


# --- mutation -----------------------------------------------------------------------

def _tweak(op: CircuitOp, rng: np.random.Generator) -> Optional[CircuitOp]:
    if isinstance(op, Gate):
        side = "bcd_src" if rng.random() < 0.5 else "bcd_dst"
        current = getattr(op, side)
        new = _choice(rng, [name for name in BCD_NAMES if name != current])
        return Gate(op.src, op.dst, new if side == "bcd_src" else op.bcd_src, new if side == "bcd_dst" else op.bcd_dst)
    if isinstance(op, Measure):
        return Measure(op.pair, _choice(rng, [b for b in Basis if b is not op.basis]), op.reset)
    if isinstance(op, FinalBcd):
        return FinalBcd(_choice(rng, [name for name in BCD_NAMES if name != op.perm]))
    return None


def _apply_mutation(kind: str, c: Circuit, cfg: GaConfig, rng: np.random.Generator) -> Optional[List[CircuitOp]]:
    body = list(c.body)
    final = c.final_bcd
    if kind == "insert":
        if cfg.allow_final_bcd and final is None and rng.random() < FINAL_BCD_INSERT_RATE:
            final = FinalBcd(_choice(rng, BCD_NAMES))
        else:
            body.insert(int(rng.integers(len(body) + 1)), random_op(c.width, c.mode, rng))
    elif kind == "delete":
        ops = body + ([final] if final is not None else [])
        if len(ops) <= 1:
            return None
        del ops[int(rng.integers(len(ops)))]
        return ops
    elif kind == "replace":
        body[int(rng.integers(len(body)))] = random_op(c.width, c.mode, rng)
    elif kind == "tweak":
        ops = body + ([final] if final is not None else [])
        idx = int(rng.integers(len(ops)))
        new = _tweak(ops[idx], rng)
        if new is None:
            return None
        ops[idx] = new
        return ops
    elif kind == "swap_adjacent":
        if len(body) < 2:
            return None
        i = int(rng.integers(len(body) - 1))
        body[i], body[i + 1] = body[i + 1], body[i]
    else:
        raise DomainError(f"Unknown mutation kind '{kind}'")
    return body + ([final] if final is not None else [])


def _accept(c: Circuit, ops: Optional[List[CircuitOp]], cfg: GaConfig) -> Optional[Circuit]:
    if ops is None or len(ops) > cfg.max_length:
        return None
    try:
        return canonicalize(Circuit(c.width, tuple(ops), c.mode, dict(c.metadata)))
    except (StructuralError, CanonicalRejection):
        return None


def mutate(c: Circuit, cfg: GaConfig, rng: np.random.Generator) -> Circuit:
    """
    重み付きで選んだ 1 種類の変異を施し、正準化した子を返します。

    棄却された変異は ``max_mutation_attempts`` 回まで選び直し、すべて失敗したら親を返します。
    """
    weights = np.asarray(cfg.mutation_weights, dtype=np.float64)
    weights = weights / weights.sum()
    for _ in range(cfg.max_mutation_attempts):
        kind = MUTATION_KINDS[int(rng.choice(len(MUTATION_KINDS), p=weights))]
        child = _accept(c, _apply_mutation(kind, c, cfg, rng), cfg)
        if child is not None:
            return child
    return c


def crossover(a: Circuit, b: Circuit, cfg: GaConfig, rng: np.random.Generator) -> Circuit:
    """一点交叉: a の前半と b の後半をつなぎます。失敗が続いたら a を変異させた子を返します。"""
    for _ in range(cfg.max_mutation_attempts):
        i = int(rng.integers(len(a.body) + 1))
        j = int(rng.integers(len(b.body) + 1))
        ops = list(a.body[:i]) + list(b.body[j:])
        if a.final_bcd is not None:
            ops.append(a.final_bcd)
        child = _accept(a, ops, cfg)
        if child is not None:
            return child
    return mutate(a, cfg, rng)


# --- fitness --------------------------------------------------------------------------

def fitness(report: EvalReport, cfg: GaConfig) -> float:
    """
    1 - (w_B p_B + w_C p_C + w_D p_D)。重みがすべて 1 なら p_A と一致します。

    出力が未定義、または成功確率が ``success_floor`` を下回る場合は -inf。
    """
    if report.final is None:
        return -math.inf
    if cfg.success_floor is not None and report.success_prob < cfg.success_floor:
        return -math.inf
    w_b, w_c, w_d = cfg.fitness_weights
    final = report.final
    return 1.0 - (w_b * final.p_b + w_c * final.p_c + w_d * final.p_d)


def score(c: Circuit, em: ErrorModel, cfg: GaConfig) -> Scored:
    report = evaluate(c, em)
    return Scored(fitness(report, cfg), report, c)


def _sort_key(s: Scored) -> Tuple[float, str]:
    return (-s.fitness, s.circuit.key())


def _score_all(
    circuits: Sequence[Circuit],
    em: ErrorModel,
    cfg: GaConfig,
    pool: Optional[ProcessPoolExecutor],
) -> List[Scored]:
    work = partial(score, em=em, cfg=cfg)
    if pool is None or len(circuits) < 2:
        return [work(c) for c in circuits]
    chunk = max(1, len(circuits) // (4 * cfg.workers))
    return list(pool.map(work, circuits, chunksize=chunk))


def _fill(
    population: List[Circuit],
    seen: Set[str],
    target: int,
    cfg: GaConfig,
    rng: np.random.Generator,
) -> None:
    attempts = 0
    while len(population) < target and attempts < 20 * target:
        attempts += 1
        c = random_circuit(cfg, rng)
        if c.key() not in seen:
            seen.add(c.key())
            population.append(c)


def run_ga(
    cfg: GaConfig,
    em: ErrorModel,
    on_generation: Optional[Callable[[GenerationRecord, Sequence[Scored]], None]] = None,
) -> GaRun:
    """
    エリート保存付きの (mu + lambda) ループを実行します。

    各世代: 上位 ``survivors`` 個体を残し、それぞれから ``children_per_survivor`` 個の子
    (変異、または確率 ``crossover_rate`` で一点交叉) を作り、重複を除いて評価し、
    適応度の降順 (同点は直列化キー順) に ``population_size`` 個まで残します。
    """
    trace: List[GenerationRecord] = []
    with ExitStack() as stack:
        pool = stack.enter_context(ProcessPoolExecutor(cfg.workers)) if cfg.workers > 1 else None

        initial: List[Circuit] = []
        _fill(initial, set(), cfg.population_size, cfg, _rng(cfg.seed, 0))
        population = sorted(_score_all(initial, em, cfg, pool), key=_sort_key)[: cfg.population_size]
        trace.append(_record(0, population, on_generation))

        for gen in range(1, cfg.generations + 1):
            survivors = population[: cfg.survivors]
            keys = {s.circuit.key() for s in survivors}
            children: List[Circuit] = []
            for i, parent in enumerate(survivors):
                rng = _rng(cfg.seed, gen, i)
                for _ in range(cfg.children_per_survivor):
                    if cfg.crossover_rate > 0 and len(survivors) > 1 and rng.random() < cfg.crossover_rate:
                        mate = survivors[int(rng.integers(len(survivors)))].circuit
                        child = crossover(parent.circuit, mate, cfg, rng)
                    else:
                        child = mutate(parent.circuit, cfg, rng)
                    if child.key() not in keys:
                        keys.add(child.key())
                        children.append(child)
            if len(survivors) + len(children) < cfg.population_size:
                extra: List[Circuit] = []
                missing = cfg.population_size - len(survivors) - len(children)
                _fill(extra, keys, missing, cfg, _rng(cfg.seed, gen, len(survivors)))
                children.extend(extra)
            scored = list(survivors) + _score_all(children, em, cfg, pool)
            population = sorted(scored, key=_sort_key)[: cfg.population_size]
            trace.append(_record(gen, population, on_generation))

    return GaRun(cfg, tuple(trace), tuple(population))


def _record(
    gen: int,
    population: Sequence[Scored],
    on_generation: Optional[Callable[[GenerationRecord, Sequence[Scored]], None]],
) -> GenerationRecord:
    record = GenerationRecord(gen, population[0], len(population))
    best = record.best
    logger.info(
        "generation %d: best fitness %.9f infidelity %.6g success %.6g length %d (population %d)",
        gen,
        best.fitness,
        best.report.infidelity,
        best.report.success_prob,
        best.circuit.length,
        len(population),
    )
    if on_generation is not None:
        on_generation(record, population)
    return record


def exhaustive_best(cfg: GaConfig, em: ErrorModel, candidates: Iterable[Circuit]) -> Scored:
    """候補を総当たりで評価し、最良のものを返します (小さな遺伝子空間での検証用)。"""
    scored = []
    for c in candidates:
        try:
            scored.append(score(canonicalize(c), em, cfg))
        except (StructuralError, CanonicalRejection):
            continue
    if not scored:
        raise DomainError("No candidate circuit passed canonicalization")
    return sorted(scored, key=_sort_key)[0]


def cross_evaluate(
    circuits: Mapping[str, Circuit],
    models: Mapping[str, ErrorModel],
    cfg: Optional[GaConfig] = None,
) -> Dict[str, Dict[str, float]]:
    """
    回路 x 誤差モデルの適応度行列を返します。

    ``cfg`` が None の場合は最終忠実度 p_A を使います。異なる誤差領域で最適化した回路の
    順位が入れ替わるかを調べるためのものです。
    """
    matrix: Dict[str, Dict[str, float]] = {}
    for name, c in circuits.items():
        row: Dict[str, float] = {}
        for model_name, em in models.items():
            report = evaluate(c, em)
            if cfg is not None:
                row[model_name] = fitness(report, cfg)
            else:
                row[model_name] = report.final.fidelity if report.final is not None else -math.inf
        matrix[name] = row
    return matrix
