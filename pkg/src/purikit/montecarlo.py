"""
測定失敗と部分回路の再実行を含むプロトコル実行のモンテカルロシミュレーション。

各試行は Bell 対角の条件付き分布から測定結果をサンプルし、失敗した場合は
``color_partition`` が与える部分回路だけを (その生ペアを取り直して) やり直します。
失敗した測定の成分がペア 0 を含む場合は回路全体をやり直します。
"""
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .bellstate import (
    ErrorModel,
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
from .circuit import Circuit, ColorPartition, FinalBcd, Gate, Measure, Swap, color_partition, raw_pairs_best_case, reset_is_used
from .config import MC_CONFIG_SCHEMA
from .errors import AllTrialsAborted, StructuralError
from .validator import validate

logger = logging.getLogger(__name__)

Histogram = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class McConfig:
    trials: int
    seed: int
    max_restarts_per_trial: int
    restart_policy: str
    workers: int

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "McConfig":
        doc = validate(dict(data), MC_CONFIG_SCHEMA)
        return cls(**doc)

    def to_mapping(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TrialResult:
    pairs: int
    ops: int
    restarts: int
    first_pass: bool
    aborted: bool


@dataclass(frozen=True)
class McReport:
    """
    Attributes:
        trials: 試行回数 (打ち切りを含む)。
        aborted: 再起動上限で打ち切られた試行数。
        first_pass: 一度も失敗せずに完了した試行数。
        pairs_histogram: 完了試行の消費生ペア数のヒストグラム ((ペア数, 試行数) の昇順)。
        ops_histogram: 完了試行の実行操作数のヒストグラム。
        restart_policy: ``"subcircuit"`` または ``"full"``。
        raw_pairs_best_case: 回路の N。
    """

    trials: int
    aborted: int
    first_pass: int
    pairs_histogram: Histogram
    ops_histogram: Histogram
    restart_policy: str
    raw_pairs_best_case: int

    @property
    def completed(self) -> int:
        return self.trials - self.aborted

    @property
    def mean_pairs(self) -> float:
        return mean_pairs(self)

    @property
    def first_pass_fraction(self) -> float:
        return self.first_pass / self.trials

    def pairs_std_error(self) -> float:
        """N_avg の標準誤差。"""
        n = self.completed
        if n < 2:
            return math.nan
        mean = mean_pairs(self)
        var = sum(count * (pairs - mean) ** 2 for pairs, count in self.pairs_histogram) / (n - 1)
        return math.sqrt(var / n)

    def cumulative(self) -> List[Tuple[int, float]]:
        """消費ペア数ごとの累積完了確率 (分母は打ち切りを含む全試行)。"""
        out = []
        running = 0
        for pairs, count in self.pairs_histogram:
            running += count
            out.append((pairs, running / self.trials))
        return out

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "trials": self.trials,
            "completed": self.completed,
            "aborted": self.aborted,
            "first_pass": self.first_pass,
            "first_pass_fraction": self.first_pass_fraction,
            "mean_pairs": mean_pairs(self) if self.completed else None,
            "pairs_std_error": self.pairs_std_error() if self.completed > 1 else None,
            "raw_pairs_best_case": self.raw_pairs_best_case,
            "restart_policy": self.restart_policy,
            # failed subcircuits are re-run from freshly drawn raw pairs; surviving pairs are kept
            "resampling": "restarted pairs only",
            "pairs_histogram": [list(x) for x in self.pairs_histogram],
            "ops_histogram": [list(x) for x in self.ops_histogram],
        }


def mean_pairs(report: McReport) -> float:
    """完了した試行の消費生ペア数の平均 N_avg。全試行が打ち切られた場合は AllTrialsAborted。"""
    if report.completed <= 0:
        raise AllTrialsAborted(f"All {report.trials} trials hit the restart limit")
    return sum(pairs * count for pairs, count in report.pairs_histogram) / report.completed


class _FullRestart(Exception):
    pass


class _Aborted(Exception):
    pass


class _Trial:
    """1 試行分の状態。重みテンソルは常に正規化された条件付き分布です。"""

    def __init__(
        self,
        c: Circuit,
        em: ErrorModel,
        partition: ColorPartition,
        used_resets: Sequence[bool],
        cfg: McConfig,
        rng: np.random.Generator,
    ) -> None:
        self.c = c
        self.em = em
        self.partition = partition
        self.used_resets = used_resets
        self.cfg = cfg
        self.rng = rng
        self.raw = em.raw.as_array()
        self.vacant = np.full(4, 0.25)
        self.keep = em.p2 * em.p2
        self.w = _raw_tensor(c.width, self.raw)
        self.pairs = 0
        self.ops = 0
        self.restarts = 0
        self.failed = False

    def run(self) -> TrialResult:
        try:
            while True:
                self.w = _raw_tensor(self.c.width, self.raw)
                self.pairs += self.c.width
                try:
                    self._run_ops(range(len(self.c.ops)))
                    break
                except _FullRestart:
                    continue
        except _Aborted:
            return TrialResult(self.pairs, self.ops, self.restarts, False, True)
        return TrialResult(self.pairs, self.ops, self.restarts, not self.failed, False)

    def _run_ops(self, indices: Sequence[int]) -> None:
        for idx in indices:
            self._execute(idx)

    def _execute(self, idx: int) -> None:
        op = self.c.ops[idx]
        self.ops += 1
        if isinstance(op, Gate):
            self._two_pair(permuted_cnot_perm(op.bcd_src, op.bcd_dst), op.src, op.dst)
        elif isinstance(op, Swap):
            self._two_pair(swap_perm(), op.a, op.b)
        elif isinstance(op, FinalBcd):
            self.w = _relabel(self.w, 0, bcd_image(op.perm))
        elif isinstance(op, Measure):
            while not self._sample_measurement(op):
                self._on_failure(idx)
            if op.reset and self.used_resets[idx]:
                self.pairs += 1

    def _two_pair(self, perm: Sequence[int], i: int, j: int) -> None:
        w = _permute_pairs(self.w, perm, i, j)
        self.w = _depolarize(w, i, j, self.keep, (1.0 - self.keep) / 16.0)

    def _sample_measurement(self, op: Measure) -> bool:
        if op.pair == 0:
            raise StructuralError("The output pair 0 is never measured")
        rest = _measure(self.w, op.pair, readout_weights(op.basis, self.em.eta))
        p_success = float(rest.sum())
        if self.rng.random() >= p_success:
            return False
        fill = self.raw if op.reset else self.vacant
        self.w = _insert(rest / p_success, op.pair, fill)
        return True

    def _on_failure(self, idx: int) -> None:
        self.failed = True
        self.restarts += 1
        if self.restarts > self.cfg.max_restarts_per_trial:
            raise _Aborted()
        block = self.partition.restarts[idx] if self.cfg.restart_policy == "subcircuit" else None
        if block is None:
            raise _FullRestart()
        # other components are independent of the block, so marginalizing its pairs out is exact
        for p in block.block.pairs:
            fill = self.raw if p in block.block.raw_pairs else self.vacant
            self.w = _insert(self.w.sum(axis=p), p, fill)
        self.pairs += block.reinit_cost
        self._run_ops(block.block.ops[:-1])


def _run_chunk(
    c: Circuit,
    em: ErrorModel,
    cfg: McConfig,
    partition: ColorPartition,
    used_resets: Sequence[bool],
    start: int,
    stop: int,
) -> List[TrialResult]:
    results = []
    for t in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(t,)))
        results.append(_Trial(c, em, partition, used_resets, cfg, rng).run())
    return results


def _histogram(values: Sequence[int]) -> Histogram:
    return tuple(sorted(Counter(values).items()))


def simulate_runs(c: Circuit, em: ErrorModel, cfg: McConfig) -> McReport:
    """
    回路の実行をモンテカルロでシミュレートし、消費生ペア数の統計を返します。

    試行 t の乱数は ``SeedSequence(seed, spawn_key=(t,))`` から作るので、
    ``workers`` の数によらず結果は同じです。
    """
    partition = color_partition(c)
    used = [reset_is_used(c, idx) for idx in range(len(c.ops))]
    if cfg.workers > 1 and cfg.trials > 1:
        bounds = np.linspace(0, cfg.trials, cfg.workers + 1).astype(int)
        with ProcessPoolExecutor(cfg.workers) as pool:
            futures = [
                pool.submit(_run_chunk, c, em, cfg, partition, used, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            results = [r for f in futures for r in f.result()]
    else:
        results = _run_chunk(c, em, cfg, partition, used, 0, cfg.trials)

    done = [r for r in results if not r.aborted]
    report = McReport(
        trials=cfg.trials,
        aborted=len(results) - len(done),
        first_pass=sum(1 for r in done if r.first_pass),
        pairs_histogram=_histogram([r.pairs for r in done]),
        ops_histogram=_histogram([r.ops for r in done]),
        restart_policy=cfg.restart_policy,
        raw_pairs_best_case=raw_pairs_best_case(c),
    )
    logger.info(
        "monte carlo: %d trials, %d aborted, %d restartable subcircuit(s)",
        report.trials,
        report.aborted,
        len(partition.subcircuits),
    )
    return report
