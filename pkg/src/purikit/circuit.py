"""
精製回路のデータモデル、正準化、組み込み回路、部分回路 (色) 解析、JSON 入出力。

回路は操作のタプルを持つ不変値です::

    from purikit.circuit import Circuit, Gate, Measure

    fig1 = Circuit(2, (Gate(0, 1), Measure(1, "coinZ", reset=False)))

``Gate(src, dst)`` は ``src`` (保存側、制御) から ``dst`` (犠牲側、標的) へのミラー CNOT で、
各ペアに付けた BCD 置換はゲートの直前に作用します。
"""
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .bellstate import BCD_NAMES, IDENTITY_BCD, Basis
from .config import CIRCUIT_FORMAT_VERSION, CIRCUIT_SCHEMA, MODES, OP_SCHEMAS
from .errors import CanonicalRejection, StructuralError
from .validator import ErrorDetail, ValidationError, validate

logger = logging.getLogger(__name__)


# --- ops ---------------------------------------------------------------------

@dataclass(frozen=True)
class Gate:
    """BCD 置換付きミラー CNOT。"""

    src: int
    dst: int
    bcd_src: str = IDENTITY_BCD
    bcd_dst: str = IDENTITY_BCD

    @property
    def pairs(self) -> Tuple[int, ...]:
        return (self.src, self.dst)

    def relabeled(self, mapping: Sequence[int]) -> "Gate":
        return replace(self, src=mapping[self.src], dst=mapping[self.dst])

    def to_mapping(self) -> Dict[str, Any]:
        return {"op": "gate", "src": self.src, "dst": self.dst, "bcd_src": self.bcd_src, "bcd_dst": self.bcd_dst}


@dataclass(frozen=True)
class Measure:
    """ペア ``pair`` の同時測定。``reset`` が False なら測定後のペアは空きになります。"""

    pair: int
    basis: Basis
    reset: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "basis", Basis(self.basis))

    @property
    def pairs(self) -> Tuple[int, ...]:
        return (self.pair,)

    def relabeled(self, mapping: Sequence[int]) -> "Measure":
        return replace(self, pair=mapping[self.pair])

    def to_mapping(self) -> Dict[str, Any]:
        return {"op": "measure", "pair": self.pair, "basis": self.basis.value, "reset": self.reset}


@dataclass(frozen=True)
class Swap:
    a: int
    b: int

    @property
    def pairs(self) -> Tuple[int, ...]:
        return (self.a, self.b)

    def relabeled(self, mapping: Sequence[int]) -> "Swap":
        return Swap(mapping[self.a], mapping[self.b])

    def to_mapping(self) -> Dict[str, Any]:
        return {"op": "swap", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class FinalBcd:
    """出力ペア 0 に最後に施す BCD 置換 (誤差なし)。"""

    perm: str

    @property
    def pairs(self) -> Tuple[int, ...]:
        return (0,)

    def relabeled(self, mapping: Sequence[int]) -> "FinalBcd":
        return self

    def to_mapping(self) -> Dict[str, Any]:
        return {"op": "final_bcd", "perm": self.perm}


CircuitOp = Union[Gate, Measure, Swap, FinalBcd]
TwoPairOp = (Gate, Swap)


# --- circuit -------------------------------------------------------------------

@dataclass(frozen=True)
class Circuit:
    """
    幅 ``width`` の精製回路。

    生成時に構造を検査し、不正な回路 (範囲外のペア、自己ゲート、途中の FinalBcd、
    空きペアの使用、hot_cold 制約の違反) は StructuralError になります。
    ``metadata`` は等価比較に含まれますが、``key()`` には含まれません。
    """

    width: int
    ops: Tuple[CircuitOp, ...]
    mode: str = "standard"
    metadata: Mapping[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        validate_structure(self)

    @property
    def length(self) -> int:
        return len(self.ops)

    @property
    def body(self) -> Tuple[CircuitOp, ...]:
        """末尾の FinalBcd を除いた操作列。"""
        if self.ops and isinstance(self.ops[-1], FinalBcd):
            return self.ops[:-1]
        return self.ops

    @property
    def final_bcd(self) -> Optional[FinalBcd]:
        if self.ops and isinstance(self.ops[-1], FinalBcd):
            return self.ops[-1]
        return None

    @property
    def comm_pair(self) -> int:
        """hot_cold モードの通信ペア (最大番号のペア)。"""
        return self.width - 1

    def with_ops(self, ops: Sequence[CircuitOp]) -> "Circuit":
        return Circuit(self.width, tuple(ops), self.mode, dict(self.metadata))

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "version": CIRCUIT_FORMAT_VERSION,
            "width": self.width,
            "mode": self.mode,
            "ops": [op.to_mapping() for op in self.ops],
            "metadata": dict(self.metadata),
        }

    def key(self) -> str:
        """重複排除用の直列化キー (metadata を除く)。"""
        doc = self.to_mapping()
        del doc["metadata"]
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def validate_structure(c: Circuit) -> None:
    """回路の構造上の不変条件を検査します。違反時は StructuralError。"""
    if c.mode not in MODES:
        raise StructuralError(f"Unknown mode '{c.mode}'")
    if not isinstance(c.width, int) or c.width < 1:
        raise StructuralError(f"Circuit width must be a positive int, got {c.width!r}")
    vacant: Set[int] = set()
    for idx, op in enumerate(c.ops):
        for p in op.pairs:
            if not 0 <= p < c.width:
                raise StructuralError(f"ops[{idx}]: pair {p} out of range for width {c.width}")
        if isinstance(op, FinalBcd):
            if idx != len(c.ops) - 1:
                raise StructuralError(f"ops[{idx}]: FinalBcd must be the last op")
            _check_bcd(idx, op.perm)
            continue
        if isinstance(op, Gate):
            if op.src == op.dst:
                raise StructuralError(f"ops[{idx}]: gate on pair {op.src} with itself")
            _check_bcd(idx, op.bcd_src)
            _check_bcd(idx, op.bcd_dst)
        elif isinstance(op, Swap):
            if op.a == op.b:
                raise StructuralError(f"ops[{idx}]: swap of pair {op.a} with itself")
        elif not isinstance(op, Measure):
            raise StructuralError(f"ops[{idx}]: unknown op {op!r}")

        if c.mode == "hot_cold":
            _check_hot_cold(c, idx, op)

        if isinstance(op, Swap):
            # a swap carries the vacancy along with the slot contents
            a_vacant, b_vacant = op.a in vacant, op.b in vacant
            vacant.discard(op.a)
            vacant.discard(op.b)
            if a_vacant:
                vacant.add(op.b)
            if b_vacant:
                vacant.add(op.a)
            continue
        used = [p for p in op.pairs if p in vacant]
        if used:
            raise StructuralError(f"ops[{idx}]: pair {used[0]} is vacant (measured without reset)")
        if isinstance(op, Measure) and not op.reset:
            vacant.add(op.pair)


def _check_bcd(idx: int, name: str) -> None:
    if name not in BCD_NAMES:
        raise StructuralError(f"ops[{idx}]: unknown BCD permutation '{name}'")


def _check_hot_cold(c: Circuit, idx: int, op: CircuitOp) -> None:
    if isinstance(op, (Gate, Swap)):
        a, b = op.pairs
        if abs(a - b) != 1:
            raise StructuralError(f"ops[{idx}]: hot_cold two-pair ops need nearest neighbours, got {a} and {b}")
    if isinstance(op, Measure) and op.reset and op.pair != c.comm_pair:
        raise StructuralError(
            f"ops[{idx}]: hot_cold allows reset only on the communication pair {c.comm_pair}"
        )


def reset_is_used(c: Circuit, idx: int) -> bool:
    """``ops[idx]`` の測定で再初期化されたペアが、その後どこかで使われるかどうか。"""
    op = c.ops[idx]
    if not isinstance(op, Measure) or not op.reset:
        return False
    return any(op.pair in later.pairs for later in c.body[idx + 1:])


def raw_pairs_best_case(c: Circuit) -> int:
    """全測定が成功した場合に消費する生ペア数 N (幅 + 後で使われるリセット数)。"""
    return c.width + sum(1 for idx in range(len(c.ops)) if reset_is_used(c, idx))


# --- canonicalization -------------------------------------------------------------

FILTER_RULES = (
    "first_op_measurement",
    "consecutive_measurements",
    "unused_pair",
    "measured_output_pair",
    "unmeasured_tail",
)


def check_filters(c: Circuit) -> None:
    """
    正準化フィルタを順に適用し、最初に違反したルールで CanonicalRejection を送出します。

    - ``first_op_measurement``: 最初の操作が測定
    - ``consecutive_measurements``: 同じペアへの連続した測定
    - ``unused_pair``: 2 ペア操作に一度も現れないペアがある
    - ``measured_output_pair``: ペア 0 の測定
    - ``unmeasured_tail``: 最後に関与したペアが測定されずに終わる
    """
    _check_filters(c.body, c.width)


def _check_filters(body: Sequence[CircuitOp], width: int) -> None:
    if not body or not isinstance(body[-1], Measure):
        raise CanonicalRejection("unmeasured_tail", "the last op before FinalBcd must be a measurement")
    if isinstance(body[0], Measure):
        raise CanonicalRejection("first_op_measurement")
    for idx in range(len(body) - 1):
        a, b = body[idx], body[idx + 1]
        if isinstance(a, Measure) and isinstance(b, Measure) and a.pair == b.pair:
            raise CanonicalRejection("consecutive_measurements", f"ops[{idx}] and ops[{idx + 1}] on pair {a.pair}")
    linked: Set[int] = set()
    for op in body:
        if isinstance(op, TwoPairOp):
            linked.update(op.pairs)
    missing = sorted(set(range(width)) - linked)
    if missing:
        raise CanonicalRejection("unused_pair", f"pair {missing[0]} never takes part in a gate")
    for idx, op in enumerate(body):
        if isinstance(op, Measure) and op.pair == 0:
            raise CanonicalRejection("measured_output_pair", f"ops[{idx}]")
    _check_tail(body, width)


def _check_tail(body: Sequence[CircuitOp], width: int) -> None:
    # Walking backwards, every pair touched by a two-pair op must already be
    # measured (or be the output pair) until all pairs have been measured.
    measured = {0}
    for idx in range(len(body) - 1, -1, -1):
        if len(measured) == width:
            return
        op = body[idx]
        if isinstance(op, Measure):
            measured.add(op.pair)
        elif not set(op.pairs) <= measured:
            raise CanonicalRejection("unmeasured_tail", f"ops[{idx}] acts on a pair that is never measured afterwards")


def _relabel_order(body: Sequence[CircuitOp], width: int) -> List[int]:
    order = [0]
    for op in reversed(body):
        if isinstance(op, Measure) and op.pair not in order:
            order.append(op.pair)
    order.extend(p for p in range(width) if p not in order)
    mapping = [0] * width
    for new, old in enumerate(order):
        mapping[old] = new
    return mapping


def _disjoint(a: CircuitOp, b: CircuitOp) -> bool:
    return not set(a.pairs) & set(b.pairs)


def _commute(body: List[CircuitOp]) -> List[CircuitOp]:
    changed = True
    while changed:
        changed = False
        for idx in range(len(body) - 1):
            a, b = body[idx], body[idx + 1]
            if not isinstance(b, TwoPairOp) or not _disjoint(a, b):
                continue
            if isinstance(a, Measure) or (isinstance(a, TwoPairOp) and min(b.pairs) < min(a.pairs)):
                body[idx], body[idx + 1] = b, a
                changed = True
    return body


def _clear_dangling_resets(body: List[CircuitOp]) -> List[CircuitOp]:
    out = list(body)
    for idx, op in enumerate(out):
        if isinstance(op, Measure) and op.reset and not any(op.pair in later.pairs for later in out[idx + 1:]):
            out[idx] = replace(op, reset=False)
    return out


def canonicalize(c: Circuit) -> Circuit:
    """
    回路を正準形に変換します。

    フィルタ (``check_filters``) に違反する回路は CanonicalRejection で棄却します。
    受理された回路には次の書き換えを順に施します。

    1. ペアの付け替え: 最後に測定されるペアほどペア 0 の近くへ (hot_cold では行わない)
    2. 互いに素なペアへの測定とゲートの交換 (ゲートを前へ)
    3. 互いに素な隣接ゲートを最小のペア番号順に並べ替え
    4. その後使われないペアへのリセットを取り消し

    書き換え後の回路もフィルタを通らなければ棄却します。結果は不動点です。
    """
    body = list(c.body)
    tail: List[CircuitOp] = [c.final_bcd] if c.final_bcd is not None else []
    _check_filters(body, c.width)
    if c.mode != "hot_cold":
        mapping = _relabel_order(body, c.width)
        body = [op.relabeled(mapping) for op in body]
    body = _commute(body)
    body = _clear_dangling_resets(body)
    _check_filters(body, c.width)
    return c.with_ops(body + tail)


def is_canonical(c: Circuit) -> bool:
    try:
        return canonicalize(c) == c
    except CanonicalRejection:
        return False


# --- builtins ----------------------------------------------------------------------

def _builtin_ops(name: str) -> Tuple[int, Tuple[CircuitOp, ...]]:
    if name in ("fig1", "single_selection"):
        return 2, (Gate(0, 1), Measure(1, Basis.COIN_Z, reset=False))
    if name == "double_selection":
        return 3, (
            Gate(0, 1),
            Gate(2, 1),
            Measure(2, Basis.COIN_X, reset=False),
            Measure(1, Basis.COIN_Z, reset=False),
        )
    if name == "triple_selection":
        return 4, (
            Gate(0, 1),
            Gate(1, 2),
            Gate(3, 1),
            Measure(3, Basis.ANTI_Y, reset=False),
            Measure(2, Basis.ANTI_Y, reset=False),
            Measure(1, Basis.ANTI_Y, reset=False),
        )
    raise StructuralError(f"Unknown builtin circuit '{name}'; choose from {list(BUILTIN_NAMES)}")


BUILTIN_NAMES = ("fig1", "single_selection", "double_selection", "triple_selection")

_BUILTIN_NOTES = {
    "fig1": "single selection: one sacrificial pair, coincidence Z check",
    "single_selection": "single selection: one sacrificial pair, coincidence Z check",
    "double_selection": "double selection: pair 2 catches Z errors of pair 1 (coinX), then pair 1 is checked (coinZ)",
    "triple_selection": (
        "triple selection: chain 0<-1, 1<-2, 1->3 with antiY checks on 3, 2, 1; "
        "picked for the lowest first-order infidelity at F0=1 among the three-layer variants"
    ),
}


def builtin(name: str) -> Circuit:
    """組み込みの参照回路 (``fig1``, ``single_selection``, ``double_selection``, ``triple_selection``)。"""
    width, ops = _builtin_ops(name)
    return Circuit(width, ops, metadata={"source": "builtin", "name": name, "note": _BUILTIN_NOTES[name]})


# --- color partition ------------------------------------------------------------------

@dataclass(frozen=True)
class Subcircuit:
    """同じ色成分に属する操作の集まり。"""

    ops: Tuple[int, ...]
    pairs: Tuple[int, ...]
    raw_pairs: Tuple[int, ...]


@dataclass(frozen=True)
class RestartBlock:
    """測定失敗時にやり直す範囲と、その再初期化に要する生ペア数。"""

    block: Subcircuit
    reinit_cost: int


@dataclass(frozen=True)
class ColorPartition:
    """
    Attributes:
        op_components: 各操作の直後にその操作が属する色成分の番号。
        subcircuits: ペア 0 を含まない極大成分 (独立に再実行できる部分回路)。
        restarts: 測定ごとの再実行範囲。None は回路全体の再実行、測定以外の操作も None。
    """

    op_components: Tuple[int, ...]
    subcircuits: Tuple[Subcircuit, ...]
    restarts: Tuple[Optional[RestartBlock], ...]


class _Component:
    __slots__ = ("ops", "entries", "output", "fresh")

    def __init__(self, pair: int, when: int, state: str, output: bool = False) -> None:
        self.ops: List[int] = []
        # pair -> (op index at which it joined, "raw" or "vacant")
        self.entries: Dict[int, Tuple[int, str]] = {pair: (when, state)}
        self.output = output
        self.fresh = state

    def snapshot(self) -> Subcircuit:
        pairs = tuple(sorted(self.entries))
        raw = tuple(p for p in pairs if self.entries[p][1] == "raw")
        return Subcircuit(tuple(sorted(self.ops)), pairs, raw)


def color_partition(c: Circuit) -> ColorPartition:
    """
    色の伝播で回路を独立な部分回路に分けます。

    各ペアは開始時と測定 (リセット) 後に新しい色を持ち、2 ペア操作が両者の色を併合します。
    ペア 0 の成分に合流する時点 (または回路の終わり) でペア 0 を含まない成分のうち、
    測定を含むものが独立に再実行できる部分回路です。
    """
    body = c.body
    color: List[int] = list(range(c.width))
    comps: Dict[int, _Component] = {p: _Component(p, -1, "raw", output=(p == 0)) for p in range(c.width)}
    next_id = c.width
    op_components: List[int] = []
    restarts: List[Optional[RestartBlock]] = []
    subcircuits: List[Subcircuit] = []

    def record(comp: _Component) -> None:
        if any(isinstance(body[i], Measure) for i in comp.ops):
            subcircuits.append(comp.snapshot())

    for idx, op in enumerate(body):
        if isinstance(op, TwoPairOp):
            ca, cb = color[op.pairs[0]], color[op.pairs[1]]
            if ca != cb:
                keep, gone = min(ca, cb), max(ca, cb)
                first, second = comps[keep], comps[gone]
                if first.output != second.output:
                    record(second if first.output else first)
                for p, entry in second.entries.items():
                    if p not in first.entries or entry[0] < first.entries[p][0]:
                        first.entries[p] = entry
                first.ops.extend(second.ops)
                first.output = first.output or second.output
                del comps[gone]
                color = [keep if col == gone else col for col in color]
            comps[color[op.pairs[0]]].ops.append(idx)
            op_components.append(color[op.pairs[0]])
            restarts.append(None)
        elif isinstance(op, Measure):
            k = op.pair
            comp = comps[color[k]]
            comp.ops.append(idx)
            op_components.append(color[k])
            restarts.append(None if comp.output else _restart_block(comp, color, comps, k))
            state = "raw" if op.reset else "vacant"
            color[k] = next_id
            comps[next_id] = _Component(k, idx, state)
            next_id += 1

    for comp in comps.values():
        if not comp.output:
            record(comp)
    if c.final_bcd is not None:
        op_components.append(color[0])
        restarts.append(None)
    return ColorPartition(tuple(op_components), tuple(subcircuits), tuple(restarts))


def _restart_block(comp: _Component, color: Sequence[int], comps: Mapping[int, _Component], measured: int) -> Optional[RestartBlock]:
    cost = 0
    for p, (_, state) in comp.entries.items():
        holder = comps[color[p]]
        if holder is not comp and p != measured:
            # a pair that left the block must still sit untouched in its fresh slot
            if holder.ops:
                return None
            if state == "raw" and holder.fresh == "raw":
                continue
        if state == "raw":
            cost += 1
    return RestartBlock(comp.snapshot(), cost)


# --- serialization ------------------------------------------------------------------

class CircuitFormatError(ValidationError):
    """回路ドキュメントの読み込み失敗。``details`` にすべての検出エラーを保持します。"""

    def __init__(self, message: str, path: str = "", value: Any = None, details: Optional[List[ErrorDetail]] = None) -> None:
        super().__init__(message, path, value)
        self.details: List[ErrorDetail] = details or []


def op_from_mapping(doc: Mapping[str, Any]) -> CircuitOp:
    kind = doc["op"]
    if kind == "gate":
        return Gate(doc["src"], doc["dst"], doc.get("bcd_src", IDENTITY_BCD), doc.get("bcd_dst", IDENTITY_BCD))
    if kind == "measure":
        return Measure(doc["pair"], Basis(doc["basis"]), doc.get("reset", True))
    if kind == "swap":
        return Swap(doc["a"], doc["b"])
    if kind == "final_bcd":
        return FinalBcd(doc["perm"])
    raise StructuralError(f"Unknown op kind '{kind}'")


def circuit_from_mapping(doc: Any) -> Circuit:
    """検証済みでない dict から回路を組み立てます。問題はすべて CircuitFormatError にまとめます。"""
    result = validate(doc, CIRCUIT_SCHEMA, collect_errors=True)
    errors: List[ErrorDetail] = list(result.errors)
    data = result.data if isinstance(result.data, dict) else {}
    width = data.get("width")
    ops: List[CircuitOp] = []
    for i, raw_op in enumerate(data.get("ops") or []):
        path = f"ops[{i}]"
        kind = raw_op.get("op") if isinstance(raw_op, dict) else None
        if kind not in OP_SCHEMAS:
            errors.append(ErrorDetail(f"{path}.op", f"Unknown op kind; expected one of {sorted(OP_SCHEMAS)}", kind))
            continue
        op_result = validate(raw_op, OP_SCHEMAS[kind], collect_errors=True, path=path)
        if op_result.has_errors:
            errors.extend(op_result.errors)
            continue
        op_doc = op_result.data
        if isinstance(width, int):
            for key in ("src", "dst", "pair", "a", "b"):
                if key in op_doc and op_doc[key] >= width:
                    errors.append(ErrorDetail(f"{path}.{key}", f"Pair index out of range for width {width}", op_doc[key]))
        ops.append(op_from_mapping(op_doc))
    if errors:
        _raise_format(errors)
    try:
        return Circuit(data["width"], tuple(ops), data["mode"], dict(data["metadata"]))
    except StructuralError as e:
        raise CircuitFormatError(str(e), "ops") from e


def _raise_format(errors: List[ErrorDetail]) -> None:
    first = errors[0]
    summary = "; ".join(str(e) for e in errors)
    raise CircuitFormatError(f"{first.message} ({len(errors)} error(s): {summary})", first.path, first.value, errors)


def read_circuit(text: str) -> Circuit:
    """
    JSON 文字列から回路を読み込みます。

    Raises:
        CircuitFormatError: JSON 構文エラー (行・列付き)、スキーマ違反 (フィールドのパス付き)、
            または構造違反。
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CircuitFormatError(f"Invalid JSON: {e.msg}", f"line {e.lineno} column {e.colno}") from e
    return circuit_from_mapping(doc)


def write_circuit(c: Circuit) -> str:
    """回路を JSON 文字列に書き出します。出力はキー順が固定され、同じ回路に対してバイト単位で安定です。"""
    return json.dumps(c.to_mapping(), indent=2, sort_keys=True) + "\n"


def load_circuit(path: str) -> Circuit:
    with open(path, encoding="utf-8") as f:
        return read_circuit(f.read())


def describe(c: Circuit) -> str:
    """1 行に 1 操作の人間向け表記。"""
    lines = [f"width={c.width} mode={c.mode}"]
    for idx, op in enumerate(c.ops):
        if isinstance(op, Gate):
            lines.append(f"{idx:3d} CNOT {op.src}->{op.dst} [{op.bcd_src}|{op.bcd_dst}]")
        elif isinstance(op, Measure):
            lines.append(f"{idx:3d} M{op.pair} {op.basis.value}{' reset' if op.reset else ''}")
        elif isinstance(op, Swap):
            lines.append(f"{idx:3d} SWAP {op.a}<->{op.b}")
        else:
            lines.append(f"{idx:3d} FINAL {op.perm}")
    return "\n".join(lines)

