"""purikit の例外階層。"""
from typing import Optional


class PurikitError(Exception):
    """purikit が送出するすべての例外の基底クラス。"""


class DomainError(PurikitError, ValueError):
    """確率やパラメータが定義域の外にある場合に送出されます。"""


class StructuralError(PurikitError, ValueError):
    """回路や状態の構造が不正な場合 (範囲外のペア番号、自己ゲートなど) に送出されます。"""


class CanonicalRejection(PurikitError):
    """正準化フィルタに回路が棄却されたことを表します。

    Attributes:
        rule: 違反したルール名 (``first_op_measurement`` など)。
    """

    def __init__(self, rule: str, detail: Optional[str] = None) -> None:
        self.rule = rule
        self.detail = detail
        super().__init__(f"{rule}: {detail}" if detail else rule)


class ResourceLimitError(PurikitError):
    """記号計算の項数ガードなど、資源上限を超えた場合に送出されます。"""


class UnsupportedError(PurikitError):
    """オラクルの幅制限など、対応していない入力に対して送出されます。"""


class AllTrialsAborted(PurikitError):
    """モンテカルロの全試行がガードで打ち切られた場合に送出されます。"""
