from typing import (
    Any,
    Dict,
    Generic,
    List,
    Optional,
    TypeVar,
    Union,
    cast,
)
import math

from .errors import PurikitError
from .v import (
    BoolValidator,
    DictValidator,
    ListValidator,
    NumberValidator,
    OneOfValidator,
    StringValidator,
    Validator,
    v,
)

T = TypeVar("T")

_BASIC_TYPES = (str, int, float, bool)


class Schema(Generic[T]):
    """
    辞書スキーマの薄いラッパーです。設定ドキュメントの型ヒントとサンプル生成に使用します。

    Usage::

        from purikit.validator import Schema, validate
        from purikit.v import v

        SCHEMA = Schema({"trials": v.int().min(1).default(10000)})
        cfg = validate({}, SCHEMA)  # -> {"trials": 10000}

    各フィールドに `.default()` と `.description()` を設定しておくと、
    `generate_sample()` と CLI のヘルプがそれを利用します。
    """

    def __init__(self, schema: Dict[str, Any], strict: bool = True) -> None:
        self._schema = schema
        self.strict = strict

    @property
    def fields(self) -> Dict[str, Any]:
        return self._schema

    def generate_sample(self) -> Dict[str, Any]:
        """
        スキーマ定義から代表的なサンプルデータ (dict) を生成します。

        値の優先順位:

        1. `.default(value)` が設定されている場合 → そのデフォルト値
        2. それ以外 → 型と制約に応じた代表値

        Returns:
            Dict[str, Any]: サンプルデータの辞書。
        """
        return cast(Dict[str, Any], _generate_sample(self._schema))


class ValidationError(PurikitError):
    def __init__(self, message: str, path: str = "", value: Any = None) -> None:
        self.message = message
        self.path = path
        self.value = value
        super().__init__(f"{path}: {message}" if path else message)


class ErrorDetail:
    __slots__ = ("path", "message", "value")

    def __init__(self, path: str, message: str, value: Any) -> None:
        self.path = path
        self.message = message
        self.value = value

    def __str__(self) -> str:
        return f"{self.path}: {self.message} (value: {self.value!r})"


class ValidationResult:
    def __init__(self, data: Any, errors: Optional[List[ErrorDetail]] = None) -> None:
        self.data = data
        self.errors: List[ErrorDetail] = errors or []

    @property
    def has_errors(self) -> bool:
        return bool(self.errors)

    @property
    def error_count(self) -> int:
        return len(self.errors)


def _shorthand(schema: Any) -> Any:
    if schema is str:
        return v.str()
    if schema is int:
        return v.int()
    if schema is float:
        return v.float()
    if schema is bool:
        return v.bool()
    return schema


def _report(
    message: str,
    path: str,
    value: Any,
    collect_errors: bool,
    errors: Optional[List[ErrorDetail]],
) -> None:
    if collect_errors and errors is not None:
        errors.append(ErrorDetail(path, message, value))
        return
    raise ValidationError(message, path, value)


def validate_internal(
    value: Any,
    schema: Any,
    path_prefix: str = "",
    collect_errors: bool = False,
    errors: Optional[List[ErrorDetail]] = None,
    strict: bool = False,
) -> Any:
    if isinstance(schema, type) and schema in _BASIC_TYPES:
        schema = _shorthand(schema)
    if isinstance(schema, Schema):
        strict = schema.strict
        schema = schema.fields

    if isinstance(schema, Validator):
        if value is None and schema._optional:
            return schema._default_value if schema._has_default else None
        try:
            return schema.validate(value, path_prefix=path_prefix, collect_errors=collect_errors, errors=errors)
        except (TypeError, ValueError) as e:
            _report(str(e), path_prefix, value, collect_errors, errors)
            return value

    if isinstance(schema, dict):
        if not isinstance(value, dict):
            _report(f"Expected dict, got {type(value).__name__}", path_prefix, value, collect_errors, errors)
            return value

        result: Dict[str, Any] = {}
        for key, sub_schema in schema.items():
            current_path = f"{path_prefix}.{key}" if path_prefix else key
            if key not in value:
                if isinstance(sub_schema, Validator) and sub_schema._has_default:
                    result[key] = sub_schema._default_value
                elif isinstance(sub_schema, Validator) and sub_schema._optional:
                    continue
                else:
                    _report("Missing required key", current_path, None, collect_errors, errors)
                continue
            result[key] = validate_internal(value[key], sub_schema, current_path, collect_errors, errors)

        if strict:
            for key in value:
                if key not in schema:
                    current_path = f"{path_prefix}.{key}" if path_prefix else str(key)
                    _report("Unknown key", current_path, value[key], collect_errors, errors)
        return result

    return value


def _generate_number_sample(schema: NumberValidator) -> Union[int, float]:
    zero: Union[int, float] = 0 if schema._type_cls is int else 0.0
    lower = schema._min
    upper = schema._max
    if lower is not None and zero < lower:
        if schema._type_cls is int:
            return int(math.ceil(lower)) + (1 if schema._exclusive_min and float(math.ceil(lower)) == lower else 0)
        return math.nextafter(lower, math.inf) if schema._exclusive_min else float(lower)
    if upper is not None and zero > upper:
        return int(math.floor(upper)) if schema._type_cls is int else float(upper)
    return zero


def _generate_sample(schema: Any) -> Any:
    """スキーマを再帰的に走査し、サンプル値を生成します。"""
    schema = _shorthand(schema)
    if isinstance(schema, Schema):
        schema = schema.fields
    if isinstance(schema, dict):
        return {
            key: _generate_sample(sub)
            for key, sub in schema.items()
            if not (isinstance(sub, Validator) and sub._optional and not sub._has_default)
        }
    if not isinstance(schema, Validator):
        return None
    if schema._has_default:
        return schema._default_value
    if isinstance(schema, NumberValidator):
        return _generate_number_sample(schema)
    if isinstance(schema, StringValidator):
        return ""
    if isinstance(schema, BoolValidator):
        return False
    if isinstance(schema, OneOfValidator):
        return schema._choices[0] if schema._choices else None
    if isinstance(schema, ListValidator):
        count = schema._min_len or 0
        return [_generate_sample(schema._item_validator) for _ in range(count)]
    if isinstance(schema, DictValidator):
        return {}
    return None


def validate(
    data: Any,
    schema: Any,
    collect_errors: bool = False,
    path: str = "",
) -> Any:
    """
    データをスキーマで検証し、デフォルト値を補完した結果を返します。

    Args:
        data: 検証対象 (通常は JSON から読み込んだ dict)。
        schema: dict スキーマ、`Schema`、または Validator。
        collect_errors: True の場合、最初のエラーで止まらず `ValidationResult` を返します。
        path: エラーパスの接頭辞 (例: ``"ops[2]"``)。

    Raises:
        ValidationError: collect_errors=False で検証に失敗した場合。
    """
    errors: List[ErrorDetail] = []
    validated = validate_internal(data, schema, path, collect_errors, errors)
    if collect_errors:
        return ValidationResult(validated, errors)
    return validated
