from .bellstate import Basis, ErrorModel, PairQuadruple, werner_raw
from .circuit import Circuit, FinalBcd, Gate, Measure, Swap, builtin, canonicalize, color_partition, read_circuit, write_circuit
from .evaluator import EvalReport, evaluate
from .montecarlo import McConfig, McReport, simulate_runs
from .optimizer import GaConfig, run_ga
from .errors import PurikitError
from .v import v
from .validator import validate, ValidationError, Schema, ValidationResult

__version__ = "0.1.0"
__all__ = [
    "Basis", "ErrorModel", "PairQuadruple", "werner_raw",
    "Circuit", "Gate", "Measure", "Swap", "FinalBcd", "builtin", "canonicalize", "color_partition",
    "read_circuit", "write_circuit", "EvalReport", "evaluate", "McConfig", "McReport", "simulate_runs",
    "GaConfig", "run_ga", "PurikitError", "v", "validate", "ValidationError", "Schema", "ValidationResult",
]
