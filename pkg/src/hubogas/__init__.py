"""Grover adaptive search for real-valued HUBO problems, with MIMO ML detection."""
__version__ = "0.1.0"

from .poly import HuboPolynomial, brute_force_min, bounds, evaluate, required_qubits_m  # noqa: E402
from .gas import GasConfig, run_integer_gas, run_real_gas  # noqa: E402

__all__ = [
    "__version__",
    "HuboPolynomial",
    "brute_force_min",
    "bounds",
    "evaluate",
    "required_qubits_m",
    "GasConfig",
    "run_integer_gas",
    "run_real_gas",
]
