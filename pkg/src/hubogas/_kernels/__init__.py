"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled module is used when it imports cleanly, unless the environment
variable ``HUBOGAS_PURE_PYTHON`` is set. :func:`use` switches at runtime,
which the benchmark and the backend-parity tests rely on.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_FUNCS = (
    "subset_sum_table",
    "fwht",
    "controlled_phase_ladder",
    "apply_key_phases",
    "flip_negative_values",
    "residual_norms",
)

BACKEND = None


def available():
    """Names of the backends that can be selected in this process."""
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get(name):
    """Return the kernel module registered under ``name``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def use(name):
    """Rebind the module-level kernel functions to backend ``name``."""
    global BACKEND
    impl = get(name)
    g = globals()
    for fn in _FUNCS:
        g[fn] = getattr(impl, fn)
    BACKEND = impl.NAME


if _ckernels is not None and not os.environ.get("HUBOGAS_PURE_PYTHON"):
    use("cython")
else:
    use("python")
