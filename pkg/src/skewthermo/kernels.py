"""Backend selection for the hot loops.

The compiled Cython module is used when importable; otherwise the pure-Python
reference implementation is loaded. ``use_backend`` switches explicitly, which
the tests and the benchmark use to compare both.
"""
from importlib import import_module

_MODULES = {"cython": "skewthermo._ckernels", "python": "skewthermo._pykernels"}
_FUNCTIONS = (
    "gauss_digits",
    "dl_counts",
    "gauss_log_derivative_sum",
    "markov_sample",
    "backward_tails",
    "forward_pasts",
)

BACKEND = None


def available_backends():
    found = []
    for name, path in _MODULES.items():
        try:
            import_module(path)
        except ImportError:
            continue
        found.append(name)
    return found


def use_backend(name):
    """Bind the kernel functions of backend ``name`` into this module."""
    global BACKEND
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}")
    mod = import_module(_MODULES[name])
    g = globals()
    for fn in _FUNCTIONS:
        g[fn] = getattr(mod, fn)
    BACKEND = name


try:
    use_backend("cython")
except ImportError:
    use_backend("python")
