"""Finite-blocklength laboratory for quantum Stein/Sanov hypothesis testing."""

try:
    from ._qsanov import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:
    from _qsanov import *  # noqa: F401,F403  (in-tree build: extension on PYTHONPATH)

__version__ = "0.1.0"
