"""Concept-whitening layer, Cayley rotation optimizer and training loop."""

try:
    from ._hastcw import *  # noqa: F401,F403
    from ._hastcw import __doc__ as _doc
except ImportError:  # development layout: module on PYTHONPATH next to the package
    from _hastcw import *  # noqa: F401,F403
    from _hastcw import __doc__ as _doc

__doc__ = _doc
__version__ = "0.1.0"
