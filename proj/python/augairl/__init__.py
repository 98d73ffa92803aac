"""Highway lane-change imitation-learning testbed.

Thin wrapper around the compiled `_augairl` core. Supports both the
installed layout (extension inside this package) and the build-tree
layout (extension on PYTHONPATH next to the CMake build).
"""

try:
    from ._augairl import *  # noqa: F401,F403
    from ._augairl import __doc__ as _core_doc
except ImportError:  # build-tree layout
    from _augairl import *  # noqa: F401,F403
    from _augairl import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
