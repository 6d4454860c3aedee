"""Multi-site MRI harmonization benchmarking toolkit."""

try:
    from ._habench import *  # noqa: F401,F403
    from ._habench import __doc__  # noqa: F401
except ImportError:  # extension on sys.path directly (build-tree layout)
    from _habench import *  # noqa: F401,F403
