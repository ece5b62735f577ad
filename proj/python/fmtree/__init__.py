"""Flash-memory search tree, its B-tree baseline and the erase-count benchmark."""

from ._fmtree import *  # noqa: F401,F403
from ._fmtree import __doc__  # noqa: F401
