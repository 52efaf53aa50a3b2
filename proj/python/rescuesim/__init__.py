"""Tracked rescue robot simulator (C++ core)."""

from ._rescuesim import *  # noqa: F401,F403
from ._rescuesim import __doc__  # noqa: F401
