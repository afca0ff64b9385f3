from ._mtaudit import *  # noqa: F401,F403
from ._mtaudit import __version__  # noqa: F401
