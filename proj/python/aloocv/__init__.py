from ._aloocv import *  # noqa: F401,F403
from ._aloocv import __version__  # noqa: F401
