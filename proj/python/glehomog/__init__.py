from ._glehomog import *  # noqa: F401,F403
from ._glehomog import __version__, GleError
