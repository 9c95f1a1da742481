import os


class GuardExceeded(RuntimeError):
    """An instance is too large for the requested exact computation."""


def guard(default: int) -> int:
    """Size cap, overridable for every guard at once via ``SEMCHAN_GUARD``."""
    env = os.environ.get("SEMCHAN_GUARD")
    return int(float(env)) if env else default
