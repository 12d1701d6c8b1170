"""Process-wide knobs: the Hilbert dimension cap."""

import contextlib
import os

DEFAULT_DIM_CAP = 2 ** 14

_override = None


def get_dim_cap():
    """Current dimension cap: explicit override, then ``QW1_DIM_CAP``, then default."""
    if _override is not None:
        return _override
    env = os.environ.get("QW1_DIM_CAP")
    if env:
        return int(env)
    return DEFAULT_DIM_CAP


def set_dim_cap(cap):
    global _override
    if cap is not None and int(cap) < 1:
        raise ValueError("dimension cap must be positive")
    _override = None if cap is None else int(cap)


@contextlib.contextmanager
def dim_cap(cap):
    """Temporarily override the dimension cap."""
    global _override
    old = _override
    set_dim_cap(cap)
    try:
        yield
    finally:
        _override = old
