"""Exception types raised across fsamlab."""


class FsamlabError(Exception):
    """Base class for all library errors."""


class ShapeError(FsamlabError, ValueError):
    """A vector or array has the wrong size along some dimension."""

    def __init__(self, dim, expected, got, what="input"):
        self.dim = dim
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: dimension '{dim}' expected {expected}, got {got}")


class NonFiniteError(FsamlabError, FloatingPointError):
    """A NaN or Inf showed up where finite values are required."""

    def __init__(self, what, index):
        self.index = index
        super().__init__(f"{what} is non-finite at index {index}")


class ConfigError(FsamlabError, ValueError):
    pass


class LabelError(FsamlabError, ValueError):
    pass


def check_finite(vec, what):
    import numpy as np

    bad = np.flatnonzero(~np.isfinite(vec))
    if bad.size:
        raise NonFiniteError(what, int(bad[0]))
